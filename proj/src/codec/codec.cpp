#include "tsprompt/codec.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <optional>

namespace tsprompt::codec {

void CodecConfig::validate() const {
    if (precision < 0 || precision > 10) {
        throw InvalidCodecConfig("codec precision must lie in [0, 10]");
    }
    if (!(scale_quantile > 0.0 && scale_quantile <= 1.0)) {
        throw InvalidCodecConfig("codec scale quantile must lie in (0, 1]");
    }
    if (!(scale > 0.0) || !std::isfinite(scale)) {
        throw InvalidCodecConfig("codec scale must be positive and finite");
    }
    if (separator.empty()) {
        throw InvalidCodecConfig("codec separator must not be empty");
    }
    for (char c : separator) {
        if (c >= '0' && c <= '9') {
            throw InvalidCodecConfig("codec separator must not contain digits");
        }
    }
}

double fit_scale(std::span<const double> reference_values, double alpha) {
    if (reference_values.empty()) {
        throw EmptyInput("cannot fit a codec scale on an empty window");
    }
    if (!(alpha > 0.0 && alpha <= 1.0)) {
        throw InvalidCodecConfig("scale quantile must lie in (0, 1]");
    }
    std::vector<double> mags;
    mags.reserve(reference_values.size());
    for (double v : reference_values) {
        if (!std::isfinite(v)) throw ValueOutOfRange("scale input contains a non-finite value");
        mags.push_back(std::fabs(v));
    }
    const double pos = alpha * static_cast<double>(mags.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const double frac = pos - static_cast<double>(lo);
    auto lo_it = mags.begin() + static_cast<std::ptrdiff_t>(lo);
    std::nth_element(mags.begin(), lo_it, mags.end());
    const double lo_value = *lo_it;
    double hi_value = lo_value;
    if (frac > 0.0 && lo + 1 < mags.size()) {
        hi_value = *std::min_element(lo_it + 1, mags.end());
    }
    return std::max(lo_value + (hi_value - lo_value) * frac, kMinScale);
}

std::string encode_value(double value, const CodecConfig& config) {
    if (!std::isfinite(value)) throw ValueOutOfRange("cannot encode a non-finite value");
    const double scaled = value / config.scale;
    if (!(std::fabs(scaled) < 1e15)) {
        throw ValueOutOfRange("scaled value exceeds the encodable range");
    }
    std::array<char, 64> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), scaled,
                                   std::chars_format::fixed, config.precision);
    if (res.ec != std::errc{}) throw ValueOutOfRange("value could not be rendered");
    std::string text(buf.data(), res.ptr);

    bool negative = false;
    if (!text.empty() && text.front() == '-') {
        negative = true;
        text.erase(0, 1);
    }
    const bool all_zero =
        std::all_of(text.begin(), text.end(), [](char c) { return c == '0' || c == '.'; });
    if (all_zero) negative = false;
    if (negative && !config.sign_allowed) {
        throw ValueOutOfRange("negative value with sign_allowed disabled");
    }
    if (config.strip_decimal_point) {
        text.erase(std::remove(text.begin(), text.end(), '.'), text.end());
        const auto first = text.find_first_not_of('0');
        text = first == std::string::npos ? std::string("0") : text.substr(first);
    }
    return negative ? "-" + text : text;
}

std::string encode_series(std::span<const double> values, const CodecConfig& config) {
    config.validate();
    std::string out;
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i > 0) out += config.separator;
        out += encode_value(values[i], config);
    }
    return out;
}

namespace {

// ---------------------------------------------------------------------------
// Completion lexer. A completion is a sequence of numeric tokens separated
// by gaps of arbitrary text. Tokens come in three kinds: values, labels
// ("3:", "2023-07-01:", list markers "1.") and invalid numerics (overflow,
// forbidden sign) that always end a run.

enum class TokenKind { value, label, invalid };

struct Token {
    TokenKind kind;
    std::size_t begin;
    std::size_t end;
    double value = 0.0;
    bool repaired = false;
};

bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_alpha(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool is_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

bool starts_with_at(std::string_view text, std::size_t pos, std::string_view what) {
    return text.size() >= pos + what.size() && text.substr(pos, what.size()) == what;
}

constexpr std::string_view kUnicodeMinus = "\xE2\x88\x92";

// True when only whitespace (and bullet/bracket punctuation) precedes pos on
// its line.
bool at_line_start(std::string_view text, std::size_t pos) {
    while (pos > 0) {
        const char c = text[pos - 1];
        if (c == '\n') return true;
        if (!is_space(c) && c != '-' && c != '*' && c != '>' && c != '[' && c != '(' && c != '`') {
            return false;
        }
        --pos;
    }
    return true;
}

std::optional<double> parse_magnitude(std::string_view digits, std::string_view fraction,
                                      bool has_point, const CodecConfig& config) {
    std::string literal;
    if (has_point || !config.strip_decimal_point || config.precision == 0) {
        literal.assign(digits);
        if (has_point) {
            literal.push_back('.');
            literal.append(fraction);
        }
    } else {
        // Digit-only token: the last `precision` digits are the fraction.
        const auto p = static_cast<std::size_t>(config.precision);
        std::string padded(digits);
        if (padded.size() < p + 1) padded.insert(0, p + 1 - padded.size(), '0');
        literal = padded.substr(0, padded.size() - p) + "." + padded.substr(padded.size() - p);
    }
    double q = 0.0;
    const auto res = std::from_chars(literal.data(), literal.data() + literal.size(), q);
    if (res.ec != std::errc{} || res.ptr != literal.data() + literal.size() || !std::isfinite(q)) {
        return std::nullopt;
    }
    const double v = q * config.scale;
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

std::vector<Token> lex(std::string_view text, const CodecConfig& config) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    const std::size_t n = text.size();
    while (i < n) {
        // Sign prefix: '-', '+' or U+2212 directly before a digit and not
        // glued to a preceding word or number.
        std::size_t sign_len = 0;
        bool negative = false;
        bool repaired = false;
        const bool detached = i == 0 || !(is_alpha(text[i - 1]) || is_digit(text[i - 1]) ||
                                          text[i - 1] == '.');
        if (detached) {
            if ((text[i] == '-' || text[i] == '+') && i + 1 < n && is_digit(text[i + 1])) {
                sign_len = 1;
                negative = text[i] == '-';
                repaired = text[i] == '+';
            } else if (starts_with_at(text, i, kUnicodeMinus) && i + 3 < n &&
                       is_digit(text[i + 3])) {
                sign_len = 3;
                negative = true;
                repaired = true;
            }
        }
        const std::size_t digit_start = i + sign_len;
        if (digit_start >= n || !is_digit(text[digit_start])) {
            ++i;
            continue;
        }
        if (sign_len == 0 && i > 0 && (is_alpha(text[i - 1]) || is_digit(text[i - 1]))) {
            // Digits glued to a word ("ETTh1", "t10"): part of the prose.
            while (i < n && (is_alpha(text[i]) || is_digit(text[i]))) ++i;
            continue;
        }
        std::size_t j = digit_start;
        while (j < n && is_digit(text[j])) ++j;
        const std::string_view digits = text.substr(digit_start, j - digit_start);

        // Dates, times and ranges ("2023-07-01", "10:30", "10-20", "1/2").
        if (j + 1 < n && (text[j] == '-' || text[j] == '/' || text[j] == ':') &&
            is_digit(text[j + 1])) {
            std::size_t k = j;
            while (k < n && (is_digit(text[k]) || text[k] == '-' || text[k] == '/' ||
                             text[k] == ':' || text[k] == 'T' ||
                             (text[k] == '.' && k + 1 < n && is_digit(text[k + 1])))) {
                if (text[k] == ':' && !(k + 1 < n && is_digit(text[k + 1]))) break;
                ++k;
            }
            std::size_t after = k;
            while (after < n && text[after] == ' ') ++after;
            if (after < n && text[after] == ':') {
                tokens.push_back({TokenKind::label, i, after + 1});
                i = after + 1;
            } else {
                i = k;
            }
            continue;
        }

        bool has_point = false;
        std::string_view fraction;
        if (j + 1 < n && text[j] == '.' && is_digit(text[j + 1])) {
            has_point = true;
            std::size_t k = j + 1;
            while (k < n && is_digit(text[k])) ++k;
            fraction = text.substr(j + 1, k - j - 1);
            j = k;
        }

        // Labels: "3:" anywhere, "1." / "1)" list markers at line start.
        std::size_t after = j;
        while (after < n && text[after] == ' ') ++after;
        if (!has_point && after < n && text[after] == ':') {
            tokens.push_back({TokenKind::label, i, after + 1});
            i = after + 1;
            continue;
        }
        if (!has_point && sign_len == 0 && j + 1 < n && (text[j] == '.' || text[j] == ')') &&
            is_space(text[j + 1]) && at_line_start(text, i)) {
            tokens.push_back({TokenKind::label, i, j + 1});
            i = j + 1;
            continue;
        }

        Token tok{TokenKind::value, i, j};
        if (negative && !config.sign_allowed) {
            tok.kind = TokenKind::invalid;
        } else if (auto mag = parse_magnitude(digits, fraction, has_point, config)) {
            tok.value = negative ? -*mag : *mag;
            tok.repaired = repaired || (has_point && config.strip_decimal_point);
        } else {
            tok.kind = TokenKind::invalid;
        }
        tokens.push_back(tok);
        i = j;
    }
    return tokens;
}

bool is_separator_char(char c, const CodecConfig& config) {
    if (is_space(c) || c == ',' || c == ';' || c == '|') return true;
    return config.separator.find(c) != std::string::npos;
}

// Removes markdown fence markers ("```lang") from a gap.
std::string drop_fences(std::string_view gap) {
    std::string out;
    std::size_t i = 0;
    while (i < gap.size()) {
        if (starts_with_at(gap, i, "```")) {
            i += 3;
            while (i < gap.size() && gap[i] != '\n') ++i;
            continue;
        }
        out.push_back(gap[i++]);
    }
    return out;
}

// A gap joins two values into one run when, after removing separators,
// fences and labels, at most one short annotation word remains ("°C",
// "passengers", "<breath>", "and") and it is not a colon-terminated heading.
bool gap_joins(std::string_view text, std::size_t begin, std::size_t end,
               const std::vector<Token>& labels_inside, const CodecConfig& config) {
    std::string residue;
    std::size_t pos = begin;
    for (const auto& label : labels_inside) {
        residue.append(text.substr(pos, label.begin - pos));
        residue.push_back(' ');
        pos = label.end;
    }
    residue.append(text.substr(pos, end - pos));
    residue = drop_fences(residue);

    std::size_t words = 0;
    std::size_t i = 0;
    while (i < residue.size()) {
        while (i < residue.size() && is_separator_char(residue[i], config)) ++i;
        if (i >= residue.size()) break;
        std::size_t j = i;
        while (j < residue.size() && !is_separator_char(residue[j], config)) ++j;
        const std::string_view word(residue.data() + i, j - i);
        i = j;
        if (word.find("...") == std::string_view::npos &&
            word.find_first_not_of("*_~`()[]{}\"'#") == std::string_view::npos) {
            continue; // markdown emphasis and brackets
        }
        ++words;
        if (words > 1 || word.size() > 24 || word.find(':') != std::string_view::npos ||
            word.find('=') != std::string_view::npos || word.find("...") != std::string_view::npos) {
            return false;
        }
    }
    return true;
}

struct Run {
    std::size_t first = 0; // index into values vector
    std::size_t length = 0;
    bool anchored = false;
};

} // namespace

DecodeResult decode_completion(std::string_view text, const CodecConfig& config,
                               std::size_t expected_count) {
    config.validate();
    if (expected_count == 0) {
        throw InvalidCodecConfig("decode needs an expected count of at least 1");
    }
    const auto tokens = lex(text, config);

    // Collect value tokens and the gap structure between them.
    std::vector<const Token*> values;
    std::vector<bool> joins_previous;
    std::vector<Token> labels;
    std::size_t gap_begin = 0;
    bool chain_broken = true;
    for (const auto& tok : tokens) {
        if (tok.kind == TokenKind::label) {
            labels.push_back(tok);
            continue;
        }
        if (tok.kind == TokenKind::invalid) {
            chain_broken = true;
            labels.clear();
            gap_begin = tok.end;
            continue;
        }
        const bool joins =
            !chain_broken && gap_joins(text, gap_begin, tok.begin, labels, config);
        values.push_back(&tok);
        joins_previous.push_back(joins);
        labels.clear();
        gap_begin = tok.end;
        chain_broken = false;
    }

    DecodeDiagnostics diag;
    diag.values_expected = expected_count;
    if (values.empty()) {
        diag.stripped_prefix = std::string(text);
        throw NoValuesFound("completion contains no numeric values", diag);
    }

    std::vector<Run> runs;
    for (std::size_t v = 0; v < values.size(); ++v) {
        if (v == 0 || !joins_previous[v]) {
            Run run;
            run.first = v;
            const std::size_t start = values[v]->begin;
            std::size_t back = start;
            while (back > 0 && is_space(text[back - 1]) && text[back - 1] != '\n') --back;
            run.anchored = start == 0 || at_line_start(text, start) ||
                           (back > 0 && text[back - 1] == ':');
            runs.push_back(run);
        }
        ++runs.back().length;
    }

    const auto score = [&](const Run& r) { return std::min(r.length, expected_count); };
    const Run* best = &runs.front();
    for (const auto& r : runs) {
        if (score(r) > score(*best) || (score(r) == score(*best) && r.anchored && !best->anchored)) {
            best = &r;
        }
    }

    DecodeResult result;
    const std::size_t take = std::min(best->length, expected_count);
    for (std::size_t v = best->first; v < best->first + take; ++v) {
        result.values.push_back(values[v]->value);
        if (values[v]->repaired) ++diag.repaired_tokens;
    }
    diag.values_found = take;
    diag.truncated = best->length < expected_count;
    diag.stripped_prefix = std::string(text.substr(0, values[best->first]->begin));
    result.diagnostics = diag;
    if (diag.truncated) {
        throw PartialDecode("completion holds " + std::to_string(take) + " of " +
                                std::to_string(expected_count) + " expected values",
                            std::move(result.values), diag);
    }
    return result;
}

bool looks_like_refusal(std::string_view text) {
    std::string lower;
    lower.reserve(text.size());
    for (char c : text) {
        lower.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
    }
    // Curly apostrophes are folded so "I can’t" matches.
    for (std::size_t pos; (pos = lower.find("\xE2\x80\x99")) != std::string::npos;) {
        lower.replace(pos, 3, "'");
    }
    static constexpr std::array<std::string_view, 9> kPhrases{
        "i cannot", "i can't", "i'm sorry", "i am sorry", "unable to",
        "as an ai", "i'm not able", "i am not able", "cannot provide",
    };
    return std::any_of(kPhrases.begin(), kPhrases.end(),
                       [&](std::string_view p) { return lower.find(p) != std::string::npos; });
}

} // namespace tsprompt::codec
