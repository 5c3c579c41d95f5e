#include "tsprompt/prompts.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <set>
#include <sstream>

namespace tsprompt::prompts {

namespace {

constexpr std::array<std::pair<Strategy, std::string_view>, 5> kStrategyNames{{
    {Strategy::naive, "naive"},
    {Strategy::cot, "cot"},
    {Strategy::lstprompt, "lstprompt"},
    {Strategy::lstprompt_no_decomp, "lstprompt-no-decomp"},
    {Strategy::lstprompt_no_breath, "lstprompt-no-breath"},
}};

const std::set<std::string, std::less<>> kBlocks{
    "context", "cot",    "decomposition", "decomposition_free", "breath", "breath_inline",
    "history", "output", "output_inline", "retry",              "naive",
};

const std::set<std::string, std::less<>> kPlaceholders{
    "dataset", "domain", "frequency", "upper_scale", "short_steps",
    "long_steps", "k", "history", "H", "separator",
};

// Walks a block, calling on_text for literal runs and on_name for each
// {placeholder}. Throws TemplateError on malformed braces.
template <typename OnText, typename OnName>
void scan_placeholders(std::string_view block, OnText on_text, OnName on_name) {
    std::size_t i = 0;
    while (i < block.size()) {
        const char c = block[i];
        if (c == '{' && i + 1 < block.size() && block[i + 1] == '{') {
            on_text("{");
            i += 2;
        } else if (c == '}' && i + 1 < block.size() && block[i + 1] == '}') {
            on_text("}");
            i += 2;
        } else if (c == '{') {
            const auto close = block.find('}', i);
            if (close == std::string_view::npos) {
                throw TemplateError("unterminated placeholder in template");
            }
            on_name(block.substr(i + 1, close - i - 1));
            i = close + 1;
        } else if (c == '}') {
            throw TemplateError("stray '}' in template; write '}}' for a literal brace");
        } else {
            const auto next = block.find_first_of("{}", i);
            const auto end = next == std::string_view::npos ? block.size() : next;
            on_text(block.substr(i, end - i));
            i = end;
        }
    }
}

std::map<std::string, std::string, std::less<>> placeholder_values(const PromptSpec& spec) {
    return {
        {"dataset", spec.context.dataset_name},
        {"domain", spec.context.domain_description},
        {"frequency", std::string(to_string(spec.context.frequency))},
        {"upper_scale", spec.context.upper_time_scale},
        {"short_steps", std::to_string(spec.partition.short_steps)},
        {"long_steps", std::to_string(spec.partition.long_steps)},
        {"k", std::to_string(spec.breath_k)},
        {"history", spec.history_text},
        {"H", std::to_string(spec.horizon)},
        {"separator", spec.options.separator},
    };
}

void check_common(const PromptSpec& spec) {
    if (spec.horizon == 0) throw InvalidSpec("prompt horizon must be at least 1");
    if (spec.history_text.empty()) throw InvalidSpec("prompt history is empty");
    if (spec.options.separator.empty()) throw InvalidSpec("prompt separator is empty");
    if (spec.context.dataset_name.empty()) throw InvalidSpec("dataset name is empty");
}

class Builder {
public:
    void add(Section section, std::string body) {
        if (!text_.empty()) text_ += "\n";
        if (!sections_.empty()) sections_.back().end = text_.size();
        sections_.push_back({section, text_.size(), 0});
        text_ += body;
        text_ += "\n";
    }

    PromptText finish(std::size_t requested) {
        if (!sections_.empty()) sections_.back().end = text_.size();
        return {std::move(text_), std::move(sections_), requested};
    }

private:
    std::string text_;
    std::vector<SectionRange> sections_;
};

std::string context_block(const PromptSpec& spec, const PromptTemplate& tmpl,
                          const std::map<std::string, std::string, std::less<>>& values) {
    std::string out;
    if (!spec.options.preamble.empty()) {
        out = spec.options.preamble;
        out += "\n";
    }
    out += tmpl.render("context", values);
    return out;
}

std::string output_block(const PromptSpec& spec, const PromptTemplate& tmpl,
                         const std::map<std::string, std::string, std::less<>>& values) {
    const bool inline_markers = uses_breath(spec.strategy) &&
                                spec.options.breath_mode == BreathMode::inline_markers;
    return tmpl.render(inline_markers ? "output_inline" : "output", values);
}

} // namespace

std::string_view to_string(Strategy s) {
    for (const auto& [strategy, name] : kStrategyNames) {
        if (strategy == s) return name;
    }
    return "unknown";
}

Strategy parse_strategy(std::string_view name) {
    if (name == "base") return Strategy::naive;
    for (const auto& [strategy, label] : kStrategyNames) {
        if (label == name) return strategy;
    }
    throw InvalidSpec("unknown strategy '" + std::string(name) + "'");
}

bool uses_decomposition(Strategy s) {
    return s == Strategy::lstprompt || s == Strategy::lstprompt_no_breath;
}

bool uses_breath(Strategy s) {
    return s == Strategy::lstprompt || s == Strategy::lstprompt_no_decomp;
}

std::string default_upper_time_scale(Frequency f) {
    switch (f) {
    case Frequency::minute: return "hour";
    case Frequency::hour: return "day";
    case Frequency::day: return "week";
    case Frequency::week: return "month";
    case Frequency::month: return "year";
    case Frequency::season: return "year";
    }
    return "year";
}

std::size_t default_breath_k(Frequency f) {
    switch (f) {
    case Frequency::minute: return 60;
    case Frequency::hour: return 24;
    case Frequency::day: return 5;
    case Frequency::week: return 4;
    case Frequency::month: return 12;
    case Frequency::season: return 4;
    }
    return 0;
}

std::size_t default_breath_k(std::string_view frequency_label) {
    return default_breath_k(parse_frequency(frequency_label));
}

std::string_view to_string(Section s) {
    switch (s) {
    case Section::context: return "context";
    case Section::decomposition: return "decomposition";
    case Section::breath: return "breath";
    case Section::history: return "history";
    case Section::output_contract: return "output-contract";
    }
    return "unknown";
}

bool PromptText::has_section(Section s) const {
    return std::any_of(sections.begin(), sections.end(),
                       [s](const SectionRange& r) { return r.section == s; });
}

std::string_view PromptText::section_text(Section s) const {
    for (const auto& r : sections) {
        if (r.section == s) return std::string_view(text).substr(r.begin, r.end - r.begin);
    }
    return {};
}

PromptTemplate PromptTemplate::parse(std::string_view source) {
    PromptTemplate tmpl;
    std::string current;
    std::vector<std::string> lines;
    const auto flush = [&] {
        if (current.empty()) return;
        while (!lines.empty() && lines.back().find_first_not_of(" \t\r") == std::string::npos) {
            lines.pop_back();
        }
        std::string body;
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (i > 0) body += "\n";
            body += lines[i];
        }
        tmpl.blocks_[current] = std::move(body);
        lines.clear();
    };

    std::size_t pos = 0;
    while (pos <= source.size()) {
        auto nl = source.find('\n', pos);
        if (nl == std::string_view::npos) nl = source.size();
        std::string_view line = source.substr(pos, nl - pos);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        pos = nl + 1;

        if (!line.empty() && line.front() == '#') continue;
        if (line.size() > 4 && line.substr(0, 2) == "[[" && line.substr(line.size() - 2) == "]]") {
            flush();
            current = std::string(line.substr(2, line.size() - 4));
            if (!kBlocks.contains(current)) {
                throw TemplateError("unknown template block [[" + current + "]]");
            }
            if (tmpl.blocks_.contains(current)) {
                throw TemplateError("duplicate template block [[" + current + "]]");
            }
            continue;
        }
        if (current.empty()) {
            if (line.find_first_not_of(" \t") != std::string_view::npos) {
                throw TemplateError("template text outside of a [[block]]");
            }
            continue;
        }
        lines.emplace_back(line);
    }
    flush();

    for (const auto& name : kBlocks) {
        if (!tmpl.blocks_.contains(name)) {
            throw TemplateError("template is missing block [[" + name + "]]");
        }
        scan_placeholders(
            tmpl.blocks_.at(name), [](std::string_view) {},
            [&](std::string_view placeholder) {
                if (!kPlaceholders.contains(placeholder)) {
                    throw TemplateError("unknown placeholder {" + std::string(placeholder) +
                                        "} in block [[" + name + "]]");
                }
            });
    }
    return tmpl;
}

PromptTemplate PromptTemplate::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TemplateError("cannot read template file " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse(buf.str());
}

const PromptTemplate& PromptTemplate::builtin() {
    static const PromptTemplate tmpl = parse(builtin_template_source());
    return tmpl;
}

const std::string& PromptTemplate::block(std::string_view name) const {
    const auto it = blocks_.find(name);
    if (it == blocks_.end()) throw TemplateError("no template block named " + std::string(name));
    return it->second;
}

std::string PromptTemplate::render(
    std::string_view block_name,
    const std::map<std::string, std::string, std::less<>>& values) const {
    std::string out;
    scan_placeholders(
        block(block_name), [&](std::string_view text) { out += text; },
        [&](std::string_view name) {
            const auto it = values.find(name);
            if (it == values.end()) {
                throw TemplateError("no value for placeholder {" + std::string(name) + "}");
            }
            out += it->second;
        });
    return out;
}

PromptText build_lstprompt(const PromptSpec& spec, const PromptTemplate& tmpl) {
    if (spec.strategy != Strategy::lstprompt && spec.strategy != Strategy::lstprompt_no_decomp &&
        spec.strategy != Strategy::lstprompt_no_breath) {
        throw InvalidSpec("build_lstprompt called with strategy " +
                          std::string(to_string(spec.strategy)));
    }
    check_common(spec);
    const bool breath = uses_breath(spec.strategy);
    if (breath && spec.breath_k == 0) {
        throw InvalidSpec("strategy " + std::string(to_string(spec.strategy)) +
                          " needs a breath frequency k >= 1");
    }
    if (spec.partition.horizon() != spec.horizon || spec.partition.short_steps == 0) {
        throw InvalidSpec("horizon partition does not cover the horizon");
    }

    const auto values = placeholder_values(spec);
    Builder b;
    b.add(Section::context, context_block(spec, tmpl, values));
    if (uses_decomposition(spec.strategy)) {
        const bool explicit_steps = spec.options.partition_mode == PartitionMode::explicit_steps;
        b.add(Section::decomposition,
              tmpl.render(explicit_steps ? "decomposition" : "decomposition_free", values));
    }
    if (breath) {
        const bool inline_markers = spec.options.breath_mode == BreathMode::inline_markers;
        b.add(Section::breath, tmpl.render(inline_markers ? "breath_inline" : "breath", values));
    }
    b.add(Section::history, tmpl.render("history", values));
    b.add(Section::output_contract, output_block(spec, tmpl, values));
    return b.finish(spec.horizon);
}

PromptText build_baseline(const PromptSpec& spec, const PromptTemplate& tmpl) {
    if (spec.strategy != Strategy::naive && spec.strategy != Strategy::cot) {
        throw InvalidSpec("build_baseline called with strategy " +
                          std::string(to_string(spec.strategy)));
    }
    check_common(spec);
    const auto values = placeholder_values(spec);
    if (spec.strategy == Strategy::naive) {
        // Plain continuation: the history and a trailing separator. The
        // horizon travels with the request, not in the text.
        std::string text = tmpl.render("naive", values);
        const std::size_t size = text.size();
        return {std::move(text), {{Section::history, 0, size}}, spec.horizon};
    }
    Builder b;
    b.add(Section::context,
          context_block(spec, tmpl, values) + "\n" + tmpl.render("cot", values));
    b.add(Section::history, tmpl.render("history", values));
    b.add(Section::output_contract, output_block(spec, tmpl, values));
    return b.finish(spec.horizon);
}

PromptText render_prompt(const PromptSpec& spec, const PromptTemplate& tmpl) {
    if (spec.strategy == Strategy::naive || spec.strategy == Strategy::cot) {
        return build_baseline(spec, tmpl);
    }
    return build_lstprompt(spec, tmpl);
}

PromptText with_retry_reminder(const PromptText& prompt, const PromptSpec& spec,
                               const PromptTemplate& tmpl) {
    PromptText out = prompt;
    const std::string reminder = tmpl.render("retry", placeholder_values(spec)) + "\n";
    if (!out.sections.empty() && out.sections.back().section == Section::output_contract) {
        out.text += reminder;
        out.sections.back().end = out.text.size();
    } else {
        const std::size_t begin = out.text.size();
        out.text += "\n" + reminder;
        out.sections.push_back({Section::output_contract, begin, out.text.size()});
    }
    return out;
}

} // namespace tsprompt::prompts
