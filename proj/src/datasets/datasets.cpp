#include "tsprompt/datasets.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace tsprompt::datasets {

namespace fs = std::filesystem;
using namespace std::chrono;

std::string_view to_string(SourceFormat f) {
    return f == SourceFormat::csv ? "csv" : "benchmark-bundle";
}

SourceFormat parse_source_format(std::string_view name) {
    if (name == "csv") return SourceFormat::csv;
    if (name == "benchmark-bundle") return SourceFormat::benchmark_bundle;
    throw InvalidDatasetSpec("unknown source format '" + std::string(name) + "'");
}

void DatasetSpec::validate() const {
    if (name.empty()) throw InvalidDatasetSpec("dataset needs a name");
    if (source.empty()) throw InvalidDatasetSpec(name + ": missing source");
    if (target_column.empty()) throw InvalidDatasetSpec(name + ": missing target column");
    if (const auto* split = std::get_if<BenchmarkSplit>(&protocol)) {
        if (!(split->fraction > 0.0 && split->fraction < 1.0)) {
            throw InvalidDatasetSpec(name + ": split fraction must lie in (0, 1)");
        }
    } else {
        const auto& fixed = std::get<FixedHorizons>(protocol);
        if (fixed.horizons.empty()) throw InvalidDatasetSpec(name + ": horizons list is empty");
        for (auto h : fixed.horizons) {
            if (h == 0) throw InvalidDatasetSpec(name + ": horizons must be positive");
        }
    }
    if (lookback && *lookback == 0) throw InvalidDatasetSpec(name + ": lookback must be positive");
    if (rolling.count == 0) throw InvalidDatasetSpec(name + ": rolling count must be >= 1");
}

prompts::DatasetContext DatasetSpec::context() const {
    prompts::DatasetContext ctx;
    ctx.dataset_name = name;
    ctx.domain_description = description.empty() ? builtin_description(name) : description;
    ctx.frequency = frequency;
    ctx.upper_time_scale =
        upper_time_scale.empty() ? prompts::default_upper_time_scale(frequency) : upper_time_scale;
    return ctx;
}

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

// Consumes between min_width and max_width leading digits.
bool read_int(std::string_view& s, int& out, std::size_t min_width, std::size_t max_width) {
    std::size_t n = 0;
    while (n < s.size() && n < max_width && std::isdigit(static_cast<unsigned char>(s[n]))) ++n;
    if (n < min_width) return false;
    std::from_chars(s.data(), s.data() + n, out);
    s.remove_prefix(n);
    return true;
}

bool eat(std::string_view& s, char c) {
    if (s.empty() || s.front() != c) return false;
    s.remove_prefix(1);
    return true;
}

std::optional<sys_days> make_day(int y, int m, int d) {
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(m)},
                             day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) return std::nullopt;
    return sys_days{ymd};
}

std::optional<double> parse_number(std::string_view s) {
    s = trim(s);
    if (!s.empty() && s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DatasetError("cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void check_monotone(const std::vector<Timestamp>& ts, const std::vector<std::size_t>& lines,
                    const std::string& what) {
    for (std::size_t i = 1; i < ts.size(); ++i) {
        if (ts[i] <= ts[i - 1]) {
            throw NonMonotoneTimestamps(what + ": timestamp at line " + std::to_string(lines[i]) +
                                        " (" + format_timestamp(ts[i]) +
                                        ") does not follow line " + std::to_string(lines[i - 1]) +
                                        " (" + format_timestamp(ts[i - 1]) + ")");
        }
    }
}

TimeSeries load_csv(const DatasetSpec& spec) {
    const auto rows = read_csv(read_file(spec.source));
    if (rows.empty()) throw EmptyAfterFiltering(spec.source.string() + ": no header row");
    const auto& header = rows.front().fields;
    auto column = [&](const std::string& name) -> std::size_t {
        for (std::size_t i = 0; i < header.size(); ++i) {
            if (trim(header[i]) == name) return i;
        }
        throw MissingColumn(spec.source.string() + ": no column named '" + name + "'");
    };
    const std::size_t target = column(spec.target_column);
    const std::optional<std::size_t> ts_col =
        spec.timestamp_column ? std::optional(column(*spec.timestamp_column)) : std::nullopt;

    std::vector<double> values;
    std::vector<Timestamp> stamps;
    std::vector<std::size_t> lines;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.fields.size() == 1 && trim(row.fields[0]).empty()) continue;
        const std::string_view raw = target < row.fields.size() ? trim(row.fields[target]) : "";
        if (raw.empty()) continue; // missing observation
        const auto v = parse_number(raw);
        if (!v) {
            throw NonNumericValue(spec.source.string() + ":" + std::to_string(row.line) +
                                      ": non-numeric value '" + std::string(raw) + "' in column " +
                                      spec.target_column,
                                  row.line);
        }
        if (ts_col) {
            const std::string_view t = *ts_col < row.fields.size() ? row.fields[*ts_col] : "";
            const auto parsed = parse_timestamp(t);
            if (!parsed) {
                throw InvalidTimestamp(spec.source.string() + ":" + std::to_string(row.line) +
                                           ": unrecognised timestamp '" + std::string(t) + "'",
                                       row.line);
            }
            stamps.push_back(*parsed);
        }
        values.push_back(*v);
        lines.push_back(row.line);
    }
    if (values.empty()) {
        throw EmptyAfterFiltering(spec.source.string() + ": no values in column " +
                                  spec.target_column);
    }
    if (!ts_col) return TimeSeries(spec.name, std::move(values), spec.frequency);
    check_monotone(stamps, lines, spec.source.string());
    return TimeSeries(spec.name, std::move(values), spec.frequency, std::move(stamps));
}

Timestamp step_from(Timestamp start, Frequency f, std::size_t i) {
    const auto n = static_cast<int>(i);
    switch (f) {
    case Frequency::minute: return start + minutes{n};
    case Frequency::hour: return start + hours{n};
    case Frequency::day: return start + days{n};
    case Frequency::week: return start + weeks{n};
    case Frequency::month:
    case Frequency::season: {
        const auto day_start = floor<days>(start);
        const year_month_day ymd{day_start};
        const auto shifted = ymd + months{f == Frequency::month ? n : 3 * n};
        return sys_days{shifted.year() / shifted.month() / ymd.day()} + (start - day_start);
    }
    }
    return start;
}

TimeSeries load_bundle(const DatasetSpec& spec) {
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(read_file(spec.source));
    } catch (const nlohmann::json::exception& e) {
        throw DatasetError(spec.source.string() + ": bad manifest: " + e.what());
    }
    const auto& list = manifest.at("series");
    const auto it = std::find_if(list.begin(), list.end(), [&](const nlohmann::json& s) {
        return s.at("name").get<std::string>() == spec.target_column;
    });
    if (it == list.end()) {
        throw MissingColumn(spec.source.string() + ": no series named '" + spec.target_column + "'");
    }
    const auto file = spec.source.parent_path() / it->at("file").get<std::string>();
    const auto frequency = it->contains("frequency")
                               ? parse_frequency((*it)["frequency"].get<std::string>())
                               : spec.frequency;

    std::vector<double> values;
    std::istringstream in(read_file(file));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto v = parse_number(line);
        if (!v) {
            throw NonNumericValue(file.string() + ":" + std::to_string(line_no) +
                                      ": non-numeric value '" + std::string(trim(line)) + "'",
                                  line_no);
        }
        values.push_back(*v);
    }
    if (values.empty()) throw EmptyAfterFiltering(file.string() + ": no values");
    if (!it->contains("start")) return TimeSeries(spec.name, std::move(values), frequency);

    const auto start_text = (*it)["start"].get<std::string>();
    const auto start = parse_timestamp(start_text);
    if (!start) throw InvalidTimestamp(spec.source.string() + ": bad start '" + start_text + "'", 0);
    std::vector<Timestamp> stamps;
    stamps.reserve(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) stamps.push_back(step_from(*start, frequency, i));
    return TimeSeries(spec.name, std::move(values), frequency, std::move(stamps));
}

ForecastTask::Window window_of(const TimeSeries& s, std::size_t begin, std::size_t end) {
    ForecastTask::Window w;
    w.values.assign(s.values().begin() + static_cast<std::ptrdiff_t>(begin),
                    s.values().begin() + static_cast<std::ptrdiff_t>(end));
    if (s.timestamps()) {
        w.timestamps.emplace(s.timestamps()->begin() + static_cast<std::ptrdiff_t>(begin),
                             s.timestamps()->begin() + static_cast<std::ptrdiff_t>(end));
    }
    return w;
}

} // namespace

std::optional<sys_days> parse_date(std::string_view text) {
    auto s = trim(text);
    int y = 0, m = 0, d = 0;
    if (!read_int(s, y, 4, 4) || !eat(s, '-') || !read_int(s, m, 2, 2) || !eat(s, '-') ||
        !read_int(s, d, 2, 2) || !s.empty()) {
        return std::nullopt;
    }
    return make_day(y, m, d);
}

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    auto s = trim(text);
    int y = 0, m = 0, d = 1;
    // M/D/YYYY
    if (s.find('/') != std::string_view::npos) {
        if (!read_int(s, m, 1, 2) || !eat(s, '/') || !read_int(s, d, 1, 2) || !eat(s, '/') ||
            !read_int(s, y, 4, 4) || !s.empty()) {
            return std::nullopt;
        }
        const auto day = make_day(y, m, d);
        if (!day) return std::nullopt;
        return Timestamp{*day};
    }
    if (!read_int(s, y, 4, 4) || !eat(s, '-') || !read_int(s, m, 2, 2)) return std::nullopt;
    if (s.empty()) {
        const auto day = make_day(y, m, 1);
        if (!day) return std::nullopt;
        return Timestamp{*day};
    }
    if (!eat(s, '-') || !read_int(s, d, 2, 2)) return std::nullopt;
    const auto day = make_day(y, m, d);
    if (!day) return std::nullopt;
    Timestamp out{*day};
    if (s.empty()) return out;
    if (!eat(s, 'T') && !eat(s, ' ')) return std::nullopt;
    int hh = 0, mm = 0, ss = 0;
    if (!read_int(s, hh, 2, 2) || !eat(s, ':') || !read_int(s, mm, 2, 2)) return std::nullopt;
    if (eat(s, ':') && !read_int(s, ss, 2, 2)) return std::nullopt;
    eat(s, 'Z');
    if (!s.empty() || hh > 23 || mm > 59 || ss > 59) return std::nullopt;
    return out + hours{hh} + minutes{mm} + seconds{ss};
}

std::string format_timestamp(Timestamp t) {
    const auto day_start = floor<days>(t);
    const year_month_day ymd{day_start};
    const hh_mm_ss hms{t - day_start};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                  static_cast<int>(hms.seconds().count()));
    return buf;
}

std::vector<CsvRow> read_csv(std::string_view text) {
    if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
    std::vector<CsvRow> rows;
    CsvRow row;
    std::string field;
    std::size_t line = 1;
    row.line = 1;
    bool in_quotes = false;
    bool any = false;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        any = true;
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        if (c == '"') {
            in_quotes = true;
        } else if (c == ',') {
            row.fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
            continue;
        } else if (c == '\n') {
            row.fields.push_back(std::move(field));
            field.clear();
            rows.push_back(std::move(row));
            row = CsvRow{};
            row.line = ++line;
            any = false;
        } else {
            field.push_back(c);
        }
    }
    if (in_quotes) throw DatasetError("unterminated quoted field starting before line " +
                                      std::to_string(line));
    if (any) {
        row.fields.push_back(std::move(field));
        rows.push_back(std::move(row));
    }
    return rows;
}

TimeSeries load_series(const DatasetSpec& spec) {
    spec.validate();
    return spec.format == SourceFormat::csv ? load_csv(spec) : load_bundle(spec);
}

sys_days concurrent_cutoff() { return sys_days{year{2023} / June / 30}; }

std::vector<ForecastTask> make_tasks(const TimeSeries& series, const DatasetSpec& spec) {
    spec.validate();
    const std::size_t n = series.size();
    std::vector<ForecastTask> tasks;

    if (const auto* split = std::get_if<BenchmarkSplit>(&spec.protocol)) {
        const std::size_t h = test_length_for(n, split->fraction);
        if (h >= n) throw SeriesTooShort(spec.name + ": no training data left after the split");
        const std::size_t train = n - h;
        const std::size_t lookback = spec.lookback.value_or(train);
        if (lookback > train) {
            throw SeriesTooShort(spec.name + ": lookback " + std::to_string(lookback) +
                                 " exceeds the " + std::to_string(train) + " training points");
        }
        const auto stats = fit_norm_stats(std::span(series.values()).first(train));
        tasks.emplace_back(spec.name, series.frequency(), window_of(series, train - lookback, train),
                           window_of(series, train, n), h, stats);
        return tasks;
    }

    const auto& horizons = std::get<FixedHorizons>(spec.protocol).horizons;
    std::size_t first_target = 0;
    if (spec.test_cutoff) {
        if (!series.timestamps()) {
            throw InvalidDatasetSpec(spec.name + ": a cutoff needs a timestamp column");
        }
        const auto& ts = *series.timestamps();
        const Timestamp boundary{*spec.test_cutoff + days{1}};
        first_target = static_cast<std::size_t>(
            std::lower_bound(ts.begin(), ts.end(), boundary) - ts.begin());
        if (first_target == n) {
            throw SeriesTooShort(spec.name + ": no data after the cutoff");
        }
    } else {
        first_target = n - test_length_for(n, 0.2);
    }

    const std::size_t max_h = *std::max_element(horizons.begin(), horizons.end());
    const std::size_t lookback = spec.lookback.value_or(std::min<std::size_t>(4 * max_h, 500));
    for (const auto h : horizons) {
        const std::size_t stride = spec.rolling.stride == 0 ? h : spec.rolling.stride;
        for (std::size_t w = 0; w < spec.rolling.count; ++w) {
            const std::size_t start = first_target + w * stride;
            if (start < lookback) {
                throw SeriesTooShort(spec.name + ": only " + std::to_string(start) +
                                     " points precede the target, lookback is " +
                                     std::to_string(lookback));
            }
            if (start + h > n) {
                if (w > 0) break; // rolling stops at the end of the data
                throw SeriesTooShort(spec.name + ": horizon " + std::to_string(h) + " needs " +
                                     std::to_string(start + h) + " points, series has " +
                                     std::to_string(n));
            }
            const auto stats = fit_norm_stats(std::span(series.values()).first(start));
            tasks.emplace_back(spec.name, series.frequency(),
                               window_of(series, start - lookback, start),
                               window_of(series, start, start + h), h, stats);
            if (spec.test_cutoff) {
                const Timestamp boundary{*spec.test_cutoff + days{1}};
                const auto stamps = tasks.back().target_timestamps();
                for (const auto t : *stamps) {
                    if (t < boundary) {
                        throw CutoffViolation(spec.name + ": target timestamp " +
                                              format_timestamp(t) + " is not after the cutoff");
                    }
                }
            }
        }
    }
    return tasks;
}

std::string builtin_description(std::string_view name) {
    struct Entry {
        std::string_view name;
        std::string_view text;
    };
    static constexpr Entry kEntries[] = {
        {"AirPassengers", "monthly totals of international airline passengers, in thousands"},
        {"MilkProduction", "monthly milk production per cow, in pounds"},
        {"BeerProduction", "quarterly beer production in Australia, in megalitres"},
        {"Sunspots", "monthly mean count of sunspots"},
        {"RiverFlow", "daily flow of a river, in cubic metres per second"},
        {"USBirths", "daily number of births in the United States"},
        {"ETTh1", "hourly oil temperature of an electricity transformer"},
        {"ETTh2", "hourly oil temperature of an electricity transformer"},
        {"ETTm1", "oil temperature of an electricity transformer every 15 minutes"},
        {"ILI", "weekly count of patients with influenza-like illness"},
        {"Stock", "daily opening price of a listed stock, in US dollars"},
        {"Weather", "daily average air temperature, in degrees Celsius"},
    };
    for (const auto& e : kEntries) {
        if (e.name == name) return std::string(e.text);
    }
    return {};
}

eval::MetricProtocol default_metric_protocol(std::string_view name) {
    static constexpr std::string_view kNormalized[] = {"ETTh1", "ETTh2", "ETTm1",
                                                       "ILI",   "Stock", "Weather"};
    for (auto n : kNormalized) {
        if (n == name) return eval::MetricProtocol::normalized;
    }
    return eval::MetricProtocol::raw;
}

} // namespace tsprompt::datasets
