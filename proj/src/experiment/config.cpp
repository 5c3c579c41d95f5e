#include "tsprompt/experiment.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

namespace tsprompt::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// A JSON object being consumed key by key; leftovers are reported as
/// unknown fields so typos never pass silently.
class Reader {
public:
    Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
    }

    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json* get(const std::string& key) {
        seen_.insert(key);
        const auto it = j_.find(key);
        if (it == j_.end() || it->is_null()) return nullptr;
        return &*it;
    }

    const json& need(const std::string& key) {
        const json* v = get(key);
        if (!v) throw ConfigError(field(key), "required");
        return *v;
    }

    std::optional<std::string> string(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_string()) throw ConfigError(field(key), "expected a string");
        return v->get<std::string>();
    }

    std::optional<double> number(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_number()) throw ConfigError(field(key), "expected a number");
        const double d = v->get<double>();
        if (!std::isfinite(d)) throw ConfigError(field(key), "must be finite");
        return d;
    }

    std::optional<std::uint64_t> count(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        return as_count(*v, field(key));
    }

    std::optional<bool> boolean(const std::string& key) {
        const json* v = get(key);
        if (!v) return std::nullopt;
        if (!v->is_boolean()) throw ConfigError(field(key), "expected true or false");
        return v->get<bool>();
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (!seen_.count(it.key())) throw ConfigError(field(it.key()), "unknown field");
        }
    }

    static std::uint64_t as_count(const json& v, const std::string& where) {
        if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
            throw ConfigError(where, "expected a non-negative integer");
        }
        return v.get<std::uint64_t>();
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

template <class F>
auto parse_enum(const std::string& where, const std::string& text, F parse) -> decltype(parse(text)) {
    try {
        return parse(text);
    } catch (const Error& e) {
        throw ConfigError(where, e.what());
    }
}

const json& need_array(const json* v, const std::string& where) {
    if (!v || !v->is_array()) throw ConfigError(where, "expected a list");
    return *v;
}

std::vector<std::size_t> count_list(const json* v, const std::string& where) {
    std::vector<std::size_t> out;
    const auto& arr = need_array(v, where);
    for (std::size_t i = 0; i < arr.size(); ++i) {
        out.push_back(Reader::as_count(arr[i], where + "[" + std::to_string(i) + "]"));
    }
    return out;
}

/// "$TSPROMPT_DATA_DIR/..." expands from the environment; other relative
/// paths resolve against the config file's directory.
fs::path resolve_path(const std::string& text, const fs::path& base, const std::string& where) {
    static constexpr std::string_view kDataVar = "$TSPROMPT_DATA_DIR";
    if (text.rfind(kDataVar, 0) == 0) {
        const char* dir = std::getenv("TSPROMPT_DATA_DIR");
        if (!dir || !*dir) throw ConfigError(where, "TSPROMPT_DATA_DIR is not set");
        auto rest = text.substr(kDataVar.size());
        while (!rest.empty() && (rest.front() == '/' || rest.front() == '\\')) rest.erase(0, 1);
        return (fs::path(dir) / rest).lexically_normal();
    }
    fs::path p(text);
    if (p.is_relative()) p = base / p;
    return p.lexically_normal();
}

llm::BackendConfig parse_backend(const json& j, const std::string& path, const fs::path& base) {
    Reader r(j, path);
    llm::BackendConfig b;
    b.kind = parse_enum(r.field("kind"), r.string("kind").value_or("persistence_oracle"),
                        [](const std::string& s) { return llm::parse_backend_kind(s); });
    if (auto v = r.string("model_id")) b.model_id = *v;
    if (auto v = r.number("temperature")) b.temperature = *v;
    if (auto v = r.count("max_tokens")) b.max_tokens = static_cast<int>(*v);
    if (auto v = r.count("samples")) b.samples = static_cast<int>(*v);
    if (auto v = r.count("timeout_ms")) b.timeout = llm::Milliseconds{*v};
    if (const json* retry = r.get("retry")) {
        Reader rr(*retry, r.field("retry"));
        if (auto v = rr.count("max_attempts")) b.retry.max_attempts = static_cast<int>(*v);
        if (const json* bo = rr.get("backoff_ms")) {
            b.retry.backoff.clear();
            for (auto ms : count_list(bo, rr.field("backoff_ms"))) b.retry.backoff.emplace_back(ms);
        }
        rr.finish();
    }
    if (const json* rl = r.get("rate_limit")) {
        Reader rr(*rl, r.field("rate_limit"));
        if (auto v = rr.count("requests")) b.rate_limit.requests = *v;
        if (auto v = rr.count("window_ms")) b.rate_limit.window = llm::Milliseconds{*v};
        rr.finish();
    }
    if (auto v = r.count("period")) b.period = *v;
    if (auto v = r.string("cassette")) b.cassette = resolve_path(*v, base, r.field("cassette"));
    if (auto v = r.string("endpoint")) b.endpoint = *v;
    if (auto v = r.count("seed")) b.seed = *v;
    if (const json* inner = r.get("inner")) {
        b.inner = std::make_shared<const llm::BackendConfig>(
            parse_backend(*inner, r.field("inner"), base));
    }
    r.finish();
    return b;
}

datasets::Protocol parse_protocol(const json& j, const std::string& path) {
    Reader r(j, path);
    const auto type = r.string("type").value_or("benchmark");
    datasets::Protocol out;
    if (type == "benchmark") {
        datasets::BenchmarkSplit split;
        if (auto v = r.number("fraction")) split.fraction = *v;
        out = split;
    } else if (type == "fixed_horizons") {
        out = datasets::FixedHorizons{count_list(r.get("horizons"), r.field("horizons"))};
    } else {
        throw ConfigError(r.field("type"), "unknown protocol '" + type +
                                               "' (expected benchmark or fixed_horizons)");
    }
    r.finish();
    return out;
}

DatasetEntry parse_dataset(const json& j, const std::string& path, const fs::path& base) {
    Reader r(j, path);
    DatasetEntry entry;
    auto& s = entry.spec;
    s.name = r.string("name").value_or("");
    if (s.name.empty()) throw ConfigError(r.field("name"), "required");
    const auto source = r.string("source");
    if (!source) throw ConfigError(r.field("source"), "required");
    s.source = resolve_path(*source, base, r.field("source"));
    if (auto v = r.string("format")) {
        s.format = parse_enum(r.field("format"), *v,
                              [](const std::string& t) { return datasets::parse_source_format(t); });
    }
    s.target_column = r.string("target_column").value_or(s.name);
    s.timestamp_column = r.string("timestamp_column");
    const auto freq = r.string("frequency");
    if (!freq) throw ConfigError(r.field("frequency"), "required");
    s.frequency = parse_enum(r.field("frequency"), *freq,
                             [](const std::string& t) { return parse_frequency(t); });
    if (const json* p = r.get("protocol")) s.protocol = parse_protocol(*p, r.field("protocol"));
    if (auto v = r.string("test_cutoff")) {
        s.test_cutoff = datasets::parse_date(*v);
        if (!s.test_cutoff) throw ConfigError(r.field("test_cutoff"), "expected YYYY-MM-DD");
    }
    s.metric = datasets::default_metric_protocol(s.name);
    if (auto v = r.string("metric")) {
        s.metric = parse_enum(r.field("metric"), *v,
                              [](const std::string& t) { return eval::parse_metric_protocol(t); });
    }
    if (auto v = r.string("description")) s.description = *v;
    if (auto v = r.string("upper_time_scale")) s.upper_time_scale = *v;
    if (auto v = r.count("lookback")) s.lookback = *v;
    if (const json* roll = r.get("rolling")) {
        Reader rr(*roll, r.field("rolling"));
        if (auto v = rr.count("count")) s.rolling.count = *v;
        if (auto v = rr.count("stride")) s.rolling.stride = *v;
        rr.finish();
    }
    if (auto v = r.count("breath_k")) entry.breath_k = *v;
    r.finish();
    try {
        s.validate();
    } catch (const Error& e) {
        throw ConfigError(path, e.what());
    }
    return entry;
}

std::string option_name(prompts::PartitionMode m) {
    return m == prompts::PartitionMode::explicit_steps ? "explicit" : "model_chooses";
}

std::string option_name(prompts::BreathMode m) {
    return m == prompts::BreathMode::instruction ? "instruction" : "inline_markers";
}

json backend_to_json(const llm::BackendConfig& b) {
    json j{{"kind", llm::to_string(b.kind)},
           {"model_id", b.model_id},
           {"temperature", b.temperature},
           {"max_tokens", b.max_tokens},
           {"samples", b.samples},
           {"timeout_ms", b.timeout.count()},
           {"rate_limit", {{"requests", b.rate_limit.requests}, {"window_ms", b.rate_limit.window.count()}}},
           {"period", b.period},
           {"endpoint", b.endpoint}};
    json backoff = json::array();
    for (auto ms : b.retry.backoff) backoff.push_back(ms.count());
    j["retry"] = {{"max_attempts", b.retry.max_attempts}, {"backoff_ms", backoff}};
    if (!b.cassette.empty()) j["cassette"] = b.cassette.string();
    if (b.seed) j["seed"] = *b.seed;
    if (b.inner) j["inner"] = backend_to_json(*b.inner);
    return j;
}

} // namespace

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
    Reader r(j, "");
    ExperimentConfig c;
    const auto base = fs::absolute(base_dir);

    const auto& ds = need_array(r.get("datasets"), "datasets");
    for (std::size_t i = 0; i < ds.size(); ++i) {
        c.datasets.push_back(parse_dataset(ds[i], "datasets[" + std::to_string(i) + "]", base));
    }
    const auto& strategies = need_array(r.get("strategies"), "strategies");
    for (std::size_t i = 0; i < strategies.size(); ++i) {
        const auto where = "strategies[" + std::to_string(i) + "]";
        if (!strategies[i].is_string()) throw ConfigError(where, "expected a strategy name");
        c.strategies.push_back(parse_enum(where, strategies[i].get<std::string>(),
                                          [](const std::string& t) { return prompts::parse_strategy(t); }));
    }
    if (const json* b = r.get("backend")) c.backend = parse_backend(*b, "backend", base);

    if (const json* cj = r.get("codec")) {
        Reader cr(*cj, "codec");
        if (auto v = cr.count("precision")) c.codec.precision = static_cast<int>(*v);
        if (auto v = cr.number("scale_quantile")) c.codec.scale_quantile = *v;
        if (auto v = cr.number("scale")) {
            c.codec.scale = *v;
            c.fit_scale = false;
        }
        if (auto v = cr.string("separator")) c.codec.separator = *v;
        if (auto v = cr.boolean("strip_decimal_point")) c.codec.strip_decimal_point = *v;
        if (auto v = cr.boolean("sign_allowed")) c.codec.sign_allowed = *v;
        cr.finish();
    }
    if (const json* rj = r.get("render")) {
        Reader rr(*rj, "render");
        if (auto v = rr.string("partition_mode")) {
            if (*v == "explicit") c.render.partition_mode = prompts::PartitionMode::explicit_steps;
            else if (*v == "model_chooses") c.render.partition_mode = prompts::PartitionMode::model_chooses;
            else throw ConfigError("render.partition_mode", "expected explicit or model_chooses");
        }
        if (auto v = rr.string("breath_mode")) {
            if (*v == "instruction") c.render.breath_mode = prompts::BreathMode::instruction;
            else if (*v == "inline_markers") c.render.breath_mode = prompts::BreathMode::inline_markers;
            else throw ConfigError("render.breath_mode", "expected instruction or inline_markers");
        }
        if (auto v = rr.string("preamble")) c.render.preamble = *v;
        rr.finish();
    }
    if (auto v = r.string("aggregation")) {
        c.aggregation = parse_enum("aggregation", *v,
                                   [](const std::string& t) { return eval::parse_aggregation(t); });
    }
    if (auto v = r.boolean("normalize_input")) c.normalize_input = *v;
    if (auto v = r.boolean("retry_on_decode_failure")) c.retry_on_decode_failure = *v;
    if (auto v = r.count("breath_k")) c.breath_k = *v;
    if (const json* ks = r.get("ks")) c.ks = count_list(ks, "ks");
    if (const json* seeds = r.get("seeds")) {
        // Request hashes carry no seed, so several seeds would share cache entries.
        const auto list = count_list(seeds, "seeds");
        if (list.size() > 1) throw ConfigError("seeds", "at most one seed is supported");
        if (!list.empty()) c.backend.seed = list.front();
    }
    const auto out = r.string("output_dir");
    if (!out) throw ConfigError("output_dir", "required");
    c.output_dir = resolve_path(*out, base, "output_dir");
    if (auto v = r.string("cache_dir")) c.cache_dir = resolve_path(*v, base, "cache_dir");
    if (auto v = r.count("workers")) c.workers = *v;
    r.finish();
    c.validate();
    return c;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("<file>", "cannot read " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    json j;
    try {
        j = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("<file>", path.string() + ": " + e.what());
    }
    return parse_config(j, fs::absolute(path).parent_path());
}

void ExperimentConfig::validate() const {
    if (datasets.empty()) throw ConfigError("datasets", "at least one dataset is required");
    if (strategies.empty()) throw ConfigError("strategies", "at least one strategy is required");
    if (output_dir.empty()) throw ConfigError("output_dir", "required");
    if (workers == 0) throw ConfigError("workers", "must be at least 1");
    std::set<std::string> names;
    for (std::size_t i = 0; i < datasets.size(); ++i) {
        if (!names.insert(datasets[i].spec.name).second) {
            throw ConfigError("datasets[" + std::to_string(i) + "].name", "duplicate dataset name");
        }
    }
    try {
        backend.validate();
    } catch (const Error& e) {
        throw ConfigError("backend", e.what());
    }
    try {
        codec.validate();
    } catch (const Error& e) {
        throw ConfigError("codec", e.what());
    }
}

std::size_t ExperimentConfig::breath_k_for(const DatasetEntry& d) const {
    if (d.breath_k) return *d.breath_k;
    if (breath_k) return *breath_k;
    return prompts::default_breath_k(d.spec.frequency);
}

json config_to_json(const ExperimentConfig& c) {
    json ds = json::array();
    for (const auto& d : c.datasets) {
        const auto& s = d.spec;
        json p;
        if (const auto* split = std::get_if<datasets::BenchmarkSplit>(&s.protocol)) {
            p = {{"type", "benchmark"}, {"fraction", split->fraction}};
        } else {
            p = {{"type", "fixed_horizons"},
                 {"horizons", std::get<datasets::FixedHorizons>(s.protocol).horizons}};
        }
        json e{{"name", s.name},
               {"source", s.source.string()},
               {"format", datasets::to_string(s.format)},
               {"target_column", s.target_column},
               {"frequency", to_string(s.frequency)},
               {"protocol", p},
               {"metric", eval::to_string(s.metric)},
               {"rolling", {{"count", s.rolling.count}, {"stride", s.rolling.stride}}},
               {"breath_k", c.breath_k_for(d)}};
        if (s.timestamp_column) e["timestamp_column"] = *s.timestamp_column;
        if (s.test_cutoff) e["test_cutoff"] = datasets::format_timestamp(Timestamp{*s.test_cutoff}).substr(0, 10);
        if (!s.description.empty()) e["description"] = s.description;
        if (!s.upper_time_scale.empty()) e["upper_time_scale"] = s.upper_time_scale;
        if (s.lookback) e["lookback"] = *s.lookback;
        ds.push_back(std::move(e));
    }
    json strategies = json::array();
    for (auto s : c.strategies) strategies.push_back(prompts::to_string(s));
    json codec{{"precision", c.codec.precision},
               {"scale_quantile", c.codec.scale_quantile},
               {"separator", c.codec.separator},
               {"strip_decimal_point", c.codec.strip_decimal_point},
               {"sign_allowed", c.codec.sign_allowed}};
    if (!c.fit_scale) codec["scale"] = c.codec.scale;
    json j{{"datasets", ds},
           {"strategies", strategies},
           {"backend", backend_to_json(c.backend)},
           {"codec", codec},
           {"render",
            {{"partition_mode", option_name(c.render.partition_mode)},
             {"breath_mode", option_name(c.render.breath_mode)},
             {"preamble", c.render.preamble}}},
           {"aggregation", eval::to_string(c.aggregation)},
           {"normalize_input", c.normalize_input},
           {"retry_on_decode_failure", c.retry_on_decode_failure},
           {"ks", c.ks},
           {"output_dir", c.output_dir.string()},
           {"workers", c.workers}};
    if (c.breath_k) j["breath_k"] = *c.breath_k;
    if (c.cache_dir) j["cache_dir"] = c.cache_dir->string();
    return j;
}

} // namespace tsprompt::experiment
