#include "tsprompt/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

namespace tsprompt::eval {

namespace {

void check_pair(std::span<const double> truth, std::span<const double> forecast) {
    if (truth.size() != forecast.size()) {
        throw LengthMismatch("truth has " + std::to_string(truth.size()) + " values, forecast " +
                             std::to_string(forecast.size()));
    }
    if (truth.empty()) throw InvalidEvalInput("cannot score empty sequences");
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (!std::isfinite(truth[i]) || !std::isfinite(forecast[i])) {
            throw InvalidEvalInput("non-finite value at position " + std::to_string(i));
        }
    }
}

double median_of(std::vector<double>& xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    return n % 2 == 1 ? xs[n / 2] : (xs[n / 2 - 1] + xs[n / 2]) / 2.0;
}

} // namespace

double mae(std::span<const double> truth, std::span<const double> forecast) {
    check_pair(truth, forecast);
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) sum += std::fabs(truth[i] - forecast[i]);
    return sum / static_cast<double>(truth.size());
}

double normalized_mae(std::span<const double> truth, std::span<const double> forecast,
                      const NormStats& stats) {
    check_pair(truth, forecast);
    const auto t = normalize(truth, stats);
    const auto f = normalize(forecast, stats);
    return mae(t, f);
}

std::string_view to_string(Aggregation a) {
    switch (a) {
    case Aggregation::median: return "median";
    case Aggregation::mean: return "mean";
    case Aggregation::first: return "first";
    }
    return "unknown";
}

Aggregation parse_aggregation(std::string_view name) {
    for (auto a : {Aggregation::median, Aggregation::mean, Aggregation::first}) {
        if (to_string(a) == name) return a;
    }
    throw InvalidEvalInput("unknown aggregation '" + std::string(name) + "'");
}

std::vector<double> aggregate_samples(const std::vector<std::vector<double>>& decoded,
                                      Aggregation policy) {
    if (decoded.empty()) throw AllSamplesFailed("no decoded samples to aggregate");
    const std::size_t h = decoded.front().size();
    for (const auto& s : decoded) {
        if (s.size() != h) throw LengthMismatch("samples disagree on forecast length");
    }
    if (policy == Aggregation::first) return decoded.front();
    std::vector<double> out(h);
    std::vector<double> column(decoded.size());
    for (std::size_t t = 0; t < h; ++t) {
        for (std::size_t s = 0; s < decoded.size(); ++s) column[s] = decoded[s][t];
        if (policy == Aggregation::median) {
            out[t] = median_of(column);
        } else {
            // Running mean: identical samples come back bit-exact.
            double m = 0.0;
            for (std::size_t s = 0; s < column.size(); ++s) {
                m += (column[s] - m) / static_cast<double>(s + 1);
            }
            out[t] = m;
        }
    }
    return out;
}

std::string_view to_string(MetricProtocol p) {
    return p == MetricProtocol::raw ? "raw" : "normalized";
}

MetricProtocol parse_metric_protocol(std::string_view name) {
    if (name == "raw") return MetricProtocol::raw;
    if (name == "normalized") return MetricProtocol::normalized;
    throw InvalidEvalInput("unknown metric protocol '" + std::string(name) + "'");
}

double EvalRecord::reported_metric() const {
    if (protocol == MetricProtocol::normalized) {
        if (!normalized_mae) throw InvalidEvalInput("record lacks a normalized MAE");
        return *normalized_mae;
    }
    return mae;
}

std::vector<std::string> EvalRecord::completion_hashes() const {
    std::vector<std::string> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.completion_hash);
    return out;
}

void to_json(nlohmann::json& j, const SampleOutcome& s) {
    j = nlohmann::json{{"completion_hash", s.completion_hash},
                       {"text", s.text},
                       {"decoded", s.decoded},
                       {"refusal", s.refusal},
                       {"from_retry", s.from_retry},
                       {"error", s.error},
                       {"diagnostics",
                        {{"values_found", s.diagnostics.values_found},
                         {"values_expected", s.diagnostics.values_expected},
                         {"stripped_prefix", s.diagnostics.stripped_prefix},
                         {"truncated", s.diagnostics.truncated},
                         {"repaired_tokens", s.diagnostics.repaired_tokens}}}};
}

void from_json(const nlohmann::json& j, SampleOutcome& s) {
    s.completion_hash = j.at("completion_hash").get<std::string>();
    s.text = j.at("text").get<std::string>();
    s.decoded = j.at("decoded").get<bool>();
    s.refusal = j.value("refusal", false);
    s.from_retry = j.value("from_retry", false);
    s.error = j.value("error", std::string{});
    const auto& d = j.at("diagnostics");
    s.diagnostics.values_found = d.at("values_found").get<std::size_t>();
    s.diagnostics.values_expected = d.at("values_expected").get<std::size_t>();
    s.diagnostics.stripped_prefix = d.at("stripped_prefix").get<std::string>();
    s.diagnostics.truncated = d.at("truncated").get<bool>();
    s.diagnostics.repaired_tokens = d.at("repaired_tokens").get<std::size_t>();
}

void to_json(nlohmann::json& j, const EvalRecord& r) {
    j = nlohmann::json{{"dataset", r.dataset},
                       {"strategy", r.strategy},
                       {"backend_id", r.backend_id},
                       {"model_id", r.model_id},
                       {"horizon", r.horizon},
                       {"breath_k", r.breath_k},
                       {"lookback", r.lookback},
                       {"window", r.window},
                       {"protocol", to_string(r.protocol)},
                       {"codec_scale", r.codec_scale},
                       {"truth", r.truth},
                       {"forecast", r.forecast},
                       {"mae", r.mae},
                       {"normalized_mae", nullptr},
                       {"prompt_hash", r.prompt_hash},
                       {"prompt_text", r.prompt_text},
                       {"samples", r.samples},
                       {"retried", r.retried}};
    if (r.normalized_mae) j["normalized_mae"] = *r.normalized_mae;
}

void from_json(const nlohmann::json& j, EvalRecord& r) {
    r.dataset = j.at("dataset").get<std::string>();
    r.strategy = j.at("strategy").get<std::string>();
    r.backend_id = j.at("backend_id").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.horizon = j.at("horizon").get<std::size_t>();
    r.breath_k = j.at("breath_k").get<std::size_t>();
    r.lookback = j.at("lookback").get<std::size_t>();
    r.window = j.value("window", std::size_t{0});
    r.protocol = parse_metric_protocol(j.at("protocol").get<std::string>());
    r.codec_scale = j.at("codec_scale").get<double>();
    r.truth = j.at("truth").get<std::vector<double>>();
    r.forecast = j.at("forecast").get<std::vector<double>>();
    r.mae = j.at("mae").get<double>();
    r.normalized_mae.reset();
    if (!j.at("normalized_mae").is_null()) r.normalized_mae = j["normalized_mae"].get<double>();
    r.prompt_hash = j.at("prompt_hash").get<std::string>();
    r.prompt_text = j.at("prompt_text").get<std::string>();
    r.samples = j.at("samples").get<std::vector<SampleOutcome>>();
    r.retried = j.value("retried", false);
}

prompts::PromptSpec make_prompt_spec(const ForecastTask& task, prompts::Strategy strategy,
                                     const prompts::DatasetContext& context, std::size_t breath_k,
                                     const prompts::RenderOptions& render) {
    prompts::PromptSpec spec;
    spec.strategy = strategy;
    spec.context = context;
    spec.horizon = task.horizon();
    spec.breath_k = prompts::uses_breath(strategy) ? breath_k : 0;
    spec.partition = partition_horizon(task.horizon(), spec.breath_k);
    spec.options = render;
    return spec;
}

PreparedPrompt prepare_prompt(const ForecastTask& task, const prompts::PromptSpec& spec,
                              const RunOptions& options) {
    if (spec.horizon != task.horizon()) {
        throw InvalidEvalInput("prompt horizon " + std::to_string(spec.horizon) +
                               " differs from task horizon " + std::to_string(task.horizon()));
    }
    PreparedPrompt out;
    out.encoded_reference =
        options.normalize_input ? normalize(task.reference(), task.stats()) : task.reference();
    out.codec = options.codec;
    if (options.fit_scale) {
        out.codec.scale = codec::fit_scale(out.encoded_reference, out.codec.scale_quantile);
    }
    out.codec.validate();
    out.spec = spec;
    out.spec.history_text = codec::encode_series(out.encoded_reference, out.codec);
    out.spec.options.separator = out.codec.separator;
    out.prompt = prompts::render_prompt(out.spec);
    return out;
}

namespace {

// Decodes every completion into `outcomes`; returns the successful value
// vectors.
std::vector<std::vector<double>> decode_all(const std::vector<llm::Completion>& completions,
                                            const codec::CodecConfig& cfg, std::size_t horizon,
                                            bool from_retry,
                                            std::vector<SampleOutcome>& outcomes) {
    std::vector<std::vector<double>> ok;
    for (const auto& c : completions) {
        SampleOutcome s;
        s.completion_hash = c.request_hash;
        s.text = c.text;
        s.refusal = codec::looks_like_refusal(c.text);
        s.from_retry = from_retry;
        try {
            auto result = codec::decode_completion(c.text, cfg, horizon);
            s.decoded = true;
            s.diagnostics = result.diagnostics;
            ok.push_back(std::move(result.values));
        } catch (const codec::DecodeError& e) {
            s.error = e.what();
            s.diagnostics = e.diagnostics();
        }
        outcomes.push_back(std::move(s));
    }
    return ok;
}

} // namespace

EvalRecord run_task(const ForecastTask& task, const prompts::PromptSpec& spec,
                    llm::Backend& backend, const std::string& model_id,
                    const RunOptions& options) {
    if (!task.has_target()) throw InvalidEvalInput("run_task needs a task with a target window");
    const auto prepared = prepare_prompt(task, spec, options);
    const llm::TaskMeta meta{prepared.encoded_reference, task.horizon(), prepared.codec};

    EvalRecord record;
    record.dataset = task.dataset();
    record.strategy = std::string(prompts::to_string(spec.strategy));
    record.backend_id = backend.id();
    record.model_id = model_id;
    record.horizon = task.horizon();
    record.breath_k = prepared.spec.breath_k;
    record.lookback = task.lookback();
    record.protocol = options.protocol;
    record.codec_scale = prepared.codec.scale;
    record.truth = task.target();
    record.prompt_text = prepared.prompt.text;
    record.prompt_hash = llm::sha256_hex(prepared.prompt.text);

    auto decoded = decode_all(backend.complete(prepared.prompt, meta), prepared.codec,
                              task.horizon(), false, record.samples);
    if (decoded.empty() && options.retry_on_decode_failure) {
        record.retried = true;
        const auto retry_prompt = prompts::with_retry_reminder(prepared.prompt, prepared.spec);
        decoded = decode_all(backend.complete(retry_prompt, meta), prepared.codec,
                             task.horizon(), true, record.samples);
    }
    if (decoded.empty()) {
        std::string why = record.samples.empty() ? "backend returned no completions"
                                                 : record.samples.back().error;
        throw AllSamplesFailed(task.dataset() + " H=" + std::to_string(task.horizon()) + " " +
                               record.strategy + ": no sample decoded (" + why + ")");
    }

    auto forecast = aggregate_samples(decoded, options.aggregation);
    if (options.normalize_input) forecast = denormalize(forecast, task.stats());
    record.forecast = std::move(forecast);
    record.mae = mae(record.truth, record.forecast);
    try {
        record.normalized_mae = normalized_mae(record.truth, record.forecast, task.stats());
    } catch (const InvalidStats&) {
        if (options.protocol == MetricProtocol::normalized) throw;
    }
    return record;
}

void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
    if (n == 0) return;
    workers = std::clamp<std::size_t>(workers, 1, n);
    if (workers == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                if (stop) return;
                const std::size_t i = next.fetch_add(1);
                if (i >= n) return;
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!first_error) first_error = std::current_exception();
                    stop = true;
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

namespace {

struct CellKey {
    prompts::Strategy strategy;
    std::size_t k;
};

std::vector<SummaryRow> run_rows(const std::vector<ForecastTask>& tasks,
                                 const std::vector<CellKey>& keys, const CellRunner& runner,
                                 std::size_t workers) {
    if (tasks.empty()) throw InvalidEvalInput("no tasks to evaluate");
    std::vector<SummaryRow> rows(keys.size());
    for (std::size_t r = 0; r < keys.size(); ++r) {
        rows[r].strategy = keys[r].strategy;
        rows[r].breath_k = keys[r].k;
        rows[r].cells.resize(tasks.size());
    }
    parallel_for(keys.size() * tasks.size(), workers, [&](std::size_t i) {
        const std::size_t r = i / tasks.size();
        const std::size_t t = i % tasks.size();
        auto& cell = rows[r].cells[t];
        try {
            cell.record = runner(tasks[t], keys[r].strategy, keys[r].k);
        } catch (const std::exception& e) {
            cell.error = e.what();
        }
    });
    for (auto& row : rows) {
        double sum = 0.0;
        for (auto& cell : row.cells) {
            if (!cell.record || !cell.record->normalized_mae) {
                ++row.failed;
                if (cell.error.empty() && cell.record) cell.error = "no normalized MAE";
                continue;
            }
            ++row.succeeded;
            sum += *cell.record->normalized_mae;
        }
        if (row.failed == 0) row.mean_nmae = sum / static_cast<double>(row.succeeded);
    }
    return rows;
}

} // namespace

std::vector<SummaryRow> sweep_k(const std::vector<ForecastTask>& tasks,
                                std::vector<std::size_t> ks, const CellRunner& runner,
                                std::size_t workers) {
    if (ks.empty()) throw InvalidEvalInput("sweep needs at least one k");
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    std::vector<CellKey> keys;
    for (auto k : ks) {
        keys.push_back({k == 0 ? prompts::Strategy::lstprompt_no_breath : prompts::Strategy::lstprompt,
                        k});
    }
    return run_rows(tasks, keys, runner, workers);
}

std::vector<SummaryRow> ablation_suite(const std::vector<ForecastTask>& tasks,
                                       std::size_t breath_k, const CellRunner& runner,
                                       std::size_t workers) {
    if (breath_k == 0) throw InvalidEvalInput("ablation needs a breath frequency k >= 1");
    std::vector<CellKey> keys;
    for (auto s : kAblationStrategies) keys.push_back({s, prompts::uses_breath(s) ? breath_k : 0});
    auto rows = run_rows(tasks, keys, runner, workers);
    const auto& base = rows.front().mean_nmae;
    for (auto& row : rows) {
        if (base && row.mean_nmae && *base > 0.0) {
            row.delta_vs_base_pct = (*row.mean_nmae - *base) / *base * 100.0;
        } else if (base && row.mean_nmae && *base == 0.0 && *row.mean_nmae == 0.0) {
            row.delta_vs_base_pct = 0.0;
        }
    }
    return rows;
}

std::string format_metric(const std::optional<double>& value) {
    if (!value) return "FAILED";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", *value);
    return buf;
}

} // namespace tsprompt::eval
