#pragma once

#include "tsprompt/codec.hpp"
#include "tsprompt/core.hpp"
#include "tsprompt/llm.hpp"
#include "tsprompt/prompts.hpp"

#include <json.hpp>

#include <array>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tsprompt::eval {

class LengthMismatch : public Error {
public:
    using Error::Error;
};

class AllSamplesFailed : public Error {
public:
    using Error::Error;
};

class InvalidEvalInput : public Error {
public:
    using Error::Error;
};

/// Mean absolute error. Throws LengthMismatch or InvalidEvalInput (empty or
/// non-finite input).
double mae(std::span<const double> truth, std::span<const double> forecast);

/// MAE after normalising both sequences with training-split stats.
double normalized_mae(std::span<const double> truth, std::span<const double> forecast,
                      const NormStats& stats);

enum class Aggregation { median, mean, first };
std::string_view to_string(Aggregation a);
Aggregation parse_aggregation(std::string_view name);

/// Elementwise reduction over the successfully decoded samples.
std::vector<double> aggregate_samples(const std::vector<std::vector<double>>& decoded,
                                      Aggregation policy = Aggregation::median);

/// Which number a dataset reports: raw MAE (benchmark series) or MAE on
/// normalised values (concurrent and long-horizon sets).
enum class MetricProtocol { raw, normalized };
std::string_view to_string(MetricProtocol p);
MetricProtocol parse_metric_protocol(std::string_view name);

struct RunOptions {
    codec::CodecConfig codec;
    /// Refit codec.scale on each task's (encoded) reference window.
    bool fit_scale = true;
    /// Encode the normalised reference and denormalise the forecast.
    bool normalize_input = false;
    Aggregation aggregation = Aggregation::median;
    MetricProtocol protocol = MetricProtocol::raw;
    /// One extra request with a "numbers only" reminder when every sample
    /// fails to decode.
    bool retry_on_decode_failure = true;
};

struct SampleOutcome {
    std::string completion_hash;
    std::string text;
    bool decoded = false;
    bool refusal = false;
    bool from_retry = false;
    std::string error;
    codec::DecodeDiagnostics diagnostics;
};

struct EvalRecord {
    std::string dataset;
    std::string strategy;
    std::string backend_id;
    std::string model_id;
    std::size_t horizon = 0;
    std::size_t breath_k = 0;
    std::size_t lookback = 0;
    std::size_t window = 0;
    MetricProtocol protocol = MetricProtocol::raw;
    double codec_scale = 1.0;
    std::vector<double> truth;
    std::vector<double> forecast;
    double mae = 0.0;
    std::optional<double> normalized_mae;
    std::string prompt_hash;
    std::string prompt_text;
    std::vector<SampleOutcome> samples;
    bool retried = false;

    /// mae or normalized_mae according to the protocol.
    double reported_metric() const;
    std::vector<std::string> completion_hashes() const;
};

void to_json(nlohmann::json& j, const SampleOutcome& s);
void from_json(const nlohmann::json& j, SampleOutcome& s);
void to_json(nlohmann::json& j, const EvalRecord& r);
void from_json(const nlohmann::json& j, EvalRecord& r);

/// Everything that goes to the backend for one task: the fitted codec, the
/// completed prompt spec and the rendered prompt. Depends only on the
/// reference window.
struct PreparedPrompt {
    codec::CodecConfig codec;
    std::vector<double> encoded_reference;
    prompts::PromptSpec spec;
    prompts::PromptText prompt;
};

PreparedPrompt prepare_prompt(const ForecastTask& task, const prompts::PromptSpec& spec,
                              const RunOptions& options);

/// Builds a spec for `strategy` with breath frequency k and the default
/// horizon partition. History text is filled in by prepare_prompt.
prompts::PromptSpec make_prompt_spec(const ForecastTask& task, prompts::Strategy strategy,
                                     const prompts::DatasetContext& context, std::size_t breath_k,
                                     const prompts::RenderOptions& render = {});

/// encode -> render -> complete -> decode -> aggregate -> metrics.
/// Needs a task with a target. Throws AllSamplesFailed when no sample
/// decodes, even after the retry.
EvalRecord run_task(const ForecastTask& task, const prompts::PromptSpec& spec,
                    llm::Backend& backend, const std::string& model_id,
                    const RunOptions& options);

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception is rethrown after all workers stop.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// One cell of a sweep or ablation: (task, strategy, k) -> record.
using CellRunner =
    std::function<EvalRecord(const ForecastTask&, prompts::Strategy, std::size_t breath_k)>;

struct CellOutcome {
    std::optional<EvalRecord> record;
    std::string error;
};

struct SummaryRow {
    prompts::Strategy strategy = prompts::Strategy::lstprompt;
    std::size_t breath_k = 0;
    std::size_t succeeded = 0;
    std::size_t failed = 0;
    /// Mean NMAE; empty when any cell of the row failed.
    std::optional<double> mean_nmae;
    /// Relative change vs the Base row in percent (ablation only).
    std::optional<double> delta_vs_base_pct;
    std::vector<CellOutcome> cells;
};

/// Rows ordered by k ascending; k = 0 runs the no-breath strategy.
std::vector<SummaryRow> sweep_k(const std::vector<ForecastTask>& tasks,
                                std::vector<std::size_t> ks, const CellRunner& runner,
                                std::size_t workers = 1);

/// Strategies in row order: Base (naive), CoT, no-decomposition, no-breath, full.
inline constexpr std::array<prompts::Strategy, 5> kAblationStrategies = {
    prompts::Strategy::naive, prompts::Strategy::cot, prompts::Strategy::lstprompt_no_decomp,
    prompts::Strategy::lstprompt_no_breath, prompts::Strategy::lstprompt};

std::vector<SummaryRow> ablation_suite(const std::vector<ForecastTask>& tasks,
                                       std::size_t breath_k, const CellRunner& runner,
                                       std::size_t workers = 1);

/// "FAILED" marker or the value with 4 decimals.
std::string format_metric(const std::optional<double>& value);

} // namespace tsprompt::eval
