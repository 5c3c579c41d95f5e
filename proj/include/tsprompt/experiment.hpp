#pragma once

#include "tsprompt/datasets.hpp"
#include "tsprompt/eval.hpp"
#include "tsprompt/llm.hpp"
#include "tsprompt/prompts.hpp"

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace tsprompt::experiment {

/// Invalid configuration; `field()` is a path such as "datasets[1].protocol".
class ConfigError : public Error {
public:
    ConfigError(std::string field, const std::string& message)
        : Error(field + ": " + message), field_(std::move(field)) {}
    const std::string& field() const { return field_; }

private:
    std::string field_;
};

class EmptyRun : public Error {
public:
    using Error::Error;
};

struct DatasetEntry {
    datasets::DatasetSpec spec;
    /// Overrides the frequency-derived default breath frequency.
    std::optional<std::size_t> breath_k;
};

struct ExperimentConfig {
    std::vector<DatasetEntry> datasets;
    std::vector<prompts::Strategy> strategies;
    llm::BackendConfig backend;
    codec::CodecConfig codec;
    /// Fit the codec scale per task; a fixed "scale" in the file turns this off.
    bool fit_scale = true;
    eval::Aggregation aggregation = eval::Aggregation::median;
    bool normalize_input = false;
    bool retry_on_decode_failure = true;
    prompts::RenderOptions render;
    /// Global breath frequency; per-dataset values win.
    std::optional<std::size_t> breath_k;
    std::vector<std::size_t> ks;
    std::filesystem::path output_dir;
    std::optional<std::filesystem::path> cache_dir;
    std::size_t workers = 1;

    /// Throws ConfigError.
    void validate() const;
    std::size_t breath_k_for(const DatasetEntry& d) const;
};

/// Relative paths resolve against `base_dir`. Unknown keys are errors.
ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);
/// Canonical JSON form (absolute paths); stored in the run manifest.
nlohmann::json config_to_json(const ExperimentConfig& config);

enum class Mode { run, sweep_k, ablate };
std::string_view to_string(Mode m);

struct RunRequest {
    Mode mode = Mode::run;
    /// Render every prompt into <output_dir>/prompts without calling a backend.
    bool dry_run = false;
    /// Replaces the configured backend (tests, embedding).
    std::shared_ptr<llm::Backend> backend_override;
    std::ostream* log = nullptr;
};

struct RunSummary {
    std::filesystem::path run_dir;
    std::size_t total = 0;
    std::size_t executed = 0;
    std::size_t skipped = 0;
    std::size_t failed = 0;
    bool dry_run = false;

    /// 0 all cells succeeded, 2 some failed, 3 all failed.
    int exit_code() const;
};

/// Executes the cells of `mode`, persisting one record file per cell under
/// <output_dir>/records. Completed cells whose prompt hash and model match
/// are skipped, so an interrupted run can simply be restarted.
RunSummary run_experiment(const ExperimentConfig& config, const RunRequest& request);

/// Key of one evaluation cell.
struct CellKey {
    std::string dataset;
    std::string frequency;
    std::size_t horizon = 0;
    std::size_t window = 0;
    prompts::Strategy strategy = prompts::Strategy::lstprompt;
    std::size_t breath_k = 0;
    /// "benchmark", "fixed" or "concurrent" (fixed horizons after a cutoff).
    std::string split;

    std::string id() const;
};

void to_json(nlohmann::json& j, const CellKey& k);
void from_json(const nlohmann::json& j, CellKey& k);

struct StoredCell {
    CellKey key;
    bool ok = false;
    std::string error;
    std::optional<eval::EvalRecord> record;
};

void to_json(nlohmann::json& j, const StoredCell& c);
void from_json(const nlohmann::json& j, StoredCell& c);

/// Reads <run_dir>/records.jsonl. Throws EmptyRun when there is nothing.
std::vector<StoredCell> load_run(const std::filesystem::path& run_dir);

enum class Layout { table1, table2, ablation, ksweep };
std::string_view to_string(Layout l);
Layout parse_layout(std::string_view name);

struct ReportFiles {
    std::filesystem::path rows_csv;
    std::filesystem::path table_md;
    std::filesystem::path plot_csv;
};

/// Pure functions of the stored cells.
std::string render_rows_csv(const std::vector<StoredCell>& cells);
std::string render_table(const std::vector<StoredCell>& cells, Layout layout);
std::string render_plot_csv(const std::vector<StoredCell>& cells, Layout layout);

/// Writes <run_dir>/report/<layout>/{rows.csv,table.md,plot.csv}.
ReportFiles write_report(const std::filesystem::path& run_dir, Layout layout);

/// Published reference values embedded from data/reference/published_results.json.
const nlohmann::json& published_reference();

/// Writes `content` to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);

} // namespace tsprompt::experiment
