#pragma once

#include "tsprompt/core.hpp"
#include "tsprompt/eval.hpp"
#include "tsprompt/prompts.hpp"

#include <chrono>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace tsprompt::datasets {

class DatasetError : public Error {
public:
    using Error::Error;
};

class MissingColumn : public DatasetError {
public:
    using DatasetError::DatasetError;
};

/// Carries the 1-based file line of the offending row.
class NonNumericValue : public DatasetError {
public:
    NonNumericValue(const std::string& what, std::size_t line) : DatasetError(what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class InvalidTimestamp : public DatasetError {
public:
    InvalidTimestamp(const std::string& what, std::size_t line) : DatasetError(what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class NonMonotoneTimestamps : public DatasetError {
public:
    using DatasetError::DatasetError;
};

class EmptyAfterFiltering : public DatasetError {
public:
    using DatasetError::DatasetError;
};

class CutoffViolation : public DatasetError {
public:
    using DatasetError::DatasetError;
};

class InvalidDatasetSpec : public DatasetError {
public:
    using DatasetError::DatasetError;
};

enum class SourceFormat { csv, benchmark_bundle };
std::string_view to_string(SourceFormat f);
SourceFormat parse_source_format(std::string_view name);

/// Last ceil(fraction * n) points form the test window.
struct BenchmarkSplit {
    double fraction = 0.2;
};

/// One task per horizon. With a cutoff, targets start at the first point
/// dated after it; without one they start where the last-20% test split
/// would.
struct FixedHorizons {
    std::vector<std::size_t> horizons;
};

using Protocol = std::variant<BenchmarkSplit, FixedHorizons>;

/// Rolling evaluation: extra windows whose targets start `stride` points
/// later each (stride 0 means H).
struct RollingWindows {
    std::size_t count = 1;
    std::size_t stride = 0;
};

struct DatasetSpec {
    std::string name;
    std::filesystem::path source;
    SourceFormat format = SourceFormat::csv;
    /// CSV column, or series name inside a bundle manifest.
    std::string target_column;
    std::optional<std::string> timestamp_column;
    Frequency frequency = Frequency::day;
    Protocol protocol = BenchmarkSplit{};
    std::optional<std::chrono::sys_days> test_cutoff;
    eval::MetricProtocol metric = eval::MetricProtocol::raw;
    std::string description;
    std::string upper_time_scale;
    std::optional<std::size_t> lookback;
    RollingWindows rolling;

    /// Throws InvalidDatasetSpec.
    void validate() const;
    prompts::DatasetContext context() const;
};

/// Accepts YYYY-MM-DD, YYYY-MM-DD[ T]HH:MM[:SS][Z], YYYY-MM and M/D/YYYY.
std::optional<Timestamp> parse_timestamp(std::string_view text);
/// YYYY-MM-DD only.
std::optional<std::chrono::sys_days> parse_date(std::string_view text);
std::string format_timestamp(Timestamp t);

/// Minimal RFC 4180 reader: comma-delimited, double-quoted fields with ""
/// escapes, CRLF or LF line ends. Returns rows with their 1-based line.
struct CsvRow {
    std::size_t line = 0;
    std::vector<std::string> fields;
};
std::vector<CsvRow> read_csv(std::string_view text);

TimeSeries load_series(const DatasetSpec& spec);

std::vector<ForecastTask> make_tasks(const TimeSeries& series, const DatasetSpec& spec);

/// Date after which concurrent test data must lie.
std::chrono::sys_days concurrent_cutoff();

/// Short domain descriptions for the named benchmark and concurrent sets;
/// empty for unknown names.
std::string builtin_description(std::string_view dataset_name);

/// Raw MAE for the univariate benchmark series, normalised MAE for the
/// long-horizon and concurrent sets.
eval::MetricProtocol default_metric_protocol(std::string_view dataset_name);

} // namespace tsprompt::datasets
