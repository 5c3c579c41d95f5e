#pragma once

#include "tsprompt/error.hpp"

#include <chrono>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tsprompt {

using Timestamp = std::chrono::sys_seconds;

enum class Frequency { minute, hour, day, week, month, season };

std::string_view to_string(Frequency f);

/// Throws UnknownFrequency for labels outside the supported set.
Frequency parse_frequency(std::string_view label);

/// A named, frequency-labelled univariate series. Values are finite and,
/// when timestamps are present, they are strictly increasing and aligned
/// one-to-one with the values.
class TimeSeries {
public:
    TimeSeries(std::string name, std::vector<double> values, Frequency frequency,
               std::optional<std::vector<Timestamp>> timestamps = std::nullopt);

    const std::string& name() const { return name_; }
    const std::vector<double>& values() const { return values_; }
    const std::optional<std::vector<Timestamp>>& timestamps() const { return timestamps_; }
    Frequency frequency() const { return frequency_; }
    std::size_t size() const { return values_.size(); }

    /// Half-open slice [begin, end) keeping name, frequency and timestamps.
    TimeSeries slice(std::size_t begin, std::size_t end) const;

private:
    std::string name_;
    std::vector<double> values_;
    Frequency frequency_;
    std::optional<std::vector<Timestamp>> timestamps_;
};

struct NormStats {
    double mean = 0.0;
    double std = 1.0;
    /// Set when the training values have zero spread; normalisation then
    /// uses an effective std of 1.
    bool constant = false;

    /// Throws InvalidStats when std <= 0 (or non-finite) without the
    /// constant flag.
    double effective_std() const;
};

NormStats fit_norm_stats(std::span<const double> train_values);

std::vector<double> normalize(std::span<const double> values, const NormStats& stats);
std::vector<double> denormalize(std::span<const double> values, const NormStats& stats);

/// Splits off the last ceil(fraction * n) points as the test suffix.
std::pair<TimeSeries, TimeSeries> split_last_fraction(const TimeSeries& series, double fraction);

/// Test length used by split_last_fraction, exposed for protocol code.
std::size_t test_length_for(std::size_t total, double fraction);

struct HorizonPartition {
    std::size_t short_steps = 0;
    std::size_t long_steps = 0;

    std::size_t horizon() const { return short_steps + long_steps; }
    bool operator==(const HorizonPartition&) const = default;
};

/// Default short/long boundary: short = ceil(H * short_fraction), raised to
/// at least k when a breath frequency is set, and capped at H.
struct PartitionRule {
    double short_fraction = 0.25;
    bool at_least_breath_k = true;
};

HorizonPartition partition_horizon(std::size_t horizon, std::size_t breath_k,
                                   const PartitionRule& rule = {});

/// One zero-shot forecasting instance. The reference window immediately
/// precedes the target window in the source series; the target is absent
/// in pure-inference mode.
class ForecastTask {
public:
    struct Window {
        std::vector<double> values;
        std::optional<std::vector<Timestamp>> timestamps;
    };

    ForecastTask(std::string dataset, Frequency frequency, Window reference,
                 std::optional<Window> target, std::size_t horizon, NormStats stats);

    const std::string& dataset() const { return dataset_; }
    Frequency frequency() const { return frequency_; }
    const std::vector<double>& reference() const { return reference_.values; }
    const std::optional<std::vector<Timestamp>>& reference_timestamps() const {
        return reference_.timestamps;
    }
    bool has_target() const { return target_.has_value(); }
    /// Throws Error in pure-inference mode.
    const std::vector<double>& target() const;
    std::optional<std::vector<Timestamp>> target_timestamps() const;
    std::size_t lookback() const { return reference_.values.size(); }
    std::size_t horizon() const { return horizon_; }
    const NormStats& stats() const { return stats_; }

    /// Same task with the target values replaced; used by leakage checks.
    ForecastTask with_target_values(std::vector<double> values) const;

private:
    std::string dataset_;
    Frequency frequency_;
    Window reference_;
    std::optional<Window> target_;
    std::size_t horizon_;
    NormStats stats_;
};

} // namespace tsprompt
