#include "tsprompt/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace tsprompt {

namespace {

constexpr std::array<std::pair<Frequency, std::string_view>, 6> kFrequencyLabels{{
    {Frequency::minute, "minute"},
    {Frequency::hour, "hour"},
    {Frequency::day, "day"},
    {Frequency::week, "week"},
    {Frequency::month, "month"},
    {Frequency::season, "season"},
}};

void check_window(const std::vector<double>& values,
                  const std::optional<std::vector<Timestamp>>& timestamps, const char* what) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw InvalidSeries(std::string(what) + " contains a non-finite value");
        }
    }
    if (timestamps) {
        if (timestamps->size() != values.size()) {
            throw InvalidSeries(std::string(what) + " timestamps and values differ in length");
        }
        for (std::size_t i = 1; i < timestamps->size(); ++i) {
            if ((*timestamps)[i] <= (*timestamps)[i - 1]) {
                throw InvalidSeries(std::string(what) + " timestamps are not strictly increasing");
            }
        }
    }
}

} // namespace

std::string_view to_string(Frequency f) {
    for (const auto& [freq, label] : kFrequencyLabels) {
        if (freq == f) return label;
    }
    return "unknown";
}

Frequency parse_frequency(std::string_view label) {
    for (const auto& [freq, name] : kFrequencyLabels) {
        if (name == label) return freq;
    }
    throw UnknownFrequency("unknown frequency label '" + std::string(label) + "'");
}

TimeSeries::TimeSeries(std::string name, std::vector<double> values, Frequency frequency,
                       std::optional<std::vector<Timestamp>> timestamps)
    : name_(std::move(name)), values_(std::move(values)), frequency_(frequency),
      timestamps_(std::move(timestamps)) {
    if (values_.empty()) {
        throw InvalidSeries("series '" + name_ + "' is empty");
    }
    check_window(values_, timestamps_, "series");
}

TimeSeries TimeSeries::slice(std::size_t begin, std::size_t end) const {
    end = std::min(end, values_.size());
    if (begin >= end) {
        throw InvalidSeries("empty slice of series '" + name_ + "'");
    }
    std::vector<double> values(values_.begin() + static_cast<std::ptrdiff_t>(begin),
                               values_.begin() + static_cast<std::ptrdiff_t>(end));
    std::optional<std::vector<Timestamp>> stamps;
    if (timestamps_) {
        stamps.emplace(timestamps_->begin() + static_cast<std::ptrdiff_t>(begin),
                       timestamps_->begin() + static_cast<std::ptrdiff_t>(end));
    }
    return TimeSeries(name_, std::move(values), frequency_, std::move(stamps));
}

double NormStats::effective_std() const {
    if (constant) return 1.0;
    if (!(std > 0.0) || !std::isfinite(std) || !std::isfinite(mean)) {
        throw InvalidStats("normalisation std must be positive and finite");
    }
    return std;
}

NormStats fit_norm_stats(std::span<const double> train_values) {
    if (train_values.empty()) {
        throw EmptyInput("cannot fit normalisation statistics on an empty window");
    }
    // Welford; the two-pass form lives in the tests as the oracle.
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t n = 0;
    for (double v : train_values) {
        if (!std::isfinite(v)) {
            throw InvalidSeries("normalisation input contains a non-finite value");
        }
        ++n;
        const double delta = v - mean;
        mean += delta / static_cast<double>(n);
        m2 += delta * (v - mean);
    }
    NormStats stats;
    stats.mean = mean;
    stats.std = std::sqrt(std::max(0.0, m2 / static_cast<double>(n)));
    stats.constant = stats.std == 0.0;
    return stats;
}

std::vector<double> normalize(std::span<const double> values, const NormStats& stats) {
    const double scale = stats.effective_std();
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back((v - stats.mean) / scale);
    return out;
}

std::vector<double> denormalize(std::span<const double> values, const NormStats& stats) {
    const double scale = stats.effective_std();
    std::vector<double> out;
    out.reserve(values.size());
    for (double v : values) out.push_back(v * scale + stats.mean);
    return out;
}

std::size_t test_length_for(std::size_t total, double fraction) {
    if (!(fraction > 0.0 && fraction < 1.0)) {
        throw SeriesTooShort("split fraction must lie in (0, 1)");
    }
    // The epsilon keeps products such as 0.2 * 35 from rounding up to 8.
    const double raw = fraction * static_cast<double>(total);
    return static_cast<std::size_t>(std::ceil(raw - 1e-9));
}

std::pair<TimeSeries, TimeSeries> split_last_fraction(const TimeSeries& series, double fraction) {
    const std::size_t n = series.size();
    if (n < 2) {
        throw SeriesTooShort("series '" + series.name() + "' needs at least 2 points to split");
    }
    const std::size_t test = test_length_for(n, fraction);
    if (test == 0 || test >= n) {
        throw SeriesTooShort("split of series '" + series.name() + "' leaves an empty side");
    }
    return {series.slice(0, n - test), series.slice(n - test, n)};
}

HorizonPartition partition_horizon(std::size_t horizon, std::size_t breath_k,
                                   const PartitionRule& rule) {
    if (horizon == 0) {
        throw InvalidSeries("horizon must be at least 1");
    }
    const double raw = rule.short_fraction * static_cast<double>(horizon);
    auto short_steps = static_cast<std::size_t>(std::ceil(raw - 1e-9));
    short_steps = std::max<std::size_t>(short_steps, 1);
    if (breath_k > 0 && rule.at_least_breath_k) {
        short_steps = std::max(short_steps, breath_k);
    }
    short_steps = std::min(short_steps, horizon);
    return {short_steps, horizon - short_steps};
}

ForecastTask::ForecastTask(std::string dataset, Frequency frequency, Window reference,
                           std::optional<Window> target, std::size_t horizon, NormStats stats)
    : dataset_(std::move(dataset)), frequency_(frequency), reference_(std::move(reference)),
      target_(std::move(target)), horizon_(horizon), stats_(stats) {
    if (horizon_ == 0) throw InvalidSeries("task horizon must be at least 1");
    if (reference_.values.empty()) throw InvalidSeries("task reference window is empty");
    check_window(reference_.values, reference_.timestamps, "reference window");
    if (target_) {
        if (target_->values.size() != horizon_) {
            throw InvalidSeries("target window length differs from the horizon");
        }
        check_window(target_->values, target_->timestamps, "target window");
        if (reference_.timestamps && target_->timestamps &&
            target_->timestamps->front() <= reference_.timestamps->back()) {
            throw InvalidSeries("target window does not follow the reference window");
        }
    }
}

const std::vector<double>& ForecastTask::target() const {
    if (!target_) throw Error("task '" + dataset_ + "' has no target window");
    return target_->values;
}

std::optional<std::vector<Timestamp>> ForecastTask::target_timestamps() const {
    if (!target_) return std::nullopt;
    return target_->timestamps;
}

ForecastTask ForecastTask::with_target_values(std::vector<double> values) const {
    Window target{std::move(values), target_ ? target_->timestamps : std::nullopt};
    return ForecastTask(dataset_, frequency_, reference_, std::move(target), horizon_, stats_);
}

} // namespace tsprompt
