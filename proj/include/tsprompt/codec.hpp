#pragma once

#include "tsprompt/error.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tsprompt::codec {

/// Numeric text encoding parameters. Values are divided by `scale`,
/// rounded to `precision` decimals and, when `strip_decimal_point` is set,
/// rendered as bare digit strings (leading zeros dropped) so that the last
/// `precision` digits are the fractional part.
struct CodecConfig {
    int precision = 2;
    double scale_quantile = 0.95;
    double scale = 1.0;
    std::string separator = ", ";
    bool strip_decimal_point = true;
    bool sign_allowed = true;

    /// Throws InvalidCodecConfig.
    void validate() const;
};

struct DecodeDiagnostics {
    std::size_t values_found = 0;
    std::size_t values_expected = 0;
    std::string stripped_prefix;
    bool truncated = false;
    std::size_t repaired_tokens = 0;
};

struct DecodeResult {
    std::vector<double> values;
    DecodeDiagnostics diagnostics;
};

class InvalidCodecConfig : public Error {
public:
    using Error::Error;
};

class ValueOutOfRange : public Error {
public:
    using Error::Error;
};

class DecodeError : public Error {
public:
    DecodeError(const std::string& what, DecodeDiagnostics diagnostics)
        : Error(what), diagnostics_(std::move(diagnostics)) {}
    const DecodeDiagnostics& diagnostics() const { return diagnostics_; }

private:
    DecodeDiagnostics diagnostics_;
};

class NoValuesFound : public DecodeError {
public:
    using DecodeError::DecodeError;
};

/// Fewer values than expected; carries what was recovered.
class PartialDecode : public DecodeError {
public:
    PartialDecode(const std::string& what, std::vector<double> values, DecodeDiagnostics d)
        : DecodeError(what, std::move(d)), values_(std::move(values)) {}
    const std::vector<double>& values() const { return values_; }

private:
    std::vector<double> values_;
};

inline constexpr double kMinScale = 1e-9;

/// alpha-quantile of |values| (linear interpolation between order
/// statistics), floored at kMinScale.
double fit_scale(std::span<const double> reference_values, double alpha);

/// Renders one value; exposed for the grammar tests.
std::string encode_value(double value, const CodecConfig& config);

std::string encode_series(std::span<const double> values, const CodecConfig& config);

/// Extracts up to `expected_count` values from a free-form completion.
/// Throws NoValuesFound or PartialDecode.
DecodeResult decode_completion(std::string_view text, const CodecConfig& config,
                               std::size_t expected_count);

/// Heuristic check for provider refusals ("I cannot predict ...").
bool looks_like_refusal(std::string_view text);

} // namespace tsprompt::codec
