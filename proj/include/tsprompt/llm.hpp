#pragma once

#include "tsprompt/codec.hpp"
#include "tsprompt/prompts.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tsprompt::llm {

using Milliseconds = std::chrono::milliseconds;

class BackendError : public Error {
public:
    using Error::Error;
};

/// Retries exhausted without a response (or with 5xx responses).
class NetworkError : public BackendError {
public:
    using BackendError::BackendError;
};

/// Retries exhausted on HTTP 429.
class RateLimited : public BackendError {
public:
    using BackendError::BackendError;
};

/// Non-retryable provider response (4xx other than 429, malformed payload).
class ProviderError : public BackendError {
public:
    using BackendError::BackendError;
};

class CassetteMiss : public BackendError {
public:
    using BackendError::BackendError;
};

class StorageError : public BackendError {
public:
    using BackendError::BackendError;
};

class InvalidBackendConfig : public BackendError {
public:
    using BackendError::BackendError;
};

enum class BackendKind { http_chat, persistence_oracle, seasonal_oracle, replay, recording };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view name);

struct RetryPolicy {
    int max_attempts = 3;
    /// Delay before attempt i+1 is backoff[min(i-1, size-1)].
    std::vector<Milliseconds> backoff{Milliseconds{500}, Milliseconds{2000}, Milliseconds{8000}};
};

struct RateLimit {
    /// 0 disables limiting.
    std::size_t requests = 0;
    Milliseconds window{60000};
};

struct BackendConfig {
    BackendKind kind = BackendKind::persistence_oracle;
    std::string model_id;
    double temperature = 0.7;
    int max_tokens = 2048;
    int samples = 1;
    Milliseconds timeout{120000};
    RetryPolicy retry;
    RateLimit rate_limit;
    /// seasonal_oracle period m.
    std::size_t period = 0;
    /// replay / recording cassette file.
    std::filesystem::path cassette;
    /// recording: the wrapped backend. replay: the recorded backend, used
    /// only for its model id.
    std::shared_ptr<const BackendConfig> inner;
    /// http_chat: base URL; falls back to $TSPROMPT_API_BASE.
    std::string endpoint;
    std::optional<std::uint64_t> seed;

    /// Throws InvalidBackendConfig.
    void validate() const;
    /// Model id used in request hashes ("persistence_oracle" etc. for oracles
    /// without an explicit model id).
    std::string effective_model_id() const;
    /// Temperature used in request hashes; recording and replay take the
    /// wrapped backend's.
    double effective_temperature() const;
};

struct TokenUsage {
    std::uint64_t prompt_tokens = 0;
    std::uint64_t output_tokens = 0;
    bool operator==(const TokenUsage&) const = default;
};

struct Completion {
    std::string text;
    std::string backend_id;
    std::string request_hash;
    double latency_ms = 0.0;
    std::optional<TokenUsage> usage;
    std::string created_at;
    bool operator==(const Completion&) const = default;
};

void to_json(nlohmann::json& j, const Completion& c);
void from_json(const nlohmann::json& j, Completion& c);

/// What an oracle needs to produce a forecast: the reference window as it
/// was encoded into the prompt, the horizon and the task codec.
struct TaskMeta {
    std::vector<double> reference;
    std::size_t horizon = 0;
    codec::CodecConfig codec;
};

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// SHA-256 over the canonical request form documented in docs/formats.md.
std::string request_hash(std::string_view prompt_text, std::string_view model_id,
                         double temperature, std::size_t sample_index);

/// Shortest round-trip decimal rendering used inside request hashes.
std::string canonical_double(double value);

/// UTC "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_now_iso8601();

class Backend {
public:
    virtual ~Backend() = default;
    virtual std::string id() const = 0;
    /// Reentrant. Returns the completions of one request in sample order.
    virtual std::vector<Completion> complete(const prompts::PromptText& prompt,
                                             const TaskMeta& meta) = 0;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config);

/// Forecast rules behind the oracle backends.
std::vector<double> persistence_forecast(std::span<const double> reference, std::size_t horizon);
std::vector<double> seasonal_naive_forecast(std::span<const double> reference,
                                            std::size_t horizon, std::size_t period);

class OracleBackend final : public Backend {
public:
    explicit OracleBackend(BackendConfig config);
    std::string id() const override;
    std::vector<Completion> complete(const prompts::PromptText& prompt,
                                     const TaskMeta& meta) override;

private:
    BackendConfig config_;
};

/// Sliding-window limiter: at most `requests` acquisitions in any window.
class RateLimiter {
public:
    using Clock = std::chrono::steady_clock;
    explicit RateLimiter(RateLimit limit);
    void acquire();

private:
    RateLimit limit_;
    std::mutex mutex_;
    std::deque<Clock::time_point> issued_;
};

/// OpenAI-compatible chat completions over HTTP(S).
/// Environment: TSPROMPT_API_BASE (e.g. https://api.openai.com/v1) and
/// TSPROMPT_API_KEY (sent as a bearer token when set).
class HttpChatBackend final : public Backend {
public:
    explicit HttpChatBackend(BackendConfig config);
    std::string id() const override;
    std::vector<Completion> complete(const prompts::PromptText& prompt,
                                     const TaskMeta& meta) override;

    /// Request body for `n` choices.
    nlohmann::json request_body(std::string_view prompt_text, int n) const;
    /// Extracts choice texts (chat "message.content" or legacy "text").
    static std::vector<std::string> parse_choices(const nlohmann::json& response);

private:
    struct Reply {
        std::vector<std::string> texts;
        std::optional<TokenUsage> usage;
        double latency_ms = 0.0;
    };
    Reply post_with_retry(std::string_view prompt_text, int n);

    BackendConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
    std::string api_key_;
    std::shared_ptr<RateLimiter> limiter_;
};

struct CassetteRecord {
    std::string request_hash;
    std::string model_id;
    double temperature = 0.0;
    std::string prompt_text;
    std::vector<Completion> completions;
    std::string recorded_at;
};

void to_json(nlohmann::json& j, const CassetteRecord& r);
void from_json(const nlohmann::json& j, CassetteRecord& r);

/// Append-only newline-delimited JSON file of recorded requests, keyed by
/// the request hash of sample 0.
class Cassette {
public:
    /// Missing files load as empty cassettes unless `must_exist`.
    static std::shared_ptr<Cassette> open(const std::filesystem::path& path, bool must_exist);

    std::optional<CassetteRecord> find(const std::string& request_hash) const;
    void append(const CassetteRecord& record);
    std::size_t size() const;
    const std::filesystem::path& path() const { return path_; }

private:
    explicit Cassette(std::filesystem::path path) : path_(std::move(path)) {}

    std::filesystem::path path_;
    mutable std::mutex mutex_;
    std::unordered_map<std::string, CassetteRecord> records_;
};

class ReplayBackend final : public Backend {
public:
    explicit ReplayBackend(BackendConfig config);
    std::string id() const override;
    std::vector<Completion> complete(const prompts::PromptText& prompt,
                                     const TaskMeta& meta) override;

private:
    BackendConfig config_;
    std::shared_ptr<Cassette> cassette_;
};

class RecordingBackend final : public Backend {
public:
    RecordingBackend(BackendConfig config, std::unique_ptr<Backend> inner);
    std::string id() const override;
    std::vector<Completion> complete(const prompts::PromptText& prompt,
                                     const TaskMeta& meta) override;

private:
    BackendConfig config_;
    std::unique_ptr<Backend> inner_;
    std::shared_ptr<Cassette> cassette_;
};

/// Content-addressed completion store: one JSON file per request hash.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    std::optional<Completion> get(const std::string& request_hash) const;
    /// Atomic: write to a unique temporary file, then rename into place.
    void put(const Completion& completion) const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path dir_;
};

/// Serves every sample of a request from the cache when all of them are
/// present; otherwise delegates and stores the fresh completions.
class CachedBackend final : public Backend {
public:
    CachedBackend(std::shared_ptr<Backend> inner, std::shared_ptr<ResponseCache> cache,
                  std::string model_id, double temperature, std::size_t samples);
    std::string id() const override;
    std::vector<Completion> complete(const prompts::PromptText& prompt,
                                     const TaskMeta& meta) override;

private:
    std::shared_ptr<Backend> inner_;
    std::shared_ptr<ResponseCache> cache_;
    std::string model_id_;
    double temperature_;
    std::size_t samples_;
};

} // namespace tsprompt::llm
