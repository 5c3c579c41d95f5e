#include "tsprompt/llm.hpp"

#include <array>
#include <cmath>

namespace tsprompt::llm {

namespace {

constexpr std::array<std::pair<BackendKind, std::string_view>, 5> kKindNames{{
    {BackendKind::http_chat, "http_chat"},
    {BackendKind::persistence_oracle, "persistence_oracle"},
    {BackendKind::seasonal_oracle, "seasonal_oracle"},
    {BackendKind::replay, "replay"},
    {BackendKind::recording, "recording"},
}};

bool is_oracle(BackendKind kind) {
    return kind == BackendKind::persistence_oracle || kind == BackendKind::seasonal_oracle;
}

} // namespace

std::string_view to_string(BackendKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

BackendKind parse_backend_kind(std::string_view name) {
    for (const auto& [k, label] : kKindNames) {
        if (label == name) return k;
    }
    throw InvalidBackendConfig("unknown backend kind '" + std::string(name) + "'");
}

void BackendConfig::validate() const {
    if (samples < 1) throw InvalidBackendConfig("samples must be at least 1");
    if (retry.max_attempts < 1) throw InvalidBackendConfig("retry attempts must be at least 1");
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
        throw InvalidBackendConfig("temperature must be a finite value >= 0");
    }
    if (max_tokens < 1) throw InvalidBackendConfig("max_tokens must be positive");
    if (timeout.count() <= 0) throw InvalidBackendConfig("timeout must be positive");
    if (rate_limit.requests > 0 && rate_limit.window.count() <= 0) {
        throw InvalidBackendConfig("rate limit window must be positive");
    }
    switch (kind) {
    case BackendKind::seasonal_oracle:
        if (period == 0) throw InvalidBackendConfig("seasonal_oracle needs a period >= 1");
        break;
    case BackendKind::replay:
        if (cassette.empty()) throw InvalidBackendConfig("replay needs a cassette path");
        if (model_id.empty() && !inner) {
            throw InvalidBackendConfig("replay needs the recorded model_id");
        }
        break;
    case BackendKind::recording:
        if (cassette.empty()) throw InvalidBackendConfig("recording needs a cassette path");
        if (!inner) throw InvalidBackendConfig("recording needs an inner backend");
        if (inner->kind == BackendKind::recording || inner->kind == BackendKind::replay) {
            throw InvalidBackendConfig("recording must wrap a live or oracle backend");
        }
        inner->validate();
        break;
    case BackendKind::http_chat:
        if (model_id.empty()) throw InvalidBackendConfig("http_chat needs a model_id");
        break;
    case BackendKind::persistence_oracle:
        break;
    }
}

std::string BackendConfig::effective_model_id() const {
    if (!model_id.empty()) return model_id;
    if ((kind == BackendKind::recording || kind == BackendKind::replay) && inner) {
        return inner->effective_model_id();
    }
    if (kind == BackendKind::seasonal_oracle) {
        return "seasonal_oracle(m=" + std::to_string(period) + ")";
    }
    return std::string(to_string(kind));
}

double BackendConfig::effective_temperature() const {
    if ((kind == BackendKind::recording || kind == BackendKind::replay) && inner) {
        return inner->temperature;
    }
    return temperature;
}

void to_json(nlohmann::json& j, const Completion& c) {
    j = nlohmann::json{{"text", c.text},
                       {"backend_id", c.backend_id},
                       {"request_hash", c.request_hash},
                       {"latency_ms", c.latency_ms},
                       {"created_at", c.created_at}};
    if (c.usage) {
        j["usage"] = {{"prompt_tokens", c.usage->prompt_tokens},
                      {"output_tokens", c.usage->output_tokens}};
    } else {
        j["usage"] = nullptr;
    }
}

void from_json(const nlohmann::json& j, Completion& c) {
    c.text = j.at("text").get<std::string>();
    c.backend_id = j.at("backend_id").get<std::string>();
    c.request_hash = j.at("request_hash").get<std::string>();
    c.latency_ms = j.value("latency_ms", 0.0);
    c.created_at = j.value("created_at", std::string{});
    c.usage.reset();
    if (j.contains("usage") && j["usage"].is_object()) {
        c.usage = TokenUsage{j["usage"].value("prompt_tokens", std::uint64_t{0}),
                             j["usage"].value("output_tokens", std::uint64_t{0})};
    }
}

std::vector<double> persistence_forecast(std::span<const double> reference, std::size_t horizon) {
    if (reference.empty()) throw InvalidBackendConfig("persistence oracle needs a reference");
    return std::vector<double>(horizon, reference.back());
}

std::vector<double> seasonal_naive_forecast(std::span<const double> reference,
                                            std::size_t horizon, std::size_t period) {
    if (period == 0 || reference.size() < period) {
        throw InvalidBackendConfig("seasonal oracle needs at least one full period of history");
    }
    const std::size_t start = reference.size() - period;
    std::vector<double> out;
    out.reserve(horizon);
    for (std::size_t i = 0; i < horizon; ++i) out.push_back(reference[start + i % period]);
    return out;
}

OracleBackend::OracleBackend(BackendConfig config) : config_(std::move(config)) {
    if (!is_oracle(config_.kind)) throw InvalidBackendConfig("not an oracle backend kind");
    config_.validate();
}

std::string OracleBackend::id() const {
    if (config_.kind == BackendKind::seasonal_oracle) {
        return "seasonal_oracle(m=" + std::to_string(config_.period) + ")";
    }
    return "persistence_oracle";
}

std::vector<Completion> OracleBackend::complete(const prompts::PromptText& prompt,
                                                const TaskMeta& meta) {
    // Oracles ignore sampling parameters: one completion per request.
    const auto forecast = config_.kind == BackendKind::seasonal_oracle
                              ? seasonal_naive_forecast(meta.reference, meta.horizon,
                                                        config_.period)
                              : persistence_forecast(meta.reference, meta.horizon);
    Completion c;
    c.text = codec::encode_series(forecast, meta.codec);
    c.backend_id = id();
    c.request_hash =
        request_hash(prompt.text, config_.effective_model_id(), config_.temperature, 0);
    c.latency_ms = 0.0;
    c.created_at = "1970-01-01T00:00:00Z";
    return {std::move(c)};
}

std::unique_ptr<Backend> make_backend(const BackendConfig& config) {
    config.validate();
    switch (config.kind) {
    case BackendKind::persistence_oracle:
    case BackendKind::seasonal_oracle:
        return std::make_unique<OracleBackend>(config);
    case BackendKind::http_chat:
        return std::make_unique<HttpChatBackend>(config);
    case BackendKind::replay:
        return std::make_unique<ReplayBackend>(config);
    case BackendKind::recording:
        return std::make_unique<RecordingBackend>(config, make_backend(*config.inner));
    }
    throw InvalidBackendConfig("unsupported backend kind");
}

} // namespace tsprompt::llm
