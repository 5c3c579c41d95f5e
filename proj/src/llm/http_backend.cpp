#include <httplib.h>

#include "tsprompt/llm.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

namespace tsprompt::llm {

RateLimiter::RateLimiter(RateLimit limit) : limit_(limit) {}

void RateLimiter::acquire() {
    if (limit_.requests == 0) return;
    std::unique_lock lock(mutex_);
    for (;;) {
        const auto now = Clock::now();
        while (!issued_.empty() && now - issued_.front() >= limit_.window) issued_.pop_front();
        if (issued_.size() < limit_.requests) {
            issued_.push_back(now);
            return;
        }
        const auto wake = issued_.front() + limit_.window;
        lock.unlock();
        std::this_thread::sleep_until(wake);
        lock.lock();
    }
}

namespace {

std::string env_or(const char* name, const std::string& fallback) {
    const char* v = std::getenv(name);
    return v && *v ? std::string(v) : fallback;
}

bool is_retryable_status(int status) { return status == 429 || status >= 500; }

} // namespace

HttpChatBackend::HttpChatBackend(BackendConfig config) : config_(std::move(config)) {
    if (config_.kind != BackendKind::http_chat) {
        throw InvalidBackendConfig("HttpChatBackend needs kind http_chat");
    }
    config_.validate();
    std::string base = config_.endpoint.empty() ? env_or("TSPROMPT_API_BASE", "") : config_.endpoint;
    if (base.empty()) {
        throw InvalidBackendConfig("http_chat needs an endpoint or TSPROMPT_API_BASE");
    }
    while (!base.empty() && base.back() == '/') base.pop_back();
    const auto scheme_end = base.find("://");
    if (scheme_end == std::string::npos) {
        throw InvalidBackendConfig("endpoint must start with http:// or https://: " + base);
    }
    const auto scheme = base.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https") {
        throw InvalidBackendConfig("unsupported endpoint scheme '" + scheme + "'");
    }
    const auto path_start = base.find('/', scheme_end + 3);
    scheme_host_port_ = base.substr(0, path_start);
    path_prefix_ = path_start == std::string::npos ? "" : base.substr(path_start);
    api_key_ = env_or("TSPROMPT_API_KEY", "");
    limiter_ = std::make_shared<RateLimiter>(config_.rate_limit);
}

std::string HttpChatBackend::id() const { return "http_chat(" + config_.model_id + ")"; }

nlohmann::json HttpChatBackend::request_body(std::string_view prompt_text, int n) const {
    nlohmann::json body = {
        {"model", config_.model_id},
        {"messages", nlohmann::json::array({{{"role", "user"}, {"content", prompt_text}}})},
        {"temperature", config_.temperature},
        {"max_tokens", config_.max_tokens},
        {"n", n},
    };
    if (config_.seed) body["seed"] = *config_.seed;
    return body;
}

std::vector<std::string> HttpChatBackend::parse_choices(const nlohmann::json& response) {
    if (!response.is_object()) throw ProviderError("response is not a JSON object");
    if (response.contains("error")) {
        throw ProviderError("provider error: " + response["error"].dump());
    }
    auto text_of = [](const nlohmann::json& choice) -> std::string {
        if (choice.is_string()) return choice.get<std::string>();
        if (choice.contains("message") && choice["message"].contains("content")) {
            const auto& content = choice["message"]["content"];
            return content.is_string() ? content.get<std::string>() : std::string{};
        }
        if (choice.contains("text") && choice["text"].is_string()) {
            return choice["text"].get<std::string>();
        }
        throw ProviderError("choice has neither message.content nor text");
    };
    std::vector<std::string> out;
    if (response.contains("choices") && response["choices"].is_array()) {
        for (const auto& c : response["choices"]) out.push_back(text_of(c));
    } else if (response.contains("choice")) {
        out.push_back(text_of(response["choice"]));
    } else if (response.contains("message") || response.contains("text")) {
        out.push_back(text_of(response));
    } else {
        throw ProviderError("response carries no choices");
    }
    return out;
}

HttpChatBackend::Reply HttpChatBackend::post_with_retry(std::string_view prompt_text, int n) {
    const std::string body = request_body(prompt_text, n).dump();
    const std::string path = path_prefix_ + "/chat/completions";
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);

    std::string last_failure;
    bool last_was_429 = false;
    for (int attempt = 1; attempt <= config_.retry.max_attempts; ++attempt) {
        if (attempt > 1 && !config_.retry.backoff.empty()) {
            const auto idx = std::min<std::size_t>(attempt - 2, config_.retry.backoff.size() - 1);
            std::this_thread::sleep_for(config_.retry.backoff[idx]);
        }
        limiter_->acquire();

        httplib::Client client(scheme_host_port_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
            config_.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());

        const auto start = std::chrono::steady_clock::now();
        auto res = client.Post(path, headers, body, "application/json");
        const double latency =
            std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                .count();

        if (!res) {
            last_failure = "transport failure: " + httplib::to_string(res.error());
            last_was_429 = false;
            continue;
        }
        if (is_retryable_status(res->status)) {
            last_failure = "HTTP " + std::to_string(res->status);
            last_was_429 = res->status == 429;
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            throw ProviderError("HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        nlohmann::json parsed;
        try {
            parsed = nlohmann::json::parse(res->body);
        } catch (const nlohmann::json::exception& e) {
            throw ProviderError(std::string("malformed response body: ") + e.what());
        }
        Reply reply;
        reply.texts = parse_choices(parsed);
        reply.latency_ms = latency;
        if (parsed.contains("usage") && parsed["usage"].is_object()) {
            const auto& u = parsed["usage"];
            reply.usage = TokenUsage{u.value("prompt_tokens", std::uint64_t{0}),
                                     u.value("completion_tokens", std::uint64_t{0})};
        }
        return reply;
    }
    const std::string msg = "giving up after " + std::to_string(config_.retry.max_attempts) +
                            " attempts (" + last_failure + ")";
    if (last_was_429) throw RateLimited(msg);
    throw NetworkError(msg);
}

std::vector<Completion> HttpChatBackend::complete(const prompts::PromptText& prompt,
                                                  const TaskMeta&) {
    if (prompt.text.empty()) throw InvalidBackendConfig("empty prompt");
    const auto wanted = static_cast<std::size_t>(config_.samples);
    std::vector<Completion> out;
    out.reserve(wanted);
    // Providers may return fewer choices than n; top up with further requests.
    for (std::size_t round = 0; out.size() < wanted; ++round) {
        if (round > wanted) throw ProviderError("provider keeps returning no choices");
        const auto reply = post_with_retry(prompt.text, static_cast<int>(wanted - out.size()));
        const auto created = utc_now_iso8601();
        for (const auto& text : reply.texts) {
            if (out.size() == wanted) break;
            Completion c;
            c.text = text;
            c.backend_id = id();
            c.request_hash =
                request_hash(prompt.text, config_.model_id, config_.temperature, out.size());
            c.latency_ms = reply.latency_ms;
            c.usage = reply.usage;
            c.created_at = created;
            out.push_back(std::move(c));
        }
    }
    return out;
}

} // namespace tsprompt::llm
