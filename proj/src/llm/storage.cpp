#include "tsprompt/llm.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace tsprompt::llm {

namespace fs = std::filesystem;

void to_json(nlohmann::json& j, const CassetteRecord& r) {
    j = nlohmann::json{{"request_hash", r.request_hash},
                       {"model_id", r.model_id},
                       {"temperature", r.temperature},
                       {"prompt_text", r.prompt_text},
                       {"completions", r.completions},
                       {"recorded_at", r.recorded_at}};
}

void from_json(const nlohmann::json& j, CassetteRecord& r) {
    r.request_hash = j.at("request_hash").get<std::string>();
    r.model_id = j.at("model_id").get<std::string>();
    r.temperature = j.at("temperature").get<double>();
    r.prompt_text = j.at("prompt_text").get<std::string>();
    r.completions = j.at("completions").get<std::vector<Completion>>();
    r.recorded_at = j.value("recorded_at", std::string{});
}

std::shared_ptr<Cassette> Cassette::open(const fs::path& path, bool must_exist) {
    std::shared_ptr<Cassette> cassette(new Cassette(path));
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        if (must_exist) throw CassetteMiss("cassette not found: " + path.string());
        return cassette;
    }
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            auto record = nlohmann::json::parse(line).get<CassetteRecord>();
            // First entry wins: later duplicates never shadow what was replayed before.
            cassette->records_.try_emplace(record.request_hash, std::move(record));
        } catch (const nlohmann::json::exception& e) {
            throw StorageError(path.string() + ":" + std::to_string(line_no) +
                               ": bad cassette record: " + e.what());
        }
    }
    return cassette;
}

std::optional<CassetteRecord> Cassette::find(const std::string& hash) const {
    std::lock_guard lock(mutex_);
    const auto it = records_.find(hash);
    if (it == records_.end()) return std::nullopt;
    return it->second;
}

void Cassette::append(const CassetteRecord& record) {
    std::lock_guard lock(mutex_);
    if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw StorageError("cannot open cassette for append: " + path_.string());
    out << nlohmann::json(record).dump() << '\n';
    out.flush();
    if (!out) throw StorageError("write failed: " + path_.string());
    records_.try_emplace(record.request_hash, record);
}

std::size_t Cassette::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

ReplayBackend::ReplayBackend(BackendConfig config) : config_(std::move(config)) {
    if (config_.kind != BackendKind::replay) throw InvalidBackendConfig("ReplayBackend needs kind replay");
    config_.validate();
    cassette_ = Cassette::open(config_.cassette, true);
}

std::string ReplayBackend::id() const { return "replay(" + config_.effective_model_id() + ")"; }

std::vector<Completion> ReplayBackend::complete(const prompts::PromptText& prompt,
                                                const TaskMeta&) {
    const auto hash =
        request_hash(prompt.text, config_.effective_model_id(), config_.effective_temperature(), 0);
    const auto record = cassette_->find(hash);
    if (!record) throw CassetteMiss("no cassette entry for request " + hash);
    const auto wanted = static_cast<std::size_t>(config_.samples);
    if (record->completions.size() < wanted) {
        throw CassetteMiss("cassette entry " + hash + " holds " +
                           std::to_string(record->completions.size()) + " completions, " +
                           std::to_string(wanted) + " requested");
    }
    return {record->completions.begin(),
            record->completions.begin() + static_cast<std::ptrdiff_t>(wanted)};
}

RecordingBackend::RecordingBackend(BackendConfig config, std::unique_ptr<Backend> inner)
    : config_(std::move(config)), inner_(std::move(inner)) {
    if (!inner_) throw InvalidBackendConfig("recording needs an inner backend");
    cassette_ = Cassette::open(config_.cassette, false);
}

std::string RecordingBackend::id() const { return inner_->id(); }

std::vector<Completion> RecordingBackend::complete(const prompts::PromptText& prompt,
                                                   const TaskMeta& meta) {
    auto completions = inner_->complete(prompt, meta);
    CassetteRecord record;
    record.model_id = config_.effective_model_id();
    record.temperature = config_.effective_temperature();
    record.request_hash = request_hash(prompt.text, record.model_id, record.temperature, 0);
    record.prompt_text = prompt.text;
    record.completions = completions;
    record.recorded_at = utc_now_iso8601();
    cassette_->append(record);
    return completions;
}

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw StorageError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::optional<Completion> ResponseCache::get(const std::string& hash) const {
    const auto path = dir_ / (hash + ".json");
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return nlohmann::json::parse(buf.str()).get<Completion>();
    } catch (const nlohmann::json::exception& e) {
        throw StorageError("corrupt cache entry " + path.string() + ": " + e.what());
    }
}

void ResponseCache::put(const Completion& completion) const {
    if (completion.request_hash.empty()) throw StorageError("completion has no request hash");
    static std::atomic<std::uint64_t> counter{0};
    std::ostringstream tmp_name;
    tmp_name << '.' << completion.request_hash << '.' << ::getpid() << '.'
             << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '.'
             << counter.fetch_add(1) << ".tmp";
    const auto tmp = dir_ / tmp_name.str();
    const auto target = dir_ / (completion.request_hash + ".json");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw StorageError("cannot write " + tmp.string());
        out << nlohmann::json(completion).dump(2) << '\n';
        out.flush();
        if (!out) throw StorageError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw StorageError("cannot move cache entry into place: " + target.string());
    }
}

CachedBackend::CachedBackend(std::shared_ptr<Backend> inner, std::shared_ptr<ResponseCache> cache,
                             std::string model_id, double temperature, std::size_t samples)
    : inner_(std::move(inner)),
      cache_(std::move(cache)),
      model_id_(std::move(model_id)),
      temperature_(temperature),
      samples_(samples) {
    if (!inner_ || !cache_) throw InvalidBackendConfig("cached backend needs inner and cache");
    if (samples_ == 0) throw InvalidBackendConfig("samples must be at least 1");
}

std::string CachedBackend::id() const { return inner_->id(); }

std::vector<Completion> CachedBackend::complete(const prompts::PromptText& prompt,
                                                const TaskMeta& meta) {
    std::vector<Completion> hits;
    for (std::size_t i = 0; i < samples_; ++i) {
        auto hit = cache_->get(request_hash(prompt.text, model_id_, temperature_, i));
        if (!hit) break;
        hits.push_back(std::move(*hit));
    }
    if (hits.size() == samples_) return hits;
    auto fresh = inner_->complete(prompt, meta);
    for (const auto& c : fresh) cache_->put(c);
    return fresh;
}

} // namespace tsprompt::llm
