#include "tsprompt/experiment.hpp"
#include "tsprompt/version.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace tsprompt::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view to_string(Mode m) {
    switch (m) {
    case Mode::run: return "run";
    case Mode::sweep_k: return "sweep-k";
    case Mode::ablate: return "ablate";
    }
    return "run";
}

int RunSummary::exit_code() const {
    if (total > 0 && failed == total) return 3;
    if (failed > 0) return 2;
    return 0;
}

std::string CellKey::id() const {
    std::string name;
    for (char c : dataset) {
        const auto u = static_cast<unsigned char>(c);
        name += (std::isalnum(u) || c == '-' || c == '.') ? c : '_';
    }
    return name + "__H" + std::to_string(horizon) + "__w" + std::to_string(window) + "__" +
           std::string(prompts::to_string(strategy)) + "__k" + std::to_string(breath_k);
}

void to_json(json& j, const CellKey& k) {
    j = json{{"id", k.id()},
             {"dataset", k.dataset},
             {"frequency", k.frequency},
             {"split", k.split},
             {"horizon", k.horizon},
             {"window", k.window},
             {"strategy", prompts::to_string(k.strategy)},
             {"breath_k", k.breath_k}};
}

void from_json(const json& j, CellKey& k) {
    k.dataset = j.at("dataset").get<std::string>();
    k.frequency = j.at("frequency").get<std::string>();
    k.split = j.value("split", std::string{});
    k.horizon = j.at("horizon").get<std::size_t>();
    k.window = j.at("window").get<std::size_t>();
    k.strategy = prompts::parse_strategy(j.at("strategy").get<std::string>());
    k.breath_k = j.at("breath_k").get<std::size_t>();
}

void to_json(json& j, const StoredCell& c) {
    j = json{{"cell", c.key},
             {"status", c.ok ? "ok" : "failed"},
             {"error", c.error},
             {"record", c.record ? json(*c.record) : json(nullptr)}};
}

void from_json(const json& j, StoredCell& c) {
    c.key = j.at("cell").get<CellKey>();
    const auto status = j.at("status").get<std::string>();
    if (status != "ok" && status != "failed") throw Error("bad cell status '" + status + "'");
    c.ok = status == "ok";
    c.error = j.value("error", std::string{});
    c.record.reset();
    if (j.contains("record") && !j.at("record").is_null()) c.record = j.at("record").get<eval::EvalRecord>();
    if (c.ok && !c.record) throw Error("cell " + c.key.id() + " is ok but has no record");
}

void write_file_atomic(const fs::path& path, const std::string& content) {
    static std::atomic<std::uint64_t> counter{0};
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const auto tmp = path.parent_path() /
                     ("." + path.filename().string() + "." + std::to_string(::getpid()) + "." +
                      std::to_string(counter.fetch_add(1)) + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write " + tmp.string());
        out << content;
        out.flush();
        if (!out) throw Error("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot move " + path.string() + " into place");
    }
}

namespace {

struct PlannedCell {
    CellKey key;
    const datasets::DatasetSpec* dataset = nullptr;
    const ForecastTask* task = nullptr;
    prompts::PromptSpec spec;
};

std::string split_label(const datasets::DatasetSpec& s) {
    if (std::holds_alternative<datasets::BenchmarkSplit>(s.protocol)) return "benchmark";
    return s.test_cutoff ? "concurrent" : "fixed";
}

std::vector<std::pair<prompts::Strategy, std::size_t>> cell_strategies(
    const ExperimentConfig& config, const DatasetEntry& d, Mode mode) {
    const auto k = config.breath_k_for(d);
    std::vector<std::pair<prompts::Strategy, std::size_t>> out;
    switch (mode) {
    case Mode::run:
        for (auto s : config.strategies) out.emplace_back(s, k);
        break;
    case Mode::ablate:
        for (auto s : eval::kAblationStrategies) out.emplace_back(s, k);
        break;
    case Mode::sweep_k: {
        auto ks = config.ks;
        std::sort(ks.begin(), ks.end());
        ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
        for (auto kk : ks) {
            out.emplace_back(kk == 0 ? prompts::Strategy::lstprompt_no_breath
                                     : prompts::Strategy::lstprompt,
                             kk);
        }
        break;
    }
    }
    return out;
}

std::optional<StoredCell> read_cell(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return json::parse(buf.str()).get<StoredCell>();
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

std::shared_ptr<llm::Backend> build_backend(const ExperimentConfig& config,
                                            const RunRequest& request) {
    std::shared_ptr<llm::Backend> backend = request.backend_override;
    if (!backend) backend = llm::make_backend(config.backend);
    // Live calls are cached by default. A recording run is not: cache hits
    // would leave holes in the cassette.
    std::optional<fs::path> cache_dir = config.cache_dir;
    if (!cache_dir && config.backend.kind == llm::BackendKind::http_chat && !request.backend_override) {
        cache_dir = config.output_dir / "cache";
    }
    if (!cache_dir || config.backend.kind == llm::BackendKind::recording) return backend;
    return std::make_shared<llm::CachedBackend>(
        backend, std::make_shared<llm::ResponseCache>(*cache_dir),
        config.backend.effective_model_id(), config.backend.effective_temperature(),
        static_cast<std::size_t>(config.backend.samples));
}

json manifest_json(const ExperimentConfig& config, Mode mode, const RunSummary* summary) {
    json j{{"tool", "tsprompt"},
           {"version", kVersion},
           {"git_revision", kGitRevision},
           {"mode", to_string(mode)},
           {"config", config_to_json(config)}};
    if (summary) {
        j["cells"] = {{"total", summary->total},
                      {"executed", summary->executed},
                      {"skipped", summary->skipped},
                      {"failed", summary->failed}};
    }
    return j;
}

/// records.jsonl: one manifest line, then every record file sorted by cell id.
void collate_records(const fs::path& run_dir, const json& manifest) {
    std::vector<fs::path> files;
    const auto dir = run_dir / "records";
    if (fs::exists(dir)) {
        for (const auto& e : fs::directory_iterator(dir)) {
            const auto name = e.path().filename().string();
            if (e.is_regular_file() && e.path().extension() == ".json" && name.front() != '.') {
                files.push_back(e.path());
            }
        }
    }
    std::sort(files.begin(), files.end());
    std::string out = json{{"manifest", manifest}}.dump() + "\n";
    for (const auto& f : files) {
        const auto cell = read_cell(f);
        if (!cell) throw Error("unreadable record file " + f.string());
        out += json(*cell).dump() + "\n";
    }
    write_file_atomic(run_dir / "records.jsonl", out);
}

} // namespace

RunSummary run_experiment(const ExperimentConfig& config, const RunRequest& request) {
    config.validate();
    if (request.mode == Mode::sweep_k && config.ks.empty()) {
        throw ConfigError("ks", "sweep-k needs a non-empty list of breath frequencies");
    }

    // Load everything before touching the backend so data errors surface early.
    std::vector<std::vector<ForecastTask>> tasks(config.datasets.size());
    for (std::size_t d = 0; d < config.datasets.size(); ++d) {
        const auto& spec = config.datasets[d].spec;
        tasks[d] = datasets::make_tasks(datasets::load_series(spec), spec);
    }

    std::vector<PlannedCell> cells;
    for (std::size_t d = 0; d < config.datasets.size(); ++d) {
        const auto& entry = config.datasets[d];
        std::map<std::size_t, std::size_t> windows_seen;
        for (const auto& task : tasks[d]) {
            const auto window = windows_seen[task.horizon()]++;
            for (const auto& [strategy, k] : cell_strategies(config, entry, request.mode)) {
                PlannedCell cell;
                cell.dataset = &entry.spec;
                cell.task = &task;
                cell.spec = eval::make_prompt_spec(task, strategy, entry.spec.context(), k, config.render);
                cell.key = CellKey{entry.spec.name, std::string(to_string(entry.spec.frequency)),
                                   task.horizon(), window, strategy, cell.spec.breath_k,
                                   split_label(entry.spec)};
                cells.push_back(std::move(cell));
            }
        }
    }
    std::sort(cells.begin(), cells.end(),
              [](const PlannedCell& a, const PlannedCell& b) { return a.key.id() < b.key.id(); });
    cells.erase(std::unique(cells.begin(), cells.end(),
                            [](const PlannedCell& a, const PlannedCell& b) {
                                return a.key.id() == b.key.id();
                            }),
                cells.end());

    const auto& run_dir = config.output_dir;
    fs::create_directories(run_dir);
    RunSummary summary;
    summary.run_dir = run_dir;
    summary.total = cells.size();
    summary.dry_run = request.dry_run;

    std::mutex io;
    auto log = [&](const std::string& line) {
        if (!request.log) return;
        std::lock_guard lock(io);
        *request.log << line << '\n';
    };

    const auto options_for = [&](const PlannedCell& c) {
        eval::RunOptions o;
        o.codec = config.codec;
        o.fit_scale = config.fit_scale;
        o.normalize_input = config.normalize_input;
        o.aggregation = config.aggregation;
        o.protocol = c.dataset->metric;
        o.retry_on_decode_failure = config.retry_on_decode_failure;
        return o;
    };

    if (request.dry_run) {
        for (const auto& c : cells) {
            const auto prepared = eval::prepare_prompt(*c.task, c.spec, options_for(c));
            write_file_atomic(run_dir / "prompts" / (c.key.id() + ".txt"), prepared.prompt.text);
        }
        log("rendered " + std::to_string(cells.size()) + " prompts into " + (run_dir / "prompts").string());
        return summary;
    }

    write_file_atomic(run_dir / "manifest.json", manifest_json(config, request.mode, nullptr).dump(2) + "\n");
    const auto backend = build_backend(config, request);
    const auto model_id = config.backend.effective_model_id();
    std::atomic<std::size_t> executed{0}, skipped{0}, failed{0}, done{0};

    eval::parallel_for(cells.size(), config.workers, [&](std::size_t i) {
        const auto& c = cells[i];
        const auto id = c.key.id();
        const auto path = run_dir / "records" / (id + ".json");
        const auto options = options_for(c);
        const auto prompt_hash =
            llm::sha256_hex(eval::prepare_prompt(*c.task, c.spec, options).prompt.text);

        if (const auto prior = read_cell(path);
            prior && prior->ok && prior->record->prompt_hash == prompt_hash &&
            prior->record->model_id == model_id) {
            ++skipped;
            log("[" + std::to_string(++done) + "/" + std::to_string(cells.size()) + "] " + id + " skipped");
            return;
        }

        StoredCell stored;
        stored.key = c.key;
        try {
            stored.record = eval::run_task(*c.task, c.spec, *backend, model_id, options);
            stored.record->window = c.key.window;
            stored.ok = true;
        } catch (const std::exception& e) {
            stored.error = e.what();
            ++failed;
        }
        ++executed;
        write_file_atomic(path, json(stored).dump(2) + "\n");
        log("[" + std::to_string(++done) + "/" + std::to_string(cells.size()) + "] " + id + " " +
            (stored.ok ? "ok " + eval::format_metric(stored.record->reported_metric())
                       : "FAILED: " + stored.error));
    });

    summary.executed = executed;
    summary.skipped = skipped;
    summary.failed = failed;
    const auto manifest = manifest_json(config, request.mode, &summary);
    write_file_atomic(run_dir / "manifest.json", manifest.dump(2) + "\n");
    collate_records(run_dir, manifest);
    return summary;
}

std::vector<StoredCell> load_run(const fs::path& run_dir) {
    std::ifstream in(run_dir / "records.jsonl", std::ios::binary);
    if (!in) throw EmptyRun("no records.jsonl in " + run_dir.string());
    std::vector<StoredCell> cells;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = json::parse(line);
            if (j.contains("manifest")) continue;
            cells.push_back(j.get<StoredCell>());
        } catch (const std::exception& e) {
            throw Error((run_dir / "records.jsonl").string() + ":" + std::to_string(line_no) + ": " +
                        e.what());
        }
    }
    if (cells.empty()) throw EmptyRun("run " + run_dir.string() + " has no cell records");
    return cells;
}

} // namespace tsprompt::experiment
