#include "tsprompt/experiment.hpp"

#include <doctest.h>

#include <atomic>
#include <fstream>
#include <sstream>

using namespace tsprompt;
using namespace tsprompt::experiment;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kRoot = TSPROMPT_SOURCE_DIR;

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("tsprompt_exp_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

json dataset(const std::string& name, const std::string& file, const std::string& ts,
             const std::string& target, const std::string& freq) {
    return {{"name", name},
            {"source", (kRoot / "data" / "fixtures" / file).string()},
            {"timestamp_column", ts},
            {"target_column", target},
            {"frequency", freq}};
}

json two_by_two(const fs::path& out) {
    return {{"output_dir", out.string()},
            {"strategies", {"naive", "lstprompt"}},
            {"backend", {{"kind", "persistence_oracle"}}},
            {"codec", {{"precision", 2}, {"scale", 1.0}}},
            {"datasets",
             {dataset("AirPassengers", "air_passengers.csv", "Month", "Passengers", "month"),
              dataset("Periodic", "periodic.csv", "Month", "Value", "month")}}};
}

json concurrent(const std::string& name, const std::string& file, const std::string& ts,
                const std::string& target, const std::string& freq, std::vector<int> horizons) {
    auto d = dataset(name, file, ts, target, freq);
    d["protocol"] = {{"type", "fixed_horizons"}, {"horizons", horizons}};
    d["test_cutoff"] = "2023-06-30";
    d["metric"] = "normalized";
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

/// records.jsonl without its manifest line, whose counters change per run.
std::string cell_lines(const fs::path& run_dir) {
    const auto all = slurp(run_dir / "records.jsonl");
    return all.substr(all.find('\n') + 1);
}

/// Counts calls; fails prompts containing the marker ("*" fails all).
class CountingBackend final : public llm::Backend {
public:
    explicit CountingBackend(std::string fail_dataset_marker = {})
        : inner_(llm::BackendConfig{}), marker_(std::move(fail_dataset_marker)) {}

    std::string id() const override { return inner_.id(); }

    std::vector<llm::Completion> complete(const prompts::PromptText& prompt,
                                          const llm::TaskMeta& meta) override {
        ++calls;
        if (marker_ == "*" || (!marker_.empty() && prompt.text.find(marker_) != std::string::npos)) {
            throw llm::ProviderError("scripted failure");
        }
        return inner_.complete(prompt, meta);
    }

    std::atomic<int> calls{0};

private:
    llm::OracleBackend inner_;
    std::string marker_;
};

} // namespace

TEST_CASE("two datasets x two strategies on the persistence oracle") {
    const auto out = fresh_dir("grid");
    const auto config = parse_config(two_by_two(out), out);
    const auto summary = run_experiment(config, {});
    CHECK(summary.total == 4);
    CHECK(summary.executed == 4);
    CHECK(summary.exit_code() == 0);

    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(out / "records")) files += e.path().extension() == ".json";
    CHECK(files == 4);
    const auto cells = load_run(out);
    REQUIRE(cells.size() == 4);
    CHECK(cells[0].key.id() == "AirPassengers__H29__w0__lstprompt__k12");
    CHECK(cells[1].key.id() == "AirPassengers__H29__w0__naive__k0");
    for (const auto& c : cells) {
        CHECK(c.ok);
        // Traceability: the stored prompt hashes to the stored hash.
        CHECK(llm::sha256_hex(c.record->prompt_text) == c.record->prompt_hash);
        CHECK(c.record->completion_hashes().size() == 1);
    }
    CHECK(cells[0].record->mae == doctest::Approx(81.44827586206897).epsilon(1e-12));

    const auto manifest = json::parse(slurp(out / "manifest.json"));
    CHECK(manifest.at("config") == config_to_json(config));
    CHECK(manifest.contains("version"));
    CHECK(manifest.at("cells").at("failed") == 0);
}

TEST_CASE("rerun after deleting one record executes only that cell") {
    const auto out = fresh_dir("resume");
    const auto config = parse_config(two_by_two(out), out);
    auto backend = std::make_shared<CountingBackend>();
    RunRequest req;
    req.backend_override = backend;
    run_experiment(config, req);
    CHECK(backend->calls == 4);
    const auto before = cell_lines(out);

    fs::remove(out / "records" / "Periodic__H20__w0__naive__k0.json");
    const auto summary = run_experiment(config, req);
    CHECK(backend->calls == 5);
    CHECK(summary.executed == 1);
    CHECK(summary.skipped == 3);
    // The oracle is deterministic, so the collated records come back identical.
    CHECK(cell_lines(out) == before);

    // A different model id invalidates every cell.
    auto other = config;
    other.backend.model_id = "other-model";
    run_experiment(other, req);
    CHECK(backend->calls == 9);
}

TEST_CASE("cache turns a rerun into hits") {
    const auto out = fresh_dir("cache");
    auto j = two_by_two(out / "run");
    j["cache_dir"] = (out / "cache").string();
    const auto config = parse_config(j, out);
    auto backend = std::make_shared<CountingBackend>();
    RunRequest req;
    req.backend_override = backend;
    run_experiment(config, req);
    CHECK(backend->calls == 4);
    fs::remove_all(out / "run" / "records");
    run_experiment(config, req);
    CHECK(backend->calls == 4);
}

TEST_CASE("partial and total failure exit codes") {
    const auto out = fresh_dir("partial");
    const auto config = parse_config(two_by_two(out), out);
    RunRequest req;
    req.backend_override = std::make_shared<CountingBackend>("2000, 2400, 3100"); // Periodic history
    auto summary = run_experiment(config, req);
    CHECK(summary.failed == 2);
    CHECK(summary.exit_code() == 2);
    const auto cells = load_run(out);
    CHECK(std::count_if(cells.begin(), cells.end(), [](const StoredCell& c) { return !c.ok; }) == 2);

    // Failed cells are retried on the next run.
    req.backend_override = std::make_shared<CountingBackend>();
    summary = run_experiment(config, req);
    CHECK(summary.executed == 2);
    CHECK(summary.exit_code() == 0);

    const auto all = fresh_dir("allfail");
    req.backend_override = std::make_shared<CountingBackend>("*");
    CHECK(run_experiment(parse_config(two_by_two(all), all), req).exit_code() == 3);
}

TEST_CASE("config errors name the offending field") {
    const auto out = fresh_dir("cfg");
    auto expect_field = [&](json j, const std::string& field) {
        CAPTURE(field);
        try {
            parse_config(j, out);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(e.field() == field);
        }
    };
    auto j = two_by_two(out);
    j["strategies"] = {"naive", "lstprompt-turbo"};
    expect_field(j, "strategies[1]");

    j = two_by_two(out);
    j["datasets"][1]["protocl"] = {{"type", "benchmark"}};
    expect_field(j, "datasets[1].protocl");

    j = two_by_two(out);
    j["datasets"][0]["protocol"] = {{"type", "fixed_horizons"}, {"horizons", {4, -1}}};
    expect_field(j, "datasets[0].protocol.horizons[1]");

    j = two_by_two(out);
    j["backend"]["kind"] = "telepathy";
    expect_field(j, "backend.kind");

    j = two_by_two(out);
    j["seeds"] = {1, 2};
    expect_field(j, "seeds");

    j = two_by_two(out);
    j.erase("output_dir");
    expect_field(j, "output_dir");

    j = two_by_two(out);
    j["strategies"] = json::array();
    expect_field(j, "strategies");

    j = two_by_two(out);
    j["datasets"][1]["name"] = "AirPassengers";
    expect_field(j, "datasets[1].name");
}

TEST_CASE("relative paths resolve against the config file") {
    const auto dir = fresh_dir("relpath");
    fs::create_directories(dir / "conf");
    fs::copy_file(kRoot / "data" / "fixtures" / "periodic.csv", dir / "periodic.csv");
    json j{{"output_dir", "../out"},
           {"strategies", {"naive"}},
           {"datasets",
            {{{"name", "P"},
              {"source", "../periodic.csv"},
              {"timestamp_column", "Month"},
              {"target_column", "Value"},
              {"frequency", "month"}}}}};
    std::ofstream(dir / "conf" / "c.json") << j.dump();
    const auto c = load_config(dir / "conf" / "c.json");
    CHECK(c.output_dir == (dir / "out").lexically_normal());
    CHECK(c.datasets[0].spec.source == (dir / "periodic.csv").lexically_normal());
    // Canonical form survives a round trip.
    CHECK(config_to_json(parse_config(config_to_json(c), "/")) == config_to_json(c));
}

TEST_CASE("dry run renders prompts without a backend") {
    const auto out = fresh_dir("dry");
    const auto config = parse_config(two_by_two(out), out);
    auto backend = std::make_shared<CountingBackend>();
    RunRequest req;
    req.dry_run = true;
    req.backend_override = backend;
    const auto summary = run_experiment(config, req);
    CHECK(backend->calls == 0);
    CHECK(summary.total == 4);
    const auto prompt = slurp(out / "prompts" / "AirPassengers__H29__w0__naive__k0.txt");
    CHECK(prompt.find("29") != std::string::npos);
    CHECK_FALSE(fs::exists(out / "records"));
}

TEST_CASE("table2 report groups concurrent rows by dataset and horizon") {
    const auto out = fresh_dir("table2");
    json j{{"output_dir", out.string()},
           {"strategies", {"naive", "lstprompt"}},
           {"codec", {{"scale", 1.0}}},
           {"datasets",
            {concurrent("ILI", "ili_synthetic.csv", "WEEK_START", "ILITOTAL", "week", {4, 12, 20, 24}),
             concurrent("Stock", "stock_synthetic.csv", "Date", "Open", "day", {24, 48}),
             dataset("AirPassengers", "air_passengers.csv", "Month", "Passengers", "month")}}};
    run_experiment(parse_config(j, out), {});
    const auto files = write_report(out, Layout::table2);
    const auto table = slurp(files.table_md);
    std::vector<std::string> rows;
    std::istringstream lines(table);
    for (std::string line; std::getline(lines, line);) {
        if (line.rfind("| ILI", 0) == 0 || line.rfind("| Stock", 0) == 0) rows.push_back(line);
    }
    REQUIRE(rows.size() == 6);
    CHECK(rows[0].rfind("| ILI | 4 | NMAE |", 0) == 0);
    CHECK(rows[3].rfind("| ILI | 24 |", 0) == 0);
    CHECK(rows[4].rfind("| Stock | 24 |", 0) == 0);
    // Reference columns carry the label and are filled only for matching names.
    CHECK(table.find("LSTPrompt (published)") != std::string::npos);
    CHECK(rows[0].find("| 0.61 | 0.42 |") != std::string::npos);
    CHECK(table.find("AirPassengers") == std::string::npos);

    // Byte-identical on re-render.
    write_report(out, Layout::table2);
    CHECK(slurp(files.table_md) == table);
    CHECK(slurp(write_report(out, Layout::table1).table_md).find("| AirPassengers | 29 | MAE |") !=
          std::string::npos);
}

TEST_CASE("ksweep and ablation layouts") {
    const auto out = fresh_dir("sweep");
    json j = two_by_two(out);
    j["ks"] = {7, 0, 3, 5};
    const auto config = parse_config(j, out);
    RunRequest req;
    req.mode = Mode::sweep_k;
    CHECK(run_experiment(config, req).total == 8);
    const auto plot = slurp(write_report(out, Layout::ksweep).plot_csv);
    std::istringstream lines(plot);
    std::string line;
    std::getline(lines, line);
    CHECK(line == "k,nmae");
    std::vector<int> ks;
    while (std::getline(lines, line)) {
        CHECK(std::count(line.begin(), line.end(), ',') == 1);
        ks.push_back(std::stoi(line));
    }
    CHECK(ks == std::vector<int>{0, 3, 5, 7});

    CHECK_THROWS_AS(write_report(out, Layout::ablation), EmptyRun);
    req.mode = Mode::ablate;
    CHECK(run_experiment(config, req).total == 10);
    const auto table = slurp(write_report(out, Layout::ablation).table_md);
    CHECK(table.find("| AirPassengers | naive | 0 | 1 |") != std::string::npos);
    CHECK(table.find("| 0.0% |") != std::string::npos);

    auto no_ks = config;
    no_ks.ks.clear();
    req.mode = Mode::sweep_k;
    CHECK_THROWS_AS(run_experiment(no_ks, req), ConfigError);
}

TEST_CASE("report over an empty run directory") {
    const auto out = fresh_dir("empty");
    CHECK_THROWS_AS(write_report(out, Layout::table1), EmptyRun);
    std::ofstream(out / "records.jsonl") << json{{"manifest", json::object()}}.dump() << '\n';
    CHECK_THROWS_AS(load_run(out), EmptyRun);
    CHECK_THROWS_AS(parse_layout("table3"), Error);
}
