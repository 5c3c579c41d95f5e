#include "tsprompt/experiment.hpp"
#include "tsprompt/version.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace fs = std::filesystem;
using namespace tsprompt;
using namespace tsprompt::experiment;

namespace {

/// Command-line values that win over the config file.
struct Overrides {
    std::string config;
    std::string output_dir;
    std::string cache_dir;
    std::string backend;
    std::string model;
    std::optional<double> temperature;
    std::optional<int> samples;
    std::optional<std::size_t> workers;
    std::optional<std::size_t> breath_k;
    std::vector<std::string> strategies;
    std::vector<std::size_t> ks;
    std::string cassette;
    bool dry_run = false;
};

void add_config_flags(CLI::App* app, Overrides& o) {
    app->add_option("config", o.config, "Experiment config file (JSON)")->required()->check(CLI::ExistingFile);
    app->add_option("-o,--output-dir", o.output_dir, "Run directory");
    app->add_option("--cache-dir", o.cache_dir, "Response cache directory");
    app->add_option("--backend", o.backend, "Backend kind");
    app->add_option("--model", o.model, "Model id");
    app->add_option("--temperature", o.temperature, "Sampling temperature");
    app->add_option("--samples", o.samples, "Completions per prompt");
    app->add_option("-j,--workers", o.workers, "Concurrent cells");
    app->add_option("--breath-k", o.breath_k, "Breath frequency for every dataset");
    app->add_option("--strategies", o.strategies, "Strategies to run")->delimiter(',');
    app->add_flag("--dry-run", o.dry_run, "Render prompts only; no backend calls");
}

ExperimentConfig load_with_overrides(const Overrides& o) {
    auto c = load_config(o.config);
    if (!o.output_dir.empty()) c.output_dir = fs::absolute(o.output_dir);
    if (!o.cache_dir.empty()) c.cache_dir = fs::absolute(o.cache_dir);
    if (!o.backend.empty()) {
        try {
            c.backend.kind = llm::parse_backend_kind(o.backend);
        } catch (const Error& e) {
            throw ConfigError("--backend", e.what());
        }
    }
    if (!o.model.empty()) c.backend.model_id = o.model;
    if (o.temperature) c.backend.temperature = *o.temperature;
    if (o.samples) c.backend.samples = *o.samples;
    if (o.workers) c.workers = *o.workers;
    if (o.breath_k) {
        c.breath_k = *o.breath_k;
        for (auto& d : c.datasets) d.breath_k.reset();
    }
    if (!o.strategies.empty()) {
        c.strategies.clear();
        for (const auto& s : o.strategies) {
            try {
                c.strategies.push_back(prompts::parse_strategy(s));
            } catch (const Error& e) {
                throw ConfigError("--strategies", e.what());
            }
        }
    }
    if (!o.ks.empty()) c.ks = o.ks;
    c.validate();
    return c;
}

int execute(const ExperimentConfig& config, Mode mode, bool dry_run) {
    RunRequest request;
    request.mode = mode;
    request.dry_run = dry_run;
    request.log = &std::cerr;
    const auto summary = run_experiment(config, request);
    if (dry_run) {
        std::cout << "dry run: " << summary.total << " prompts in " << (summary.run_dir / "prompts").string()
                  << '\n';
        return 0;
    }
    std::cout << "cells: " << summary.total << " executed: " << summary.executed
              << " skipped: " << summary.skipped << " failed: " << summary.failed << '\n'
              << "records: " << (summary.run_dir / "records.jsonl").string() << '\n';
    return summary.exit_code();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Zero-shot time-series forecasting with prompted language models"};
    app.set_version_flag("--version", std::string(kVersion) + " (" + kGitRevision + ")");
    app.require_subcommand(1);

    Overrides o;
    auto* run = app.add_subcommand("run", "Evaluate datasets x strategies");
    add_config_flags(run, o);

    auto* sweep = app.add_subcommand("sweep-k", "Sweep the breath frequency");
    add_config_flags(sweep, o);
    sweep->add_option("--ks", o.ks, "Breath frequencies (0 = no breath)")->delimiter(',');

    auto* ablate = app.add_subcommand("ablate", "Run the five-strategy ablation");
    add_config_flags(ablate, o);

    auto* record = app.add_subcommand("record", "Run through the configured backend and record a cassette");
    add_config_flags(record, o);
    record->add_option("--cassette", o.cassette, "Cassette file to append to")->required();

    auto* replay = app.add_subcommand("replay", "Run from a recorded cassette");
    add_config_flags(replay, o);
    replay->add_option("--cassette", o.cassette, "Cassette file")->required()->check(CLI::ExistingFile);

    std::string run_dir;
    std::string layout = "all";
    auto* report = app.add_subcommand("report", "Render tables and plot data from a run directory");
    report->add_option("run_dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    report->add_option("--layout", layout, "table1, table2, ablation, ksweep or all");

    std::string validate_path;
    auto* validate = app.add_subcommand("validate-config", "Check a config and print its canonical form");
    validate->add_option("config", validate_path, "Config file")->required()->check(CLI::ExistingFile);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return execute(load_with_overrides(o), Mode::run, o.dry_run);
        if (*sweep) return execute(load_with_overrides(o), Mode::sweep_k, o.dry_run);
        if (*ablate) return execute(load_with_overrides(o), Mode::ablate, o.dry_run);
        if (*record || *replay) {
            auto config = load_with_overrides(o);
            auto inner = std::make_shared<llm::BackendConfig>(config.backend);
            llm::BackendConfig wrapped;
            wrapped.kind = *record ? llm::BackendKind::recording : llm::BackendKind::replay;
            wrapped.cassette = fs::absolute(o.cassette);
            wrapped.samples = inner->samples;
            wrapped.inner = inner;
            config.backend = wrapped;
            config.validate();
            return execute(config, Mode::run, o.dry_run);
        }
        if (*report) {
            std::vector<Layout> layouts;
            if (layout == "all") {
                layouts = {Layout::table1, Layout::table2, Layout::ablation, Layout::ksweep};
            } else {
                layouts = {parse_layout(layout)};
            }
            load_run(run_dir); // EmptyRun before any layout is attempted
            int written = 0;
            for (auto l : layouts) {
                try {
                    const auto files = write_report(run_dir, l);
                    std::cout << to_string(l) << ": " << files.table_md.string() << '\n';
                    ++written;
                } catch (const EmptyRun& e) {
                    // "all" skips layouts the run has no cells for.
                    if (layouts.size() == 1) throw;
                    std::cerr << to_string(l) << ": skipped (" << e.what() << ")\n";
                }
            }
            if (written == 0) throw EmptyRun("no layout fits the records in " + run_dir);
            return 0;
        }
        if (*validate) {
            std::cout << config_to_json(load_config(validate_path)).dump(2) << '\n';
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}
