#include "tsprompt/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace tsprompt::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view published_reference_source();

const json& published_reference() {
    static const json ref = json::parse(published_reference_source());
    return ref;
}

std::string_view to_string(Layout l) {
    switch (l) {
    case Layout::table1: return "table1";
    case Layout::table2: return "table2";
    case Layout::ablation: return "ablation";
    case Layout::ksweep: return "ksweep";
    }
    return "table1";
}

Layout parse_layout(std::string_view name) {
    for (auto l : {Layout::table1, Layout::table2, Layout::ablation, Layout::ksweep}) {
        if (to_string(l) == name) return l;
    }
    throw Error("unknown report layout '" + std::string(name) +
                "' (expected table1, table2, ablation or ksweep)");
}

namespace {

std::string num(double v) { return json(v).dump(); }

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

int strategy_rank(prompts::Strategy s) {
    int i = 0;
    for (auto t : prompts::kAllStrategies) {
        if (t == s) return i;
        ++i;
    }
    return i;
}

/// Mean of `value` over the cells; empty when any cell failed or lacks it.
template <class F>
std::optional<double> mean_of(const std::vector<const StoredCell*>& cells, F value) {
    if (cells.empty()) return std::nullopt;
    double sum = 0.0;
    for (const auto* c : cells) {
        if (!c->ok) return std::nullopt;
        const std::optional<double> v = value(*c->record);
        if (!v || !std::isfinite(*v)) return std::nullopt;
        sum += *v;
    }
    return sum / static_cast<double>(cells.size());
}

std::optional<double> reported(const eval::EvalRecord& r) {
    if (r.protocol == eval::MetricProtocol::normalized) return r.normalized_mae;
    return r.mae;
}

std::optional<double> nmae(const eval::EvalRecord& r) { return r.normalized_mae; }

std::string metric_cell(const std::optional<double>& v) { return eval::format_metric(v); }

const json* find_published(const std::string& table, const std::string& dataset, std::size_t h) {
    for (const auto& row : published_reference().at(table)) {
        if (row.at("dataset") == dataset && row.at("horizon") == h) return &row;
    }
    return nullptr;
}

std::string published_value(const json* row, const char* column) {
    if (!row || !row->contains(column)) return "-";
    return fixed(row->at(column).get<double>(), 2);
}

std::vector<const StoredCell*> select(const std::vector<StoredCell>& cells, Layout layout) {
    std::vector<const StoredCell*> out;
    for (const auto& c : cells) {
        const auto s = c.key.strategy;
        bool keep = false;
        switch (layout) {
        case Layout::table1: keep = c.key.split != "concurrent"; break;
        case Layout::table2: keep = c.key.split == "concurrent"; break;
        case Layout::ablation:
            keep = std::find(eval::kAblationStrategies.begin(), eval::kAblationStrategies.end(), s) !=
                   eval::kAblationStrategies.end();
            break;
        case Layout::ksweep:
            keep = s == prompts::Strategy::lstprompt || s == prompts::Strategy::lstprompt_no_breath;
            break;
        }
        if (keep) out.push_back(&c);
    }
    if (out.empty()) {
        throw EmptyRun("no records fit the " + std::string(to_string(layout)) + " layout");
    }
    return out;
}

// ---- table1 / table2 --------------------------------------------------------

struct StrategyLess {
    bool operator()(prompts::Strategy a, prompts::Strategy b) const {
        return strategy_rank(a) < strategy_rank(b);
    }
};

/// One row per (dataset, horizon), one column per strategy. Breath
/// strategies use one k per dataset: the one with the most cells, the
/// smallest on ties, so sweep leftovers do not blend into the table.
struct HorizonTable {
    std::set<prompts::Strategy, StrategyLess> columns;
    std::map<std::string, std::size_t> breath_k;
    std::map<std::pair<std::string, std::size_t>,
             std::map<prompts::Strategy, std::vector<const StoredCell*>, StrategyLess>>
        rows;
};

HorizonTable horizon_table(const std::vector<const StoredCell*>& cells) {
    HorizonTable t;
    std::map<std::string, std::map<std::size_t, std::size_t>> k_counts;
    for (const auto* c : cells) {
        if (prompts::uses_breath(c->key.strategy)) ++k_counts[c->key.dataset][c->key.breath_k];
    }
    for (const auto& [dataset, counts] : k_counts) {
        std::size_t best = counts.begin()->first, most = 0;
        for (const auto& [k, n] : counts) {
            if (n > most) best = k, most = n;
        }
        t.breath_k[dataset] = best;
    }
    for (const auto* c : cells) {
        if (prompts::uses_breath(c->key.strategy) && c->key.breath_k != t.breath_k[c->key.dataset]) {
            continue;
        }
        t.columns.insert(c->key.strategy);
        t.rows[{c->key.dataset, c->key.horizon}][c->key.strategy].push_back(c);
    }
    return t;
}

template <class Row>
std::string row_metric_name(const Row& row) {
    for (const auto& [col, cells] : row) {
        for (const auto* c : cells) {
            if (c->record) {
                return c->record->protocol == eval::MetricProtocol::normalized ? "NMAE" : "MAE";
            }
        }
    }
    return "-";
}

std::string render_horizon_table(const std::vector<const StoredCell*>& cells, Layout layout) {
    const auto t = horizon_table(cells);
    const std::string ref = layout == Layout::table1 ? "table1" : "table2";
    std::ostringstream out;
    out << (layout == Layout::table1 ? "# Benchmark datasets\n\n" : "# Concurrent datasets\n\n");
    out << "Computed values are means over rolling windows; k is the breath frequency of the "
           "breath strategies. Columns marked \"published\" are static reference values and were "
           "not computed by this run.\n\n";
    out << "| Dataset | H | Metric | k |";
    for (auto s : t.columns) out << ' ' << prompts::to_string(s) << " |";
    out << " LLMTime (published) | LSTPrompt (published) |\n";
    out << "|---|---:|---|---:|";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out << "---:|";
    out << "---:|---:|\n";
    for (const auto& [key, row] : t.rows) {
        const auto* pub = find_published(ref, key.first, key.second);
        const auto k = t.breath_k.find(key.first);
        out << "| " << key.first << " | " << key.second << " | " << row_metric_name(row) << " | "
            << (k == t.breath_k.end() ? std::string("-") : std::to_string(k->second)) << " |";
        for (auto s : t.columns) {
            const auto it = row.find(s);
            out << ' ' << (it == row.end() ? "-" : metric_cell(mean_of(it->second, reported))) << " |";
        }
        out << ' ' << published_value(pub, "LLMTime") << " | " << published_value(pub, "LSTPrompt")
            << " |\n";
    }
    return out.str();
}

std::string horizon_plot(const std::vector<const StoredCell*>& cells) {
    const auto t = horizon_table(cells);
    std::ostringstream out;
    out << "dataset,horizon,strategy,breath_k,value\n";
    for (const auto& [key, row] : t.rows) {
        for (const auto& [strategy, group] : row) {
            const auto v = mean_of(group, reported);
            out << csv_field(key.first) << ',' << key.second << ',' << prompts::to_string(strategy)
                << ',' << group.front()->key.breath_k << ',' << (v ? num(*v) : "") << '\n';
        }
    }
    return out.str();
}

// ---- ablation ---------------------------------------------------------------

struct AblationRow {
    prompts::Strategy strategy;
    std::size_t breath_k;
    std::vector<const StoredCell*> cells;
    std::optional<double> value;
    std::optional<double> delta_pct;
};

/// Per dataset: the five ablation strategies at one breath frequency (the
/// one used by the no-decomposition cells, the smallest if several).
std::map<std::string, std::vector<AblationRow>> ablation_rows(const std::vector<const StoredCell*>& cells) {
    std::map<std::string, std::vector<const StoredCell*>> by_dataset;
    for (const auto* c : cells) by_dataset[c->key.dataset].push_back(c);
    std::map<std::string, std::vector<AblationRow>> out;
    for (const auto& [dataset, group] : by_dataset) {
        std::optional<std::size_t> k;
        for (const auto* c : group) {
            if (c->key.strategy == prompts::Strategy::lstprompt_no_decomp) {
                k = k ? std::min(*k, c->key.breath_k) : c->key.breath_k;
            }
        }
        if (!k) continue;
        std::vector<AblationRow> rows;
        for (auto s : eval::kAblationStrategies) {
            AblationRow row{s, prompts::uses_breath(s) ? *k : 0, {}, std::nullopt, std::nullopt};
            for (const auto* c : group) {
                if (c->key.strategy == s && c->key.breath_k == row.breath_k) row.cells.push_back(c);
            }
            row.value = mean_of(row.cells, nmae);
            rows.push_back(std::move(row));
        }
        const auto base = rows.front().value;
        for (auto& row : rows) {
            if (base && row.value && *base != 0.0) row.delta_pct = (*row.value - *base) / *base * 100.0;
        }
        out[dataset] = std::move(rows);
    }
    if (out.empty()) throw EmptyRun("no dataset has a complete set of ablation cells");
    return out;
}

std::string render_ablation(const std::vector<const StoredCell*>& cells) {
    const auto& pub = published_reference().at("ablation");
    std::ostringstream out;
    out << "# Ablation\n\n"
        << "NMAE averaged over each dataset's horizons and windows; change is relative to the "
           "naive (base) prompt. The \"published\" column is a static reference value.\n\n"
        << "| Dataset | Strategy | k | Cells | NMAE | Change vs base | Change (published) |\n"
        << "|---|---|---:|---:|---:|---:|---:|\n";
    for (const auto& [dataset, rows] : ablation_rows(cells)) {
        for (const auto& row : rows) {
            const auto name = std::string(prompts::to_string(row.strategy));
            std::string published = "-";
            if (pub.at("dataset") == dataset && pub.at("delta_vs_base_pct").contains(name)) {
                published = fixed(pub.at("delta_vs_base_pct").at(name).get<double>(), 1) + "%";
            }
            out << "| " << dataset << " | " << name << " | " << row.breath_k << " | "
                << row.cells.size() << " | " << metric_cell(row.value) << " | "
                << (row.delta_pct ? fixed(*row.delta_pct, 1) + "%" : std::string("-")) << " | "
                << published << " |\n";
        }
    }
    return out.str();
}

std::string ablation_plot(const std::vector<const StoredCell*>& cells) {
    std::ostringstream out;
    out << "dataset,strategy,nmae\n";
    for (const auto& [dataset, rows] : ablation_rows(cells)) {
        for (const auto& row : rows) {
            out << csv_field(dataset) << ',' << prompts::to_string(row.strategy) << ','
                << (row.value ? num(*row.value) : "") << '\n';
        }
    }
    return out.str();
}

// ---- ksweep -----------------------------------------------------------------

/// dataset -> k -> cells. The no-breath strategy is k = 0.
std::map<std::string, std::map<std::size_t, std::vector<const StoredCell*>>> sweep_groups(
    const std::vector<const StoredCell*>& cells) {
    std::map<std::string, std::map<std::size_t, std::vector<const StoredCell*>>> out;
    for (const auto* c : cells) out[c->key.dataset][c->key.breath_k].push_back(c);
    return out;
}

std::string render_ksweep(const std::vector<const StoredCell*>& cells) {
    const auto& pub = published_reference().at("ksweep");
    std::ostringstream out;
    out << "# Breath frequency sweep\n\n"
        << "k = 0 is the prompt without breath instructions. NMAE averaged over each dataset's "
           "horizons and windows.\n\n"
        << "| Dataset | k | Cells | NMAE |\n|---|---:|---:|---:|\n";
    std::ostringstream best;
    for (const auto& [dataset, by_k] : sweep_groups(cells)) {
        std::optional<std::pair<double, std::size_t>> lowest;
        for (const auto& [k, group] : by_k) {
            const auto v = mean_of(group, nmae);
            out << "| " << dataset << " | " << k << " | " << group.size() << " | " << metric_cell(v)
                << " |\n";
            if (v && (!lowest || *v < lowest->first)) lowest = std::pair(*v, k);
        }
        best << "- " << dataset << ": best k = " << (lowest ? std::to_string(lowest->second) : "-");
        if (pub.at("dataset") == dataset) best << " (published: " << pub.at("best_k").get<int>() << ")";
        best << '\n';
    }
    out << '\n' << best.str();
    return out.str();
}

/// Two columns, k and NMAE averaged over datasets. Only k values swept on
/// every dataset appear, so each point averages the same datasets.
std::string ksweep_plot(const std::vector<const StoredCell*>& cells) {
    const auto groups = sweep_groups(cells);
    std::map<std::size_t, std::vector<std::optional<double>>> by_k;
    for (const auto& [dataset, by_dataset_k] : groups) {
        for (const auto& [k, group] : by_dataset_k) by_k[k].push_back(mean_of(group, nmae));
    }
    std::ostringstream out;
    out << "k,nmae\n";
    for (const auto& [k, values] : by_k) {
        if (values.size() != groups.size()) continue;
        std::optional<double> mean = 0.0;
        for (const auto& v : values) {
            if (!v) {
                mean.reset();
                break;
            }
            *mean += *v;
        }
        if (mean) *mean /= static_cast<double>(values.size());
        out << k << ',' << (mean ? num(*mean) : "") << '\n';
    }
    return out.str();
}

} // namespace

std::string render_rows_csv(const std::vector<StoredCell>& cells) {
    std::ostringstream out;
    out << "cell_id,dataset,split,frequency,horizon,window,strategy,breath_k,status,backend_id,"
           "model_id,protocol,lookback,codec_scale,mae,normalized_mae,reported,prompt_hash,"
           "completion_hashes,error\n";
    for (const auto& c : cells) {
        const auto& k = c.key;
        out << csv_field(k.id()) << ',' << csv_field(k.dataset) << ',' << k.split << ',' << k.frequency
            << ',' << k.horizon << ',' << k.window << ',' << prompts::to_string(k.strategy) << ','
            << k.breath_k << ',' << (c.ok ? "ok" : "failed") << ',';
        if (c.record) {
            const auto& r = *c.record;
            std::string hashes;
            for (const auto& h : r.completion_hashes()) hashes += (hashes.empty() ? "" : ";") + h;
            const auto rep = reported(r);
            out << csv_field(r.backend_id) << ',' << csv_field(r.model_id) << ','
                << eval::to_string(r.protocol) << ',' << r.lookback << ',' << num(r.codec_scale) << ','
                << num(r.mae) << ',' << (r.normalized_mae ? num(*r.normalized_mae) : "") << ','
                << (rep ? num(*rep) : "") << ',' << r.prompt_hash << ',' << hashes << ',';
        } else {
            out << ",,,,,,,,,,";
        }
        out << csv_field(c.error) << '\n';
    }
    return out.str();
}

std::string render_table(const std::vector<StoredCell>& cells, Layout layout) {
    const auto selected = select(cells, layout);
    switch (layout) {
    case Layout::table1:
    case Layout::table2: return render_horizon_table(selected, layout);
    case Layout::ablation: return render_ablation(selected);
    case Layout::ksweep: return render_ksweep(selected);
    }
    return {};
}

std::string render_plot_csv(const std::vector<StoredCell>& cells, Layout layout) {
    const auto selected = select(cells, layout);
    switch (layout) {
    case Layout::table1:
    case Layout::table2: return horizon_plot(selected);
    case Layout::ablation: return ablation_plot(selected);
    case Layout::ksweep: return ksweep_plot(selected);
    }
    return {};
}

ReportFiles write_report(const fs::path& run_dir, Layout layout) {
    const auto cells = load_run(run_dir);
    std::vector<StoredCell> rows;
    for (const auto* c : select(cells, layout)) rows.push_back(*c);
    const auto dir = run_dir / "report" / std::string(to_string(layout));
    ReportFiles files{dir / "rows.csv", dir / "table.md", dir / "plot.csv"};
    // Render everything before writing so a layout error leaves no partial report.
    const auto rows_csv = render_rows_csv(rows);
    const auto table = render_table(cells, layout);
    const auto plot = render_plot_csv(cells, layout);
    write_file_atomic(files.rows_csv, rows_csv);
    write_file_atomic(files.table_md, table);
    write_file_atomic(files.plot_csv, plot);
    return files;
}

} // namespace tsprompt::experiment
