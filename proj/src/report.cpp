#include <algorithm>
#include <fstream>
#include <map>

#include "sparselab/harness.hpp"

namespace sparselab {

namespace {

std::string format_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

void write_metadata(const std::filesystem::path& out_dir) {
    nlohmann::json j;
    j["accuracy_units"] = "percent exact match";
    j["std_convention"] = "population standard deviation (n divisor) over seeds";
    j["h1_head_ranking"] = "pooled across all heads of the analysis model";
    j["random_selector_modes"] =
        "forced first/local entries kept by default; fully uniform behind random_uniform";
    std::ofstream out(out_dir / "metadata.json");
    out << j.dump(2) << '\n';
}

struct RowKey {
    Method method;
    BackboneKind backbone;
    std::string budget;
    double fraction;
    std::size_t top_k;

    bool operator<(const RowKey& o) const {
        if (method != o.method) return static_cast<int>(method) < static_cast<int>(o.method);
        if (backbone != o.backbone)
            return static_cast<int>(backbone) < static_cast<int>(o.backbone);
        if (fraction != o.fraction) return fraction > o.fraction;  // larger budget first
        return budget < o.budget;
    }
};

}  // namespace

void emit_report(const std::vector<RunResult>& results, const std::string& format,
                 const std::filesystem::path& out_dir) {
    if (results.empty()) throw ConfigError("emit_report: no results");
    std::filesystem::create_directories(out_dir);

    // (row, task) -> accuracies ordered by seed
    std::map<RowKey, std::map<TaskVariant, std::map<std::uint64_t, double>>> table;
    std::size_t block_size = 0;
    for (const RunResult& r : results) {
        RowKey key{r.method, r.backbone, r.budget.label(), r.budget.fraction(), r.top_k};
        table[key][r.task][r.seed] = r.accuracy;
        block_size = r.budget.block_size;
    }
    std::vector<TaskVariant> present;
    for (TaskVariant t : all_tasks()) {
        bool found = false;
        for (const auto& [key, row] : table) found = found || row.count(t) > 0;
        if (found) present.push_back(t);
    }

    if (format == "table") {
        std::ofstream out(out_dir / "accuracy.tsv");
        out << "method\tbackbone\tblock_size\ttop_k\tbudget";
        for (TaskVariant t : present) out << '\t' << to_string(t);
        out << '\n';
        for (const auto& [key, row] : table) {
            out << to_string(key.method) << '\t' << to_string(key.backbone) << '\t'
                << block_size << '\t' << key.top_k << '\t' << key.budget;
            for (TaskVariant t : present) {
                out << '\t';
                const auto it = row.find(t);
                if (it == row.end()) {
                    out << "-";
                    continue;
                }
                std::vector<double> values;
                for (const auto& [seed, acc] : it->second) values.push_back(acc);
                const AggregateResult agg = AggregateResult::from_values(values);
                out << (values.size() > 1 ? agg.format() : format_pct(agg.mean));
            }
            out << '\n';
        }
        write_metadata(out_dir);
        return;
    }

    if (format == "plot_data") {
        {
            std::ofstream out(out_dir / "fig_accuracy_vs_budget.jsonl");
            for (const auto& [key, row] : table) {
                for (TaskVariant t : present) {
                    const auto it = row.find(t);
                    if (it == row.end()) continue;
                    std::vector<double> values;
                    for (const auto& [seed, acc] : it->second) values.push_back(acc);
                    const AggregateResult agg = AggregateResult::from_values(values);
                    nlohmann::json j;
                    j["plot"] = "accuracy_vs_budget";
                    j["method"] = to_string(key.method);
                    j["backbone"] = to_string(key.backbone);
                    j["task"] = to_string(t);
                    j["budget"] = key.budget;
                    j["budget_fraction"] = key.fraction;
                    j["accuracy"] = agg.mean;
                    j["accuracy_std"] = agg.stddev;
                    j["n_seeds"] = agg.n_seeds;
                    out << j.dump() << '\n';
                }
            }
        }
        {
            // per-head hit rates, ranked descending, averaged over seeds
            std::ofstream out(out_dir / "fig_top_head_hit_rates.jsonl");
            std::map<RowKey, std::map<TaskVariant, std::map<std::uint64_t, std::vector<double>>>>
                hits;
            for (const RunResult& r : results)
                if (!r.head_hit_rates.empty())
                    hits[{r.method, r.backbone, r.budget.label(), r.budget.fraction(),
                          r.top_k}][r.task][r.seed] = r.head_hit_rates;
            for (const auto& [key, row] : hits) {
                for (const auto& [task, by_seed] : row) {
                    std::vector<double> mean_rates;
                    for (const auto& [seed, rates] : by_seed) {
                        if (mean_rates.empty()) mean_rates.resize(rates.size(), 0.0);
                        for (std::size_t h = 0; h < rates.size(); ++h)
                            mean_rates[h] += rates[h] / static_cast<double>(by_seed.size());
                    }
                    std::sort(mean_rates.begin(), mean_rates.end(), std::greater<>());
                    for (std::size_t rank = 0; rank < mean_rates.size(); ++rank) {
                        nlohmann::json j;
                        j["plot"] = "top_head_hit_rates";
                        j["method"] = to_string(key.method);
                        j["backbone"] = to_string(key.backbone);
                        j["task"] = to_string(task);
                        j["budget"] = key.budget;
                        j["head_rank"] = rank + 1;
                        j["hit_rate"] = mean_rates[rank];
                        out << j.dump() << '\n';
                    }
                }
            }
        }
        write_metadata(out_dir);
        return;
    }

    throw ConfigError("emit_report: unknown format '" + format + "'");
}

void emit_ablation_report(const std::vector<AblationRecord>& records,
                          const std::filesystem::path& out_dir) {
    if (records.empty()) throw ConfigError("emit_ablation_report: no records");
    std::filesystem::create_directories(out_dir);

    std::ofstream tsv(out_dir / "ablation.tsv");
    tsv << "method\tbackbone\tbudget\ttask\taccuracy\tn_seeds\n";
    std::ofstream jsonl(out_dir / "ablation.jsonl");
    for (const AblationRecord& r : records) {
        tsv << to_string(r.method) << '\t' << to_string(r.backbone) << '\t'
            << r.budget.label() << '\t' << to_string(r.task) << '\t'
            << r.accuracy.format() << '\t' << r.accuracy.n_seeds << '\n';
        nlohmann::json j;
        j["method"] = to_string(r.method);
        j["backbone"] = to_string(r.backbone);
        j["budget"] = r.budget.label();
        j["task"] = to_string(r.task);
        j["mean"] = r.accuracy.mean;
        j["std"] = r.accuracy.stddev;
        j["per_seed"] = r.accuracy.per_seed;
        jsonl << j.dump() << '\n';
    }
    write_metadata(out_dir);
}

}  // namespace sparselab
