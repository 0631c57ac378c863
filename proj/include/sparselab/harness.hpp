#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparselab/analysis.hpp"

namespace sparselab {

// Full description of an experiment grid: every combination of
// backbone x method x budget x task is one cell, evaluated per seed.
// Worker count is deliberately not part of the config (and therefore not of
// the fingerprint); it comes from the CLI or the SPARSELAB_WORKERS variable.
struct ExperimentConfig {
    std::vector<BackboneKind> backbones{BackboneKind::standard,
                                        BackboneKind::memory_augmented};
    std::vector<Method> methods{Method::quest, Method::moba, Method::snapkv};
    std::vector<BudgetSpec> budgets;  // default 1/4, 1/8, 1/16
    std::size_t block_size = 64;
    std::size_t window = 64;
    std::vector<TaskVariant> tasks = all_tasks();
    std::size_t context_len = 512;
    std::size_t n_samples = 100;
    std::size_t n_heads = 2;
    std::vector<std::uint64_t> seeds{1};

    std::size_t head_dim = 32;
    double signal_gain = 10.0;
    double noise_scale = 0.8;

    GateMode gate_mode = GateMode::content;
    double gate_value = 0.5;  // constant mode only
    double gate_cap = 1.0 - 1.0 / 64.0;

    bool random_uniform = false;   // fully uniform random selection (no forced prior)
    bool snapkv_max_pool = false;  // max pooling over window scores instead of sum
    bool capture_hits = false;
    bool h1_include_moba = false;

    PlantedModelSpec planted_spec(std::uint64_t seed) const {
        return {head_dim, signal_gain, noise_scale, seed};
    }
    GateParams gate_params(std::uint64_t planted_seed) const {
        return make_gate_params(planted_spec(planted_seed), gate_mode, gate_value, gate_cap);
    }

    // Throws ConfigError naming the violated invariant.
    void validate() const;
    nlohmann::json canonical_json() const;
    std::string fingerprint() const;  // 16 hex chars, stable under key order
};

// Parses the line-oriented `key = value` format. Unknown keys are rejected;
// parse failures carry the offending line number.
ExperimentConfig load_config(const std::string& text);
ExperimentConfig load_config_file(const std::filesystem::path& path);

struct RunResult {
    std::string fingerprint;
    BackboneKind backbone = BackboneKind::standard;
    Method method = Method::quest;
    BudgetSpec budget;
    TaskVariant task = TaskVariant::S1;
    std::uint64_t seed = 0;
    std::size_t top_k = 0;  // resolved blocks (quest/moba) or tokens (snapkv/random)
    std::size_t n_samples = 0;
    double accuracy = 0.0;               // percent, in [0, 100]
    std::vector<double> head_hit_rates;  // present when hits were captured
    double wall_ms = 0.0;

    std::string cell_key() const;
    nlohmann::json to_json() const;
    static RunResult from_json(const nlohmann::json& j);
};

// Append-only line-delimited record store; one JSON record per completed
// cell, flushed immediately so interrupted runs can resume.
class ResultStore {
public:
    explicit ResultStore(std::filesystem::path file);

    const std::filesystem::path& path() const { return file_; }
    void append(const RunResult& r);
    std::vector<RunResult> load() const;
    bool has(const std::string& cell_key) const;

private:
    std::filesystem::path file_;
    std::set<std::string> keys_;
    mutable std::mutex mutex_;
};

struct GridOptions {
    bool resume = false;
    std::size_t workers = 1;
    std::size_t cell_limit = 0;  // stop after this many fresh cells (0 = all)
};

// Executes every grid cell per seed. Identical config + seeds reproduce
// bit-identical results; with resume, previously stored cells are reused.
// Returns the results for the requested grid in canonical cell order.
std::vector<RunResult> run_grid(const ExperimentConfig& cfg, ResultStore& store,
                                const GridOptions& opts = {});

// format "table": accuracy.tsv (+ metadata.json); format "plot_data":
// per-series records for budget curves and top-head hit-rate bars.
void emit_report(const std::vector<RunResult>& results, const std::string& format,
                 const std::filesystem::path& out_dir);

void emit_ablation_report(const std::vector<AblationRecord>& records,
                          const std::filesystem::path& out_dir);

std::uint64_t env_worker_override(std::size_t fallback);

}  // namespace sparselab
