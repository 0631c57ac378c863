// sparselab command line: validate configs, generate task splits, run
// experiment grids, run the H1/H2 analyses, and render reports.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "sparselab/eval.hpp"

using namespace sparselab;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
    std::vector<std::uint64_t> seeds;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) seeds.push_back(std::stoull(item));
    return seeds;
}

ExperimentConfig load_with_overrides(const std::string& config_path,
                                     const std::string& seed_override) {
    ExperimentConfig cfg = load_config_file(config_path);
    if (!seed_override.empty()) {
        cfg.seeds = parse_seed_list(seed_override);
        cfg.validate();
    }
    return cfg;
}

std::size_t resolve_workers(std::size_t flag_value) {
    if (flag_value > 0) return flag_value;
    return static_cast<std::size_t>(env_worker_override(1));
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparselab: query-aware sparse attention over decaying-memory KV states"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "out";
    std::string seed_override;
    std::size_t workers = 0;
    bool resume = false;

    auto* validate = app.add_subcommand("validate", "lint a config file");
    validate->add_option("--config", config_path, "config file")->required();

    auto* generate = app.add_subcommand("generate", "write task splits as jsonl");
    generate->add_option("--config", config_path, "config file")->required();
    generate->add_option("--out", out_dir, "output directory");
    generate->add_option("--seeds", seed_override, "comma-separated seed list");

    auto* run = app.add_subcommand("run", "execute the experiment grid");
    run->add_option("--config", config_path, "config file")->required();
    run->add_option("--out", out_dir, "output directory");
    run->add_option("--seeds", seed_override, "comma-separated seed list");
    run->add_option("--workers", workers, "concurrent grid groups");
    run->add_flag("--resume", resume, "reuse cells already in the result store");

    bool h1 = false, h2 = false;
    std::string ablation_seeds = "101,102,103,104,105";
    auto* analyze = app.add_subcommand("analyze", "head hit rates and random-selector ablation");
    analyze->add_option("--config", config_path, "config file")->required();
    analyze->add_option("--out", out_dir, "output directory");
    analyze->add_option("--seeds", ablation_seeds, "ablation seeds (default 5)");
    analyze->add_option("--workers", workers, "concurrent grid groups");
    analyze->add_flag("--h1", h1, "capture per-head hit rates");
    analyze->add_flag("--h2", h2, "random-selector ablation");

    std::string in_path = "out/results.jsonl";
    std::string format = "both";
    auto* report = app.add_subcommand("report", "render tables and plot data");
    report->add_option("--in", in_path, "results jsonl");
    report->add_option("--out", out_dir, "output directory");
    report->add_option("--format", format, "table | plot_data | both");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) {
            const ExperimentConfig cfg = load_config_file(config_path);
            const std::size_t cells = cfg.backbones.size() * cfg.methods.size() *
                                      cfg.budgets.size() * cfg.tasks.size() * cfg.seeds.size();
            std::cout << "config OK, fingerprint " << cfg.fingerprint() << ", " << cells
                      << " grid cells\n";
            return 0;
        }

        if (generate->parsed()) {
            const ExperimentConfig cfg = load_with_overrides(config_path, seed_override);
            fs::create_directories(out_dir);
            for (std::uint64_t seed : cfg.seeds)
                for (TaskVariant task : cfg.tasks) {
                    const auto samples = generate_split(task, cfg.n_samples, cfg.context_len,
                                                        sample_master_seed(seed, task));
                    const fs::path file = fs::path(out_dir) /
                                          ("samples_" + std::string(to_string(task)) +
                                           "_seed" + std::to_string(seed) + ".jsonl");
                    std::ofstream out(file);
                    for (const auto& s : samples) out << to_json_line(s) << '\n';
                    std::cout << file.string() << ": " << samples.size() << " samples\n";
                }
            return 0;
        }

        if (run->parsed()) {
            const ExperimentConfig cfg = load_with_overrides(config_path, seed_override);
            GridOptions opts;
            opts.resume = resume;
            opts.workers = resolve_workers(workers);
            ResultStore store(fs::path(out_dir) / "results.jsonl");
            const auto t0 = std::chrono::steady_clock::now();
            const auto results = run_grid(cfg, store, opts);
            const double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            std::cout << results.size() << " cells in " << store.path().string() << " ("
                      << secs << "s, " << opts.workers << " workers)\n";
            return 0;
        }

        if (analyze->parsed()) {
            const ExperimentConfig cfg = load_config_file(config_path);
            if (!h1 && !h2) h1 = h2 = true;
            if (h1) {
                ExperimentConfig hit_cfg = cfg;
                hit_cfg.capture_hits = true;
                GridOptions opts;
                opts.workers = resolve_workers(workers);
                ResultStore store(fs::path(out_dir) / "results_h1.jsonl");
                const auto results = run_grid(hit_cfg, store, opts);
                emit_report(results, "plot_data", fs::path(out_dir) / "h1");
                std::cout << "h1: " << results.size() << " cells, plot data in "
                          << (fs::path(out_dir) / "h1").string() << "\n";
            }
            if (h2) {
                const auto seeds = parse_seed_list(ablation_seeds);
                const auto records = run_random_ablation(cfg, seeds);
                emit_ablation_report(records, fs::path(out_dir) / "h2");
                std::cout << "h2: " << records.size() << " ablation rows over "
                          << seeds.size() << " seeds in "
                          << (fs::path(out_dir) / "h2").string() << "\n";
            }
            return 0;
        }

        if (report->parsed()) {
            const auto results = ResultStore(in_path).load();
            if (format == "table" || format == "both")
                emit_report(results, "table", out_dir);
            if (format == "plot_data" || format == "both")
                emit_report(results, "plot_data", out_dir);
            std::cout << results.size() << " records rendered into " << out_dir << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
