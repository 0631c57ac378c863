#include <atomic>
#include <chrono>
#include <cstdlib>
#include <map>
#include <optional>
#include <thread>

#include "sparselab/eval.hpp"

namespace sparselab {

namespace {

struct Cell {
    BackboneKind backbone;
    Method method;
    BudgetSpec budget;
    TaskVariant task;
    std::uint64_t seed;
    std::size_t order = 0;
};

bool method_captures(Method m, const ExperimentConfig& cfg) {
    if (m == Method::moba) return cfg.h1_include_moba;
    return true;
}

}  // namespace

std::uint64_t env_worker_override(std::size_t fallback) {
    if (const char* env = std::getenv("SPARSELAB_WORKERS")) {
        try {
            const auto n = std::stoull(env);
            if (n >= 1) return n;
        } catch (const std::exception&) {
        }
    }
    return fallback;
}

std::vector<RunResult> run_grid(const ExperimentConfig& cfg, ResultStore& store,
                                const GridOptions& opts) {
    cfg.validate();
    const std::string fp = cfg.fingerprint();

    // Canonical cell order: seed, task, backbone, method, budget.
    std::vector<Cell> cells;
    for (std::uint64_t seed : cfg.seeds)
        for (TaskVariant task : cfg.tasks)
            for (BackboneKind backbone : cfg.backbones)
                for (Method method : cfg.methods)
                    for (const BudgetSpec& budget : cfg.budgets)
                        cells.push_back({backbone, method, budget, task, seed, cells.size()});

    std::vector<std::optional<RunResult>> results(cells.size());

    // Reuse stored cells on resume.
    std::map<std::string, RunResult> stored;
    if (opts.resume)
        for (const RunResult& r : store.load()) stored.emplace(r.cell_key(), r);

    std::vector<std::size_t> fresh;
    for (const Cell& c : cells) {
        RunResult probe;
        probe.fingerprint = fp;
        probe.backbone = c.backbone;
        probe.method = c.method;
        probe.budget = c.budget;
        probe.task = c.task;
        probe.seed = c.seed;
        const auto it = stored.find(probe.cell_key());
        if (opts.resume && it != stored.end()) {
            results[c.order] = it->second;
        } else if (opts.cell_limit == 0 || fresh.size() < opts.cell_limit) {
            fresh.push_back(c.order);
        }
    }

    // Group fresh cells by (seed, task) so the planted states are built once
    // per sample and shared across every cell of the group.
    std::map<std::pair<std::uint64_t, TaskVariant>, std::vector<std::size_t>> groups;
    for (std::size_t idx : fresh)
        groups[{cells[idx].seed, cells[idx].task}].push_back(idx);
    std::vector<std::vector<std::size_t>> group_list;
    for (auto& [key, idxs] : groups) group_list.push_back(std::move(idxs));

    auto process_group = [&](const std::vector<std::size_t>& group) {
        const std::uint64_t seed = cells[group.front()].seed;
        const TaskVariant task = cells[group.front()].task;
        std::vector<NiahSample> samples;
        try {
            samples = generate_split(task, cfg.n_samples, cfg.context_len,
                                     sample_master_seed(seed, task));
        } catch (const CapacityError& e) {
            throw CapacityError(std::string("grid cell (task ") + to_string(task) +
                                ", seed " + std::to_string(seed) + "): " + e.what());
        }

        std::vector<BackboneKind> kinds;
        for (std::size_t idx : group)
            if (std::find(kinds.begin(), kinds.end(), cells[idx].backbone) == kinds.end())
                kinds.push_back(cells[idx].backbone);

        struct Accum {
            double em_sum = 0.0;
            std::vector<double> hit_sums;
            double wall_ms = 0.0;
        };
        std::map<std::size_t, Accum> accum;
        for (std::size_t idx : group) accum[idx] = Accum{};

        for (const NiahSample& sample : samples) {
            std::map<BackboneKind, std::vector<HeadEvalState>> heads;
            for (std::size_t h = 0; h < cfg.n_heads; ++h) {
                const std::uint64_t ps = planted_head_seed(seed, sample.seed, h);
                const Matrix emb = embed_tokens(sample, cfg.planted_spec(ps));
                for (BackboneKind kind : kinds)
                    heads[kind].push_back(build_head_eval_state(sample, cfg, kind, ps, &emb));
            }
            for (std::size_t idx : group) {
                const Cell& c = cells[idx];
                const bool capture = cfg.capture_hits && method_captures(c.method, cfg);
                const auto t0 = std::chrono::steady_clock::now();
                const SampleScore s = score_sample_with_states(
                    sample, cfg, c.method, c.budget, heads.at(c.backbone), capture, false);
                const auto t1 = std::chrono::steady_clock::now();
                Accum& a = accum[idx];
                a.em_sum += s.em;
                a.wall_ms += std::chrono::duration<double, std::milli>(t1 - t0).count();
                if (capture) {
                    if (a.hit_sums.empty()) a.hit_sums.resize(cfg.n_heads, 0.0);
                    for (std::size_t h = 0; h < cfg.n_heads; ++h)
                        a.hit_sums[h] += s.head_hits[h];
                }
            }
        }

        for (std::size_t idx : group) {
            const Cell& c = cells[idx];
            const Accum& a = accum[idx];
            RunResult r;
            r.fingerprint = fp;
            r.backbone = c.backbone;
            r.method = c.method;
            r.budget = c.budget;
            r.task = c.task;
            r.seed = c.seed;
            r.top_k = resolved_top_k(cfg, c.method, c.budget);
            r.n_samples = cfg.n_samples;
            r.accuracy = 100.0 * a.em_sum / static_cast<double>(cfg.n_samples);
            if (!a.hit_sums.empty()) {
                r.head_hit_rates.resize(cfg.n_heads);
                for (std::size_t h = 0; h < cfg.n_heads; ++h)
                    r.head_hit_rates[h] =
                        a.hit_sums[h] / static_cast<double>(cfg.n_samples);
            }
            r.wall_ms = a.wall_ms;
            store.append(r);
            results[idx] = r;
        }
    };

    const std::size_t workers =
        std::max<std::size_t>(1, std::min(opts.workers, group_list.size()));
    if (workers <= 1) {
        for (const auto& group : group_list) process_group(group);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (;;) {
                        const std::size_t i = next.fetch_add(1);
                        if (i >= group_list.size()) break;
                        process_group(group_list[i]);
                    }
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        for (auto& t : pool) t.join();
        for (const auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    std::vector<RunResult> out;
    out.reserve(cells.size());
    for (const auto& r : results)
        if (r) out.push_back(*r);
    return out;
}

}  // namespace sparselab
