#include <map>

#include "sparselab/eval.hpp"

namespace sparselab {

// Random-selector ablation: the task split and planted model are pinned by
// the config's first seed; only the selector's random stream varies across
// the ablation seeds.
std::vector<AblationRecord> run_random_ablation(const ExperimentConfig& config,
                                                const std::vector<std::uint64_t>& seeds) {
    if (seeds.empty())
        throw ConfigError("random ablation requires a nonempty seed list");
    config.validate();

    std::vector<Method> methods;
    for (Method m : config.methods)
        if (m != Method::random_tokens) methods.push_back(m);
    if (methods.empty())
        throw ConfigError("random ablation requires at least one designed selector");

    const std::uint64_t data_seed = config.seeds.front();

    struct Key {
        Method method;
        BackboneKind backbone;
        std::size_t budget_idx;
        TaskVariant task;
        bool operator<(const Key& o) const {
            return std::tie(method, backbone, budget_idx, task) <
                   std::tie(o.method, o.backbone, o.budget_idx, o.task);
        }
    };
    std::map<Key, std::vector<double>> em_sums;  // per ablation seed

    for (TaskVariant task : config.tasks) {
        const std::vector<NiahSample> samples =
            generate_split(task, config.n_samples, config.context_len,
                           sample_master_seed(data_seed, task));
        for (const NiahSample& sample : samples) {
            std::map<BackboneKind, std::vector<HeadEvalState>> heads;
            for (std::size_t h = 0; h < config.n_heads; ++h) {
                const std::uint64_t ps = planted_head_seed(data_seed, sample.seed, h);
                const Matrix emb = embed_tokens(sample, config.planted_spec(ps));
                for (BackboneKind kind : config.backbones)
                    heads[kind].push_back(
                        build_head_eval_state(sample, config, kind, ps, &emb));
            }
            for (Method method : methods)
                for (BackboneKind kind : config.backbones)
                    for (std::size_t bi = 0; bi < config.budgets.size(); ++bi)
                        for (std::size_t si = 0; si < seeds.size(); ++si) {
                            const SampleScore s = score_sample_with_states(
                                sample, config, method, config.budgets[bi],
                                heads.at(kind), false, true, seeds[si]);
                            auto& sums = em_sums[{method, kind, bi, task}];
                            if (sums.empty()) sums.resize(seeds.size(), 0.0);
                            sums[si] += s.em;
                        }
        }
    }

    std::vector<AblationRecord> out;
    for (const auto& [key, sums] : em_sums) {
        std::vector<double> pct(sums.size());
        for (std::size_t i = 0; i < sums.size(); ++i)
            pct[i] = 100.0 * sums[i] / static_cast<double>(config.n_samples);
        out.push_back({key.method, key.backbone, key.task, config.budgets[key.budget_idx],
                       AggregateResult::from_values(pct)});
    }
    return out;
}

}  // namespace sparselab
