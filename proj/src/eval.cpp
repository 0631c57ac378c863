#include "sparselab/eval.hpp"

#include <algorithm>

#include "sparselab/rng.hpp"

namespace sparselab {

namespace {

constexpr std::uint64_t kSampleStream = 0x7A5C;
constexpr std::uint64_t kHeadStream = 0x6EAD;
constexpr std::uint64_t kSelectorStream = 0x5E1E;

}  // namespace

std::uint64_t sample_master_seed(std::uint64_t run_seed, TaskVariant task) {
    return mix_seed(run_seed, kSampleStream, static_cast<std::uint64_t>(task));
}

std::uint64_t planted_head_seed(std::uint64_t run_seed, std::uint64_t sample_seed,
                                std::size_t head) {
    return mix_seed(run_seed, kHeadStream, sample_seed, head);
}

HeadEvalState build_head_eval_state(const NiahSample& sample, const ExperimentConfig& cfg,
                                    BackboneKind kind, std::uint64_t planted_seed,
                                    const Matrix* embeddings) {
    HeadEvalState h;
    h.spec = cfg.planted_spec(planted_seed);
    Matrix fresh;
    if (!embeddings) {
        fresh = embed_tokens(sample, h.spec);
        embeddings = &fresh;
    }
    h.states = build_head_states(*embeddings, kind, cfg.gate_params(planted_seed));
    h.decode_queries = answer_queries(h.states, sample);
    h.codebook = value_codebook(h.spec);
    return h;
}

std::vector<CandidateSet> make_selections(const HeadEvalState& head, Method method,
                                          const BudgetSpec& budget,
                                          const ExperimentConfig& cfg,
                                          std::uint64_t selector_seed, bool randomized) {
    const std::size_t T = head.states.tokens();
    const std::size_t steps = head.decode_queries.rows();
    std::vector<CandidateSet> out;
    out.reserve(steps);

    if (method == Method::quest || method == Method::moba) {
        const std::size_t bs = budget.block_size;
        const std::size_t nb = (T + bs - 1) / bs;
        const std::size_t k = budget.top_k(nb);
        // decode queries attend over the full prefilled cache
        const std::vector<std::size_t> forced =
            nb == 1 ? std::vector<std::size_t>{0}
                    : std::vector<std::size_t>{0, block_of(T - 1, bs)};
        if (randomized) {
            const std::vector<std::size_t> rand_forced =
                cfg.random_uniform ? std::vector<std::size_t>{} : forced;
            for (std::size_t t = 0; t < steps; ++t) {
                CandidateSet sel = random_select(nb, k, rand_forced,
                                                 mix_seed(selector_seed, 0xB10C, t));
                sel.unit = SelectionUnit::block;
                sel.block_size = bs;
                out.push_back(std::move(sel));
            }
        } else {
            const BlockReps reps = method == Method::quest
                                       ? quest_block_reps(head.states.active_keys(), bs)
                                       : moba_block_reps(head.states.active_keys(), bs);
            for (std::size_t t = 0; t < steps; ++t)
                out.push_back(select_blocks(head.decode_queries.row_copy(t), reps,
                                            budget, forced));
        }
        return out;
    }

    if (method == Method::snapkv) {
        const std::size_t keep = budget.top_k(T);
        CandidateSet sel;
        if (randomized) {
            std::vector<std::size_t> forced;
            if (!cfg.random_uniform)
                for (std::size_t i = T - std::min(cfg.window, T); i < T; ++i)
                    forced.push_back(i);
            sel = random_select(T, std::max(keep, forced.size()), forced,
                                mix_seed(selector_seed, 0x70C3));
        } else {
            sel = snapkv_select(head.states, cfg.window, keep, cfg.snapkv_max_pool);
        }
        // selection happens once after prefilling and never changes
        out.assign(steps, sel);
        return out;
    }

    // selector-free baseline: uniform tokens, re-drawn at every step
    const std::size_t k = budget.top_k(T);
    for (std::size_t t = 0; t < steps; ++t)
        out.push_back(random_select(T, k, {}, mix_seed(selector_seed, 0xF8EE, t)));
    return out;
}

SampleScore score_sample_with_states(const NiahSample& sample, const ExperimentConfig& cfg,
                                     Method method, const BudgetSpec& budget,
                                     const std::vector<HeadEvalState>& heads,
                                     bool capture_hits, bool randomized,
                                     std::uint64_t selector_salt) {
    const std::size_t steps = sample.answer_steps();
    const std::size_t n_heads = heads.size();

    std::vector<std::vector<CandidateSet>> selections(n_heads);
    for (std::size_t h = 0; h < n_heads; ++h) {
        const std::uint64_t sel_seed =
            mix_seed(heads[h].spec.seed, kSelectorStream, static_cast<std::uint64_t>(method),
                     randomized ? 1u : 0u, selector_salt);
        selections[h] = make_selections(heads[h], method, budget, cfg, sel_seed, randomized);
    }

    std::vector<std::vector<std::pair<TokenId, Vector>>> codebooks;
    codebooks.reserve(n_heads);
    for (const auto& h : heads) codebooks.push_back(h.codebook);

    std::vector<TokenId> predicted(steps);
    std::vector<Vector> outputs(n_heads);
    for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t h = 0; h < n_heads; ++h)
            outputs[h] = sparse_attention(heads[h].decode_queries.row_copy(t),
                                          heads[h].states, selections[h][t]);
        predicted[t] = decode_symbol(outputs, codebooks);
    }

    // regroup the flat prediction into per-answer sequences
    std::vector<std::vector<TokenId>> pred_seqs;
    std::size_t cursor = 0;
    for (const auto& gold : sample.gold_answers) {
        pred_seqs.emplace_back(predicted.begin() + static_cast<std::ptrdiff_t>(cursor),
                               predicted.begin() + static_cast<std::ptrdiff_t>(cursor + gold.size()));
        cursor += gold.size();
    }

    SampleScore score;
    score.em = exact_match(pred_seqs, sample.gold_answers);
    if (capture_hits) {
        score.head_hits.resize(n_heads);
        for (std::size_t h = 0; h < n_heads; ++h)
            score.head_hits[h] =
                head_hit(selections[h], sample.gold_positions, budget.block_size);
    }
    return score;
}

SampleScore score_sample(const NiahSample& sample, const ExperimentConfig& cfg,
                         BackboneKind kind, Method method, const BudgetSpec& budget,
                         std::uint64_t run_seed, bool capture_hits, bool randomized,
                         std::uint64_t selector_salt) {
    std::vector<HeadEvalState> heads;
    heads.reserve(cfg.n_heads);
    for (std::size_t h = 0; h < cfg.n_heads; ++h)
        heads.push_back(build_head_eval_state(
            sample, cfg, kind, planted_head_seed(run_seed, sample.seed, h)));
    return score_sample_with_states(sample, cfg, method, budget, heads, capture_hits,
                                    randomized, selector_salt);
}

std::size_t resolved_top_k(const ExperimentConfig& cfg, Method method,
                           const BudgetSpec& budget) {
    if (method == Method::quest || method == Method::moba) {
        const std::size_t nb = (cfg.context_len + budget.block_size - 1) / budget.block_size;
        return budget.top_k(nb);
    }
    return budget.top_k(cfg.context_len);
}

}  // namespace sparselab
