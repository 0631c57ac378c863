#pragma once

#include "sparselab/harness.hpp"

namespace sparselab {

// Per-sample evaluation machinery shared by run_grid, the random-selector
// ablation, and the test suites.

std::uint64_t sample_master_seed(std::uint64_t run_seed, TaskVariant task);
std::uint64_t planted_head_seed(std::uint64_t run_seed, std::uint64_t sample_seed,
                                std::size_t head);

// Everything one head needs to answer one sample under one backbone.
struct HeadEvalState {
    PlantedModelSpec spec;
    HeadStates states;
    Matrix decode_queries;  // one row per answer step
    std::vector<std::pair<TokenId, Vector>> codebook;
};

// When `embeddings` is given it must be embed_tokens(sample, planted_spec);
// both backbones share the same embeddings, so callers evaluating both can
// compute them once.
HeadEvalState build_head_eval_state(const NiahSample& sample, const ExperimentConfig& cfg,
                                    BackboneKind kind, std::uint64_t planted_seed,
                                    const Matrix* embeddings = nullptr);

// The selection a method makes at every decoding step. With `randomized`
// the method's selector is replaced by a uniform one over the same
// candidate unit and budget (forced prior kept unless cfg.random_uniform).
std::vector<CandidateSet> make_selections(const HeadEvalState& head, Method method,
                                          const BudgetSpec& budget,
                                          const ExperimentConfig& cfg,
                                          std::uint64_t selector_seed, bool randomized);

struct SampleScore {
    double em = 0.0;             // exact-match fraction in [0, 1]
    std::vector<int> head_hits;  // per head, filled when capture is on
};

// selector_salt feeds only the selector's random stream; the random-selector
// ablation varies it per seed while the model and data stay fixed.
SampleScore score_sample_with_states(const NiahSample& sample, const ExperimentConfig& cfg,
                                     Method method, const BudgetSpec& budget,
                                     const std::vector<HeadEvalState>& heads,
                                     bool capture_hits, bool randomized,
                                     std::uint64_t selector_salt = 0);

// Reference path: builds the per-head states itself. run_grid shares states
// across cells; this must agree with it bit-for-bit.
SampleScore score_sample(const NiahSample& sample, const ExperimentConfig& cfg,
                         BackboneKind kind, Method method, const BudgetSpec& budget,
                         std::uint64_t run_seed, bool capture_hits, bool randomized = false,
                         std::uint64_t selector_salt = 0);

// Resolved candidate budget for display: block count for block methods,
// token count otherwise.
std::size_t resolved_top_k(const ExperimentConfig& cfg, Method method,
                           const BudgetSpec& budget);

}  // namespace sparselab
