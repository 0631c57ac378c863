#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparselab/backbone.hpp"

namespace sparselab {

enum class SelectionUnit { block, token };

// The selector families the harness can run. `random_tokens` is the
// selector-free baseline: uniform token selection at every decoding step.
enum class Method { quest, moba, snapkv, random_tokens };

const char* to_string(Method m);
Method method_from_string(const std::string& s);
const std::vector<Method>& all_methods();

// Sparsity budget as an exact fraction, resolved to a top-k count against a
// concrete candidate count (blocks for block methods, tokens otherwise).
struct BudgetSpec {
    std::size_t numerator = 1;
    std::size_t denominator = 1;  // fraction in (0, 1]
    std::size_t block_size = 64;

    double fraction() const {
        return static_cast<double>(numerator) / static_cast<double>(denominator);
    }
    // round(fraction * candidate_count), at least 1; forced entries count
    // against this budget.
    std::size_t top_k(std::size_t candidate_count) const;
    std::string label() const;

    friend bool operator==(const BudgetSpec&, const BudgetSpec&) = default;
};

BudgetSpec parse_budget(const std::string& text);

// Selected index set; indices are block ids or token positions depending on
// unit. `forced` marks the always-included subset.
struct CandidateSet {
    std::vector<std::size_t> indices;  // sorted, unique
    SelectionUnit unit = SelectionUnit::token;
    std::vector<std::size_t> forced;   // subset of indices, sorted
    std::size_t block_size = 0;        // token span per index when unit == block

    bool contains(std::size_t index) const;
    friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

enum class BlockRepKind { quest_minmax, moba_mean };

// Per-block representatives of the key states; the last block may be short.
struct BlockReps {
    BlockRepKind kind = BlockRepKind::quest_minmax;
    std::size_t block_size = 0;
    std::size_t total_tokens = 0;
    Matrix min;   // quest: elementwise min per block
    Matrix max;   // quest: elementwise max per block
    Matrix mean;  // moba: elementwise mean per block

    std::size_t block_count() const;
};

BlockReps quest_block_reps(const Matrix& keys, std::size_t block_size);
BlockReps moba_block_reps(const Matrix& keys, std::size_t block_size);

// sum_j max(q_j * min_j, q_j * max_j): an upper bound on q . k for every key
// k inside the block, exact for singleton blocks.
double quest_score(const Vector& q, std::span<const double> block_min,
                   std::span<const double> block_max);

// Per-block selection scores: the quest bound, or q . mean for moba.
Vector block_scores(const Vector& q_sel, const BlockReps& reps);

// Forced blocks always selected; remaining budget filled by descending
// score with ties toward the smaller block index.
CandidateSet select_blocks(const Vector& q_sel, const BlockReps& reps,
                           const BudgetSpec& budget,
                           const std::vector<std::size_t>& forced);

// Same, with an explicit k and a cap on the candidate block range (used for
// causal prefill routing); k is clamped to the candidate count.
CandidateSet select_blocks_topk(const Vector& q_sel, const BlockReps& reps,
                                std::size_t k, const std::vector<std::size_t>& forced,
                                std::size_t candidate_count);

// Scores each prefix position by pooling its softmax attention weight over
// the last `window` prefill queries, then retains the top keep-window prefix
// positions plus the whole window. Selection happens once after prefilling.
CandidateSet snapkv_select(const HeadStates& states, std::size_t window,
                           std::size_t keep, bool max_pool = false);

// Attention restricted to the selected rows of the backbone's active states.
Vector sparse_attention(const Vector& q, const HeadStates& states,
                        const CandidateSet& selected);

// Uniform over the size-budget_k supersets of the forced set.
CandidateSet random_select(std::size_t candidate_count, std::size_t budget_k,
                           const std::vector<std::size_t>& forced, std::uint64_t seed);

// Prefill-time routing: every query row selects its own block set, scored
// over the mean-pooled representatives, causally restricted.
std::vector<CandidateSet> moba_route_queries(const HeadStates& states,
                                             const BudgetSpec& budget);

std::vector<std::size_t> expand_block_selection(const CandidateSet& selected,
                                                std::size_t total_tokens);

inline std::size_t block_of(std::size_t position, std::size_t block_size) {
    return position / block_size;
}

}  // namespace sparselab
