#include "sparselab/sparse.hpp"

#include <algorithm>
#include <cmath>

#include "sparselab/rng.hpp"

namespace sparselab {

namespace {

std::vector<std::size_t> sorted_unique(std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

}  // namespace

const char* to_string(Method m) {
    switch (m) {
        case Method::quest: return "quest";
        case Method::moba: return "moba";
        case Method::snapkv: return "snapkv";
        case Method::random_tokens: return "random";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    for (Method m : all_methods())
        if (s == to_string(m)) return m;
    throw ConfigError("unknown method: " + s);
}

const std::vector<Method>& all_methods() {
    static const std::vector<Method> methods = {Method::quest, Method::moba,
                                                Method::snapkv, Method::random_tokens};
    return methods;
}

std::size_t BudgetSpec::top_k(std::size_t candidate_count) const {
    if (numerator == 0 || denominator == 0 || numerator > denominator)
        throw BudgetError("budget fraction must lie in (0, 1]");
    const double k = fraction() * static_cast<double>(candidate_count);
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(k)));
}

std::string BudgetSpec::label() const {
    if (numerator == denominator) return "1";
    return std::to_string(numerator) + "/" + std::to_string(denominator);
}

BudgetSpec parse_budget(const std::string& text) {
    BudgetSpec b;
    const auto slash = text.find('/');
    const auto parse_part = [&](const std::string& part) {
        std::size_t used = 0;
        const auto value = std::stoull(part, &used);
        if (used != part.size()) throw std::invalid_argument(part);
        return static_cast<std::size_t>(value);
    };
    try {
        if (slash == std::string::npos) {
            b.numerator = parse_part(text);
            b.denominator = 1;
        } else {
            b.numerator = parse_part(text.substr(0, slash));
            b.denominator = parse_part(text.substr(slash + 1));
        }
    } catch (const std::exception&) {
        throw ConfigError("cannot parse budget fraction: " + text);
    }
    if (b.numerator == 0 || b.denominator == 0 || b.numerator > b.denominator)
        throw ConfigError("budget fraction must lie in (0, 1]: " + text);
    return b;
}

bool CandidateSet::contains(std::size_t index) const {
    return std::binary_search(indices.begin(), indices.end(), index);
}

std::size_t BlockReps::block_count() const {
    return block_size == 0 ? 0 : (total_tokens + block_size - 1) / block_size;
}

BlockReps quest_block_reps(const Matrix& keys, std::size_t block_size) {
    if (keys.rows() == 0) throw DomainError("quest_block_reps: empty keys");
    if (block_size < 1) throw DomainError("quest_block_reps: block_size must be positive");

    const std::size_t T = keys.rows();
    const std::size_t d = keys.cols();
    const std::size_t nb = (T + block_size - 1) / block_size;

    BlockReps reps;
    reps.kind = BlockRepKind::quest_minmax;
    reps.block_size = block_size;
    reps.total_tokens = T;
    reps.min = Matrix(nb, d);
    reps.max = Matrix(nb, d);
    for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t lo = b * block_size;
        const std::size_t hi = std::min(T, lo + block_size);
        for (std::size_t j = 0; j < d; ++j) {
            double mn = keys.at(lo, j);
            double mx = mn;
            for (std::size_t t = lo + 1; t < hi; ++t) {
                mn = std::min(mn, keys.at(t, j));
                mx = std::max(mx, keys.at(t, j));
            }
            reps.min.at(b, j) = mn;
            reps.max.at(b, j) = mx;
        }
    }
    return reps;
}

BlockReps moba_block_reps(const Matrix& keys, std::size_t block_size) {
    if (keys.rows() == 0) throw DomainError("moba_block_reps: empty keys");
    if (block_size < 1) throw DomainError("moba_block_reps: block_size must be positive");

    const std::size_t T = keys.rows();
    const std::size_t d = keys.cols();
    const std::size_t nb = (T + block_size - 1) / block_size;

    BlockReps reps;
    reps.kind = BlockRepKind::moba_mean;
    reps.block_size = block_size;
    reps.total_tokens = T;
    reps.mean = Matrix(nb, d);
    for (std::size_t b = 0; b < nb; ++b) {
        const std::size_t lo = b * block_size;
        const std::size_t hi = std::min(T, lo + block_size);
        for (std::size_t j = 0; j < d; ++j) {
            double s = 0.0;
            for (std::size_t t = lo; t < hi; ++t) s += keys.at(t, j);
            reps.mean.at(b, j) = s / static_cast<double>(hi - lo);
        }
    }
    return reps;
}

double quest_score(const Vector& q, std::span<const double> block_min,
                   std::span<const double> block_max) {
    if (q.size() != block_min.size() || q.size() != block_max.size())
        throw ShapeError("quest_score: dimension mismatch");
    double s = 0.0;
    for (std::size_t j = 0; j < q.size(); ++j)
        s += std::max(q[j] * block_min[j], q[j] * block_max[j]);
    return s;
}

Vector block_scores(const Vector& q_sel, const BlockReps& reps) {
    const std::size_t nb = reps.block_count();
    Vector scores(nb);
    if (reps.kind == BlockRepKind::quest_minmax) {
        for (std::size_t b = 0; b < nb; ++b)
            scores[b] = quest_score(q_sel, reps.min.row(b), reps.max.row(b));
    } else {
        for (std::size_t b = 0; b < nb; ++b)
            scores[b] = dot(std::span<const double>(q_sel), reps.mean.row(b));
    }
    return scores;
}

CandidateSet select_blocks_topk(const Vector& q_sel, const BlockReps& reps,
                                std::size_t k, const std::vector<std::size_t>& forced,
                                std::size_t candidate_count) {
    const std::size_t nb = std::min(candidate_count, reps.block_count());
    const std::vector<std::size_t> forced_sorted = sorted_unique(forced);
    if (!forced_sorted.empty() && forced_sorted.back() >= nb)
        throw IndexError("select_blocks: forced block out of range");
    if (forced_sorted.size() > k)
        throw BudgetError("select_blocks: budget " + std::to_string(k) +
                          " smaller than forced set of " +
                          std::to_string(forced_sorted.size()));
    k = std::min(k, nb);

    const Vector scores = block_scores(q_sel, reps);

    std::vector<std::size_t> pool;
    pool.reserve(nb);
    for (std::size_t b = 0; b < nb; ++b)
        if (!std::binary_search(forced_sorted.begin(), forced_sorted.end(), b))
            pool.push_back(b);
    std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
        if (scores[a] != scores[b]) return scores[a] > scores[b];
        return a < b;
    });
    pool.resize(k - forced_sorted.size());

    CandidateSet out;
    out.unit = SelectionUnit::block;
    out.block_size = reps.block_size;
    out.forced = forced_sorted;
    out.indices = forced_sorted;
    out.indices.insert(out.indices.end(), pool.begin(), pool.end());
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

CandidateSet select_blocks(const Vector& q_sel, const BlockReps& reps,
                           const BudgetSpec& budget,
                           const std::vector<std::size_t>& forced) {
    const std::size_t nb = reps.block_count();
    return select_blocks_topk(q_sel, reps, budget.top_k(nb), forced, nb);
}

CandidateSet snapkv_select(const HeadStates& states, std::size_t window,
                           std::size_t keep, bool max_pool) {
    const std::size_t T = states.tokens();
    if (window == 0 || window > T)
        throw DomainError("snapkv_select: window must lie in 1..T");
    if (keep < window)
        throw BudgetError("snapkv_select: keep " + std::to_string(keep) +
                          " cannot hold the observation window of " +
                          std::to_string(window));
    keep = std::min(keep, T);

    const Matrix& keys = states.active_keys();
    const std::size_t d = keys.cols();
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    const std::size_t window_start = T - window;

    // Pool the causal attention weights of the window queries per position.
    Vector pooled(T, 0.0);
    Vector scores;
    for (std::size_t i = window_start; i < T; ++i) {
        const auto q = states.queries.row(i);
        scores.resize(i + 1);
        for (std::size_t t = 0; t <= i; ++t)
            scores[t] = dot(q, keys.row(t)) * scale;
        const Vector w = softmax_row(scores);
        if (max_pool) {
            for (std::size_t t = 0; t <= i; ++t) pooled[t] = std::max(pooled[t], w[t]);
        } else {
            for (std::size_t t = 0; t <= i; ++t) pooled[t] += w[t];
        }
    }

    const std::size_t prefix = window_start;
    const std::size_t keep_prefix = std::min(keep - window, prefix);
    const std::vector<std::size_t> top = topk_indices(
        std::span<const double>(pooled.data(), prefix), keep_prefix);

    CandidateSet out;
    out.unit = SelectionUnit::token;
    out.indices = top;
    for (std::size_t i = window_start; i < T; ++i) {
        out.indices.push_back(i);
        out.forced.push_back(i);
    }
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

std::vector<std::size_t> expand_block_selection(const CandidateSet& selected,
                                                std::size_t total_tokens) {
    if (selected.unit != SelectionUnit::block)
        return selected.indices;
    if (selected.block_size == 0)
        throw ShapeError("expand_block_selection: block selection without block size");
    std::vector<std::size_t> rows;
    for (std::size_t b : selected.indices) {
        const std::size_t lo = b * selected.block_size;
        if (lo >= total_tokens)
            throw IndexError("expand_block_selection: block out of range");
        const std::size_t hi = std::min(total_tokens, lo + selected.block_size);
        for (std::size_t t = lo; t < hi; ++t) rows.push_back(t);
    }
    return rows;
}

Vector sparse_attention(const Vector& q, const HeadStates& states,
                        const CandidateSet& selected) {
    if (selected.indices.empty()) throw DomainError("sparse_attention: empty selection");

    const Matrix& keys = states.active_keys();
    const Matrix& values = states.active_values();
    const std::vector<std::size_t> rows = expand_block_selection(selected, keys.rows());
    if (!rows.empty() && rows.back() >= keys.rows())
        throw IndexError("sparse_attention: selected token out of range");

    Matrix sub_k(rows.size(), keys.cols());
    Matrix sub_v(rows.size(), values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto kr = keys.row(rows[i]);
        const auto vr = values.row(rows[i]);
        std::copy(kr.begin(), kr.end(), sub_k.row(i).begin());
        std::copy(vr.begin(), vr.end(), sub_v.row(i).begin());
    }
    return dense_attention(q, sub_k, sub_v);
}

CandidateSet random_select(std::size_t candidate_count, std::size_t budget_k,
                           const std::vector<std::size_t>& forced, std::uint64_t seed) {
    if (budget_k > candidate_count)
        throw BudgetError("random_select: budget exceeds candidate count");
    const std::vector<std::size_t> forced_sorted = sorted_unique(forced);
    if (!forced_sorted.empty() && forced_sorted.back() >= candidate_count)
        throw IndexError("random_select: forced index out of range");
    if (forced_sorted.size() > budget_k)
        throw BudgetError("random_select: budget smaller than forced set");

    std::vector<std::size_t> complement;
    complement.reserve(candidate_count - forced_sorted.size());
    for (std::size_t i = 0; i < candidate_count; ++i)
        if (!std::binary_search(forced_sorted.begin(), forced_sorted.end(), i))
            complement.push_back(i);

    Rng rng(seed);
    const std::vector<std::size_t> picks =
        rng.sample_without_replacement(complement.size(), budget_k - forced_sorted.size());

    CandidateSet out;
    out.unit = SelectionUnit::token;
    out.forced = forced_sorted;
    out.indices = forced_sorted;
    for (std::size_t p : picks) out.indices.push_back(complement[p]);
    std::sort(out.indices.begin(), out.indices.end());
    return out;
}

std::vector<CandidateSet> moba_route_queries(const HeadStates& states,
                                             const BudgetSpec& budget) {
    const Matrix& keys = states.active_keys();
    const BlockReps reps = moba_block_reps(keys, budget.block_size);
    const std::size_t k = budget.top_k(reps.block_count());

    std::vector<CandidateSet> routes;
    routes.reserve(states.tokens());
    for (std::size_t i = 0; i < states.tokens(); ++i) {
        const std::size_t local = block_of(i, budget.block_size);
        // causal: only blocks up to the query's own are available
        routes.push_back(select_blocks_topk(states.queries.row_copy(i), reps, k,
                                            {0, local}, local + 1));
    }
    return routes;
}

}  // namespace sparselab
