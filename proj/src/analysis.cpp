#include "sparselab/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace sparselab {

AggregateResult AggregateResult::from_values(const std::vector<double>& values) {
    AggregateResult r;
    r.per_seed = values;
    r.n_seeds = values.size();
    if (values.empty()) return r;
    double sum = 0.0;
    for (double v : values) sum += v;
    r.mean = sum / static_cast<double>(values.size());
    double sq = 0.0;
    for (double v : values) sq += (v - r.mean) * (v - r.mean);
    r.stddev = std::sqrt(sq / static_cast<double>(values.size()));
    return r;
}

std::string AggregateResult::format(int decimals) const {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f ± %.*f", decimals, mean, decimals, stddev);
    return buf;
}

bool covers(const CandidateSet& selection, std::size_t position, std::size_t block_size) {
    if (selection.unit == SelectionUnit::token)
        return selection.contains(position);
    if (block_size == 0)
        throw ShapeError("covers: block selection requires a block size");
    return selection.contains(block_of(position, block_size));
}

int head_hit(const std::vector<CandidateSet>& selections_per_step,
             const std::vector<std::size_t>& gold_positions, std::size_t block_size) {
    if (selections_per_step.size() != gold_positions.size())
        throw ShapeError("head_hit: steps and gold positions disagree");
    for (std::size_t t = 0; t < gold_positions.size(); ++t)
        if (!covers(selections_per_step[t], gold_positions[t], block_size)) return 0;
    return 1;
}

std::vector<double> top_head_distribution(const std::vector<double>& per_head_rates,
                                          std::size_t top_n) {
    if (top_n > per_head_rates.size())
        throw BudgetError("top_head_distribution: top_n exceeds head count");
    std::vector<double> sorted = per_head_rates;
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    sorted.resize(top_n);
    return sorted;
}

}  // namespace sparselab
