#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sparselab/sparse.hpp"

namespace sparselab {

struct ExperimentConfig;  // harness

// Per-head trace of one sample: the selections made at every decoding step
// and whether they covered the gold position at all of them.
struct HitRecord {
    std::size_t head = 0;
    std::vector<CandidateSet> selections;
    std::vector<std::size_t> gold_positions;
    int hit = 0;
};

// mean +/- std over seeds; std uses the population convention (n divisor),
// which the emitted metadata states explicitly.
struct AggregateResult {
    double mean = 0.0;
    double stddev = 0.0;
    std::size_t n_seeds = 0;
    std::vector<double> per_seed;

    static AggregateResult from_values(const std::vector<double>& values);
    std::string format(int decimals = 2) const;  // "84.90 ± 0.73"
};

// Whether a selection covers a token position: direct membership for token
// units, membership of the containing block for block units.
bool covers(const CandidateSet& selection, std::size_t position, std::size_t block_size);

// 1 iff every step's selection covers that step's gold position. Strict
// universal quantification; throws ShapeError on length mismatch.
int head_hit(const std::vector<CandidateSet>& selections_per_step,
             const std::vector<std::size_t>& gold_positions, std::size_t block_size);

// Descending hit rates of the top_n heads.
std::vector<double> top_head_distribution(const std::vector<double>& per_head_rates,
                                          std::size_t top_n);

// One ablation record per (method, backbone, task): the configured selector
// replaced by a random one at the same unit and budget.
struct AblationRecord {
    Method method;
    BackboneKind backbone;
    TaskVariant task;
    BudgetSpec budget;
    AggregateResult accuracy;  // percent
};

std::vector<AblationRecord> run_random_ablation(const ExperimentConfig& config,
                                                const std::vector<std::uint64_t>& seeds);

}  // namespace sparselab
