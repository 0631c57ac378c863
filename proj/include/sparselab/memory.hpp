#pragma once

#include "sparselab/kernels.hpp"

namespace sparselab {

// Raw per-head key/value states over a token sequence, one row per token.
struct KvStates {
    Matrix keys;    // T x d
    Matrix values;  // T x d
};

// Parameters of the input-dependent write gate. The gate for token t is
// sigmoid(x_t * weight + bias), clamped above at gate_cap per channel. The
// cap bounds the geometric time constant of the memory: with the default
// cap of 1 - 1/64 the effective retention length is at most 64 steps.
struct GateParams {
    Matrix weight;  // model_dim x head_dim
    Vector bias;    // head_dim
    double gate_cap = 1.0 - 1.0 / 64.0;
};

// Exponentially decaying memory over the KV states, together with the gate
// sequence that produced it.
struct AugmentedKvStates {
    Matrix k_tilde;  // T x d
    Matrix v_tilde;  // T x d
    Matrix gates;    // T x d, entries in [0, gate_cap]
};

double sigmoid(double x);

// g_t = min(sigmoid(x_t * weight + bias), gate_cap), elementwise over the
// head channels. inputs is T x model_dim.
Matrix compute_gates(const Matrix& inputs, const GateParams& params);

// Per-channel recurrence with zero initial state:
//   s_t = g_t * s_{t-1} + (1 - g_t) * x_t
// applied independently to keys and values. Row t of the output depends
// only on rows <= t.
AugmentedKvStates apply_decaying_memory(const KvStates& kv, const Matrix& gates);

// Closed-form unrolling of the recurrence, used as a testing oracle: the
// weight of token s (1-based) on the state after `steps` tokens is
// (1 - g_s) * prod_{r=s+1..steps} g_r. Returns the weights for s=1..steps.
Vector unrolled_weights(const Matrix& gates, std::size_t steps, std::size_t channel);

}  // namespace sparselab
