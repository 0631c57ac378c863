#pragma once

#include <cstdint>
#include <optional>

#include "sparselab/memory.hpp"
#include "sparselab/niah.hpp"

namespace sparselab {

enum class BackboneKind { standard, memory_augmented };

const char* to_string(BackboneKind k);
BackboneKind backbone_from_string(const std::string& s);

// Synthetic single-layer head whose needle keys align with the matching
// answer queries by construction, so selection behavior is analyzable
// without trained weights.
//
// Embedding layout (model_dim = 3*head_dim + 1):
//   [0, d)    key content      -> projected to K
//   [d, 2d)   value content    -> projected to V
//   [2d, 3d)  query content    -> projected to Q
//   [3d]      salience marker  -> read by the content write gate
//
// Pair tokens carry key+value content, question tokens carry query content,
// background tokens carry scaled noise keyed by their symbol. Every content
// row is signal_gain times a unit direction, plus noise_scale * N(0, I).
struct PlantedModelSpec {
    std::size_t head_dim = 32;
    double signal_gain = 10.0;
    double noise_scale = 0.8;
    std::uint64_t seed = 0;

    std::size_t model_dim() const { return 3 * head_dim + 1; }
};

struct HeadStates {
    Matrix queries;  // T x d
    KvStates kv;
    std::optional<AugmentedKvStates> augmented;  // present iff memory_augmented

    std::size_t tokens() const { return kv.keys.rows(); }
    std::size_t head_dim() const { return kv.keys.cols(); }
    // The states a sparse method operates on: (K~, V~) when augmented,
    // otherwise the raw (K, V).
    const Matrix& active_keys() const { return augmented ? augmented->k_tilde : kv.keys; }
    const Matrix& active_values() const { return augmented ? augmented->v_tilde : kv.values; }
};

// Deterministic per spec.seed. Throws DomainError on an empty sample.
Matrix embed_tokens(const NiahSample& sample, const PlantedModelSpec& spec);

// Projects Q/K/V out of the embeddings; the memory_augmented variant also
// computes gates and runs the decaying-memory recurrence.
HeadStates build_head_states(const Matrix& embeddings, BackboneKind kind,
                             const GateParams& gate_params);

// softmax(q K^T / sqrt(d)) V over all rows; the oracle the sparse evaluator
// is checked against. Throws DomainError on empty keys.
Vector dense_attention(const Vector& q, const Matrix& keys, const Matrix& values);

enum class GateMode { off, constant, content };

const char* to_string(GateMode m);
GateMode gate_mode_from_string(const std::string& s);

// off:      gates are exactly zero (memory passes the raw states through).
// constant: every gate equals min(constant_gate, gate_cap).
// content:  the marker channel drives the gate, so pair/question tokens are
//           written strongly while background is retained near the cap.
GateParams make_gate_params(const PlantedModelSpec& spec, GateMode mode,
                            double constant_gate, double gate_cap);

// One query row per answer step, taken from the question-region positions.
Matrix answer_queries(const HeadStates& states, const NiahSample& sample);

// Unit direction encoding a symbol's identity in value space; the readout
// ranks candidate symbols by the dot product with these.
Vector value_direction(const PlantedModelSpec& spec, TokenId symbol);

// argmax over candidate symbols of sum_h score_h(symbol); ties toward the
// smaller symbol id.
TokenId decode_symbol(const std::vector<Vector>& per_head_outputs,
                      const std::vector<std::vector<std::pair<TokenId, Vector>>>& per_head_codebooks);

std::vector<std::pair<TokenId, Vector>> value_codebook(const PlantedModelSpec& spec);

}  // namespace sparselab
