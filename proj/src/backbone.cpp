#include "sparselab/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "sparselab/rng.hpp"

namespace sparselab {

namespace {

constexpr double kAlpha = 0.70710678118654752440;  // shared key-content weight
constexpr double kBeta = kAlpha;                   // per-step content weight
constexpr double kGateHoldLogit = 5.0;             // background logit -> gate at cap
constexpr double kGateWriteLogit = -5.0;           // salient-token logit -> strong write

// direction stream tags
constexpr std::uint64_t kKeyDir = 0xD1;
constexpr std::uint64_t kStepDir = 0xD2;
constexpr std::uint64_t kValueDir = 0xD3;
constexpr std::uint64_t kSymbolNoise = 0xD4;
constexpr std::uint64_t kPositionNoise = 0xD5;

Vector unit_gauss(std::uint64_t seed, std::size_t dim) {
    Rng rng(seed);
    Vector v = rng.gauss_vector(dim);
    const double n = norm(v);
    for (auto& x : v) x /= n;
    return v;
}

Vector key_direction(const PlantedModelSpec& spec, TokenId key) {
    return unit_gauss(mix_seed(spec.seed, kKeyDir, key), spec.head_dim);
}

Vector step_direction(const PlantedModelSpec& spec, TokenId key, std::size_t occurrence,
                      std::size_t value_index) {
    return unit_gauss(mix_seed(spec.seed, kStepDir, key, occurrence, value_index),
                      spec.head_dim);
}

// alpha * key_dir + beta * step_dir: the content an answer query matches.
Vector addressed_direction(const PlantedModelSpec& spec, TokenId key,
                           std::size_t occurrence, std::size_t value_index) {
    Vector kd = key_direction(spec, key);
    const Vector sd = step_direction(spec, key, occurrence, value_index);
    for (std::size_t i = 0; i < kd.size(); ++i)
        kd[i] = kAlpha * kd[i] + kBeta * sd[i];
    return kd;
}

void scale_to_unit_times(std::span<double> row, double gain) {
    const double n = norm(row);
    for (auto& x : row) x = x / n * gain;
}

}  // namespace

const char* to_string(BackboneKind k) {
    return k == BackboneKind::standard ? "standard" : "memory_augmented";
}

BackboneKind backbone_from_string(const std::string& s) {
    if (s == "standard") return BackboneKind::standard;
    if (s == "memory_augmented") return BackboneKind::memory_augmented;
    throw ConfigError("unknown backbone: " + s);
}

const char* to_string(GateMode m) {
    switch (m) {
        case GateMode::off: return "off";
        case GateMode::constant: return "constant";
        case GateMode::content: return "content";
    }
    return "?";
}

GateMode gate_mode_from_string(const std::string& s) {
    if (s == "off") return GateMode::off;
    if (s == "constant") return GateMode::constant;
    if (s == "content") return GateMode::content;
    throw ConfigError("unknown gate mode: " + s);
}

Matrix embed_tokens(const NiahSample& sample, const PlantedModelSpec& spec) {
    if (sample.tokens.empty()) throw DomainError("embed_tokens: empty sample");
    const std::size_t T = sample.tokens.size();
    const std::size_t d = spec.head_dim;
    const std::size_t md = spec.model_dim();

    Matrix emb(T, md);

    // Background: noise keyed by the symbol, so repeated symbols repeat rows.
    std::unordered_map<TokenId, Vector> symbol_rows;
    for (std::size_t t = 0; t < T; ++t) {
        const TokenId sym = sample.tokens[t];
        auto it = symbol_rows.find(sym);
        if (it == symbol_rows.end()) {
            Rng rng(mix_seed(spec.seed, kSymbolNoise, sym));
            it = symbol_rows.emplace(sym, rng.gauss_vector(md)).first;
        }
        auto row = emb.row(t);
        for (std::size_t i = 0; i < md; ++i) row[i] = spec.noise_scale * it->second[i];
    }

    auto content_row = [&](std::size_t position, const Vector& key_part,
                           const Vector& value_part, const Vector& query_part) {
        Vector full(md, 0.0);
        std::copy(key_part.begin(), key_part.end(), full.begin());
        std::copy(value_part.begin(), value_part.end(), full.begin() + static_cast<std::ptrdiff_t>(d));
        std::copy(query_part.begin(), query_part.end(), full.begin() + static_cast<std::ptrdiff_t>(2 * d));
        full[3 * d] = 1.0;  // salience marker
        scale_to_unit_times(full, spec.signal_gain);

        Rng rng(mix_seed(spec.seed, kPositionNoise, position));
        auto row = emb.row(position);
        for (std::size_t i = 0; i < md; ++i)
            row[i] = full[i] + spec.noise_scale * rng.next_gauss();
    };

    const Vector zero(d, 0.0);
    for (const Needle& n : sample.needles) {
        content_row(n.position, key_direction(spec, n.key),
                    value_direction(spec, sample.tokens[n.position]), zero);
        for (std::size_t vi = 0; vi < n.values.size(); ++vi)
            content_row(n.position + 1 + vi,
                        addressed_direction(spec, n.key, n.occurrence, vi),
                        value_direction(spec, n.values[vi]), zero);
    }
    for (const QuestionToken& q : sample.question)
        content_row(q.position, zero, zero,
                    addressed_direction(spec, q.key, q.occurrence, q.value_index));

    return emb;
}

HeadStates build_head_states(const Matrix& embeddings, BackboneKind kind,
                             const GateParams& gate_params) {
    if (embeddings.empty()) throw DomainError("build_head_states: empty embeddings");
    if (embeddings.cols() < 4 || (embeddings.cols() - 1) % 3 != 0)
        throw ShapeError("build_head_states: embedding width is not 3*d+1");
    const std::size_t d = (embeddings.cols() - 1) / 3;
    const std::size_t T = embeddings.rows();

    HeadStates st;
    st.queries = Matrix(T, d);
    st.kv.keys = Matrix(T, d);
    st.kv.values = Matrix(T, d);
    for (std::size_t t = 0; t < T; ++t) {
        const auto row = embeddings.row(t);
        for (std::size_t j = 0; j < d; ++j) {
            st.kv.keys.at(t, j) = row[j];
            st.kv.values.at(t, j) = row[d + j];
            st.queries.at(t, j) = row[2 * d + j];
        }
    }
    if (kind == BackboneKind::memory_augmented) {
        if (gate_params.weight.rows() != embeddings.cols())
            throw ShapeError("build_head_states: gate weight rows do not match model dim");
        const Matrix gates = compute_gates(embeddings, gate_params);
        st.augmented = apply_decaying_memory(st.kv, gates);
    }
    return st;
}

Vector dense_attention(const Vector& q, const Matrix& keys, const Matrix& values) {
    if (keys.rows() == 0) throw DomainError("dense_attention: empty keys");
    if (keys.rows() != values.rows())
        throw ShapeError("dense_attention: key/value row counts disagree");
    if (q.size() != keys.cols())
        throw ShapeError("dense_attention: query dim does not match keys");

    const double scale = 1.0 / std::sqrt(static_cast<double>(keys.cols()));
    Vector scores(keys.rows());
    for (std::size_t i = 0; i < keys.rows(); ++i)
        scores[i] = dot(keys.row(i), std::span<const double>(q)) * scale;
    const Vector w = softmax_row(scores);
    Vector out(values.cols(), 0.0);
    for (std::size_t i = 0; i < values.rows(); ++i) {
        const auto v = values.row(i);
        for (std::size_t j = 0; j < out.size(); ++j) out[j] += w[i] * v[j];
    }
    return out;
}

GateParams make_gate_params(const PlantedModelSpec& spec, GateMode mode,
                            double constant_gate, double gate_cap) {
    if (gate_cap <= 0.0 || gate_cap >= 1.0)
        throw ConfigError("gate_cap must lie in (0, 1)");
    GateParams p;
    p.weight = Matrix(spec.model_dim(), spec.head_dim, 0.0);
    p.bias = Vector(spec.head_dim, 0.0);
    p.gate_cap = gate_cap;
    switch (mode) {
        case GateMode::off:
            // sigmoid underflows to exactly 0, so the recurrence is a
            // bit-exact passthrough.
            std::fill(p.bias.begin(), p.bias.end(), -1000.0);
            break;
        case GateMode::constant: {
            if (constant_gate <= 0.0 || constant_gate > gate_cap)
                throw ConfigError("constant gate must lie in (0, gate_cap]");
            const double logit = std::log(constant_gate / (1.0 - constant_gate));
            std::fill(p.bias.begin(), p.bias.end(), logit);
            break;
        }
        case GateMode::content: {
            // Salient tokens carry marker ~= gain/sqrt(3); aim their logit at
            // kGateWriteLogit while pure background stays at kGateHoldLogit.
            const double marker = spec.signal_gain / std::sqrt(3.0);
            const double slope = (kGateHoldLogit - kGateWriteLogit) / marker;
            std::fill(p.bias.begin(), p.bias.end(), kGateHoldLogit);
            for (std::size_t j = 0; j < spec.head_dim; ++j)
                p.weight.at(3 * spec.head_dim, j) = -slope;
            break;
        }
    }
    return p;
}

Matrix answer_queries(const HeadStates& states, const NiahSample& sample) {
    Matrix q(sample.question.size(), states.head_dim());
    for (std::size_t i = 0; i < sample.question.size(); ++i) {
        const std::size_t pos = sample.question[i].position;
        if (pos >= states.tokens())
            throw IndexError("answer_queries: question position out of range");
        const auto row = states.queries.row(pos);
        std::copy(row.begin(), row.end(), q.row(i).begin());
    }
    return q;
}

Vector value_direction(const PlantedModelSpec& spec, TokenId symbol) {
    return unit_gauss(mix_seed(spec.seed, kValueDir, symbol), spec.head_dim);
}

std::vector<std::pair<TokenId, Vector>> value_codebook(const PlantedModelSpec& spec) {
    std::vector<std::pair<TokenId, Vector>> book;
    for (TokenId sym : vocab::value_symbols())
        book.emplace_back(sym, value_direction(spec, sym));
    return book;
}

TokenId decode_symbol(
    const std::vector<Vector>& per_head_outputs,
    const std::vector<std::vector<std::pair<TokenId, Vector>>>& per_head_codebooks) {
    if (per_head_outputs.empty() || per_head_outputs.size() != per_head_codebooks.size())
        throw ShapeError("decode_symbol: heads and codebooks disagree");
    const std::size_t n_candidates = per_head_codebooks.front().size();
    TokenId best = per_head_codebooks.front().front().first;
    double best_score = -1e300;
    for (std::size_t c = 0; c < n_candidates; ++c) {
        double score = 0.0;
        for (std::size_t h = 0; h < per_head_outputs.size(); ++h)
            score += dot(per_head_outputs[h], per_head_codebooks[h][c].second);
        if (score > best_score) {
            best_score = score;
            best = per_head_codebooks.front()[c].first;
        }
    }
    return best;
}

}  // namespace sparselab
