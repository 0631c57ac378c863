#include "sparselab/memory.hpp"

#include <cmath>

namespace sparselab {

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Matrix compute_gates(const Matrix& inputs, const GateParams& params) {
    if (inputs.cols() != params.weight.rows())
        throw ShapeError("compute_gates: inputs have " + std::to_string(inputs.cols()) +
                         " cols, gate weight expects " + std::to_string(params.weight.rows()));
    if (params.bias.size() != params.weight.cols())
        throw ShapeError("compute_gates: bias dim does not match weight cols");

    const std::size_t T = inputs.rows();
    const std::size_t d = params.weight.cols();
    Matrix gates(T, d);
    for (std::size_t t = 0; t < T; ++t) {
        const auto x = inputs.row(t);
        for (std::size_t j = 0; j < d; ++j) {
            double z = params.bias[j];
            for (std::size_t i = 0; i < inputs.cols(); ++i)
                z += x[i] * params.weight.at(i, j);
            gates.at(t, j) = std::min(sigmoid(z), params.gate_cap);
        }
    }
    return gates;
}

AugmentedKvStates apply_decaying_memory(const KvStates& kv, const Matrix& gates) {
    const std::size_t T = kv.keys.rows();
    const std::size_t d = kv.keys.cols();
    if (kv.values.rows() != T || kv.values.cols() != d)
        throw ShapeError("apply_decaying_memory: key/value shapes disagree");
    if (gates.rows() != T || gates.cols() != d)
        throw ShapeError("apply_decaying_memory: gates shape does not match states");

    AugmentedKvStates out{Matrix(T, d), Matrix(T, d), gates};
    Vector k_state(d, 0.0);
    Vector v_state(d, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t j = 0; j < d; ++j) {
            const double g = gates.at(t, j);
            k_state[j] = g * k_state[j] + (1.0 - g) * kv.keys.at(t, j);
            v_state[j] = g * v_state[j] + (1.0 - g) * kv.values.at(t, j);
            out.k_tilde.at(t, j) = k_state[j];
            out.v_tilde.at(t, j) = v_state[j];
        }
    }
    return out;
}

Vector unrolled_weights(const Matrix& gates, std::size_t steps, std::size_t channel) {
    if (steps < 1 || steps > gates.rows())
        throw IndexError("unrolled_weights: step " + std::to_string(steps) +
                         " outside 1.." + std::to_string(gates.rows()));
    if (channel >= gates.cols())
        throw IndexError("unrolled_weights: channel out of range");

    // Build the suffix products of the gates backwards: weight of token s is
    // (1 - g_s) times the product of the gates of every later token.
    Vector w(steps);
    double suffix = 1.0;
    for (std::size_t s = steps; s >= 1; --s) {
        const double g = gates.at(s - 1, channel);
        w[s - 1] = (1.0 - g) * suffix;
        suffix *= g;
    }
    return w;
}

}  // namespace sparselab
