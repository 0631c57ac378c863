#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "sparselab/memory.hpp"
#include "sparselab/rng.hpp"

using namespace sparselab;

namespace {

KvStates random_kv(Rng& rng, std::size_t T, std::size_t d) {
    KvStates kv{Matrix(T, d), Matrix(T, d)};
    for (auto& x : kv.keys.data()) x = rng.next_gauss();
    for (auto& x : kv.values.data()) x = rng.next_gauss();
    return kv;
}

Matrix random_gates(Rng& rng, std::size_t T, std::size_t d, double cap) {
    Matrix g(T, d);
    for (auto& x : g.data()) x = rng.next_unit() * cap;
    return g;
}

// Reconstruction through the unrolled weights, the independent oracle for
// the recurrence.
double reconstruct(const Matrix& gates, const Matrix& inputs, std::size_t steps,
                   std::size_t channel) {
    const Vector w = unrolled_weights(gates, steps, channel);
    double acc = 0.0;
    for (std::size_t s = 0; s < steps; ++s) acc += w[s] * inputs.at(s, channel);
    return acc;
}

}  // namespace

TEST_CASE("compute_gates saturation and shape checks") {
    GateParams p;
    p.weight = Matrix(3, 2, 0.0);
    p.bias = Vector(2, 0.0);
    p.gate_cap = 0.9;

    Matrix inputs(4, 3, 1.0);
    const Matrix g = compute_gates(inputs, p);
    for (double x : g.data()) CHECK(x == doctest::Approx(0.5));  // sigmoid(0)

    p.gate_cap = 1.0 - 1.0 / 64.0;
    std::fill(p.bias.begin(), p.bias.end(), 50.0);  // saturates into the cap
    const Matrix capped = compute_gates(inputs, p);
    for (double x : capped.data()) CHECK(x == doctest::Approx(1.0 - 1.0 / 64.0));

    std::fill(p.bias.begin(), p.bias.end(), -1000.0);  // underflows to zero
    const Matrix zeroed = compute_gates(inputs, p);
    for (double x : zeroed.data()) CHECK(x == 0.0);

    Matrix bad(4, 2, 1.0);
    CHECK_THROWS_AS(compute_gates(bad, p), ShapeError);
}

TEST_CASE("apply_decaying_memory passthrough with zero gates") {
    Rng rng(11);
    const KvStates kv = random_kv(rng, 16, 4);
    const Matrix zero_gates(16, 4, 0.0);
    const AugmentedKvStates aug = apply_decaying_memory(kv, zero_gates);
    CHECK(aug.k_tilde == kv.keys);
    CHECK(aug.v_tilde == kv.values);
}

TEST_CASE("apply_decaying_memory geometric decay example") {
    // v = e_1 at t=1 then zeros, constant gate 0.5
    KvStates kv{Matrix(3, 1, 0.0), Matrix(3, 1, 0.0)};
    kv.values.at(0, 0) = 1.0;
    const Matrix gates(3, 1, 0.5);
    const AugmentedKvStates aug = apply_decaying_memory(kv, gates);
    CHECK(aug.v_tilde.at(0, 0) == doctest::Approx(0.5));
    CHECK(aug.v_tilde.at(1, 0) == doctest::Approx(0.25));
    CHECK(aug.v_tilde.at(2, 0) == doctest::Approx(0.125));
}

TEST_CASE("apply_decaying_memory holds zero state under gate 1") {
    Rng rng(12);
    const KvStates kv = random_kv(rng, 8, 3);
    const Matrix gates(8, 3, 1.0);  // cap disabled for the test
    const AugmentedKvStates aug = apply_decaying_memory(kv, gates);
    for (double x : aug.v_tilde.data()) CHECK(x == 0.0);
    for (double x : aug.k_tilde.data()) CHECK(x == 0.0);
}

TEST_CASE("apply_decaying_memory shape errors") {
    KvStates kv{Matrix(4, 2), Matrix(4, 2)};
    CHECK_THROWS_AS(apply_decaying_memory(kv, Matrix(3, 2, 0.5)), ShapeError);
    CHECK_THROWS_AS(apply_decaying_memory(kv, Matrix(4, 3, 0.5)), ShapeError);
    kv.values = Matrix(5, 2);
    CHECK_THROWS_AS(apply_decaying_memory(kv, Matrix(4, 2, 0.5)), ShapeError);
}

TEST_CASE("unrolled_weights hand examples") {
    Matrix gates(3, 1, 0.5);
    CHECK(unrolled_weights(gates, 1, 0) == Vector{0.5});
    const Vector w = unrolled_weights(gates, 3, 0);
    CHECK(w[0] == doctest::Approx(0.125));
    CHECK(w[1] == doctest::Approx(0.25));
    CHECK(w[2] == doctest::Approx(0.5));

    CHECK_THROWS_AS(unrolled_weights(gates, 0, 0), IndexError);
    CHECK_THROWS_AS(unrolled_weights(gates, 4, 0), IndexError);
    CHECK_THROWS_AS(unrolled_weights(gates, 2, 1), IndexError);
}

TEST_CASE("unrolled weights telescope to 1 - prod(g)") {
    Rng rng(13);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t T = 1 + rng.next_below(32);
        const Matrix gates = random_gates(rng, T, 2, 1.0);
        for (std::size_t ch = 0; ch < 2; ++ch) {
            const Vector w = unrolled_weights(gates, T, ch);
            double sum = 0.0;
            double prod = 1.0;
            for (std::size_t t = 0; t < T; ++t) {
                CHECK(w[t] >= 0.0);
                sum += w[t];
                prod *= gates.at(t, ch);
            }
            CHECK(sum == doctest::Approx(1.0 - prod).epsilon(1e-12));
        }
    }
}

TEST_CASE("recurrence equals unrolled-weights reconstruction on 200 random instances") {
    Rng rng(14);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t T = 1 + rng.next_below(128);
        const std::size_t d = 1 + rng.next_below(8);
        const KvStates kv = random_kv(rng, T, d);
        const Matrix gates = random_gates(rng, T, d, 1.0 - 1.0 / 64.0);
        const AugmentedKvStates aug = apply_decaying_memory(kv, gates);
        const std::size_t t = 1 + rng.next_below(T);
        const std::size_t ch = rng.next_below(d);
        CHECK(std::abs(aug.v_tilde.at(t - 1, ch) - reconstruct(gates, kv.values, t, ch)) <= 1e-9);
        CHECK(std::abs(aug.k_tilde.at(t - 1, ch) - reconstruct(gates, kv.keys, t, ch)) <= 1e-9);
    }
}

TEST_CASE("causality: perturbing row t leaves earlier augmented rows bit-identical") {
    Rng rng(15);
    const std::size_t T = 24, d = 3;
    KvStates kv = random_kv(rng, T, d);
    const Matrix gates = random_gates(rng, T, d, 0.98);
    const AugmentedKvStates before = apply_decaying_memory(kv, gates);

    const std::size_t t = 10;
    kv.values.at(t, 1) += 5.0;
    kv.keys.at(t, 2) -= 3.0;
    const AugmentedKvStates after = apply_decaying_memory(kv, gates);

    for (std::size_t r = 0; r < t; ++r)
        for (std::size_t j = 0; j < d; ++j) {
            CHECK(before.v_tilde.at(r, j) == after.v_tilde.at(r, j));
            CHECK(before.k_tilde.at(r, j) == after.k_tilde.at(r, j));
        }
    CHECK(before.v_tilde.at(t, 1) != after.v_tilde.at(t, 1));
}

TEST_CASE("augmented entries stay in the prefix hull including zero") {
    Rng rng(16);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t T = 2 + rng.next_below(40);
        const KvStates kv = random_kv(rng, T, 2);
        const Matrix gates = random_gates(rng, T, 2, 1.0);
        const AugmentedKvStates aug = apply_decaying_memory(kv, gates);
        for (std::size_t j = 0; j < 2; ++j) {
            double lo = 0.0, hi = 0.0;  // initial state 0 is in the hull
            for (std::size_t t = 0; t < T; ++t) {
                lo = std::min(lo, kv.values.at(t, j));
                hi = std::max(hi, kv.values.at(t, j));
                CHECK(aug.v_tilde.at(t, j) >= lo - 1e-12);
                CHECK(aug.v_tilde.at(t, j) <= hi + 1e-12);
            }
        }
    }
}

TEST_CASE("decay bound: unrolled weight of token s is at most cap^(t-s)") {
    const double cap = 1.0 - 1.0 / 64.0;
    Rng rng(17);
    const std::size_t T = 400;
    const Matrix gates = random_gates(rng, T, 1, cap);
    const Vector w = unrolled_weights(gates, T, 0);
    for (std::size_t s = 1; s <= T; ++s)
        CHECK(w[s - 1] <= std::pow(cap, static_cast<double>(T - s)) + 1e-15);

    // ~295 steps in the past the weight has fallen below a tenth of the
    // one-step weight (constant gates at the cap)
    const Matrix capped(T, 1, cap);
    const Vector wc = unrolled_weights(capped, T, 0);
    CHECK(wc[T - 1 - 295] < 0.1 * wc[T - 2]);
}
