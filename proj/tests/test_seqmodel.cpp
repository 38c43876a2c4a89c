#include <doctest.h>

#include <cmath>
#include <map>

#include "subgram/seqmodel.hpp"

using namespace subgram;

namespace {

// Dense null-space oracle: solve pi^T T = pi^T with sum(pi) = 1 by Gaussian
// elimination on (T^T - I) with the last row replaced by ones.
Vector dense_stationary_oracle(const Matrix& transition) {
    const std::size_t n = transition.rows();
    Matrix A(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) A(i, j) = transition(j, i) - (i == j ? 1.0 : 0.0);
    Vector b(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) A(n - 1, j) = 1.0;
    b[n - 1] = 1.0;

    // partial-pivot elimination
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(A(r, col)) > std::abs(A(piv, col))) piv = r;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(A(col, j), A(piv, j));
            std::swap(b[col], b[piv]);
        }
        const double d = A(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = A(r, col) / d;
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) A(r, j) -= f * A(col, j);
            b[r] -= f * b[col];
        }
    }
    Vector x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double acc = b[i];
        for (std::size_t j = i + 1; j < n; ++j) acc -= A(i, j) * x[j];
        x[i] = acc / A(i, i);
    }
    return x;
}

TransitionTensor make_tensor(int S, int n, const std::vector<Vector>& rows) {
    TransitionTensor t;
    t.spec = NGramSpec(S, n, 1.0, 0);
    t.rows = Matrix(t.spec.num_histories(), S);
    for (std::size_t h = 0; h < rows.size(); ++h)
        for (int j = 0; j < S; ++j) t.rows(h, j) = rows[h][j];
    return t;
}

} // namespace

TEST_CASE("spec validation") {
    CHECK_THROWS_AS(NGramSpec(1, 2, 1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(NGramSpec(2, 0, 1.0, 0), std::invalid_argument);
    CHECK_THROWS_AS(NGramSpec(2, 2, 0.0, 0), std::invalid_argument);
    CHECK(NGramSpec(5, 3, 0.5, 7).num_histories() == 25);
}

TEST_CASE("sample_lm shapes and row sums") {
    Rng rng(42);
    const auto t = sample_lm(NGramSpec(5, 3, 0.5, 42), rng);
    CHECK(t.rows.rows() == 25);
    CHECK(t.rows.cols() == 5);
    for (std::size_t h = 0; h < 25; ++h) {
        double s = 0.0;
        for (int j = 0; j < 5; ++j) {
            CHECK(t.rows(h, j) >= 0.0);
            s += t.rows(h, j);
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
    CHECK_NOTHROW(t.validate());
}

TEST_CASE("sample_lm n=1 is a single simplex row") {
    Rng rng(7);
    const auto t = sample_lm(NGramSpec(2, 1, 1.0, 7), rng);
    CHECK(t.rows.rows() == 1);
    CHECK(t.rows(0, 0) > 0.0);
    CHECK(t.rows(0, 1) > 0.0);
    CHECK(std::abs(t.rows(0, 0) + t.rows(0, 1) - 1.0) <= 1e-12);
}

TEST_CASE("sample_lm large alpha concentrates on uniform") {
    const NGramSpec spec(3, 2, 1e6, 0);
    double max_dev = 0.0;
    Vector mean(3, 0.0);
    for (int rep = 0; rep < 100; ++rep) {
        Rng rng = Rng::substream(11, "alpha-test", rep);
        const auto t = sample_lm(spec, rng);
        for (std::size_t h = 0; h < 3; ++h)
            for (int j = 0; j < 3; ++j) {
                mean[j] += t.rows(h, j) / 300.0;
                max_dev = std::max(max_dev, std::abs(t.rows(h, j) - 1.0 / 3.0));
            }
    }
    for (int j = 0; j < 3; ++j) CHECK(std::abs(mean[j] - 1.0 / 3.0) < 0.01);
    CHECK(max_dev < 0.01);
}

TEST_CASE("lift: order-2 lift is the tensor itself") {
    const auto t = make_tensor(2, 2, {{0.9, 0.1}, {0.4, 0.6}});
    const auto chain = lift(t);
    const Matrix dense = chain.dense();
    CHECK(dense(0, 0) == 0.9);
    CHECK(dense(0, 1) == 0.1);
    CHECK(dense(1, 0) == 0.4);
    CHECK(dense(1, 1) == 0.6);
}

TEST_CASE("lift: shift-and-append sparsity for n=3") {
    Rng rng(3);
    const auto t = sample_lm(NGramSpec(2, 3, 1.0, 3), rng);
    const auto chain = lift(t);
    const Matrix dense = chain.dense();
    CHECK(dense.rows() == 4);
    for (std::size_t h = 0; h < 4; ++h) {
        int nonzeros = 0;
        double rowsum = 0.0;
        for (std::size_t g = 0; g < 4; ++g) {
            if (dense(h, g) != 0.0) {
                ++nonzeros;
                // digit encoding: h = (older, newer); successor g must carry
                // h's newest token as its older digit
                CHECK(g / 2 == h % 2);
            }
            rowsum += dense(h, g);
        }
        CHECK(nonzeros == 2);
        CHECK(std::abs(rowsum - 1.0) <= 1e-12);
    }
}

TEST_CASE("stationary: symmetric chain") {
    const auto t = make_tensor(2, 2, {{0.5, 0.5}, {0.5, 0.5}});
    const auto pi = stationary(t);
    CHECK(pi.pi[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(pi.pi[1] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("stationary: hand-derived pi = [0.8, 0.2]") {
    const auto t = make_tensor(2, 2, {{0.9, 0.1}, {0.4, 0.6}});
    const auto pi = stationary(t, 1e-13);
    CHECK(std::abs(pi.pi[0] - 0.8) <= 1e-12);
    CHECK(std::abs(pi.pi[1] - 0.2) <= 1e-12);
    CHECK(pi.residual <= 1e-13);
}

TEST_CASE("stationary: power iteration matches dense null-space oracle") {
    for (uint64_t seed : {1ull, 2ull}) {
        Rng rng(seed);
        const auto t = sample_lm(NGramSpec(3, 3, 0.7, seed), rng);
        const auto chain = lift(t);
        const auto pi = stationary(chain);
        const Vector oracle = dense_stationary_oracle(chain.dense());
        CHECK(linf_distance(pi.pi, oracle) <= 1e-10);
        CHECK(std::abs(sum(pi.pi) - 1.0) <= 1e-12);
    }
}

TEST_CASE("stationary: non-convergence raises") {
    // slow-mixing asymmetric chain: stationary point far from the uniform start
    const double e = 1e-9;
    const auto t = make_tensor(2, 2, {{1.0 - e, e}, {2 * e, 1.0 - 2 * e}});
    CHECK_THROWS_AS(stationary(t, 1e-12, 1000), NonConvergence);
}

TEST_CASE("sample_sequence: absorbing dynamics") {
    const auto t = make_tensor(2, 2, {{1.0, 0.0}, {0.0, 1.0}});
    StationaryDistribution pi{{0.5, 0.5}, 0.0};
    Rng rng(5);
    const auto seq = sample_sequence(t, pi, 16, rng);
    for (std::size_t i = 1; i < seq.size(); ++i) CHECK(seq[i] == seq[0]);
}

TEST_CASE("sample_sequence: tokens in range") {
    Rng rng(9);
    const auto t = sample_lm(NGramSpec(5, 3, 0.5, 9), rng);
    const auto pi = stationary(t);
    const auto seq = sample_sequence(t, pi, 32, rng);
    CHECK(seq.size() == 32);
    for (int x : seq) {
        CHECK(x >= 0);
        CHECK(x < 5);
    }
}

TEST_CASE("sample_sequence: fixed-position marginal matches pi") {
    const auto t = make_tensor(2, 2, {{0.9, 0.1}, {0.4, 0.6}});
    const auto pi = stationary(t, 1e-13);
    const int reps = 100000;
    int count_pos1 = 0, count_pos3 = 0;
    for (int r = 0; r < reps; ++r) {
        Rng rng = Rng::substream(123, "marginal", r);
        const auto seq = sample_sequence(t, pi, 5, rng);
        count_pos1 += seq[1] == 0;
        count_pos3 += seq[3] == 0;
    }
    CHECK(std::abs(count_pos1 / double(reps) - 0.8) < 0.01);
    CHECK(std::abs(count_pos3 / double(reps) - 0.8) < 0.01);
}

TEST_CASE("shift invariance of window marginals (n=3 pairs)") {
    Rng rng(17);
    const auto t = sample_lm(NGramSpec(2, 3, 0.8, 17), rng);
    const auto pi = stationary(t);
    const int reps = 20000;
    std::map<int, int> at0, at3;
    for (int r = 0; r < reps; ++r) {
        Rng srng = Rng::substream(91, "shift", r);
        const auto seq = sample_sequence(t, pi, 8, srng);
        at0[seq[0] * 2 + seq[1]] += 1;
        at3[seq[3] * 2 + seq[4]] += 1;
    }
    for (int w = 0; w < 4; ++w) {
        const double p0 = at0[w] / double(reps);
        const double p3 = at3[w] / double(reps);
        const double se = std::sqrt(p0 * (1 - p0) / reps) + std::sqrt(p3 * (1 - p3) / reps);
        CHECK(std::abs(p0 - p3) <= 3.0 * se + 1e-9);
    }
}

TEST_CASE("conditional: full history is the tensor row, bit-identical") {
    Rng rng(21);
    const auto t = sample_lm(NGramSpec(3, 3, 0.5, 21), rng);
    const auto pi = stationary(t);
    const std::vector<int> hist{2, 1};
    const Vector c = conditional(t, pi, hist);
    const std::size_t idx = encode_history(hist, 3);
    for (int s = 0; s < 3; ++s) CHECK(c[s] == t.rows(idx, s));
}

TEST_CASE("conditional: empty history returns stationary token marginal") {
    const auto t = make_tensor(2, 2, {{0.9, 0.1}, {0.4, 0.6}});
    const auto pi = stationary(t, 1e-13);
    const Vector c = conditional(t, pi, {});
    CHECK(std::abs(c[0] - 0.8) <= 1e-10);
    CHECK(std::abs(c[1] - 0.2) <= 1e-10);
}

TEST_CASE("conditional: l=1 for n=3 matches enumeration oracle") {
    Rng rng(33);
    const auto t = sample_lm(NGramSpec(2, 3, 0.6, 33), rng);
    const auto pi = stationary(t, 1e-14);
    // enumerate all (h, next) windows weighted by pi
    for (int g = 0; g < 2; ++g) {
        Vector num(2, 0.0);
        double den = 0.0;
        for (std::size_t h = 0; h < 4; ++h) {
            if (static_cast<int>(h % 2) != g) continue;   // newest digit must equal g
            den += pi.pi[h];
            for (int y = 0; y < 2; ++y) num[y] += pi.pi[h] * t.rows(h, y);
        }
        for (auto& v : num) v /= den;
        const Vector c = conditional(t, pi, {g});
        CHECK(linf_distance(c, num) <= 1e-12);
    }
}

TEST_CASE("conditional: zero-mass history raises DegenerateHistory") {
    // token 1 is never emitted, so histories containing it carry no mass
    TransitionTensor t;
    t.spec = NGramSpec(2, 3, 1.0, 0);
    t.rows = Matrix(4, 2);
    for (std::size_t h = 0; h < 4; ++h) t.rows(h, 0) = 1.0;
    const auto pi = stationary(t);
    CHECK_THROWS_AS(conditional(t, pi, {1}), DegenerateHistory);
    CHECK_NOTHROW(conditional(t, pi, {0}));
}

TEST_CASE("ce_loss_vs_truth") {
    CHECK(ce_loss_vs_truth({0.0, 1.0}, {0.0, 1.0}) == doctest::Approx(0.0).epsilon(1e-12));
    const Vector uniform5(5, 0.2);
    CHECK(ce_loss_vs_truth(uniform5, {1, 0, 0, 0, 0}) == doctest::Approx(std::log(5.0)));
    CHECK(ce_loss_vs_truth({0.5, 0.5}, {1.0, 0.0}) == doctest::Approx(std::log(2.0)));
    // floor keeps zero predictions finite
    CHECK(std::isfinite(ce_loss_vs_truth({1.0, 0.0}, {0.0, 1.0})));
}
