#include <doctest.h>

#include <cmath>

#include "subgram/constructions.hpp"

using namespace subgram;

namespace {

Sequence random_sequence(int S, int T, uint64_t seed) {
    Rng rng(seed);
    Sequence seq(T);
    for (auto& t : seq) t = static_cast<int>(rng.below(S));
    return seq;
}

Sequence random_wellposed(int S, int T, int k, uint64_t seed) {
    for (uint64_t attempt = 0;; ++attempt) {
        Sequence seq = random_sequence(S, T, seed * 100003 + attempt);
        if (kgram_wellposed(seq, k)) return seq;
    }
}

} // namespace

TEST_CASE("build_kgram_params: k=1 is the unigram estimator for any c") {
    const ModelConfig cfg(3, 2, 16);
    const auto emb = Embedding::one_hot(3);
    for (double c : {1.0, 10.0, 50.0}) {
        const auto params = build_kgram_params(cfg, 1, c);
        CHECK(params.K2.max_abs() == 0.0);
        CHECK(params.Q2.max_abs() == 0.0);
        for (uint64_t rep = 0; rep < 20; ++rep) {
            const Sequence seq = random_sequence(3, 12, rep + 7);
            const auto tr = forward(params, emb, seq);
            CHECK(linf_distance(tr.p_out, kgram_predict(seq, 3, 1)) <= 1e-12);
        }
    }
}

TEST_CASE("build_kgram_params: Q2^T K2 is the displayed associative memory") {
    const ModelConfig cfg(3, 2, 8);
    const double c = 50.0;
    const auto params = build_kgram_params(cfg, 3, c);
    const Matrix prod = params.Q2.transposed().multiply(params.K2);
    // expected: c * sum_j [ s_j^0 (s_j^1)^T + s_j^1 (s_j^2)^T ]
    Matrix expected(cfg.d1(), cfg.d1());
    for (int j = 0; j < 3; ++j) {
        expected(0 * 3 + j, 1 * 3 + j) += c;
        expected(1 * 3 + j, 2 * 3 + j) += c;
    }
    for (std::size_t r = 0; r < prod.rows(); ++r)
        for (std::size_t cc = 0; cc < prod.cols(); ++cc)
            CHECK(std::abs(prod(r, cc) - expected(r, cc)) <= 1e-12);
}

TEST_CASE("build_kgram_params: matched histories score exactly c above one mismatch") {
    const ModelConfig cfg(3, 2, 12);
    const double c = 30.0;
    const auto params = build_kgram_params(cfg, 2, c);
    // query history is x_T-1 = 1; key 4 matches (x_3 = 1), key 6 does not (x_5 = 0)
    const Sequence seq{2, 0, 1, 1, 2, 0, 2, 0, 0, 2, 0, 1};
    const auto tr = forward(params, Embedding::one_hot(3), seq);
    REQUIRE(seq[3] == seq[11]);
    REQUIRE(seq[5] != seq[11]);
    CHECK(std::abs((tr.logits2[4] - tr.logits2[6]) - c) <= 1e-9);
}

TEST_CASE("construction-estimator equivalence on well-posed sequences") {
    const double c = 50.0;
    for (int S : {3, 5}) {
        const ModelConfig cfg(S, 2, 32);
        const auto emb = Embedding::one_hot(S);
        for (int k : {1, 2, 3}) {
            const auto params = build_kgram_params(cfg, emb, k, c);
            for (uint64_t rep = 0; rep < 100; ++rep) {
                const Sequence seq = random_wellposed(S, 32, k, rep + 11 * k + S);
                const auto tr = forward(params, emb, seq);
                const Vector est = kgram_predict(seq, S, k, Backoff::off);
                CHECK(linf_distance(tr.p_out, est) <= 1e-8);
            }
        }
    }
}

TEST_CASE("multihead bigram: m=1 equals the 2-gram configuration at matched effective scale") {
    const ModelConfig cfg(3, 1, 16);
    const double c = 40.0;
    const double c_eff = 1.0 * std::pow(c, 1.5);   // m * c^{3/2}
    const auto multi = build_multihead_bigram(cfg, c);
    const auto kgram = build_kgram_params(cfg, 2, c_eff);
    const auto emb = Embedding::one_hot(3);
    for (uint64_t rep = 0; rep < 200; ++rep) {
        const Sequence seq = random_sequence(3, 16, rep + 90);
        const Vector a = forward(multi, emb, seq).p_out;
        const Vector b = forward(kgram, emb, seq).p_out;
        CHECK(linf_distance(a, b) <= 1e-8);
    }
}

TEST_CASE("multihead bigram: m=3 equals the bigram estimator on well-posed sequences") {
    const ModelConfig cfg(3, 3, 24);
    const auto params = build_multihead_bigram(cfg, 50.0);
    const auto emb = Embedding::one_hot(3);
    for (uint64_t rep = 0; rep < 200; ++rep) {
        const Sequence seq = random_wellposed(3, 24, 2, rep + 17);
        const auto tr = forward(params, emb, seq);
        CHECK(linf_distance(tr.p_out, kgram_predict(seq, 3, 2, Backoff::off)) <= 1e-8);
    }
}

TEST_CASE("multihead bigram: every head concentrates on the sub-diagonal") {
    const ModelConfig cfg(5, 3, 32);
    const auto params = build_multihead_bigram(cfg, 50.0);
    const auto tr = forward(params, Embedding::one_hot(5), random_sequence(5, 32, 5));
    for (const auto& a : tr.a1) {
        double mass = 0.0;
        for (std::size_t i = 1; i < 32; ++i) mass += a(i, i - 1) / 31.0;
        CHECK(mass >= 0.99);
    }
}

TEST_CASE("subset construction: N={1} behaves like the 2-gram configuration when the last key is a true match") {
    const ModelConfig cfg(3, 2, 12);
    const std::size_t T = 12;
    const auto subset = build_subset_params(cfg, {1}, 50.0, T);
    const auto kgram = build_kgram_params(cfg, 2, 50.0);
    const auto emb = Embedding::one_hot(3);
    int tested = 0;
    for (uint64_t rep = 0; rep < 400 && tested < 100; ++rep) {
        Sequence seq = random_sequence(3, T, rep + 33);
        seq[T - 2] = seq[T - 1];   // final key matches its own history
        if (!kgram_wellposed(seq, 2)) continue;
        ++tested;
        const Vector a = forward(subset, emb, seq).p_out;
        const Vector b = forward(kgram, emb, seq).p_out;
        CHECK(linf_distance(a, b) <= 1e-8);
        CHECK(linf_distance(a, subset_predict(seq, 3, {1}, Backoff::off)) <= 1e-8);
    }
    CHECK(tested == 100);
}

TEST_CASE("subset construction: lag-2 crafted sequence") {
    const ModelConfig cfg(3, 2, 8);
    const std::size_t T = 8;
    const auto params = build_subset_params(cfg, {2}, 50.0, T);
    // predicted position's lag-2 token is x_6 = 1; matches at i = 4 and the
    // (self-matching) final key i = 7, both followed by token 0
    const Sequence seq{2, 0, 1, 2, 0, 1, 1, 0};
    REQUIRE(subset_match_set(seq, {2}) == std::vector<std::size_t>{4, 7});
    const auto tr = forward(params, Embedding::one_hot(3), seq);
    const Vector est = subset_predict(seq, 3, {2}, Backoff::off);
    CHECK(linf_distance(tr.p_out, est) <= 1e-8);
    CHECK(tr.p_out[0] >= 1.0 - 1e-8);
}

TEST_CASE("subset construction: wrong length raises LengthMismatch") {
    const ModelConfig cfg(3, 2, 8);
    const auto params = build_subset_params(cfg, {1}, 50.0, 8);
    CHECK_THROWS_AS(forward(params, Embedding::one_hot(3), random_sequence(3, 7, 3)),
                    LengthMismatch);
}

TEST_CASE("verify_attention_pattern: no violations at c=50 on well-posed sequences") {
    const ModelConfig cfg(3, 2, 16);
    for (int k : {1, 2, 3}) {
        const auto params = build_kgram_params(cfg, k, 50.0);
        for (uint64_t rep = 0; rep < 50; ++rep) {
            const Sequence seq = random_wellposed(3, 16, k, rep + 1234);
            const auto rep_out =
                verify_attention_pattern(params, Embedding::one_hot(3), seq, k, 50.0);
            CHECK(rep_out.wellposed);
            CHECK(rep_out.violations.empty());
        }
    }
}

TEST_CASE("verify_attention_pattern: history-matching pattern concentrates attention") {
    const ModelConfig cfg(3, 2, 9);
    const auto params = build_kgram_params(cfg, 3, 50.0);
    // query 2-history is (0, 2); matching keys are 2 and 5
    const Sequence seq{0, 2, 1, 0, 2, 2, 1, 0, 2};
    REQUIRE(match_set(seq, 3) == std::vector<std::size_t>{2, 5});
    const auto tr = forward(params, Embedding::one_hot(3), seq);
    CHECK(tr.a2[2] + tr.a2[5] >= 0.99);
    CHECK(std::abs(tr.a2[2] - 0.5) <= 1e-6);
}

TEST_CASE("verify_attention_pattern: k=1 attends uniformly for any c") {
    const ModelConfig cfg(4, 1, 10);
    for (double c : {2.0, 50.0}) {
        const auto params = build_kgram_params(cfg, 1, c);
        const auto tr = forward(params, Embedding::one_hot(4), random_sequence(4, 10, 88));
        for (double a : tr.a2) CHECK(std::abs(a - 0.1) <= 1e-12);
    }
}

TEST_CASE("stationarity probe: gradient norm strictly decreasing in c") {
    ProbeTask task;
    task.spec = NGramSpec(3, 3, 0.5, 777);
    task.k = 2;
    const auto report = stationarity_probe(task, {5.0, 10.0, 15.0}, {32}, 64);
    REQUIRE(report.cells.size() == 3);
    CHECK(report.cells[0].grad_norm_total > report.cells[1].grad_norm_total);
    CHECK(report.cells[1].grad_norm_total > report.cells[2].grad_norm_total);
    // per-group norms combine to the total in quadrature
    for (const auto& cell : report.cells) {
        const double q = std::sqrt(cell.grad_norm_a1 * cell.grad_norm_a1 +
                                   cell.grad_norm_v1 * cell.grad_norm_v1 +
                                   cell.grad_norm_k2 * cell.grad_norm_k2 +
                                   cell.grad_norm_q2 * cell.grad_norm_q2);
        CHECK(std::abs(q - cell.grad_norm_total) <= 1e-10);
    }
}

TEST_CASE("stationarity probe: log-norm slope at most -1/2 over c in [6, 14]") {
    ProbeTask task;
    task.spec = NGramSpec(3, 3, 0.5, 333);
    task.k = 2;
    const std::vector<double> cs{6.0, 8.0, 10.0, 12.0, 14.0};
    const auto report = stationarity_probe(task, cs, {32}, 64);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < cs.size(); ++i) {
        const double y = std::log(report.cells[i].grad_norm_total);
        sx += cs[i];
        sy += y;
        sxx += cs[i] * cs[i];
        sxy += cs[i] * y;
    }
    const double n = static_cast<double>(cs.size());
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    CHECK(slope <= -0.5);
}

TEST_CASE("stationarity probe: gradient norm decreasing in T at c = 3 ln T") {
    ProbeTask task;
    task.spec = NGramSpec(3, 3, 0.5, 555);
    task.k = 2;
    std::vector<double> norms;
    for (std::size_t T : {32, 128}) {
        const auto report = stationarity_probe(task, {3.0 * std::log(double(T))}, {T}, 48);
        norms.push_back(report.cells[0].grad_norm_total);
    }
    CHECK(norms[1] < norms[0]);
}

TEST_CASE("stationarity probe: construction beats a matched random point by 100x") {
    ProbeTask task;
    task.spec = NGramSpec(2, 2, 1.0, 444);
    task.k = 2;
    const std::size_t T = 64;
    const double c = 12.0;
    const ModelConfig cfg(2, 1, static_cast<int>(T));
    const auto emb = Embedding::one_hot(2);
    const auto theta = build_kgram_params(cfg, 2, c);
    Rng rng(4444);
    const auto random_point = random_params_matched_scale(theta, rng);

    GradientSet g_theta = GradientSet::zeros(cfg);
    GradientSet g_rand = GradientSet::zeros(cfg);
    const std::size_t B = 64;
    for (std::size_t b = 0; b < B; ++b) {
        const auto s = subgram::detail::make_probe_sample(task, T, b);
        g_theta.add_scaled(loss_grad(theta, emb, s.seq, s.truth_kgram), 1.0 / B);
        g_rand.add_scaled(loss_grad(random_point, emb, s.seq, s.truth_kgram), 1.0 / B);
    }
    CHECK(g_rand.norm_total() >= 100.0 * g_theta.norm_total());
}

TEST_CASE("random_params_matched_scale preserves group Frobenius norms") {
    const ModelConfig cfg(3, 2, 16);
    const auto theta = build_kgram_params(cfg, 3, 10.0);
    Rng rng(9);
    const auto r = random_params_matched_scale(theta, rng);
    double ta = 0, ra = 0;
    for (int h = 0; h < 2; ++h) {
        ta += theta.A1[h].frobenius_sq();
        ra += r.A1[h].frobenius_sq();
    }
    CHECK(std::sqrt(ra) == doctest::Approx(std::sqrt(ta)).epsilon(1e-12));
    CHECK(r.K2.frobenius() == doctest::Approx(theta.K2.frobenius()).epsilon(1e-12));
    CHECK(r.Q2.frobenius() == doctest::Approx(theta.Q2.frobenius()).epsilon(1e-12));
}
