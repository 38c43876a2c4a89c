#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "subgram/estimators.hpp"

using namespace subgram;

namespace {

// Literal counting-definition oracle with 1-based indices and explicit double loops.
Vector naive_kgram_oracle(const Sequence& seq, int S, int k) {
    const int T = static_cast<int>(seq.size());
    auto x = [&](int l) { return seq[l - 1]; };   // 1-based
    std::vector<long long> counts(S, 0);
    long long total = 0;
    for (int l = k; l <= T; ++l) {
        bool match = true;
        for (int offset = 1; offset <= k - 1; ++offset)
            if (x(l - offset) != x(T + 1 - offset)) {
                match = false;
                break;
            }
        if (match) {
            counts[x(l)] += 1;
            ++total;
        }
    }
    Vector out(S, 0.0);
    if (total == 0) return out;
    for (int s = 0; s < S; ++s) out[s] = double(counts[s]) / double(total);
    return out;
}

Sequence random_sequence(int S, int T, uint64_t seed) {
    Rng rng(seed);
    Sequence seq(T);
    for (auto& t : seq) t = static_cast<int>(rng.below(S));
    return seq;
}

} // namespace

TEST_CASE("kgram_predict: worked examples") {
    CHECK(kgram_predict({0, 0, 0, 0}, 2, 1) == Vector{1.0, 0.0});
    CHECK(kgram_predict({0, 1, 0, 1, 0}, 2, 2) == Vector{0.0, 1.0});
    const Vector r = kgram_predict({0, 1, 1}, 2, 1);
    CHECK(r[0] == doctest::Approx(1.0 / 3.0));
    CHECK(r[1] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("kgram_predict: empty match set behavior") {
    const Sequence seq{0, 1};   // no earlier position follows token 1
    CHECK_THROWS_AS(kgram_predict(seq, 2, 2, Backoff::off), EmptyMatchSet);
    const Vector backed = kgram_predict(seq, 2, 2, Backoff::on);   // falls back to unigram
    CHECK(backed[0] == doctest::Approx(0.5));
    CHECK(backed[1] == doctest::Approx(0.5));
}

TEST_CASE("kgram_predict equals the naive double-loop oracle") {
    int checked = 0;
    for (uint64_t rep = 0; rep < 10000; ++rep) {
        const int S = 2 + static_cast<int>(rep % 4);
        const int T = 3 + static_cast<int>((rep * 7) % 30);
        const int k = 1 + static_cast<int>(rep % 4);
        const Sequence seq = random_sequence(S, T, rep + 1000);
        const Vector oracle = naive_kgram_oracle(seq, S, k);
        if (sum(oracle) == 0.0) {
            CHECK_THROWS_AS(kgram_predict(seq, S, k, Backoff::off), EmptyMatchSet);
            continue;
        }
        const Vector got = kgram_predict(seq, S, k, Backoff::off);
        REQUIRE(linf_distance(got, oracle) == 0.0);
        ++checked;
    }
    CHECK(checked > 5000);
}

TEST_CASE("output is on the simplex") {
    for (uint64_t rep = 0; rep < 200; ++rep) {
        const Sequence seq = random_sequence(3, 24, rep);
        const Vector p = kgram_predict(seq, 3, 3, Backoff::on);
        double s = 0.0;
        for (double v : p) {
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(std::abs(s - 1.0) <= 1e-12);
    }
}

TEST_CASE("monotone data sufficiency: match sets nest") {
    for (uint64_t rep = 0; rep < 200; ++rep) {
        const Sequence seq = random_sequence(3, 20, rep + 77);
        for (int k = 2; k <= 4; ++k) {
            const auto mk = match_set(seq, k);
            const auto mk1 = match_set(seq, k - 1);
            for (std::size_t i : mk)
                CHECK(std::find(mk1.begin(), mk1.end(), i) != mk1.end());
        }
    }
}

TEST_CASE("subset_predict: contiguous special cases") {
    for (uint64_t rep = 0; rep < 300; ++rep) {
        const Sequence seq = random_sequence(3, 16, rep + 5);
        CHECK(subset_predict(seq, 3, {1}, Backoff::on) == kgram_predict(seq, 3, 2, Backoff::on));
        CHECK(subset_predict(seq, 3, {1, 2}, Backoff::on) ==
              kgram_predict(seq, 3, 3, Backoff::on));
    }
}

TEST_CASE("subset_predict: lag-2 worked example") {
    const Sequence seq{0, 1, 0, 0, 1, 0};
    const Vector p = subset_predict(seq, 2, {2});
    CHECK(p == Vector{1.0, 0.0});
}

TEST_CASE("subset_predict: brute-force enumeration agreement") {
    for (uint64_t rep = 0; rep < 2000; ++rep) {
        const int T = 6 + static_cast<int>(rep % 20);
        const Sequence seq = random_sequence(2, T, rep + 31);
        const std::vector<int> lags{2, 4};
        // brute force: positions i with x[i-2]==x[T-2] and x[i-4]==x[T-4]
        std::vector<long long> counts(2, 0);
        long long total = 0;
        for (int i = 4; i < T; ++i)
            if (seq[i - 2] == seq[T - 2] && seq[i - 4] == seq[T - 4]) {
                counts[seq[i]] += 1;
                ++total;
            }
        if (total == 0) {
            CHECK_THROWS_AS(subset_predict(seq, 2, lags, Backoff::off), EmptyMatchSet);
            continue;
        }
        const Vector got = subset_predict(seq, 2, lags, Backoff::off);
        CHECK(got[0] == doctest::Approx(double(counts[0]) / total));
    }
}

TEST_CASE("subset_predict: max lag must be below T") {
    CHECK_THROWS_AS(subset_predict({0, 1}, 2, {2}), std::invalid_argument);
}

TEST_CASE("subset_predict: backoff drops the largest lag") {
    // no position matches both lags, but lag 1 alone matches
    const Sequence seq{1, 0, 2, 1, 2, 2};   // query lags: x[5-1]=2, x[5-2]=2
    REQUIRE(subset_match_set(seq, {1, 2}).empty());
    REQUIRE(!subset_match_set(seq, {1}).empty());
    CHECK(subset_predict(seq, 3, {1, 2}, Backoff::on) ==
          subset_predict(seq, 3, {1}, Backoff::off));
}

TEST_CASE("estimator_ce: uniform source gives log S for k=1") {
    TransitionTensor t;
    t.spec = NGramSpec(3, 2, 1.0, 0);
    t.rows = Matrix(3, 3, 1.0 / 3.0);
    const auto pi = stationary(t);
    SequenceBatch batch;
    for (int b = 0; b < 100; ++b) {
        Rng rng = Rng::substream(55, "est-uni", b);
        batch.sequences.push_back(sample_sequence(t, pi, 256, rng));
        batch.lm_index.push_back(0);
    }
    const auto res = estimator_ce(EstimatorKind::make_kgram(1), batch, {t}, {pi});
    CHECK(std::abs(res.mean_ce - std::log(3.0)) < 0.01);
}

TEST_CASE("estimator_ce: deterministic source gives zero CE at k=n") {
    TransitionTensor t;
    t.spec = NGramSpec(2, 2, 1.0, 0);
    t.rows = Matrix(2, 2);
    t.rows(0, 1) = 1.0;   // 0 -> 1 -> 0 -> ...
    t.rows(1, 0) = 1.0;
    StationaryDistribution pi{{0.5, 0.5}, 0.0};
    SequenceBatch batch;
    for (int b = 0; b < 20; ++b) {
        Rng rng = Rng::substream(66, "est-det", b);
        batch.sequences.push_back(sample_sequence(t, pi, 64, rng));
        batch.lm_index.push_back(0);
    }
    const auto res = estimator_ce(EstimatorKind::make_kgram(2), batch, {t}, {pi});
    CHECK(res.mean_ce == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("estimator_ce: k=n approaches the conditional entropy at large T") {
    const NGramSpec spec(2, 2, 1.0, 88);
    std::vector<TransitionTensor> tensors;
    std::vector<StationaryDistribution> pis;
    SequenceBatch batch;
    double mean_entropy = 0.0;
    const int B = 200;
    for (int b = 0; b < B; ++b) {
        Rng rng = Rng::substream(88, "est-cons", b);
        tensors.push_back(sample_lm(spec, rng));
        pis.push_back(stationary(tensors.back()));
        batch.sequences.push_back(sample_sequence(tensors.back(), pis.back(), 4096, rng));
        batch.lm_index.push_back(b);
        const auto& seq = batch.sequences.back();
        mean_entropy += entropy(conditional(tensors[b], pis[b], {seq.back()})) / B;
    }
    const auto res = estimator_ce(EstimatorKind::make_kgram(2), batch, tensors, pis);
    CHECK(std::abs(res.mean_ce - mean_entropy) < 0.01);
}

TEST_CASE("consistency: median TV to the true conditional decreases with T") {
    const NGramSpec spec(3, 3, 0.5, 99);
    const int B = 100;
    auto median_tv = [&](std::size_t T, int k) {
        std::vector<double> tvs;
        for (int b = 0; b < B; ++b) {
            Rng rng = Rng::substream(99, "est-tv", b);
            const auto tensor = sample_lm(spec, rng);
            const auto pi = stationary(tensor);
            Rng srng = Rng::substream(99, "est-tv-seq", b * 8 + static_cast<uint64_t>(T));
            const auto seq = sample_sequence(tensor, pi, T, srng);
            std::vector<int> hist(seq.end() - (k - 1), seq.end());
            tvs.push_back(tv_distance(kgram_predict(seq, 3, k, Backoff::on),
                                      conditional(tensor, pi, hist)));
        }
        std::sort(tvs.begin(), tvs.end());
        return tvs[tvs.size() / 2];
    };
    CHECK(median_tv(512, 2) < median_tv(64, 2));
}
