#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "subgram/training.hpp"

using namespace subgram;

namespace {

TrainConfig tiny_config(uint64_t seed) {
    TrainConfig cfg;
    cfg.model = ModelConfig(3, 2, 16);
    cfg.task = NGramSpec(3, 3, 0.5, seed);
    cfg.T = 16;
    cfg.batch_size = 16;
    cfg.iters = 24;
    cfg.eval_every = 8;
    cfg.test_set_size = 128;
    cfg.seed = seed;
    return cfg;
}

} // namespace

TEST_CASE("adam_step: zero gradient leaves params unchanged (no decay)") {
    TrainConfig cfg = tiny_config(1);
    auto params = ModelParams::zeros(cfg.model);
    params.K2(0, 0) = 1.25;
    auto state = AdamState::zeros(cfg.model);
    const auto grads = GradientSet::zeros(cfg.model);
    adam_step(params, grads, state, cfg);
    CHECK(params.K2(0, 0) == 1.25);
}

TEST_CASE("adam_step: decoupled weight decay scales params") {
    TrainConfig cfg = tiny_config(1);
    cfg.weight_decay = 0.5;
    cfg.lr = 0.1;
    auto params = ModelParams::zeros(cfg.model);
    params.K2(0, 0) = 2.0;
    auto state = AdamState::zeros(cfg.model);
    adam_step(params, GradientSet::zeros(cfg.model), state, cfg);
    CHECK(params.K2(0, 0) == doctest::Approx(2.0 * (1.0 - 0.1 * 0.5)).epsilon(1e-12));
}

TEST_CASE("adam_step: constant gradient converges to unit steps of size lr") {
    TrainConfig cfg = tiny_config(1);
    cfg.lr = 0.01;
    auto params = ModelParams::zeros(cfg.model);
    auto state = AdamState::zeros(cfg.model);
    GradientSet g = GradientSet::zeros(cfg.model);
    g.dK2(0, 0) = 0.37;
    double prev = 0.0;
    double step = 0.0;
    for (int i = 0; i < 1000; ++i) {
        adam_step(params, g, state, cfg);
        step = std::abs(params.K2(0, 0) - prev);
        prev = params.K2(0, 0);
    }
    CHECK(std::abs(step - cfg.lr) / cfg.lr < 0.01);
}

TEST_CASE("train: iters=0 returns the initial model and its test CE") {
    TrainConfig cfg = tiny_config(3);
    cfg.iters = 0;
    const auto res = train(cfg);
    const auto init = init_params(cfg);
    CHECK(res.params.K2.data() == init.K2.data());
    CHECK(res.params.Q2.data() == init.Q2.data());
    REQUIRE(res.log.rows.size() == 1);
    const TestSet ts = TestSet::generate(cfg.task, cfg.T, cfg.test_set_size, cfg.seed);
    CHECK(res.log.rows[0].test_ce ==
          doctest::Approx(ts.model_ce(init, Embedding::one_hot(3))).epsilon(1e-14));
}

TEST_CASE("train: zero-attention init starts exactly at the unigram baseline") {
    TrainConfig cfg = tiny_config(4);
    cfg.iters = 0;
    const auto res = train(cfg);
    CHECK(std::abs(res.log.rows[0].test_ce - res.log.baseline_ces[0]) <= 1e-10);
}

TEST_CASE("train: deterministic across thread counts") {
    TrainConfig cfg = tiny_config(5);
    setenv("SUBGRAM_THREADS", "1", 1);
    const auto a = train(cfg);
    setenv("SUBGRAM_THREADS", "3", 1);
    const auto b = train(cfg);
    unsetenv("SUBGRAM_THREADS");
    REQUIRE(a.log.rows.size() == b.log.rows.size());
    for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
        CHECK(a.log.rows[i].test_ce == b.log.rows[i].test_ce);
        CHECK(a.log.rows[i].train_ce == b.log.rows[i].train_ce);
        CHECK(a.log.rows[i].grad_norm_total == b.log.rows[i].grad_norm_total);
    }
    CHECK(a.params.K2.data() == b.params.K2.data());
}

TEST_CASE("train: test CE never falls below the true conditional entropy") {
    TrainConfig cfg = tiny_config(6);
    cfg.iters = 64;
    cfg.eval_every = 16;
    const auto res = train(cfg);
    for (const auto& row : res.log.rows)
        CHECK(row.test_ce >= res.log.test_entropy - 1e-6);
}

TEST_CASE("train: averaged-positions mode runs and learns") {
    TrainConfig cfg = tiny_config(7);
    cfg.loss_mode = TrainConfig::LossMode::averaged_positions;
    cfg.start_t = 3;
    cfg.iters = 32;
    const auto res = train(cfg);
    CHECK(std::isfinite(res.log.rows.back().test_ce));
}

TEST_CASE("train: divergence is reported with the iteration") {
    TrainConfig cfg = tiny_config(8);
    cfg.lr = 1e300;
    cfg.iters = 50;
    CHECK_THROWS_AS(train(cfg), NumericalDivergence);
}

TEST_CASE("train: attention snapshots are row-stochastic and causal") {
    TrainConfig cfg = tiny_config(9);
    cfg.iters = 10;
    cfg.snapshot_iters = {0, 5, 10};
    const auto res = train(cfg);
    REQUIRE(res.log.snapshots.size() == 3);
    for (const auto& snap : res.log.snapshots) {
        for (const auto& a : snap.a1) {
            for (std::size_t i = 0; i < a.rows(); ++i) {
                double rs = 0.0;
                for (std::size_t j = 0; j < a.cols(); ++j) {
                    if (j > i) CHECK(a(i, j) == 0.0);
                    rs += a(i, j);
                }
                CHECK(std::abs(rs - 1.0) <= 1e-12);
            }
        }
        CHECK(std::abs(sum(snap.a2) - 1.0) <= 1e-12);
    }
}

TEST_CASE("detect_plateaus: three-level synthetic staircase") {
    std::vector<std::size_t> iters;
    std::vector<double> ces;
    for (std::size_t i = 0; i <= 3000; i += 10) {
        iters.push_back(i);
        ces.push_back(i < 1000 ? 1.6 : i < 2000 ? 1.2 : 0.9);
    }
    const auto segs = detect_plateaus(iters, ces, {1.6, 1.2, 0.9}, 256, 1e-5, 0.1);
    REQUIRE(segs.size() == 3);
    CHECK(segs[0].label == 1);
    CHECK(segs[1].label == 2);
    CHECK(segs[2].label == 3);
}

TEST_CASE("detect_plateaus: strictly decreasing series has none") {
    std::vector<std::size_t> iters;
    std::vector<double> ces;
    for (std::size_t i = 0; i <= 2000; i += 10) {
        iters.push_back(i);
        ces.push_back(2.0 - 1e-3 * static_cast<double>(i));
    }
    CHECK(detect_plateaus(iters, ces, {1.0}, 256, 1e-5, 0.1).empty());
}

TEST_CASE("detect_plateaus: constant series off every baseline is one unlabeled plateau") {
    std::vector<std::size_t> iters;
    std::vector<double> ces;
    for (std::size_t i = 0; i <= 2000; i += 10) {
        iters.push_back(i);
        ces.push_back(1.37);
    }
    const auto segs = detect_plateaus(iters, ces, {1.6, 1.2}, 256, 1e-5, 0.1);
    REQUIRE(segs.size() == 1);
    CHECK(segs[0].label == 0);
    CHECK(segs[0].start_index == 0);
    CHECK(segs[0].end_index == ces.size() - 1);
}

TEST_CASE("seed_sweep: contract and determinism") {
    TrainConfig cfg = tiny_config(10);
    cfg.iters = 16;
    CHECK_THROWS_AS(seed_sweep(cfg, {1}), InsufficientSeeds);
    const auto a = seed_sweep(cfg, {1, 2});
    const auto b = seed_sweep(cfg, {1, 2});
    REQUIRE(a.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(a[i].seed == b[i].seed);
        CHECK(a[i].plateau_labels == b[i].plateau_labels);
        CHECK(a[i].has_second_plateau == b[i].has_second_plateau);
    }
}
