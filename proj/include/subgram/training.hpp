// Adam training loop on fresh in-context data, metric logging against frozen
// estimator baselines, plateau detection, and the multi-seed sweep.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "subgram/errors.hpp"
#include "subgram/estimators.hpp"
#include "subgram/grad.hpp"
#include "subgram/parallel.hpp"
#include "subgram/rng.hpp"
#include "subgram/seqmodel.hpp"
#include "subgram/transformer.hpp"

namespace subgram {

struct InitSpec {
    enum class Kind { zeros, gaussian } kind = Kind::zeros;
    double sigma = 0.02;
    static InitSpec zeros() { return {Kind::zeros, 0.0}; }
    static InitSpec gaussian(double sigma) { return {Kind::gaussian, sigma}; }
};

struct TrainConfig {
    ModelConfig model;
    NGramSpec task;            // S, n, alpha; seed below governs everything
    std::size_t T = 32;        // in-context sequence length

    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;

    std::size_t batch_size = 128;
    std::size_t iters = 1 << 14;
    std::size_t eval_every = 64;

    enum class LossMode { final_position, averaged_positions } loss_mode = LossMode::final_position;
    std::size_t start_t = 0;   // averaged mode: first predicted position (1-based), >= n

    uint64_t seed = 0;
    std::vector<std::size_t> snapshot_iters;
    std::size_t test_set_size = 1 << 16;

    // Defaults reproduce the uniform-attention start: A1 and K2 at zero make
    // the second layer exactly uniform (output = unigram estimate) while the
    // nonzero Q2 keeps the K2 gradient alive, so training can leave the
    // point.
    InitSpec init_a1 = InitSpec::zeros();
    InitSpec init_v1 = InitSpec::gaussian(0.02);
    InitSpec init_k2 = InitSpec::zeros();
    InitSpec init_q2 = InitSpec::gaussian(0.02);

    void validate() const {
        model.validate();
        task.validate();
        if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
        if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
            throw std::invalid_argument("betas must be in [0,1)");
        if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
        if (T < static_cast<std::size_t>(task.order)) throw std::invalid_argument("T must be >= n");
        if (T > static_cast<std::size_t>(model.T_max)) throw std::invalid_argument("T exceeds T_max");
        if (loss_mode == LossMode::averaged_positions &&
            start_t < static_cast<std::size_t>(task.order))
            throw std::invalid_argument("start_t must be >= n");
    }
};

// -------- Adam with decoupled weight decay --------

struct AdamState {
    std::vector<Matrix> mA1, vA1, mV1, vV1;
    Matrix mK2, vK2, mQ2, vQ2;
    std::size_t t = 0;

    static AdamState zeros(const ModelConfig& cfg) {
        AdamState s;
        s.mA1.assign(cfg.m, Matrix(cfg.T_max, cfg.T_max));
        s.vA1 = s.mA1;
        s.mV1.assign(cfg.m, Matrix(cfg.d, cfg.d));
        s.vV1 = s.mV1;
        s.mK2 = Matrix(cfg.dh(), cfg.d1());
        s.vK2 = s.mK2;
        s.mQ2 = s.mK2;
        s.vQ2 = s.mK2;
        return s;
    }
};

namespace detail {

inline void adam_update_array(std::vector<double>& theta, const std::vector<double>& g,
                              std::vector<double>& m, std::vector<double>& v, double lr,
                              double beta1, double beta2, double eps, double wd,
                              double bc1, double bc2) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
        if (wd != 0.0) theta[i] *= (1.0 - lr * wd);
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        theta[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

} // namespace detail

// adam_step: bias-corrected Adam; decoupled weight decay is applied
// multiplicatively before the update.
inline void adam_step(ModelParams& params, const GradientSet& grads, AdamState& state,
                      const TrainConfig& cfg) {
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (int h = 0; h < params.config.m; ++h) {
        detail::adam_update_array(params.A1[h].data(), grads.dA1[h].data(), state.mA1[h].data(),
                                  state.vA1[h].data(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps,
                                  cfg.weight_decay, bc1, bc2);
        detail::adam_update_array(params.V1[h].data(), grads.dV1[h].data(), state.mV1[h].data(),
                                  state.vV1[h].data(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps,
                                  cfg.weight_decay, bc1, bc2);
    }
    detail::adam_update_array(params.K2.data(), grads.dK2.data(), state.mK2.data(),
                              state.vK2.data(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps,
                              cfg.weight_decay, bc1, bc2);
    detail::adam_update_array(params.Q2.data(), grads.dQ2.data(), state.mQ2.data(),
                              state.vQ2.data(), cfg.lr, cfg.beta1, cfg.beta2, cfg.eps,
                              cfg.weight_decay, bc1, bc2);
}

// -------- metrics --------

struct MetricsRow {
    std::size_t iter = 0;
    double train_ce = 0.0;
    double test_ce = 0.0;
    double grad_norm_total = 0.0;
    double grad_norm_a1 = 0.0;
    double grad_norm_v1 = 0.0;
    double grad_norm_k2 = 0.0;
    double grad_norm_q2 = 0.0;
    // mean sub-diagonal attention mass per head and lag (lag index 1..n-1)
    std::vector<std::vector<double>> head_lag_mass;
    int plateau_label = 0;   // 0: none; k > 0: within match_tol of baseline k
};

struct AttentionSnapshot {
    std::size_t iter = 0;
    std::vector<Matrix> a1;   // softmaxed first-layer maps, T x T
    Vector a2;                // second-layer attention on the probe sequence
};

struct PlateauSegment {
    std::size_t start_index = 0, end_index = 0;   // inclusive row indices
    std::size_t start_iter = 0, end_iter = 0;
    double mean_ce = 0.0;
    int label = 0;   // matched baseline k, or 0
};

struct MetricsLog {
    std::vector<MetricsRow> rows;
    std::vector<double> baseline_ces;            // raw counting estimator, index k-1
    std::vector<double> baseline_ces_smoothed;   // posterior-mean estimator (plateau levels)
    double test_entropy = 0.0;   // mean true conditional entropy of the test set
    std::vector<AttentionSnapshot> snapshots;
    std::vector<PlateauSegment> plateaus;
};

struct TrainResult {
    MetricsLog log;
    ModelParams params;
};

// -------- frozen test set --------

struct TestSet {
    std::vector<Sequence> seqs;
    std::vector<Vector> truths;
    double mean_entropy = 0.0;

    static TestSet generate(const NGramSpec& task, std::size_t T, std::size_t size,
                            uint64_t seed) {
        TestSet ts;
        ts.seqs.resize(size);
        ts.truths.resize(size);
        std::vector<double> ents(size, 0.0);
        parallel_map_reduce<int>(
            size, 256, 0,
            [&](std::size_t lo, std::size_t hi) {
                for (std::size_t i = lo; i < hi; ++i) {
                    Rng lm_rng = Rng::substream(seed, "test-lm", i);
                    const TransitionTensor tensor = sample_lm(task, lm_rng);
                    const StationaryDistribution pi = stationary(tensor);
                    Rng seq_rng = Rng::substream(seed, "test-seq", i);
                    ts.seqs[i] = sample_sequence(tensor, pi, T, seq_rng);
                    std::vector<int> hist(ts.seqs[i].end() - (task.order - 1), ts.seqs[i].end());
                    ts.truths[i] = conditional(tensor, pi, hist);
                    ents[i] = entropy(ts.truths[i]);
                }
                return 0;
            },
            [](int&, int&&) {});
        double total = 0.0;
        for (double e : ents) total += e;
        ts.mean_entropy = total / static_cast<double>(size);
        return ts;
    }

    // The first-layer attention is input-independent, so softmax(A1) is
    // shared by every sequence of one evaluation.
    double model_ce(const ModelParams& params, const Embedding& emb) const {
        const std::size_t T = seqs.front().size();
        const ModelConfig& cfg = params.config;
        const int d = cfg.d, D1 = cfg.d1(), Dh = cfg.dh();
        std::vector<Matrix> a1;
        for (int h = 0; h < cfg.m; ++h) {
            Matrix logits(T, T);
            for (std::size_t i = 0; i < T; ++i)
                for (std::size_t j = 0; j <= i; ++j) logits(i, j) = params.A1[h](i, j);
            a1.push_back(masked_softmax(logits));
        }
        return parallel_map_reduce<double>(
                   seqs.size(), 256, 0.0,
                   [&](std::size_t lo, std::size_t hi) {
                       double acc = 0.0;
                       Matrix r1(T, D1), k2r1(T, Dh);
                       Vector scores(T), a2, p_out(cfg.S), u(d);
                       for (std::size_t idx = lo; idx < hi; ++idx) {
                           const Sequence& seq = seqs[idx];
                           for (std::size_t i = 0; i < T; ++i) {
                               const double* si = emb.token(seq[i]);
                               for (int l = 0; l < d; ++l) r1(i, l) = si[l];
                           }
                           for (int h = 0; h < cfg.m; ++h) {
                               const Matrix& a = a1[h];
                               const Matrix& V = params.V1[h];
                               const int off = (h + 1) * d;
                               for (std::size_t i = 0; i < T; ++i) {
                                   std::fill(u.begin(), u.end(), 0.0);
                                   for (std::size_t j = 0; j <= i; ++j) {
                                       const double w = a(i, j);
                                       const double* sj = emb.token(seq[j]);
                                       for (int l = 0; l < d; ++l) u[l] += w * sj[l];
                                   }
                                   for (int r = 0; r < d; ++r) {
                                       double accv = 0.0;
                                       for (int l = 0; l < d; ++l) accv += V(r, l) * u[l];
                                       r1(i, off + r) = accv;
                                   }
                               }
                           }
                           for (std::size_t j = 0; j < T; ++j) {
                               const double* r1j = r1.row(j);
                               for (int r = 0; r < Dh; ++r) {
                                   const double* k2r = params.K2.row(r);
                                   double accv = 0.0;
                                   for (int c = 0; c < D1; ++c) accv += k2r[c] * r1j[c];
                                   k2r1(j, r) = accv;
                               }
                           }
                           const Vector q2r1t =
                               params.Q2.apply(Vector(r1.row(T - 1), r1.row(T - 1) + D1));
                           for (std::size_t j = 0; j < T; ++j) {
                               double accv = 0.0;
                               for (int r = 0; r < Dh; ++r) accv += k2r1(j, r) * q2r1t[r];
                               scores[j] = accv;
                           }
                           a2 = softmax_prefix(scores, T);
                           std::fill(p_out.begin(), p_out.end(), 0.0);
                           for (std::size_t j = 0; j < T; ++j) p_out[seq[j]] += a2[j];
                           acc += ce_loss_vs_truth(p_out, truths[idx]);
                       }
                       return acc;
                   },
                   [](double& a, double&& b) { a += b; }) /
               static_cast<double>(seqs.size());
    }

    double baseline_ce(int k) const {
        const int S = static_cast<int>(truths.front().size());
        return parallel_map_reduce<double>(
                   seqs.size(), 256, 0.0,
                   [&](std::size_t lo, std::size_t hi) {
                       double acc = 0.0;
                       for (std::size_t i = lo; i < hi; ++i)
                           acc += ce_loss_vs_truth(kgram_predict(seqs[i], S, k, Backoff::on),
                                                   truths[i]);
                       return acc;
                   },
                   [](double& a, double&& b) { a += b; }) /
               static_cast<double>(seqs.size());
    }

    double baseline_ce_smoothed(int k, double alpha) const {
        const int S = static_cast<int>(truths.front().size());
        return parallel_map_reduce<double>(
                   seqs.size(), 256, 0.0,
                   [&](std::size_t lo, std::size_t hi) {
                       double acc = 0.0;
                       for (std::size_t i = lo; i < hi; ++i)
                           acc += ce_loss_vs_truth(kgram_predict_smoothed(seqs[i], S, k, alpha),
                                                   truths[i]);
                       return acc;
                   },
                   [](double& a, double&& b) { a += b; }) /
               static_cast<double>(seqs.size());
    }
};

namespace detail {

inline void init_group(std::vector<Matrix>& ms, const InitSpec& spec, Rng& rng) {
    if (spec.kind == InitSpec::Kind::zeros) return;
    for (auto& m : ms)
        for (auto& v : m.data()) v = rng.gaussian(0.0, spec.sigma);
}

inline std::vector<std::vector<double>> head_lag_masses(const ModelParams& params, std::size_t T,
                                                        int max_lag) {
    std::vector<std::vector<double>> out(params.config.m);
    for (int h = 0; h < params.config.m; ++h) {
        Matrix logits(T, T);
        for (std::size_t i = 0; i < T; ++i)
            for (std::size_t j = 0; j <= i; ++j) logits(i, j) = params.A1[h](i, j);
        const Matrix a = masked_softmax(logits);
        out[h].assign(max_lag, 0.0);
        for (int l = 1; l <= max_lag; ++l) {
            double acc = 0.0;
            std::size_t count = 0;
            for (std::size_t i = static_cast<std::size_t>(l); i < T; ++i) {
                acc += a(i, i - l);
                ++count;
            }
            out[h][l - 1] = count ? acc / static_cast<double>(count) : 0.0;
        }
    }
    return out;
}

} // namespace detail

inline ModelParams init_params(const TrainConfig& cfg) {
    ModelParams p = ModelParams::zeros(cfg.model);
    Rng rng = Rng::substream(cfg.seed, "init", 0);
    detail::init_group(p.A1, cfg.init_a1, rng);
    detail::init_group(p.V1, cfg.init_v1, rng);
    std::vector<Matrix> k2{std::move(p.K2)}, q2{std::move(p.Q2)};
    detail::init_group(k2, cfg.init_k2, rng);
    detail::init_group(q2, cfg.init_q2, rng);
    p.K2 = std::move(k2[0]);
    p.Q2 = std::move(q2[0]);
    return p;
}

// train: each iteration draws batch_size fresh (LM, sequence) pairs,
// takes one Adam step on the batch-mean analytic gradient, and logs metrics
// on a frozen test set every eval_every iterations (plus the final state).
inline TrainResult train(const TrainConfig& cfg) {
    cfg.validate();
    const Embedding emb = Embedding::one_hot(cfg.model.S);
    const int n = cfg.task.order;

    TestSet test = TestSet::generate(cfg.task, cfg.T, cfg.test_set_size, cfg.seed);

    TrainResult result;
    result.params = init_params(cfg);
    result.log.test_entropy = test.mean_entropy;
    for (int k = 1; k <= n; ++k) {
        result.log.baseline_ces.push_back(test.baseline_ce(k));
        result.log.baseline_ces_smoothed.push_back(
            test.baseline_ce_smoothed(k, cfg.task.dirichlet_alpha));
    }

    AdamState state = AdamState::zeros(cfg.model);
    const int max_lag = std::min<int>(n - 1 > 0 ? n - 1 : 1, static_cast<int>(cfg.T) - 1);

    auto snapshot_wanted = [&](std::size_t iter) {
        return std::find(cfg.snapshot_iters.begin(), cfg.snapshot_iters.end(), iter) !=
               cfg.snapshot_iters.end();
    };
    auto take_snapshot = [&](std::size_t iter) {
        AttentionSnapshot snap;
        snap.iter = iter;
        for (int h = 0; h < cfg.model.m; ++h) {
            Matrix logits(cfg.T, cfg.T);
            for (std::size_t i = 0; i < cfg.T; ++i)
                for (std::size_t j = 0; j <= i; ++j) logits(i, j) = result.params.A1[h](i, j);
            snap.a1.push_back(masked_softmax(logits));
        }
        snap.a2 = forward(result.params, emb, test.seqs.front()).a2;
        result.log.snapshots.push_back(std::move(snap));
    };

    // Batch-mean gradient over the fresh data of one iteration.
    auto batch_grad = [&](std::size_t iter) {
        GradientSet mean = parallel_map_reduce<GradientSet>(
            cfg.batch_size, 16, GradientSet::zeros(cfg.model),
            [&](std::size_t lo, std::size_t hi) {
                GradientSet acc = GradientSet::zeros(cfg.model);
                for (std::size_t b = lo; b < hi; ++b) {
                    const uint64_t idx = iter * cfg.batch_size + b;
                    Rng lm_rng = Rng::substream(cfg.seed, "train-lm", idx);
                    const TransitionTensor tensor = sample_lm(cfg.task, lm_rng);
                    const StationaryDistribution pi = stationary(tensor);
                    Rng seq_rng = Rng::substream(cfg.seed, "train-seq", idx);
                    const Sequence seq = sample_sequence(tensor, pi, cfg.T, seq_rng);
                    if (cfg.loss_mode == TrainConfig::LossMode::final_position) {
                        std::vector<int> hist(seq.end() - (n - 1), seq.end());
                        acc.add_scaled(loss_grad(result.params, emb, seq, conditional(tensor, pi, hist)),
                                       1.0);
                    } else {
                        const std::size_t first_query = cfg.start_t - 1;
                        std::vector<Vector> truths;
                        for (std::size_t t = first_query; t < cfg.T; ++t) {
                            std::vector<int> hist(seq.begin() + (t - (n - 1) + 1),
                                                  seq.begin() + (t + 1));
                            truths.push_back(conditional(tensor, pi, hist));
                        }
                        acc.add_scaled(
                            loss_grad_averaged(result.params, emb, seq, first_query, truths), 1.0);
                    }
                }
                return acc;
            },
            [](GradientSet& a, GradientSet&& b) { a.add_scaled(b, 1.0); });
        mean.scale(1.0 / static_cast<double>(cfg.batch_size));
        if (!std::isfinite(mean.loss)) throw NumericalDivergence(iter);
        return mean;
    };

    auto log_row = [&](std::size_t iter, const GradientSet& mean) {
        MetricsRow row;
        row.iter = iter;
        row.train_ce = mean.loss;
        row.test_ce = test.model_ce(result.params, emb);
        row.grad_norm_total = mean.norm_total();
        row.grad_norm_a1 = mean.norm_a1();
        row.grad_norm_v1 = mean.norm_v1();
        row.grad_norm_k2 = mean.norm_k2();
        row.grad_norm_q2 = mean.norm_q2();
        row.head_lag_mass = detail::head_lag_masses(result.params, cfg.T, max_lag);
        result.log.rows.push_back(std::move(row));
    };

    for (std::size_t iter = 0; iter < cfg.iters; ++iter) {
        const GradientSet mean = batch_grad(iter);
        if (iter % cfg.eval_every == 0) log_row(iter, mean);
        if (snapshot_wanted(iter)) take_snapshot(iter);
        adam_step(result.params, mean, state, cfg);
    }

    // state after the last update, measured on a fresh batch (no step taken)
    log_row(cfg.iters, batch_grad(cfg.iters));
    if (snapshot_wanted(cfg.iters)) take_snapshot(cfg.iters);

    return result;
}

// detect_plateaus: a segment is a plateau when the least-squares slope
// of CE against iteration over a sliding window of window_iters is at most
// slope_tol in magnitude; it gets label k when its mean CE is within
// match_tol of baseline k.
inline std::vector<PlateauSegment> detect_plateaus(const std::vector<std::size_t>& iters,
                                                   const std::vector<double>& ces,
                                                   const std::vector<double>& baselines,
                                                   std::size_t window_iters = 256,
                                                   double slope_tol = 1e-5,
                                                   double match_tol = 0.1) {
    const std::size_t N = ces.size();
    std::vector<PlateauSegment> out;
    if (N < 3) return out;

    // window length in rows: enough rows to span window_iters
    std::size_t W = 3;
    if (N >= 2 && iters[1] > iters[0]) {
        const std::size_t step = iters[1] - iters[0];
        W = std::max<std::size_t>(3, window_iters / step + 1);
    }
    if (W > N) W = N;

    // flat windows as inclusive index intervals; overlapping ones merge into
    // a segment (adjacent-only windows stay separate, so a level jump between
    // two plateaus splits them even when both sides are flat)
    std::vector<std::pair<std::size_t, std::size_t>> intervals;
    for (std::size_t a = 0; a + W <= N; ++a) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = a; i < a + W; ++i) {
            const double x = static_cast<double>(iters[i]);
            sx += x;
            sy += ces[i];
            sxx += x * x;
            sxy += x * ces[i];
        }
        const double nw = static_cast<double>(W);
        const double denom = nw * sxx - sx * sx;
        const double slope = denom != 0.0 ? (nw * sxy - sx * sy) / denom : 0.0;
        if (std::abs(slope) > slope_tol) continue;
        const std::size_t lo = a, hi = a + W - 1;
        if (!intervals.empty() && lo <= intervals.back().second)
            intervals.back().second = hi;
        else
            intervals.emplace_back(lo, hi);
    }

    for (const auto& [i, j] : intervals) {
        PlateauSegment seg;
        seg.start_index = i;
        seg.end_index = j;
        seg.start_iter = iters[i];
        seg.end_iter = iters[j];
        double acc = 0.0;
        for (std::size_t r = i; r <= j; ++r) acc += ces[r];
        seg.mean_ce = acc / static_cast<double>(j - i + 1);
        double best = match_tol;
        for (std::size_t k = 0; k < baselines.size(); ++k) {
            const double dev = std::abs(seg.mean_ce - baselines[k]);
            if (dev <= best) {
                best = dev;
                seg.label = static_cast<int>(k) + 1;
            }
        }
        out.push_back(seg);
    }
    return out;
}

// Plateau levels are matched against the smoothed baselines (raw counts put
// exact zeros under the CE floor, which no soft model can approach).
inline std::vector<PlateauSegment> detect_plateaus(const MetricsLog& log,
                                                   std::size_t window_iters = 256,
                                                   double slope_tol = 1e-5,
                                                   double match_tol = 0.1) {
    std::vector<std::size_t> iters;
    std::vector<double> ces;
    for (const auto& r : log.rows) {
        iters.push_back(r.iter);
        ces.push_back(r.test_ce);
    }
    return detect_plateaus(iters, ces, log.baseline_ces_smoothed, window_iters, slope_tol,
                           match_tol);
}

// -------- seed_sweep --------

struct SweepHead {
    int argmax_lag = 0;
    double mass = 0.0;
};

struct SweepRow {
    uint64_t seed = 0;
    std::vector<int> plateau_labels;          // labels of detected plateaus, in order
    std::vector<SweepHead> second_plateau;    // per-head lag attention at the 2nd plateau
    bool has_second_plateau = false;
};

inline std::vector<SweepRow> seed_sweep(TrainConfig cfg, const std::vector<uint64_t>& seeds,
                                        std::size_t window_iters = 256, double slope_tol = 1e-5,
                                        double match_tol = 0.1) {
    if (seeds.size() < 2) throw InsufficientSeeds();
    std::vector<SweepRow> rows;
    for (uint64_t seed : seeds) {
        cfg.seed = seed;
        TrainResult res = train(cfg);
        const auto plateaus = detect_plateaus(res.log, window_iters, slope_tol, match_tol);
        SweepRow row;
        row.seed = seed;
        for (const auto& p : plateaus) row.plateau_labels.push_back(p.label);
        if (plateaus.size() >= 2) {
            row.has_second_plateau = true;
            const auto& seg = plateaus[1];
            const std::size_t mid = (seg.start_index + seg.end_index) / 2;
            const auto& mass = res.log.rows[mid].head_lag_mass;
            for (const auto& per_head : mass) {
                SweepHead h;
                for (std::size_t l = 0; l < per_head.size(); ++l) {
                    if (per_head[l] > h.mass) {
                        h.mass = per_head[l];
                        h.argmax_lag = static_cast<int>(l) + 1;
                    }
                }
                row.second_plateau.push_back(h);
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace subgram
