// Explicit parameter configurations that make the transformer compute
// counting estimators, their structural verification, and the
// near-stationarity probe.
//
// The k-gram configuration: head h <= k-1 attends to lag h (queries before position h fall
// back to position 0), V1 projects onto the embedding span, and Q2/K2 split
// a sqrt(c) factor so that the pre-softmax second-layer score between a key
// and the query counts matching history positions, c per match.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "subgram/estimators.hpp"
#include "subgram/grad.hpp"
#include "subgram/matrix.hpp"
#include "subgram/parallel.hpp"
#include "subgram/rng.hpp"
#include "subgram/seqmodel.hpp"
#include "subgram/transformer.hpp"

namespace subgram {

struct ConstructionSpec {
    enum class Variant { kgram, multihead_bigram, subset } variant = Variant::kgram;
    int k = 1;
    std::vector<int> lags;      // subset variant
    std::size_t T_fixed = 0;    // subset variant: only valid at this length
    double c = 1.0;
    ModelConfig config;
};

namespace detail {

// M[block_row*d + r, block_col*d + cc] += scale * s_j[r] * s_j[cc], summed over j
inline void add_block_outer(Matrix& M, const Embedding& emb, int block_row, int block_col,
                            double scale) {
    const int d = emb.d;
    for (int j = 0; j < emb.S; ++j) {
        const double* sj = emb.token(j);
        for (int r = 0; r < d; ++r) {
            if (sj[r] == 0.0) continue;
            double* row = M.row(block_row * d + r);
            for (int cc = 0; cc < d; ++cc) row[block_col * d + cc] += scale * sj[r] * sj[cc];
        }
    }
}

// sum_j s_j s_j^T, the projector onto the embedding span (identity for one-hot)
inline Matrix embedding_projector(const Embedding& emb) {
    Matrix P(emb.d, emb.d);
    for (int j = 0; j < emb.S; ++j) {
        const double* sj = emb.token(j);
        for (int r = 0; r < emb.d; ++r)
            for (int cc = 0; cc < emb.d; ++cc) P(r, cc) += sj[r] * sj[cc];
    }
    return P;
}

// lag-h attention logits: query i >= h attends i-h, queries i < h attend 0
inline Matrix lag_attention(int T_max, int h, double c) {
    Matrix A(T_max, T_max);
    for (int i = 0; i < T_max; ++i) A(i, i >= h ? i - h : 0) = c;
    return A;
}

} // namespace detail

// build_kgram_params: the k-gram configuration. Deactivated heads (h >= k) get zero A1
// and zero V1.
inline ModelParams build_kgram_params(const ModelConfig& config, const Embedding& emb, int k,
                                      double c) {
    if (k < 1 || k > config.m + 1) throw std::invalid_argument("k must be in [1, m+1]");
    if (!(c > 0.0)) throw std::invalid_argument("c must be > 0");
    ModelParams p = ModelParams::zeros(config);
    const double sc = std::sqrt(c);
    const Matrix proj = detail::embedding_projector(emb);
    for (int h = 1; h <= k - 1; ++h) {
        p.A1[h - 1] = detail::lag_attention(config.T_max, h, c);
        p.V1[h - 1] = proj;
        // K2 block (h,h); Q2 block (h, h-1) so that Q2^T K2 = c sum s^{h-1} (s^h)^T
        detail::add_block_outer(p.K2, emb, h, h, sc);
        detail::add_block_outer(p.Q2, emb, h, h - 1, sc);
    }
    return p;
}

inline ModelParams build_kgram_params(const ModelConfig& config, int k, double c) {
    return build_kgram_params(config, Embedding::one_hot(config.S), k, c);
}

// build_multihead_bigram: every head attends to lag 1 and the query
// compares its skip block against every head block.
inline ModelParams build_multihead_bigram(const ModelConfig& config, const Embedding& emb,
                                          double c) {
    if (!(c > 0.0)) throw std::invalid_argument("c must be > 0");
    ModelParams p = ModelParams::zeros(config);
    const double sc = std::sqrt(c);
    Matrix proj = detail::embedding_projector(emb);
    proj.scale(sc);
    for (int h = 1; h <= config.m; ++h) {
        p.A1[h - 1] = detail::lag_attention(config.T_max, 1, c);
        p.V1[h - 1] = proj;
        detail::add_block_outer(p.K2, emb, h, h, sc);
        detail::add_block_outer(p.Q2, emb, h, 0, sc);
    }
    return p;
}

inline ModelParams build_multihead_bigram(const ModelConfig& config, double c) {
    return build_multihead_bigram(config, Embedding::one_hot(config.S), c);
}

// build_subset_params: head h in N fetches the (-h)-token for every
// query except the last one, which fetches the (-(h-1))-token; valid only for
// sequences of exactly length T (the last row is position-specific).
inline ModelParams build_subset_params(const ModelConfig& config, const Embedding& emb,
                                       const std::vector<int>& lags, double c, std::size_t T) {
    if (lags.empty()) throw std::invalid_argument("lag set must be nonempty");
    std::vector<int> N = lags;
    std::sort(N.begin(), N.end());
    if (N.front() < 1) throw std::invalid_argument("lags must be positive");
    if (static_cast<std::size_t>(N.back()) >= T) throw std::invalid_argument("max lag must be < T");
    if (N.back() > config.m) throw std::invalid_argument("need m >= max lag");
    if (T > static_cast<std::size_t>(config.T_max)) throw std::invalid_argument("T exceeds T_max");
    if (!(c > 0.0)) throw std::invalid_argument("c must be > 0");

    ModelParams p = ModelParams::zeros(config);
    p.fixed_length = T;
    const double sc = std::sqrt(c);
    Matrix proj = detail::embedding_projector(emb);
    proj.scale(sc);
    const int last = static_cast<int>(T) - 1;
    for (int h : N) {
        Matrix A(config.T_max, config.T_max);
        for (int i = 0; i < last; ++i) A(i, i >= h ? i - h : 0) = c;
        A(last, last - (h - 1)) = c;
        p.A1[h - 1] = std::move(A);
        p.V1[h - 1] = proj;
        detail::add_block_outer(p.K2, emb, h, h, sc);
        detail::add_block_outer(p.Q2, emb, h, h, sc);
    }
    return p;
}

inline ModelParams build_subset_params(const ModelConfig& config, const std::vector<int>& lags,
                                       double c, std::size_t T) {
    return build_subset_params(config, Embedding::one_hot(config.S), lags, c, T);
}

// ---------------------------------------------------------------------------
// Well-posedness of the hard-attention pattern on a given sequence.
//
// Queries before position h attend position 0, so an early key whose clamped
// fetches happen to equal the query history reaches the full match score and
// joins the attention set even though the counting estimator (whose histories
// must fully exist) excludes it. On such sequences the idealized pattern is
// not realizable by any parameters of this architecture; they are reported
// separately and excluded from the pattern-bound corpus.
// ---------------------------------------------------------------------------

inline std::vector<std::size_t> boundary_collisions(const Sequence& seq, int k) {
    const std::size_t T = seq.size();
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i + 1 < static_cast<std::size_t>(k); ++i) {
        int matches = 0;
        for (int h = 1; h < k; ++h) {
            const int fetched = i >= static_cast<std::size_t>(h) ? seq[i - h] : seq[0];
            if (fetched == seq[T - h]) ++matches;
        }
        if (matches == k - 1) out.push_back(i);
    }
    return out;
}

inline bool kgram_wellposed(const Sequence& seq, int k) {
    return !match_set(seq, k).empty() && boundary_collisions(seq, k).empty();
}

// verify_attention_pattern: checks the non-asymptotic first- and
// second-layer score bounds of the k-gram configuration with constants K (layer 1) and
// Kp (layer 2).
struct PatternReport {
    bool wellposed = true;
    std::size_t match_set_size = 0;
    std::vector<std::string> violations;
    double max_layer1_deficit = 0.0;    // worst (1 - K i e^-c) - score
    double max_match_deviation = 0.0;   // worst |a2 - 1/|M|| / bound
    double max_nonmatch_score = 0.0;
};

inline PatternReport verify_attention_pattern(const ModelParams& params, const Embedding& emb,
                                              const Sequence& seq, int k, double c,
                                              double K = 10.0, double Kp = 10.0) {
    PatternReport rep;
    const std::size_t T = seq.size();
    const ForwardTrace tr = forward(params, emb, seq);
    const double ec = std::exp(-c);

    for (int h = 1; h <= k - 1; ++h) {
        const Matrix& a = tr.a1[h - 1];
        for (std::size_t i = 0; i < T; ++i) {
            const std::size_t target = i >= static_cast<std::size_t>(h) ? i - h : 0;
            const double bound = 1.0 - K * static_cast<double>(i) * ec;
            rep.max_layer1_deficit = std::max(rep.max_layer1_deficit, bound - a(i, target));
            if (a(i, target) < bound)
                rep.violations.push_back("layer1 head " + std::to_string(h) + " row " +
                                         std::to_string(i));
        }
    }

    const auto M = match_set(seq, k);
    rep.match_set_size = M.size();
    rep.wellposed = !M.empty() && boundary_collisions(seq, k).empty();
    if (M.empty()) {
        rep.violations.push_back("empty match set");
        return rep;
    }
    const double msize = static_cast<double>(M.size());
    const double match_bound = Kp * static_cast<double>(T) * ec / (msize * msize);
    const double nonmatch_bound = Kp * ec / msize;
    std::vector<char> in_match(T, 0);
    for (std::size_t i : M) in_match[i] = 1;
    for (std::size_t i = 0; i < T; ++i) {
        if (in_match[i]) {
            const double dev = std::abs(tr.a2[i] - 1.0 / msize);
            rep.max_match_deviation = std::max(rep.max_match_deviation, dev / match_bound);
            if (dev > match_bound)
                rep.violations.push_back("layer2 match key " + std::to_string(i));
        } else {
            rep.max_nonmatch_score = std::max(rep.max_nonmatch_score, tr.a2[i] / nonmatch_bound);
            if (tr.a2[i] > nonmatch_bound)
                rep.violations.push_back("layer2 nonmatch key " + std::to_string(i));
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// stationarity_probe
//
// Monte Carlo probe of the gradient at the k-gram configuration over a (c, T) grid with
// paired samples: cell (c, T) and cell (c', T) see identical language models
// and sequences. Two gradients are reported per cell:
//   - grad_norm_*: loss target is the k-gram estimate itself. This isolates
//     the finite-c representation error; in the hard-attention limit the
//     model output equals the target, so these norms carry the pure e^{-c}
//     decay.
//   - grad_norm_pop: loss target is the exact full-order conditional, the
//     plain Monte Carlo estimate of the population gradient. Its norm
//     floors at the sampling noise of the batch (the statistical term), which
//     is reported alongside as the mean (squared) residual between the model
//     output and the true k-conditional.
// Sequences whose hard-attention pattern is ill-posed for k (empty match set
// or a boundary collision) are rejected and redrawn, mirroring the pattern
// corpus.
// ---------------------------------------------------------------------------

struct ProbeCell {
    int k = 0;
    double c = 0.0;
    std::size_t T = 0;
    std::size_t batch_size = 0;
    double grad_norm_total = 0.0;
    double grad_norm_a1 = 0.0;
    double grad_norm_v1 = 0.0;
    double grad_norm_k2 = 0.0;
    double grad_norm_q2 = 0.0;
    double grad_norm_pop = 0.0;
    double mean_residual_tv = 0.0;
    double mean_residual_sq = 0.0;
};

struct StationarityReport {
    std::vector<ProbeCell> cells;
};

struct ProbeTask {
    NGramSpec spec;          // S, n, alpha; seed used for substreams
    int k = 2;
};

namespace detail {

struct ProbeSample {
    Sequence seq;
    Vector truth_full;   // p_tau(. | (n-1)-history)
    Vector truth_kgram;  // k-gram estimate of the sequence
    Vector cond_k;       // p_tau(. | (k-1)-history)
};

// Deterministic per-(b, T) sample; rejects ill-posed sequences.
inline ProbeSample make_probe_sample(const ProbeTask& task, std::size_t T, std::size_t b) {
    const auto& spec = task.spec;
    Rng lm_rng = Rng::substream(spec.seed, "probe-lm", b);
    const TransitionTensor tensor = sample_lm(spec, lm_rng);
    const StationaryDistribution pi = stationary(tensor);
    for (std::size_t attempt = 0; attempt < 100000; ++attempt) {
        Rng seq_rng = Rng::substream(spec.seed, "probe-seq", b * 7919 + attempt * 104729 + T);
        Sequence seq = sample_sequence(tensor, pi, T, seq_rng);
        if (!kgram_wellposed(seq, task.k)) continue;
        ProbeSample s;
        s.truth_kgram = kgram_predict(seq, spec.alphabet_size, task.k, Backoff::off);
        std::vector<int> hist_full(seq.end() - (spec.order - 1), seq.end());
        s.truth_full = conditional(tensor, pi, hist_full);
        std::vector<int> hist_k(seq.end() - (task.k - 1), seq.end());
        s.cond_k = conditional(tensor, pi, hist_k);
        s.seq = std::move(seq);
        return s;
    }
    throw std::runtime_error("probe: no well-posed sequence found for this language model");
}

} // namespace detail

inline StationarityReport stationarity_probe(const ProbeTask& task,
                                             const std::vector<double>& c_values,
                                             const std::vector<std::size_t>& T_values,
                                             std::size_t batch_size) {
    if (c_values.empty() || T_values.empty()) throw std::invalid_argument("grid is empty");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    StationarityReport report;
    const Embedding emb = Embedding::one_hot(task.spec.alphabet_size);

    for (std::size_t T : T_values) {
        // paired samples shared by every c in this T-row
        std::vector<detail::ProbeSample> samples(batch_size);
        for (std::size_t b = 0; b < batch_size; ++b)
            samples[b] = detail::make_probe_sample(task, T, b);

        for (double c : c_values) {
            const int heads = std::max({task.spec.order - 1, task.k - 1, 1});
            const ModelConfig cfg(task.spec.alphabet_size, heads, static_cast<int>(T));
            const ModelParams params = build_kgram_params(cfg, emb, task.k, c);

            struct Acc {
                GradientSet g_est, g_pop;
                double tv = 0.0, sq = 0.0;
            };
            Acc init;
            init.g_est = GradientSet::zeros(cfg);
            init.g_pop = GradientSet::zeros(cfg);
            Acc acc = parallel_map_reduce<Acc>(
                batch_size, 16, std::move(init),
                [&](std::size_t lo, std::size_t hi) {
                    Acc a;
                    a.g_est = GradientSet::zeros(cfg);
                    a.g_pop = GradientSet::zeros(cfg);
                    for (std::size_t b = lo; b < hi; ++b) {
                        const auto& s = samples[b];
                        const ForwardTrace tr = forward(params, emb, s.seq);
                        a.g_est.add_scaled(loss_grad_from_trace(params, s.truth_kgram, tr), 1.0);
                        a.g_pop.add_scaled(loss_grad_from_trace(params, s.truth_full, tr), 1.0);
                        a.tv += tv_distance(tr.p_out, s.cond_k);
                        a.sq += l2_distance_sq(tr.p_out, s.cond_k);
                    }
                    return a;
                },
                [](Acc& a, Acc&& part) {
                    a.g_est.add_scaled(part.g_est, 1.0);
                    a.g_pop.add_scaled(part.g_pop, 1.0);
                    a.tv += part.tv;
                    a.sq += part.sq;
                });
            const double inv = 1.0 / static_cast<double>(batch_size);
            acc.g_est.scale(inv);
            acc.g_pop.scale(inv);

            ProbeCell cell;
            cell.k = task.k;
            cell.c = c;
            cell.T = T;
            cell.batch_size = batch_size;
            cell.grad_norm_a1 = acc.g_est.norm_a1();
            cell.grad_norm_v1 = acc.g_est.norm_v1();
            cell.grad_norm_k2 = acc.g_est.norm_k2();
            cell.grad_norm_q2 = acc.g_est.norm_q2();
            cell.grad_norm_total = acc.g_est.norm_total();
            cell.grad_norm_pop = acc.g_pop.norm_total();
            cell.mean_residual_tv = acc.tv * inv;
            cell.mean_residual_sq = acc.sq * inv;
            report.cells.push_back(cell);
        }
    }
    return report;
}

// Gaussian parameters rescaled so each group's Frobenius norm matches the
// reference point (the contrast arm of the near-stationarity check).
inline ModelParams random_params_matched_scale(const ModelParams& reference, Rng& rng) {
    ModelParams p = ModelParams::zeros(reference.config);
    auto fill = [&](Matrix& m) {
        for (auto& v : m.data()) v = rng.gaussian();
    };
    auto rescale_group = [](std::vector<Matrix>& ms, double target_sq) {
        double cur = 0.0;
        for (const auto& m : ms) cur += m.frobenius_sq();
        const double s = cur > 0.0 ? std::sqrt(target_sq / cur) : 0.0;
        for (auto& m : ms) m.scale(s);
    };
    for (auto& m : p.A1) fill(m);
    for (auto& m : p.V1) fill(m);
    fill(p.K2);
    fill(p.Q2);
    double a1_sq = 0.0, v1_sq = 0.0;
    for (const auto& m : reference.A1) a1_sq += m.frobenius_sq();
    for (const auto& m : reference.V1) v1_sq += m.frobenius_sq();
    rescale_group(p.A1, a1_sq);
    rescale_group(p.V1, v1_sq);
    std::vector<Matrix> k2{std::move(p.K2)}, q2{std::move(p.Q2)};
    rescale_group(k2, reference.K2.frobenius_sq());
    rescale_group(q2, reference.Q2.frobenius_sq());
    p.K2 = std::move(k2[0]);
    p.Q2 = std::move(q2[0]);
    return p;
}

} // namespace subgram
