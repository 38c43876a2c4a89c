// Closed-form gradients of the two-layer disentangled transformer.
//
// Everything is assembled from the self-attention derivative identities: a
// softmax score contributes through its own value (self-bounding), the
// second-layer chain splits into a key-side term per position and one
// query-side term at the query row, and the first-layer terms reach A1/V1
// through the block slices of dL/dr1. Kronecker expressions are evaluated as
// index loops over outer products; nothing of size D1^2 x D1^2 is ever
// materialized.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "subgram/estimators.hpp"
#include "subgram/matrix.hpp"
#include "subgram/rng.hpp"
#include "subgram/seqmodel.hpp"
#include "subgram/transformer.hpp"

namespace subgram {

struct GradientSet {
    std::vector<Matrix> dA1;   // m of T_max x T_max, zero outside the active causal block
    std::vector<Matrix> dV1;   // m of d x d
    Matrix dK2, dQ2;
    double loss = 0.0;

    static GradientSet zeros(const ModelConfig& cfg) {
        GradientSet g;
        g.dA1.assign(cfg.m, Matrix(cfg.T_max, cfg.T_max));
        g.dV1.assign(cfg.m, Matrix(cfg.d, cfg.d));
        g.dK2 = Matrix(cfg.dh(), cfg.d1());
        g.dQ2 = Matrix(cfg.dh(), cfg.d1());
        return g;
    }

    void add_scaled(const GradientSet& other, double s) {
        for (std::size_t h = 0; h < dA1.size(); ++h) dA1[h].add_scaled(other.dA1[h], s);
        for (std::size_t h = 0; h < dV1.size(); ++h) dV1[h].add_scaled(other.dV1[h], s);
        dK2.add_scaled(other.dK2, s);
        dQ2.add_scaled(other.dQ2, s);
        loss += s * other.loss;
    }

    void scale(double s) {
        for (auto& m : dA1) m.scale(s);
        for (auto& m : dV1) m.scale(s);
        dK2.scale(s);
        dQ2.scale(s);
        loss *= s;
    }

    double norm_sq_a1() const {
        double acc = 0.0;
        for (const auto& m : dA1) acc += m.frobenius_sq();
        return acc;
    }
    double norm_sq_v1() const {
        double acc = 0.0;
        for (const auto& m : dV1) acc += m.frobenius_sq();
        return acc;
    }
    double norm_a1() const { return std::sqrt(norm_sq_a1()); }
    double norm_v1() const { return std::sqrt(norm_sq_v1()); }
    double norm_k2() const { return dK2.frobenius(); }
    double norm_q2() const { return dQ2.frobenius(); }
    double norm_total() const {
        return std::sqrt(norm_sq_a1() + norm_sq_v1() + dK2.frobenius_sq() + dQ2.frobenius_sq());
    }
};

namespace detail {

// Backward pass for one query position t, given that query's attention a2
// and output p. Accumulates into g with weight `scale`.
inline void accumulate_query_grad(const ModelParams& params, const ForwardTrace& tr,
                                  std::size_t t, const Vector& a2, const Vector& p,
                                  const Vector& truth, double scale, GradientSet& g) {
    const ModelConfig& cfg = params.config;
    const int d = cfg.d;
    const int D1 = cfg.d1();
    const int Dh = cfg.dh();

    // residual form: dL/dtheta = <p - truth, d log p>; identically
    // zero when truth == p.
    Vector res_over_p(cfg.S);
    for (int s = 0; s < cfg.S; ++s)
        res_over_p[s] = (p[s] - truth[s]) / std::max(p[s], kProbFloor);
    double rp_dot_p = 0.0;
    for (int s = 0; s < cfg.S; ++s) rp_dot_p += res_over_p[s] * p[s];

    // w[j] = sum_s res_over_p[s] (1{x_j = s} - p_s); note sum_j a2_j w_j = 0.
    Vector w(t + 1);
    for (std::size_t j = 0; j <= t; ++j) w[j] = res_over_p[tr.seq[j]] - rp_dot_p;

    // attention-weighted mean embedding r1bar and the contracted direction
    // vbar = sum_j a2_j w_j (r1[j] - r1bar)
    Vector r1bar(D1, 0.0);
    for (std::size_t j = 0; j <= t; ++j) {
        const double* r1j = tr.r1.row(j);
        const double aj = a2[j];
        for (int c = 0; c < D1; ++c) r1bar[c] += aj * r1j[c];
    }
    Vector vbar(D1, 0.0);
    for (std::size_t j = 0; j <= t; ++j) {
        const double* r1j = tr.r1.row(j);
        const double c0 = a2[j] * w[j];
        for (int c = 0; c < D1; ++c) vbar[c] += c0 * (r1j[c] - r1bar[c]);
    }

    const Vector q2r1t = (t + 1 == tr.T)
                             ? tr.q2r1t
                             : params.Q2.apply(Vector(tr.r1.row(t), tr.r1.row(t) + D1));

    // dK2 += (Q2 r1[t]) vbar^T ; dQ2 += (K2 vbar) r1[t]^T
    for (int r = 0; r < Dh; ++r) {
        const double qr = scale * q2r1t[r];
        double* row = g.dK2.row(r);
        for (int c = 0; c < D1; ++c) row[c] += qr * vbar[c];
    }
    const Vector k2vbar = params.K2.apply(vbar);
    const double* r1t = tr.r1.row(t);
    for (int r = 0; r < Dh; ++r) {
        const double kr = scale * k2vbar[r];
        double* row = g.dQ2.row(r);
        for (int c = 0; c < D1; ++c) row[c] += kr * r1t[c];
    }

    // dL/dr1[i] = a2_i w_i K2^T (Q2 r1[t])  (+ query-side term at i = t)
    const Vector kq = params.K2.apply_transposed(q2r1t);
    const Vector qk_vbar = params.Q2.apply_transposed(k2vbar);

    // first-layer chain per head
    for (int h = 0; h < cfg.m; ++h) {
        const Matrix& a1h = tr.a1[h];
        const Matrix& uh = tr.u[h];
        const Matrix& V = params.V1[h];
        Matrix& dV = g.dV1[h];
        Matrix& dA = g.dA1[h];
        const int off = (h + 1) * d;
        for (std::size_t i = 0; i <= t; ++i) {
            // block h+1 of dL/dr1[i]
            Vector g1h(d);
            const double ci = a2[i] * w[i];
            for (int r = 0; r < d; ++r) g1h[r] = ci * kq[off + r];
            if (i == t)
                for (int r = 0; r < d; ++r) g1h[r] += qk_vbar[off + r];

            // dV1[h] += g1h u_h[i]^T
            const double* ui = uh.row(i);
            for (int r = 0; r < d; ++r) {
                const double gr = scale * g1h[r];
                if (gr == 0.0) continue;
                double* row = dV.row(r);
                for (int c = 0; c < d; ++c) row[c] += gr * ui[c];
            }

            // dA1[h][i,j] += a1[i,j] <r0[j] - u_h[i], V^T g1h>
            Vector wv(d, 0.0);
            for (int l = 0; l < d; ++l) {
                double acc = 0.0;
                for (int r = 0; r < d; ++r) acc += V(r, l) * g1h[r];
                wv[l] = acc;
            }
            double u_dot = 0.0;
            for (int l = 0; l < d; ++l) u_dot += ui[l] * wv[l];
            for (std::size_t j = 0; j <= i; ++j) {
                const double* r0j = tr.r0.row(j);
                double r_dot = 0.0;
                for (int l = 0; l < d; ++l) r_dot += r0j[l] * wv[l];
                dA(i, j) += scale * a1h(i, j) * (r_dot - u_dot);
            }
        }
    }
}

} // namespace detail

// loss_grad: gradient of the final-position cross-entropy against a
// given truth distribution, assembled in residual form.
inline GradientSet loss_grad(const ModelParams& params, const Embedding& emb, const Sequence& seq,
                             const Vector& truth) {
    const ForwardTrace tr = forward(params, emb, seq);
    GradientSet g = GradientSet::zeros(params.config);
    g.loss = ce_loss_vs_truth(tr.p_out, truth);
    detail::accumulate_query_grad(params, tr, tr.T - 1, tr.a2, tr.p_out, truth, 1.0, g);
    return g;
}

inline GradientSet loss_grad_from_trace(const ModelParams& params, const Vector& truth,
                                        const ForwardTrace& tr) {
    GradientSet g = GradientSet::zeros(params.config);
    g.loss = ce_loss_vs_truth(tr.p_out, truth);
    detail::accumulate_query_grad(params, tr, tr.T - 1, tr.a2, tr.p_out, truth, 1.0, g);
    return g;
}

// Position-averaged variant: mean of the per-position losses for query
// positions start_t-1 .. T-1 (0-based), with per-position truths supplied by
// the caller.
inline GradientSet loss_grad_averaged(const ModelParams& params, const Embedding& emb,
                                      const Sequence& seq, std::size_t first_query,
                                      const std::vector<Vector>& truths) {
    const ForwardTrace tr = forward(params, emb, seq);
    if (first_query + truths.size() != tr.T)
        throw std::invalid_argument("need one truth per query position");
    GradientSet g = GradientSet::zeros(params.config);
    const double scale = 1.0 / static_cast<double>(truths.size());
    for (std::size_t q = 0; q < truths.size(); ++q) {
        const std::size_t t = first_query + q;
        Vector a2, p;
        attention_at_query(tr, params, t, a2, p);
        g.loss += scale * ce_loss_vs_truth(p, truths[q]);
        detail::accumulate_query_grad(params, tr, t, a2, p, truths[q], scale, g);
    }
    return g;
}

// ---------------------------------------------------------------------------
// Full per-output-coordinate Jacobians (d p_out[s] / d theta), the displayed
// closed forms of the two-layer chain rule. Used by structural tests; loss_grad
// above contracts these with the residual without materializing them.
// ---------------------------------------------------------------------------

struct OutputJacobians {
    std::vector<Matrix> dK2, dQ2;             // S entries, each Dh x D1
    std::vector<std::vector<Matrix>> dV1;     // m x S, each d x d
    std::vector<std::vector<Matrix>> dA1;     // m x S, each T x T (active block)
};

inline OutputJacobians output_jacobians(const ModelParams& params, const ForwardTrace& tr) {
    const ModelConfig& cfg = params.config;
    const int d = cfg.d;
    const int D1 = cfg.d1();
    const int Dh = cfg.dh();
    const std::size_t t = tr.T - 1;

    OutputJacobians J;
    J.dK2.assign(cfg.S, Matrix(Dh, D1));
    J.dQ2.assign(cfg.S, Matrix(Dh, D1));
    J.dV1.assign(cfg.m, std::vector<Matrix>(cfg.S, Matrix(d, d)));
    J.dA1.assign(cfg.m, std::vector<Matrix>(cfg.S, Matrix(tr.T, tr.T)));

    Vector r1bar(D1, 0.0);
    for (std::size_t j = 0; j <= t; ++j) {
        const double* r1j = tr.r1.row(j);
        for (int c = 0; c < D1; ++c) r1bar[c] += tr.a2[j] * r1j[c];
    }
    const Vector kq = params.K2.apply_transposed(tr.q2r1t);

    for (int s = 0; s < cfg.S; ++s) {
        // w_j = a2_j (1{x_j = s} - p_s)
        Vector w(t + 1);
        for (std::size_t j = 0; j <= t; ++j)
            w[j] = tr.a2[j] * ((tr.seq[j] == s ? 1.0 : 0.0) - tr.p_out[s]);
        Vector vbar(D1, 0.0);
        for (std::size_t j = 0; j <= t; ++j) {
            const double* r1j = tr.r1.row(j);
            for (int c = 0; c < D1; ++c) vbar[c] += w[j] * (r1j[c] - r1bar[c]);
        }
        for (int r = 0; r < Dh; ++r)
            for (int c = 0; c < D1; ++c) J.dK2[s](r, c) = tr.q2r1t[r] * vbar[c];
        const Vector k2vbar = params.K2.apply(vbar);
        const double* r1t = tr.r1.row(t);
        for (int r = 0; r < Dh; ++r)
            for (int c = 0; c < D1; ++c) J.dQ2[s](r, c) = k2vbar[r] * r1t[c];

        const Vector qk_vbar = params.Q2.apply_transposed(k2vbar);
        for (int h = 0; h < cfg.m; ++h) {
            const int off = (h + 1) * d;
            const Matrix& V = params.V1[h];
            for (std::size_t i = 0; i <= t; ++i) {
                Vector g1h(d);
                for (int r = 0; r < d; ++r) g1h[r] = w[i] * kq[off + r];
                if (i == t)
                    for (int r = 0; r < d; ++r) g1h[r] += qk_vbar[off + r];
                const double* ui = tr.u[h].row(i);
                for (int r = 0; r < d; ++r)
                    for (int c = 0; c < d; ++c) J.dV1[h][s](r, c) += g1h[r] * ui[c];
                Vector wv(d, 0.0);
                for (int l = 0; l < d; ++l)
                    for (int r = 0; r < d; ++r) wv[l] += V(r, l) * g1h[r];
                double u_dot = 0.0;
                for (int l = 0; l < d; ++l) u_dot += ui[l] * wv[l];
                for (std::size_t j = 0; j <= i; ++j) {
                    double r_dot = 0.0;
                    const double* r0j = tr.r0.row(j);
                    for (int l = 0; l < d; ++l) r_dot += r0j[l] * wv[l];
                    J.dA1[h][s](i, j) = tr.a1[h](i, j) * (r_dot - u_dot);
                }
            }
        }
    }
    return J;
}

// ---------------------------------------------------------------------------
// self_attention_jacobians: derivatives of a generic masked
// self-attention output q_t^+ = sum_{i<=t} p_i V q_i with respect to Q, K, V
// and every input row. Matrix parameters are flattened row-major, so column
// a*cols(P)+b is coordinate P[a,b].
// ---------------------------------------------------------------------------

struct SelfAttentionJacobians {
    Vector p;                 // attention over [0, t]
    Vector q_plus;            // d
    Matrix dV, dK, dQ;        // d x d*d
    std::vector<Matrix> dq;   // t+1 entries, each d x d
};

inline SelfAttentionJacobians self_attention_jacobians(const Matrix& q, const Matrix& Q,
                                                       const Matrix& K, const Matrix& V,
                                                       std::size_t t) {
    const std::size_t d = q.cols();
    SelfAttentionJacobians J;

    const Vector qt(q.row(t), q.row(t) + d);
    const Vector Qqt = Q.apply(qt);
    Vector scores(t + 1);
    std::vector<Vector> Kq(t + 1), Vq(t + 1);
    for (std::size_t i = 0; i <= t; ++i) {
        const Vector qi(q.row(i), q.row(i) + d);
        Kq[i] = K.apply(qi);
        Vq[i] = V.apply(qi);
        scores[i] = dot(Kq[i], Qqt);
    }
    J.p = softmax_prefix(scores, t + 1);

    Vector qbar(d, 0.0);
    J.q_plus.assign(d, 0.0);
    for (std::size_t i = 0; i <= t; ++i) {
        for (std::size_t l = 0; l < d; ++l) {
            qbar[l] += J.p[i] * q(i, l);
            J.q_plus[l] += J.p[i] * Vq[i][l];
        }
    }

    J.dV = Matrix(d, d * d);
    for (std::size_t r = 0; r < d; ++r)
        for (std::size_t b = 0; b < d; ++b) J.dV(r, r * d + b) = qbar[b];

    const Vector KQqt = K.apply_transposed(Qqt);   // K^T Q q_t
    Matrix query_term(d, d);   // sum_j p_j (V q_j) (Q^T K (q_j - qbar))^T, for dq_t
    J.dK = Matrix(d, d * d);
    J.dQ = Matrix(d, d * d);
    for (std::size_t j = 0; j <= t; ++j) {
        Vector dqj(d);
        for (std::size_t l = 0; l < d; ++l) dqj[l] = q(j, l) - qbar[l];
        const Vector Kdqj = K.apply(dqj);
        const Vector QKdqj = Q.apply_transposed(Kdqj);
        for (std::size_t r = 0; r < d; ++r) {
            const double pr = J.p[j] * Vq[j][r];
            for (std::size_t b = 0; b < d; ++b) query_term(r, b) += pr * QKdqj[b];
            for (std::size_t a = 0; a < d; ++a)
                for (std::size_t b = 0; b < d; ++b) {
                    J.dK(r, a * d + b) += pr * Qqt[a] * dqj[b];
                    J.dQ(r, a * d + b) += pr * Kdqj[a] * qt[b];
                }
        }
    }

    J.dq.assign(t + 1, Matrix(d, d));
    for (std::size_t i = 0; i <= t; ++i) {
        Vector Vdqi(d);
        for (std::size_t l = 0; l < d; ++l) Vdqi[l] = q(i, l) - qbar[l];
        Vdqi = V.apply(Vdqi);
        for (std::size_t r = 0; r < d; ++r)
            for (std::size_t b = 0; b < d; ++b) {
                double val = J.p[i] * V(r, b) + J.p[i] * Vdqi[r] * KQqt[b];
                if (i == t) val += query_term(r, b);
                J.dq[i](r, b) = val;
            }
    }
    return J;
}

// ---------------------------------------------------------------------------
// fd_check: central finite differences on every parameter coordinate
// (random subsample of >= 500 when the parameter count is large), compared to
// loss_grad. Relative error uses denominator max(|analytic|, |fd|, 1e-8).
// ---------------------------------------------------------------------------

namespace detail {

// Flat addressing over all trainable coordinates, group by group.
struct ParamCoord {
    enum class Group { A1, V1, K2, Q2 } group;
    int head = 0;   // for A1/V1
    std::size_t row = 0, col = 0;
};

inline std::size_t total_coords(const ModelConfig& cfg) {
    const std::size_t tmax = static_cast<std::size_t>(cfg.T_max);
    const std::size_t d = static_cast<std::size_t>(cfg.d);
    return static_cast<std::size_t>(cfg.m) * (tmax * tmax + d * d) +
           2 * static_cast<std::size_t>(cfg.dh()) * static_cast<std::size_t>(cfg.d1());
}

inline ParamCoord coord_at(const ModelConfig& cfg, std::size_t flat) {
    const std::size_t tmax = static_cast<std::size_t>(cfg.T_max);
    const std::size_t d = static_cast<std::size_t>(cfg.d);
    const std::size_t per_a1 = tmax * tmax;
    const std::size_t per_v1 = d * d;
    const std::size_t kq = static_cast<std::size_t>(cfg.dh()) * static_cast<std::size_t>(cfg.d1());
    ParamCoord c;
    if (flat < static_cast<std::size_t>(cfg.m) * per_a1) {
        c.group = ParamCoord::Group::A1;
        c.head = static_cast<int>(flat / per_a1);
        const std::size_t r = flat % per_a1;
        c.row = r / tmax;
        c.col = r % tmax;
        return c;
    }
    flat -= static_cast<std::size_t>(cfg.m) * per_a1;
    if (flat < static_cast<std::size_t>(cfg.m) * per_v1) {
        c.group = ParamCoord::Group::V1;
        c.head = static_cast<int>(flat / per_v1);
        const std::size_t r = flat % per_v1;
        c.row = r / d;
        c.col = r % d;
        return c;
    }
    flat -= static_cast<std::size_t>(cfg.m) * per_v1;
    const std::size_t D1 = static_cast<std::size_t>(cfg.d1());
    if (flat < kq) {
        c.group = ParamCoord::Group::K2;
        c.row = flat / D1;
        c.col = flat % D1;
        return c;
    }
    flat -= kq;
    c.group = ParamCoord::Group::Q2;
    c.row = flat / D1;
    c.col = flat % D1;
    return c;
}

inline double& coord_ref(ModelParams& p, const ParamCoord& c) {
    switch (c.group) {
        case ParamCoord::Group::A1: return p.A1[c.head](c.row, c.col);
        case ParamCoord::Group::V1: return p.V1[c.head](c.row, c.col);
        case ParamCoord::Group::K2: return p.K2(c.row, c.col);
        default: return p.Q2(c.row, c.col);
    }
}

inline double coord_grad(const GradientSet& g, const ParamCoord& c) {
    switch (c.group) {
        case ParamCoord::Group::A1: return g.dA1[c.head](c.row, c.col);
        case ParamCoord::Group::V1: return g.dV1[c.head](c.row, c.col);
        case ParamCoord::Group::K2: return g.dK2(c.row, c.col);
        default: return g.dQ2(c.row, c.col);
    }
}

inline const char* group_name(ParamCoord::Group g) {
    switch (g) {
        case ParamCoord::Group::A1: return "A1";
        case ParamCoord::Group::V1: return "V1";
        case ParamCoord::Group::K2: return "K2";
        default: return "Q2";
    }
}

} // namespace detail

struct FdReport {
    double max_rel_err = 0.0;
    double worst_analytic = 0.0;
    double worst_fd = 0.0;
    std::string worst_param_coordinate;
    double step = 0.0;
    std::size_t n_checked = 0;
};

inline FdReport fd_check(const ModelParams& params, const Embedding& emb, const Sequence& seq,
                         const Vector& truth, double step = 1e-4,
                         std::size_t subsample_threshold = 8192, Rng* rng = nullptr) {
    if (!(step > 0.0)) throw std::invalid_argument("step must be > 0");
    const GradientSet analytic = loss_grad(params, emb, seq, truth);

    const std::size_t total = detail::total_coords(params.config);
    std::vector<std::size_t> coords;
    if (total <= subsample_threshold || rng == nullptr) {
        coords.resize(total);
        for (std::size_t i = 0; i < total; ++i) coords[i] = i;
    } else {
        const std::size_t want = std::max<std::size_t>(500, subsample_threshold / 8);
        coords.resize(total);
        for (std::size_t i = 0; i < total; ++i) coords[i] = i;
        std::shuffle(coords.begin(), coords.end(), rng->engine());
        coords.resize(want);
    }

    ModelParams work = params;
    FdReport report;
    report.step = step;
    report.n_checked = coords.size();
    for (std::size_t flat : coords) {
        const auto c = detail::coord_at(params.config, flat);
        double& ref = detail::coord_ref(work, c);
        const double saved = ref;
        ref = saved + step;
        const double up = ce_loss_vs_truth(forward(work, emb, seq).p_out, truth);
        ref = saved - step;
        const double down = ce_loss_vs_truth(forward(work, emb, seq).p_out, truth);
        ref = saved;
        const double fd = (up - down) / (2.0 * step);
        const double an = detail::coord_grad(analytic, c);
        const double denom = std::max({std::abs(an), std::abs(fd), 1e-8});
        const double rel = std::abs(an - fd) / denom;
        if (rel > report.max_rel_err) {
            report.max_rel_err = rel;
            report.worst_analytic = an;
            report.worst_fd = fd;
            report.worst_param_coordinate = std::string(detail::group_name(c.group)) +
                                            (c.group == detail::ParamCoord::Group::A1 ||
                                                     c.group == detail::ParamCoord::Group::V1
                                                 ? "[" + std::to_string(c.head) + "]"
                                                 : "") +
                                            "(" + std::to_string(c.row) + "," +
                                            std::to_string(c.col) + ")";
        }
    }
    return report;
}

} // namespace subgram
