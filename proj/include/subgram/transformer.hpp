// Forward pass of the simplified disentangled two-layer attention-only
// transformer.
//
// Layer 1: m heads, each parameterized directly by a T_max x T_max logit
// matrix A1[h] (input-independent attention) and a value matrix V1[h]; head
// outputs are concatenated behind the skip block, so r1[i] in R^{(m+1)d} is
// [r0[i], V1[0] u0[i], ..., V1[m-1] u_{m-1}[i]].
// Layer 2: one head; score of key j for query t is <K2 r1[j], Q2 r1[t]>; the
// value path is fixed to read the skip block, so the output distribution is
// the attention-weighted average of token indicators:
//   p_out = sum_j a2[j] e_{x_j}.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "subgram/errors.hpp"
#include "subgram/matrix.hpp"
#include "subgram/rng.hpp"
#include "subgram/seqmodel.hpp"

namespace subgram {

// Orthonormal token embedding; one-hot unless constructed otherwise.
struct Embedding {
    int S = 0;
    int d = 0;
    Matrix rows;   // S x d, orthonormal rows

    static Embedding one_hot(int S) {
        Embedding e;
        e.S = S;
        e.d = S;
        e.rows = Matrix::identity(S);
        return e;
    }

    // Random orthonormal family in R^d (d >= S), via Gram-Schmidt.
    static Embedding random_orthogonal(int S, int d, Rng& rng) {
        if (d < S) throw std::invalid_argument("d must be >= S");
        Embedding e;
        e.S = S;
        e.d = d;
        e.rows = Matrix(S, d);
        for (int i = 0; i < S; ++i) {
            Vector v(d);
            while (true) {
                for (auto& x : v) x = rng.gaussian();
                for (int k = 0; k < i; ++k) {
                    double proj = 0.0;
                    for (int j = 0; j < d; ++j) proj += v[j] * e.rows(k, j);
                    for (int j = 0; j < d; ++j) v[j] -= proj * e.rows(k, j);
                }
                const double norm = std::sqrt(dot(v, v));
                if (norm > 1e-8) {
                    for (int j = 0; j < d; ++j) e.rows(i, j) = v[j] / norm;
                    break;
                }
            }
        }
        return e;
    }

    const double* token(int x) const { return rows.row(x); }
};

struct ModelConfig {
    int S = 2;        // alphabet size
    int d = 2;        // embedding dim, d >= S (one-hot: d == S)
    int m = 1;        // first-layer heads
    int T_max = 2;    // maximum supported sequence length

    ModelConfig() = default;
    ModelConfig(int S_, int m_, int T_max_, int d_ = -1)
        : S(S_), d(d_ < 0 ? S_ : d_), m(m_), T_max(T_max_) {
        validate();
    }

    void validate() const {
        if (S < 2) throw std::invalid_argument("S must be >= 2");
        if (d < S) throw std::invalid_argument("d must be >= S");
        if (m < 1) throw std::invalid_argument("m must be >= 1");
        if (T_max < 2) throw std::invalid_argument("T_max must be >= 2");
    }

    int d1() const { return (m + 1) * d; }   // concatenated width
    int dh() const { return d1(); }          // K2/Q2 output dim (square by default)
};

struct ModelParams {
    ModelConfig config;
    std::vector<Matrix> A1;   // m of T_max x T_max, first-layer attention logits
    std::vector<Matrix> V1;   // m of d x d
    Matrix K2;                // dh x d1
    Matrix Q2;                // dh x d1
    std::size_t fixed_length = 0;   // nonzero: params valid only for this T

    static ModelParams zeros(const ModelConfig& config) {
        config.validate();
        ModelParams p;
        p.config = config;
        p.A1.assign(config.m, Matrix(config.T_max, config.T_max));
        p.V1.assign(config.m, Matrix(config.d, config.d));
        p.K2 = Matrix(config.dh(), config.d1());
        p.Q2 = Matrix(config.dh(), config.d1());
        return p;
    }

    void validate() const {
        config.validate();
        if (A1.size() != static_cast<std::size_t>(config.m) ||
            V1.size() != static_cast<std::size_t>(config.m))
            throw std::invalid_argument("head count mismatch");
        for (const auto& a : A1)
            if (a.rows() != static_cast<std::size_t>(config.T_max) || !a.all_finite())
                throw std::invalid_argument("bad A1");
        for (const auto& v : V1)
            if (v.rows() != static_cast<std::size_t>(config.d) || !v.all_finite())
                throw std::invalid_argument("bad V1");
        if (!K2.all_finite() || !Q2.all_finite()) throw std::invalid_argument("non-finite K2/Q2");
    }
};

// masked_softmax: row i normalizes exp over columns j <= i (row-max
// subtracted), zero above the diagonal.
inline Matrix masked_softmax(const Matrix& logits) {
    const std::size_t T = logits.rows();
    Matrix out(T, logits.cols());
    for (std::size_t i = 0; i < T; ++i) {
        double mx = logits(i, 0);
        for (std::size_t j = 1; j <= i; ++j) mx = std::max(mx, logits(i, j));
        double denom = 0.0;
        for (std::size_t j = 0; j <= i; ++j) {
            const double e = std::exp(logits(i, j) - mx);
            out(i, j) = e;
            denom += e;
        }
        for (std::size_t j = 0; j <= i; ++j) out(i, j) /= denom;
    }
    return out;
}

// Softmax of a score prefix [0, len) with max subtraction.
inline Vector softmax_prefix(const Vector& scores, std::size_t len) {
    Vector out(len);
    double mx = scores[0];
    for (std::size_t j = 1; j < len; ++j) mx = std::max(mx, scores[j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
        out[j] = std::exp(scores[j] - mx);
        denom += out[j];
    }
    for (std::size_t j = 0; j < len; ++j) out[j] /= denom;
    return out;
}

// Cached activations of one forward pass (final-position query).
struct ForwardTrace {
    std::size_t T = 0;
    Sequence seq;
    Matrix r0;                // T x d embeddings
    std::vector<Matrix> a1;   // m of T x T attention scores (softmaxed)
    std::vector<Matrix> u;    // m of T x d attention-weighted embeddings q-bar
    Matrix r1;                // T x D1 concatenated first-layer output
    Matrix k2r1;              // T x Dh, K2 r1[j] for every j
    Vector q2r1t;             // Dh, Q2 r1[T-1]
    Vector logits2;           // T second-layer scores for query T-1
    Vector a2;                // T second-layer attention for query T-1
    Vector p_out;             // S output distribution
};

// embed
inline Matrix embed(const Sequence& seq, const Embedding& emb) {
    Matrix r0(seq.size(), emb.d);
    for (std::size_t i = 0; i < seq.size(); ++i) {
        const double* row = emb.token(seq[i]);
        for (int j = 0; j < emb.d; ++j) r0(i, j) = row[j];
    }
    return r0;
}

// forward
inline ForwardTrace forward(const ModelParams& params, const Embedding& emb, const Sequence& seq) {
    const std::size_t T = seq.size();
    const ModelConfig& cfg = params.config;
    if (T == 0) throw std::invalid_argument("empty sequence");
    if (T > static_cast<std::size_t>(cfg.T_max)) throw std::invalid_argument("sequence longer than T_max");
    if (params.fixed_length != 0 && T != params.fixed_length)
        throw LengthMismatch(params.fixed_length, T);
    for (int x : seq)
        if (x < 0 || x >= cfg.S) throw std::invalid_argument("token out of range");

    const int d = cfg.d;
    const int D1 = cfg.d1();
    const int Dh = cfg.dh();

    ForwardTrace tr;
    tr.T = T;
    tr.seq = seq;
    tr.r0 = embed(seq, emb);

    // first layer: per-head masked softmax over the leading T x T block of A1
    tr.a1.reserve(cfg.m);
    tr.u.reserve(cfg.m);
    tr.r1 = Matrix(T, D1);
    for (std::size_t i = 0; i < T; ++i)
        for (int j = 0; j < d; ++j) tr.r1(i, j) = tr.r0(i, j);   // skip block

    for (int h = 0; h < cfg.m; ++h) {
        Matrix logits(T, T);
        for (std::size_t i = 0; i < T; ++i)
            for (std::size_t j = 0; j <= i; ++j) logits(i, j) = params.A1[h](i, j);
        Matrix a = masked_softmax(logits);
        Matrix uh(T, d);
        for (std::size_t i = 0; i < T; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                const double w = a(i, j);
                const double* r0j = tr.r0.row(j);
                for (int l = 0; l < d; ++l) uh(i, l) += w * r0j[l];
            }
        }
        // block h+1 of r1 is V1[h] u_h[i]
        const Matrix& V = params.V1[h];
        for (std::size_t i = 0; i < T; ++i) {
            for (int r = 0; r < d; ++r) {
                double acc = 0.0;
                for (int l = 0; l < d; ++l) acc += V(r, l) * uh(i, l);
                tr.r1(i, (h + 1) * d + r) = acc;
            }
        }
        tr.a1.push_back(std::move(a));
        tr.u.push_back(std::move(uh));
    }

    // second layer, query at the final position
    tr.k2r1 = Matrix(T, Dh);
    for (std::size_t j = 0; j < T; ++j) {
        const double* r1j = tr.r1.row(j);
        for (int r = 0; r < Dh; ++r) {
            const double* k2r = params.K2.row(r);
            double acc = 0.0;
            for (int c = 0; c < D1; ++c) acc += k2r[c] * r1j[c];
            tr.k2r1(j, r) = acc;
        }
    }
    const std::size_t t = T - 1;
    tr.q2r1t = params.Q2.apply(Vector(tr.r1.row(t), tr.r1.row(t) + D1));
    tr.logits2.assign(T, 0.0);
    for (std::size_t j = 0; j < T; ++j) {
        double acc = 0.0;
        for (int r = 0; r < Dh; ++r) acc += tr.k2r1(j, r) * tr.q2r1t[r];
        tr.logits2[j] = acc;
    }
    tr.a2 = softmax_prefix(tr.logits2, T);

    tr.p_out.assign(cfg.S, 0.0);
    for (std::size_t j = 0; j < T; ++j) tr.p_out[seq[j]] += tr.a2[j];
    return tr;
}

// Second-layer attention and output distribution for an interior query
// position (used by the position-averaged loss); reuses the cached K2 r1.
inline void attention_at_query(const ForwardTrace& tr, const ModelParams& params, std::size_t t,
                               Vector& a2_out, Vector& p_out) {
    const int D1 = params.config.d1();
    const int Dh = params.config.dh();
    const Vector q2r1t = (t + 1 == tr.T)
                             ? tr.q2r1t
                             : params.Q2.apply(Vector(tr.r1.row(t), tr.r1.row(t) + D1));
    Vector scores(t + 1);
    for (std::size_t j = 0; j <= t; ++j) {
        double acc = 0.0;
        for (int r = 0; r < Dh; ++r) acc += tr.k2r1(j, r) * q2r1t[r];
        scores[j] = acc;
    }
    a2_out = softmax_prefix(scores, t + 1);
    p_out.assign(params.config.S, 0.0);
    for (std::size_t j = 0; j <= t; ++j) p_out[tr.seq[j]] += a2_out[j];
}

} // namespace subgram
