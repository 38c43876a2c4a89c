// Ground-truth n-gram language models: Dirichlet-sampled transition tensors,
// the lifted order-1 chain over histories, stationary distributions, sequence
// generation, and exact conditionals of any order.
//
// Conventions: tokens are 0-based integers in [0, S). A history of length
// n-1 is encoded in base S with the most recent token as the least
// significant digit, so appending a token is an integer mod/multiply.
#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "subgram/errors.hpp"
#include "subgram/matrix.hpp"
#include "subgram/rng.hpp"

namespace subgram {

using Sequence = std::vector<int>;

constexpr double kProbFloor = 1e-12;   // floor inside log() of the CE loss
constexpr double kRowSumTol = 1e-12;

struct NGramSpec {
    int alphabet_size = 2;   // S
    int order = 1;           // n; conditionals depend on the (n-1)-history
    double dirichlet_alpha = 1.0;
    uint64_t seed = 0;

    NGramSpec() = default;
    NGramSpec(int S, int n, double alpha, uint64_t seed_)
        : alphabet_size(S), order(n), dirichlet_alpha(alpha), seed(seed_) {
        validate();
    }

    void validate() const {
        if (alphabet_size < 2) throw std::invalid_argument("alphabet_size must be >= 2");
        if (order < 1) throw std::invalid_argument("order must be >= 1");
        if (!(dirichlet_alpha > 0.0)) throw std::invalid_argument("dirichlet_alpha must be > 0");
    }

    // S^(n-1), the number of histories.
    std::size_t num_histories() const {
        std::size_t n = 1;
        for (int i = 1; i < order; ++i) n *= static_cast<std::size_t>(alphabet_size);
        return n;
    }
};

// Encode a full (n-1)-history given in time order (oldest first).
inline std::size_t encode_history(const std::vector<int>& history, int S) {
    std::size_t idx = 0;
    std::size_t pow = 1;
    for (std::size_t j = 0; j < history.size(); ++j) {
        idx += static_cast<std::size_t>(history[history.size() - 1 - j]) * pow;
        pow *= static_cast<std::size_t>(S);
    }
    return idx;
}

// Append token y to an encoded history (drop the oldest token).
inline std::size_t shift_history(std::size_t idx, int y, int S, int order) {
    if (order <= 1) return 0;
    std::size_t keep = 1;
    for (int i = 0; i < order - 2; ++i) keep *= static_cast<std::size_t>(S);
    return (idx % keep) * static_cast<std::size_t>(S) + static_cast<std::size_t>(y);
}

struct TransitionTensor {
    NGramSpec spec;
    Matrix rows;   // S^(n-1) x S, row-stochastic

    const double* row(std::size_t h) const { return rows.row(h); }

    Vector row_vector(std::size_t h) const {
        return Vector(rows.row(h), rows.row(h) + spec.alphabet_size);
    }

    void validate() const {
        spec.validate();
        if (rows.rows() != spec.num_histories() ||
            rows.cols() != static_cast<std::size_t>(spec.alphabet_size))
            throw std::invalid_argument("tensor shape inconsistent with spec");
        for (std::size_t h = 0; h < rows.rows(); ++h) {
            double s = 0.0;
            for (std::size_t j = 0; j < rows.cols(); ++j) {
                const double v = rows(h, j);
                if (v < 0.0 || v > 1.0) throw std::invalid_argument("entry outside [0,1]");
                s += v;
            }
            if (std::abs(s - 1.0) > kRowSumTol) throw std::invalid_argument("row does not sum to 1");
        }
    }
};

// sample_lm: every history gets an independent Dirichlet(alpha 1_S) row.
inline TransitionTensor sample_lm(const NGramSpec& spec, Rng& rng) {
    spec.validate();
    TransitionTensor t;
    t.spec = spec;
    const std::size_t H = spec.num_histories();
    const std::size_t S = static_cast<std::size_t>(spec.alphabet_size);
    t.rows = Matrix(H, S);
    for (std::size_t h = 0; h < H; ++h) {
        Vector row = rng.dirichlet(S, spec.dirichlet_alpha);
        for (std::size_t j = 0; j < S; ++j) t.rows(h, j) = row[j];
    }
    return t;
}

// Order-1 chain over the S^(n-1) histories. State h has exactly S successors
// (shift-and-append); stored sparsely as successor indices plus the
// corresponding tensor probabilities.
struct LiftedChain {
    int alphabet_size = 2;
    int order = 1;
    std::size_t num_states = 1;
    std::vector<std::size_t> successor;   // num_states * S, successor[h*S + y]
    std::vector<double> prob;             // num_states * S, tensor row values

    Matrix dense() const {
        Matrix m(num_states, num_states);
        const std::size_t S = static_cast<std::size_t>(alphabet_size);
        for (std::size_t h = 0; h < num_states; ++h)
            for (std::size_t y = 0; y < S; ++y) m(h, successor[h * S + y]) += prob[h * S + y];
        return m;
    }
};

// lift
inline LiftedChain lift(const TransitionTensor& tensor) {
    LiftedChain chain;
    chain.alphabet_size = tensor.spec.alphabet_size;
    chain.order = tensor.spec.order;
    chain.num_states = tensor.spec.num_histories();
    const std::size_t S = static_cast<std::size_t>(chain.alphabet_size);
    chain.successor.resize(chain.num_states * S);
    chain.prob.resize(chain.num_states * S);
    for (std::size_t h = 0; h < chain.num_states; ++h) {
        for (std::size_t y = 0; y < S; ++y) {
            chain.successor[h * S + y] = shift_history(h, static_cast<int>(y), chain.alphabet_size, chain.order);
            chain.prob[h * S + y] = tensor.rows(h, y);
        }
    }
    return chain;
}

struct StationaryDistribution {
    Vector pi;
    double residual = 0.0;   // ||pi^T T - pi^T||_inf at convergence
};

// stationary: power iteration from the uniform vector. Dirichlet-sampled
// tensors are strictly positive a.s., so the chain is irreducible and
// aperiodic and the iteration converges geometrically.
inline StationaryDistribution stationary(const LiftedChain& chain, double tol = 1e-12,
                                         std::size_t max_iters = 1000000) {
    if (!(tol > 0.0)) throw std::invalid_argument("tol must be > 0");
    const std::size_t N = chain.num_states;
    const std::size_t S = static_cast<std::size_t>(chain.alphabet_size);
    Vector pi(N, 1.0 / static_cast<double>(N));
    Vector next(N, 0.0);
    double residual = 0.0;
    for (std::size_t iter = 0; iter < max_iters; ++iter) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t h = 0; h < N; ++h) {
            const double mass = pi[h];
            for (std::size_t y = 0; y < S; ++y)
                next[chain.successor[h * S + y]] += mass * chain.prob[h * S + y];
        }
        residual = linf_distance(next, pi);
        pi.swap(next);
        if (residual <= tol) {
            // renormalize away accumulated rounding
            const double total = sum(pi);
            for (auto& v : pi) v /= total;
            return {pi, residual};
        }
    }
    throw NonConvergence(residual, max_iters);
}

inline StationaryDistribution stationary(const TransitionTensor& tensor, double tol = 1e-12,
                                         std::size_t max_iters = 1000000) {
    return stationary(lift(tensor), tol, max_iters);
}

// sample_sequence: first n-1 tokens drawn jointly from pi, remaining
// tokens from the tensor row of their history.
inline Sequence sample_sequence(const TransitionTensor& tensor, const StationaryDistribution& pi,
                                std::size_t T, Rng& rng) {
    const int n = tensor.spec.order;
    const int S = tensor.spec.alphabet_size;
    if (T + 1 < static_cast<std::size_t>(n)) throw std::invalid_argument("T must be >= n-1");
    Sequence seq;
    seq.reserve(T);
    std::size_t state = 0;
    if (n >= 2) {
        state = rng.categorical(pi.pi);
        // digit j of the state is the token at lag j+1 from position n-1
        std::size_t idx = state;
        std::vector<int> prefix(n - 1);
        for (int j = 0; j < n - 1; ++j) {
            prefix[n - 2 - j] = static_cast<int>(idx % static_cast<std::size_t>(S));
            idx /= static_cast<std::size_t>(S);
        }
        for (int tok : prefix) seq.push_back(tok);
    }
    while (seq.size() < T) {
        const double* row = tensor.row(state);
        const int y = static_cast<int>(rng.categorical(Vector(row, row + S)));
        seq.push_back(y);
        state = shift_history(state, y, S, n);
    }
    return seq;
}

struct SequenceBatch {
    std::vector<Sequence> sequences;
    std::vector<std::size_t> lm_index;   // which tensor generated each sequence
};

// conditional: next-token distribution given the most recent l tokens,
// 0 <= l <= n-1. Full histories return the tensor row unchanged; shorter
// histories marginalize pi over the unobserved prefix.
inline Vector conditional(const TransitionTensor& tensor, const StationaryDistribution& pi,
                          const std::vector<int>& history) {
    const int n = tensor.spec.order;
    const int S = tensor.spec.alphabet_size;
    const std::size_t l = history.size();
    if (l > static_cast<std::size_t>(n - 1)) throw std::invalid_argument("history longer than n-1");
    if (l == static_cast<std::size_t>(n - 1)) return tensor.row_vector(encode_history(history, S));

    // idx of (prefix, history) = hist_digits + prefix_digits * S^l
    const std::size_t hist_low = encode_history(history, S);
    std::size_t pow_l = 1;
    for (std::size_t j = 0; j < l; ++j) pow_l *= static_cast<std::size_t>(S);
    std::size_t num_prefixes = tensor.spec.num_histories() / pow_l;

    Vector num(S, 0.0);
    double den = 0.0;
    for (std::size_t p = 0; p < num_prefixes; ++p) {
        const std::size_t idx = hist_low + p * pow_l;
        const double w = pi.pi[idx];
        den += w;
        const double* row = tensor.row(idx);
        for (int s = 0; s < S; ++s) num[s] += w * row[s];
    }
    if (den < 1e-300) throw DegenerateHistory();
    for (auto& v : num) v /= den;
    return num;
}

// ce_loss_vs_truth: -sum_s truth[s] log max(pred[s], floor), in nats.
inline double ce_loss_vs_truth(const Vector& predicted, const Vector& truth) {
    double loss = 0.0;
    for (std::size_t s = 0; s < truth.size(); ++s)
        loss -= truth[s] * std::log(std::max(predicted[s], kProbFloor));
    return loss;
}

inline double entropy(const Vector& p) { return ce_loss_vs_truth(p, p); }

} // namespace subgram
