// Counting estimators over a single in-context sequence: the k-gram MLE
// (match the contiguous (k-1)-history of the next token against every past
// position, average the tokens that followed) and its non-contiguous
// N-history variant. These double as oracles for the transformer
// constructions.
#pragma once

#include <algorithm>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "subgram/errors.hpp"
#include "subgram/matrix.hpp"
#include "subgram/seqmodel.hpp"

namespace subgram {

enum class Backoff { off, on };

struct EstimatorKind {
    enum class Variant { kgram, subset } variant = Variant::kgram;
    int k = 1;                 // kgram order
    std::vector<int> lags;     // subset lags, sorted ascending, distinct, positive
    Backoff backoff = Backoff::on;

    static EstimatorKind make_kgram(int k, Backoff b = Backoff::on) {
        if (k < 1) throw std::invalid_argument("k must be >= 1");
        EstimatorKind e;
        e.variant = Variant::kgram;
        e.k = k;
        e.backoff = b;
        return e;
    }
    static EstimatorKind make_subset(std::vector<int> lags, Backoff b = Backoff::on) {
        std::sort(lags.begin(), lags.end());
        for (std::size_t i = 0; i < lags.size(); ++i) {
            if (lags[i] < 1) throw std::invalid_argument("lags must be positive");
            if (i > 0 && lags[i] == lags[i - 1]) throw std::invalid_argument("lags must be distinct");
        }
        EstimatorKind e;
        e.variant = Variant::subset;
        e.lags = std::move(lags);
        e.backoff = b;
        return e;
    }

    std::string label() const {
        if (variant == Variant::kgram) return std::to_string(k) + "-gram";
        std::string s = "N={";
        for (std::size_t i = 0; i < lags.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(lags[i]);
        }
        return s + "}";
    }
};

// Positions whose (k-1)-history equals the (k-1)-history of the next token
// (0-based; position i is counted when i >= k-1 and x_{i-h} = x_{T-h} for all
// h in [1, k-1]).
inline std::vector<std::size_t> match_set(const Sequence& seq, int k) {
    const std::size_t T = seq.size();
    std::vector<std::size_t> out;
    for (std::size_t i = static_cast<std::size_t>(k - 1); i < T; ++i) {
        bool ok = true;
        for (int h = 1; h < k; ++h) {
            if (seq[i - static_cast<std::size_t>(h)] != seq[T - static_cast<std::size_t>(h)]) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(i);
    }
    return out;
}

// Same for a non-contiguous lag set (empty set matches every position).
inline std::vector<std::size_t> subset_match_set(const Sequence& seq, const std::vector<int>& lags) {
    const std::size_t T = seq.size();
    const std::size_t start = lags.empty() ? 0 : static_cast<std::size_t>(lags.back());
    std::vector<std::size_t> out;
    for (std::size_t i = start; i < T; ++i) {
        bool ok = true;
        for (int h : lags) {
            if (seq[i - static_cast<std::size_t>(h)] != seq[T - static_cast<std::size_t>(h)]) {
                ok = false;
                break;
            }
        }
        if (ok) out.push_back(i);
    }
    return out;
}

namespace detail {

inline Vector normalized_counts(const Sequence& seq, const std::vector<std::size_t>& matches, int S) {
    Vector out(S, 0.0);
    // exact integer counts, one division at the end
    std::vector<long long> counts(S, 0);
    for (std::size_t i : matches) counts[seq[i]] += 1;
    for (int s = 0; s < S; ++s)
        out[s] = static_cast<double>(counts[s]) / static_cast<double>(matches.size());
    return out;
}

} // namespace detail

// kgram_predict: match the (k-1)-history of the next token against every
// past position and average the tokens that followed. On an empty
// match set, backoff recurses to k-1 (terminating at uniform for an empty
// sequence); with backoff off it throws EmptyMatchSet.
inline Vector kgram_predict(const Sequence& seq, int S, int k, Backoff backoff = Backoff::on) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    for (int kk = k; kk >= 1; --kk) {
        const auto matches = match_set(seq, kk);
        if (!matches.empty()) return detail::normalized_counts(seq, matches, S);
        if (backoff == Backoff::off) throw EmptyMatchSet();
    }
    return Vector(S, 1.0 / static_cast<double>(S));
}

// subset_predict: same counting scheme on the N-history; backoff drops
// the largest lag.
inline Vector subset_predict(const Sequence& seq, int S, std::vector<int> lags,
                             Backoff backoff = Backoff::on) {
    std::sort(lags.begin(), lags.end());
    if (!lags.empty() && static_cast<std::size_t>(lags.back()) >= seq.size())
        throw std::invalid_argument("max lag must be < T");
    while (true) {
        const auto matches = subset_match_set(seq, lags);
        if (!matches.empty()) return detail::normalized_counts(seq, matches, S);
        if (backoff == Backoff::off) throw EmptyMatchSet();
        if (lags.empty()) return Vector(S, 1.0 / static_cast<double>(S));
        lags.pop_back();
    }
}

inline Vector estimator_predict(const EstimatorKind& kind, const Sequence& seq, int S) {
    if (kind.variant == EstimatorKind::Variant::kgram)
        return kgram_predict(seq, S, kind.k, kind.backoff);
    return subset_predict(seq, S, kind.lags, kind.backoff);
}

// Posterior-mean variant: (counts + alpha) / (|M| + S alpha). With alpha
// equal to the task's Dirichlet parameter this is the Bayes predictor
// restricted to k-gram counts; it is total (an empty match set returns the
// prior mean) and shares the raw estimator's T -> infinity limit. Used for
// the training baselines, where the raw counts' zero entries would send the
// floored cross-entropy to the ceiling.
inline Vector kgram_predict_smoothed(const Sequence& seq, int S, int k, double alpha) {
    const auto matches = match_set(seq, k);
    Vector out(S, 0.0);
    for (std::size_t i : matches) out[seq[i]] += 1.0;
    const double denom = static_cast<double>(matches.size()) + alpha * static_cast<double>(S);
    for (int s = 0; s < S; ++s) out[s] = (out[s] + alpha) / denom;
    return out;
}

struct EstimatorCeResult {
    double mean_ce = 0.0;
    double stderr_ce = 0.0;
    std::size_t n_sequences = 0;
};

// estimator_ce: mean CE of the estimate at the final position against
// the exact conditional of the generating model.
inline EstimatorCeResult estimator_ce(const EstimatorKind& kind, const SequenceBatch& batch,
                                      const std::vector<TransitionTensor>& tensors,
                                      const std::vector<StationaryDistribution>& pis) {
    if (batch.sequences.empty()) throw std::invalid_argument("batch is empty");
    double acc = 0.0, acc_sq = 0.0;
    for (std::size_t b = 0; b < batch.sequences.size(); ++b) {
        const Sequence& seq = batch.sequences[b];
        const auto& tensor = tensors[batch.lm_index[b]];
        const auto& pi = pis[batch.lm_index[b]];
        const int n = tensor.spec.order;
        std::vector<int> hist(seq.end() - (n - 1), seq.end());
        const Vector truth = conditional(tensor, pi, hist);
        const Vector est = estimator_predict(kind, seq, tensor.spec.alphabet_size);
        const double ce = ce_loss_vs_truth(est, truth);
        acc += ce;
        acc_sq += ce * ce;
    }
    EstimatorCeResult r;
    r.n_sequences = batch.sequences.size();
    const double n = static_cast<double>(r.n_sequences);
    r.mean_ce = acc / n;
    const double var = std::max(0.0, acc_sq / n - r.mean_ce * r.mean_ce);
    r.stderr_ce = r.n_sequences > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
    return r;
}

} // namespace subgram
