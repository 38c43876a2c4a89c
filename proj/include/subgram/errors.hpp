#pragma once

#include <stdexcept>
#include <string>

namespace subgram {

// Power iteration hit max_iters with residual above tolerance.
class NonConvergence : public std::runtime_error {
public:
    NonConvergence(double residual, std::size_t iters)
        : std::runtime_error("stationary distribution did not converge: residual " +
                             std::to_string(residual) + " after " + std::to_string(iters) +
                             " iterations"),
          residual_(residual) {}
    double residual() const { return residual_; }

private:
    double residual_;
};

// Counting estimator found no position matching the query history (backoff off).
class EmptyMatchSet : public std::runtime_error {
public:
    EmptyMatchSet() : std::runtime_error("empty match set and backoff disabled") {}
};

// Conditional requested for a history with vanishing stationary mass.
class DegenerateHistory : public std::runtime_error {
public:
    DegenerateHistory() : std::runtime_error("history has (near-)zero probability under pi") {}
};

// Fixed-length parameter construction applied to a sequence of another length.
class LengthMismatch : public std::runtime_error {
public:
    LengthMismatch(std::size_t expected, std::size_t got)
        : std::runtime_error("params built for length " + std::to_string(expected) +
                             " applied to length " + std::to_string(got)) {}
};

// Seed sweep needs at least two seeds.
class InsufficientSeeds : public std::runtime_error {
public:
    InsufficientSeeds() : std::runtime_error("seed sweep requires at least 2 seeds") {}
};

// Training loss became non-finite.
class NumericalDivergence : public std::runtime_error {
public:
    explicit NumericalDivergence(std::size_t iter)
        : std::runtime_error("loss became non-finite at iteration " + std::to_string(iter)),
          iter_(iter) {}
    std::size_t iter() const { return iter_; }

private:
    std::size_t iter_;
};

} // namespace subgram
