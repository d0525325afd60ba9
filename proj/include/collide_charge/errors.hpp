#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace collide_charge {

// Invalid probability vectors, blocks, parameters.
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Operands whose sizes do not line up.
class DimensionError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Probability escaped through the truncation edge faster than allowed.
class TruncationOverflow : public std::runtime_error {
public:
    TruncationOverflow(std::size_t step, double leaked)
        : std::runtime_error("leaked mass " + std::to_string(leaked) +
                             " exceeds budget at step " + std::to_string(step)),
          step_(step), leaked_(leaked) {}

    std::size_t step() const { return step_; }
    double leaked_mass() const { return leaked_; }

private:
    std::size_t step_;
    double leaked_;
};

// Iterative solver or sampler that ran out of iterations.
class ConvergenceFailure : public std::runtime_error {
public:
    ConvergenceFailure(const std::string& what, double residual)
        : std::runtime_error(what + " (residual " + std::to_string(residual) + ")"),
          residual_(residual) {}

    double residual() const { return residual_; }

private:
    double residual_;
};

// Analysis that requires an irreducible chain was handed a reducible one.
class ReducibleChain : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace collide_charge
