#pragma once

#include <stdexcept>
#include <string>

namespace sparseport {

enum class ErrorKind {
    Data,                   // malformed or non-finite input data
    InsufficientData,       // too few observations
    Spec,                   // invalid model parameters
    Config,                 // invalid solver/backtest configuration
    Domain,                 // evaluation outside the function's domain
    DegenerateConstraints,  // rank-deficient constraint matrix
    Numerical,              // numerical breakdown
    Infeasible,
    Unbounded,
    Size,                   // problem too large for an exact method
    InternalConsistency,    // a guaranteed property was violated
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

}  // namespace sparseport
