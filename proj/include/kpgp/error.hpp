#pragma once

#include <stdexcept>
#include <string>

namespace kpgp {

/// Failure categories raised by the library. The CLI maps them onto exit codes.
enum class ErrorKind {
    Parameter,           ///< invalid argument or configuration value
    DegenerateDesign,    ///< repeated or unsorted knots
    InsufficientData,    ///< fewer points than the kernel packet degree
    Conditioning,        ///< a kernel packet system cannot be solved reliably
    SingularMatrix,      ///< zero pivot in a banded factorization
    NumericalBreakdown,  ///< sign violations, negative variances, non-finite values
    CollinearRegressors, ///< singular generalized least squares system
    OptimizationFailure, ///< no finite likelihood value found
    Design,              ///< malformed grid or sparse-grid design
    Data,                ///< malformed or missing observations
};

const char* to_string(ErrorKind kind);

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

} // namespace kpgp
