#pragma once

#include <stdexcept>
#include <string>

namespace redgrid {

/// Error domains map onto CLI exit codes: input/validation failures exit 1,
/// numerical failures exit 2.
enum class ErrorKind { Validation, Numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string what) : std::runtime_error(std::move(what)), kind_(kind) {}
    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

struct ParseError : Error {
    explicit ParseError(const std::string& what) : Error(ErrorKind::Validation, "parse error: " + what) {}
};

/// Carries the name of the offending field so callers can point at the input.
struct ValidationError : Error {
    ValidationError(std::string field_name, const std::string& what)
        : Error(ErrorKind::Validation, "validation error [" + field_name + "]: " + what),
          field(std::move(field_name)) {}
    std::string field;
};

struct UnknownSlot : Error {
    explicit UnknownSlot(const std::string& slot)
        : Error(ErrorKind::Validation, "unknown state slot: " + slot) {}
};

struct NoConvergence : Error {
    NoConvergence(int iterations_, double mismatch_)
        : Error(ErrorKind::Numerical, "power flow did not converge after " + std::to_string(iterations_) +
                                          " iterations, max mismatch " + std::to_string(mismatch_)),
          iterations(iterations_), mismatch(mismatch_) {}
    int iterations;
    double mismatch;
};

struct InitInfeasible : Error {
    explicit InitInfeasible(const std::string& what)
        : Error(ErrorKind::Numerical, "equilibrium initialization infeasible: " + what) {}
};

struct SingularBlock : Error {
    explicit SingularBlock(const std::string& what)
        : Error(ErrorKind::Numerical, "singular eliminated block: " + what) {}
};

struct SingularNetwork : Error {
    explicit SingularNetwork(const std::string& what)
        : Error(ErrorKind::Numerical, "singular network solve: " + what) {}
};

struct DimensionMismatch : Error {
    explicit DimensionMismatch(const std::string& what)
        : Error(ErrorKind::Validation, "dimension mismatch: " + what) {}
};

struct NumericalBlowup : Error {
    NumericalBlowup(double t_, int state_index_)
        : Error(ErrorKind::Numerical, "non-finite state at t=" + std::to_string(t_) + ", state index " +
                                          std::to_string(state_index_)),
          t(t_), state_index(state_index_) {}
    double t;
    int state_index;
};

struct NotAnEquilibrium : Error {
    explicit NotAnEquilibrium(double residual)
        : Error(ErrorKind::Numerical,
                "linearization point is not an equilibrium (||f||_inf = " + std::to_string(residual) + ")") {}
};

struct ConvergenceFailure : Error {
    explicit ConvergenceFailure(const std::string& what)
        : Error(ErrorKind::Numerical, "eigensolver failure: " + what) {}
};

struct NotNormalized : Error {
    explicit NotNormalized(const std::string& what)
        : Error(ErrorKind::Numerical, "eigenvectors not biorthonormal: " + what) {}
};

struct NoCandidates : Error {
    explicit NoCandidates(const std::string& what)
        : Error(ErrorKind::Numerical, "no dominant-mode candidates: " + what) {}
};

struct UnstableA : Error {
    explicit UnstableA(double max_re)
        : Error(ErrorKind::Numerical,
                "matrix has an eigenvalue with Re = " + std::to_string(max_re) + " >= stability margin") {}
};

struct IllConditionedBalancing : Error {
    explicit IllConditionedBalancing(double cond)
        : Error(ErrorKind::Numerical, "balancing transformation condition number " + std::to_string(cond)) {}
};

struct EmptyExternal : Error {
    explicit EmptyExternal(const std::string& what)
        : Error(ErrorKind::Validation, "external area is empty: " + what) {}
};

struct LengthMismatch : Error {
    LengthMismatch(std::size_t a, std::size_t b)
        : Error(ErrorKind::Validation,
                "series length mismatch: " + std::to_string(a) + " vs " + std::to_string(b)) {}
};

struct SwitchFailure : Error {
    explicit SwitchFailure(const std::string& what)
        : Error(ErrorKind::Numerical, "reduced-model switch failed: " + what) {}
};

}  // namespace redgrid
