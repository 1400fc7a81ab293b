#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace milne {

/// Base of every error raised by the library.
class MilneError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Precondition violated by a caller-supplied argument.
class InvalidArgument : public MilneError {
public:
    using MilneError::MilneError;
};

/// Two objects that must share a grid (or a shape) do not.
class GridMismatch : public MilneError {
public:
    using MilneError::MilneError;
};

class NonConvergence : public MilneError {
public:
    NonConvergence(std::size_t iters, double final_residual)
        : MilneError("Krylov solve did not converge after " + std::to_string(iters) +
                     " iterations (relative residual " + std::to_string(final_residual) + ")"),
          iterations(iters), residual(final_residual) {}

    std::size_t iterations;
    double residual;
};

/// The far trace of the matched solution is not constant enough; enlarge R.
class DomainTooSmall : public MilneError {
public:
    DomainTooSmall(double constancy_residual, double strip_depth)
        : MilneError("end state varies by " + std::to_string(constancy_residual) +
                     " across the outlet trace at R = " + std::to_string(strip_depth)),
          residual(constancy_residual), depth(strip_depth) {}

    double residual;
    double depth;
};

/// 1 - f2 vanishes on the outlet trace, so the end state cannot be extracted.
class DegenerateShot : public MilneError {
public:
    using MilneError::MilneError;
};

class NotMatched : public MilneError {
public:
    using MilneError::MilneError;
};

class SizeGuard : public MilneError {
public:
    using MilneError::MilneError;
};

class SingularMatrix : public MilneError {
public:
    using MilneError::MilneError;
};

class MixDegenerate : public MilneError {
public:
    using MilneError::MilneError;
};

/// A denominator 1 - <S_{M,M}> of the coefficient recursion is too close to zero.
class RecursionDegenerate : public MilneError {
public:
    RecursionDegenerate(int level, double denom)
        : MilneError("coefficient recursion degenerate at M = " + std::to_string(level) +
                     " (1 - <S_MM> = " + std::to_string(denom) + "); shrink alpha"),
          order(level), denominator(denom) {}

    int order;
    double denominator;
};

class RayLeavesDomain : public MilneError {
public:
    using MilneError::MilneError;
};

class IoError : public MilneError {
public:
    using MilneError::MilneError;
};

}  // namespace milne
