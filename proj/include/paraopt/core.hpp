#pragma once

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>

namespace paraopt {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class ErrorCode {
  InvalidParameter,
  DimensionMismatch,
  NewtonDivergence,
  SingularStep,
  SingularMatrix,
  KrylovStagnation,
  NoConvergence,
  UnsupportedRegime,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidParameter: return "invalid-parameter";
    case ErrorCode::DimensionMismatch: return "dimension-mismatch";
    case ErrorCode::NewtonDivergence: return "newton-divergence";
    case ErrorCode::SingularStep: return "singular-step";
    case ErrorCode::SingularMatrix: return "singular-matrix";
    case ErrorCode::KrylovStagnation: return "krylov-stagnation";
    case ErrorCode::NoConvergence: return "no-convergence";
    case ErrorCode::UnsupportedRegime: return "unsupported-regime";
  }
  return "unknown";
}

/// Error raised by every module in the library. Carries a machine-readable
/// code and, for local solver failures, the offending sub-interval.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what, std::optional<int> subinterval = std::nullopt)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code),
        message_(what),
        subinterval_(subinterval) {}

  ErrorCode code() const noexcept { return code_; }
  std::optional<int> subinterval() const noexcept { return subinterval_; }
  /// Message without the code prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
  std::optional<int> subinterval_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
  if (!condition) throw Error(code, what);
}

template <typename Derived>
typename Derived::Scalar inf_norm(const Eigen::MatrixBase<Derived>& v) {
  return v.size() == 0 ? typename Derived::Scalar(0) : v.template lpNorm<Eigen::Infinity>();
}

}  // namespace paraopt
