#pragma once

#include "paraopt/core.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace paraopt {

/// Optimal control problem  min 1/2|y(T)-y_target|^2 + alpha/2 int |c|^2
/// subject to  y' = f(y) + B c,  y(0) = y_init.
///
/// The problem is immutable after construction; the function members must
/// be pure so that problems can be shared by concurrent workers.
template <typename Scalar>
struct ControlProblem {
  using Vector = Vec<Scalar>;
  using Matrix = Mat<Scalar>;

  std::string name;
  int dim = 0;
  std::function<Vector(const Vector&)> rhs;
  std::function<Matrix(const Vector&)> jacobian;
  /// H(y, z) = d/dr f'(y + r z) at r = 0; linear in z.
  std::function<Matrix(const Vector&, const Vector&)> hessian_action;
  Scalar alpha = 1;
  Vector y_init;
  Vector y_target;
  std::optional<Matrix> control_operator;
  /// Present iff the dynamics are f(y) = A y.
  std::optional<Matrix> linear_operator;

  bool is_linear() const { return linear_operator.has_value(); }

  /// B B^T, the matrix multiplying lambda/alpha in the state equation.
  Matrix control_gram() const {
    if (!control_operator) return Matrix::Identity(dim, dim);
    return (*control_operator) * control_operator->transpose();
  }
};

using ControlProblemd = ControlProblem<double>;

namespace detail {

template <typename Scalar>
void check_alpha(Scalar alpha) {
  require(alpha > 0 && std::isfinite(static_cast<double>(alpha)), ErrorCode::InvalidParameter,
          "regularization alpha must be positive");
}

}  // namespace detail

/// Linear problem y' = A y + B c.
template <typename Scalar>
ControlProblem<Scalar> make_linear(Mat<Scalar> A, Scalar alpha, Vec<Scalar> y_init, Vec<Scalar> y_target,
                                   std::optional<Mat<Scalar>> control_operator = std::nullopt,
                                   std::string name = "linear") {
  detail::check_alpha(alpha);
  const auto n = A.rows();
  require(A.cols() == n && n > 0, ErrorCode::DimensionMismatch, "A must be square");
  require(y_init.size() == n && y_target.size() == n, ErrorCode::DimensionMismatch,
          "endpoint data must match the state dimension");
  if (control_operator) {
    require(control_operator->rows() == n && control_operator->cols() == n, ErrorCode::DimensionMismatch,
            "control operator must be n x n");
  }

  ControlProblem<Scalar> p;
  p.name = std::move(name);
  p.dim = static_cast<int>(n);
  p.rhs = [A](const Vec<Scalar>& y) -> Vec<Scalar> { return A * y; };
  p.jacobian = [A](const Vec<Scalar>&) -> Mat<Scalar> { return A; };
  p.hessian_action = [n](const Vec<Scalar>&, const Vec<Scalar>&) -> Mat<Scalar> { return Mat<Scalar>::Zero(n, n); };
  p.alpha = alpha;
  p.y_init = std::move(y_init);
  p.y_target = std::move(y_target);
  p.control_operator = std::move(control_operator);
  p.linear_operator = std::move(A);
  return p;
}

/// Scalar test equation y' = sigma y + c.
template <typename Scalar>
ControlProblem<Scalar> make_dahlquist(Scalar sigma, Scalar alpha, Scalar y_init, Scalar y_target) {
  Mat<Scalar> A(1, 1);
  A(0, 0) = sigma;
  return make_linear<Scalar>(A, alpha, Vec<Scalar>::Constant(1, y_init), Vec<Scalar>::Constant(1, y_target),
                             std::nullopt, "dahlquist");
}

template <typename Scalar>
struct LotkaVolterraParams {
  Scalar a1 = 10, b1 = 0.2, a2 = 0.2, b2 = 10;
  Scalar alpha = 5e-2;
  Vec<Scalar> y_init = (Vec<Scalar>(2) << 20, 10).finished();
  Vec<Scalar> y_target = (Vec<Scalar>(2) << 100, 20).finished();
};

/// Controlled predator-prey dynamics
///   y1' = a1 y1 - b1 y1 y2 + c1,   y2' = a2 y1 y2 - b2 y2 + c2.
template <typename Scalar>
ControlProblem<Scalar> make_lotka_volterra(const LotkaVolterraParams<Scalar>& prm = {}) {
  require(prm.a1 > 0 && prm.b1 > 0 && prm.a2 > 0 && prm.b2 > 0, ErrorCode::InvalidParameter,
          "Lotka-Volterra coefficients must be positive");
  detail::check_alpha(prm.alpha);
  require(prm.y_init.size() == 2 && prm.y_target.size() == 2, ErrorCode::DimensionMismatch,
          "Lotka-Volterra states are 2-vectors");
  require(prm.y_init.minCoeff() > 0 && prm.y_target.minCoeff() > 0, ErrorCode::InvalidParameter,
          "Lotka-Volterra populations must be positive");

  const Scalar a1 = prm.a1, b1 = prm.b1, a2 = prm.a2, b2 = prm.b2;
  ControlProblem<Scalar> p;
  p.name = "lotka_volterra";
  p.dim = 2;
  p.rhs = [=](const Vec<Scalar>& y) -> Vec<Scalar> {
    Vec<Scalar> f(2);
    f << a1 * y(0) - b1 * y(0) * y(1), a2 * y(0) * y(1) - b2 * y(1);
    return f;
  };
  p.jacobian = [=](const Vec<Scalar>& y) -> Mat<Scalar> {
    Mat<Scalar> J(2, 2);
    J << a1 - b1 * y(1), -b1 * y(0),
         a2 * y(1), a2 * y(0) - b2;
    return J;
  };
  p.hessian_action = [=](const Vec<Scalar>&, const Vec<Scalar>& z) -> Mat<Scalar> {
    Mat<Scalar> H(2, 2);
    H << -b1 * z(1), -b1 * z(0),
         a2 * z(1), a2 * z(0);
    return H;
  };
  p.alpha = prm.alpha;
  p.y_init = prm.y_init;
  p.y_target = prm.y_target;
  return p;
}

/// Periodic second-difference Laplacian on n nodes x_i = i/n.
template <typename Scalar>
Mat<Scalar> periodic_laplacian(int n) {
  require(n >= 3, ErrorCode::InvalidParameter, "periodic Laplacian needs n >= 3");
  const Scalar inv_h2 = Scalar(n) * Scalar(n);
  Mat<Scalar> A = Mat<Scalar>::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    A(i, i) = -2 * inv_h2;
    A(i, (i + n - 1) % n) += inv_h2;
    A(i, (i + 1) % n) += inv_h2;
  }
  return A;
}

/// 1D heat equation on [0,1] with periodic boundary conditions, control
/// acting on the nodes inside `control_support`.
template <typename Scalar>
ControlProblem<Scalar> make_heat_1d(int n, std::pair<Scalar, Scalar> control_support, Scalar alpha,
                                    const std::function<Scalar(Scalar)>& y_init_fn,
                                    const std::function<Scalar(Scalar)>& y_target_fn) {
  require(n >= 3, ErrorCode::InvalidParameter, "heat problem needs n >= 3");
  const auto [lo, hi] = control_support;
  require(0 <= lo && lo <= hi && hi <= 1, ErrorCode::InvalidParameter, "control support must lie in [0,1]");

  const Scalar h = Scalar(1) / Scalar(n);
  Mat<Scalar> B = Mat<Scalar>::Zero(n, n);
  Vec<Scalar> y0(n), yT(n);
  for (int i = 0; i < n; ++i) {
    const Scalar x = Scalar(i) * h;
    if (x >= lo && x <= hi) B(i, i) = 1;
    y0(i) = y_init_fn(x);
    yT(i) = y_target_fn(x);
  }
  return make_linear<Scalar>(periodic_laplacian<Scalar>(n), alpha, std::move(y0), std::move(yT), std::move(B),
                             "heat");
}

/// Heat setup used throughout the experiments: Gaussian bump at 1/2 steered
/// towards two half-height bumps at 1/4 and 3/4, control on [1/3, 2/3].
template <typename Scalar>
ControlProblem<Scalar> make_heat_default(int n = 50, Scalar alpha = Scalar(1e-4)) {
  auto bump = [](Scalar x, Scalar c) { return std::exp(Scalar(-100) * (x - c) * (x - c)); };
  return make_heat_1d<Scalar>(
      n, {Scalar(1) / 3, Scalar(2) / 3}, alpha, [=](Scalar x) { return bump(x, Scalar(0.5)); },
      [=](Scalar x) { return Scalar(0.5) * bump(x, Scalar(0.25)) + Scalar(0.5) * bump(x, Scalar(0.75)); });
}

/// Uniform two-level time grid. Step counts are stored as integers so that
/// T = L * N * fine_step holds exactly in the counts.
template <typename Scalar>
struct TimeGrid {
  Scalar horizon = 1;
  int num_subintervals = 1;
  long long fine_steps = 1;    // N = Delta T / delta t
  long long coarse_steps = 1;  // Delta T / Delta t

  Scalar subinterval_length() const { return horizon / Scalar(num_subintervals); }
  Scalar fine_step() const { return subinterval_length() / Scalar(fine_steps); }
  Scalar coarse_step() const { return subinterval_length() / Scalar(coarse_steps); }
  Scalar interface_time(int ell) const { return horizon * Scalar(ell) / Scalar(num_subintervals); }
  long long total_fine_steps() const { return fine_steps * num_subintervals; }
  /// delta t / Delta t
  Scalar ratio() const { return Scalar(coarse_steps) / Scalar(fine_steps); }
};

using TimeGridd = TimeGrid<double>;

template <typename Scalar>
TimeGrid<Scalar> make_grid(Scalar T, int L, long long fine_steps_per_subinterval,
                           long long coarse_steps_per_subinterval) {
  require(T > 0 && std::isfinite(static_cast<double>(T)), ErrorCode::InvalidParameter, "horizon must be positive");
  require(L >= 1, ErrorCode::InvalidParameter, "need at least one sub-interval");
  require(coarse_steps_per_subinterval >= 1, ErrorCode::InvalidParameter, "need at least one coarse step");
  require(fine_steps_per_subinterval >= coarse_steps_per_subinterval, ErrorCode::InvalidParameter,
          "fine grid must be at least as fine as the coarse grid");
  return TimeGrid<Scalar>{T, L, fine_steps_per_subinterval, coarse_steps_per_subinterval};
}

/// Interface unknowns Y_0..Y_L and Lambda_1..Lambda_L.
/// Stacked layout: [Y_0, ..., Y_L, Lambda_1, ..., Lambda_L].
template <typename Scalar>
struct InterfaceVector {
  std::vector<Vec<Scalar>> states;
  std::vector<Vec<Scalar>> adjoints;

  int num_subintervals() const { return static_cast<int>(adjoints.size()); }
  int dim() const { return states.empty() ? 0 : static_cast<int>(states.front().size()); }

  static InterfaceVector zeros(int n, int L) {
    InterfaceVector x;
    x.states.assign(L + 1, Vec<Scalar>::Zero(n));
    x.adjoints.assign(L, Vec<Scalar>::Zero(n));
    return x;
  }

  Vec<Scalar> stacked() const {
    const int n = dim(), L = num_subintervals();
    Vec<Scalar> v(n * (2 * L + 1));
    for (int l = 0; l <= L; ++l) v.segment(l * n, n) = states[l];
    for (int l = 1; l <= L; ++l) v.segment((L + l) * n, n) = adjoints[l - 1];
    return v;
  }

  static InterfaceVector unstack(const Vec<Scalar>& v, int n, int L) {
    require(v.size() == n * (2 * L + 1), ErrorCode::DimensionMismatch, "stacked vector has wrong length");
    InterfaceVector x = zeros(n, L);
    for (int l = 0; l <= L; ++l) x.states[l] = v.segment(l * n, n);
    for (int l = 1; l <= L; ++l) x.adjoints[l - 1] = v.segment((L + l) * n, n);
    return x;
  }

  /// Lambda_ell for ell = 1..L.
  const Vec<Scalar>& adjoint(int ell) const { return adjoints[ell - 1]; }
  Vec<Scalar>& adjoint(int ell) { return adjoints[ell - 1]; }
};

template <typename Scalar>
void check_consistent(const InterfaceVector<Scalar>& x, int n, int L) {
  require(static_cast<int>(x.states.size()) == L + 1 && static_cast<int>(x.adjoints.size()) == L,
          ErrorCode::DimensionMismatch, "interface vector does not match the number of sub-intervals");
  for (const auto& v : x.states) require(v.size() == n, ErrorCode::DimensionMismatch, "state has wrong dimension");
  for (const auto& v : x.adjoints) require(v.size() == n, ErrorCode::DimensionMismatch, "adjoint has wrong dimension");
}

}  // namespace paraopt
