#pragma once

#include "paraopt/block_bvp.hpp"
#include "paraopt/model.hpp"

#include <cmath>
#include <limits>
#include <utility>

namespace paraopt {

// Discrete sub-interval optimality system (implicit Euler, discretize then
// optimize). For m steps of size tau with y_0 = Y and lambda_m = Lambda+:
//
//   y_{k+1} - y_k - tau f(y_{k+1}) + (tau/alpha) G lambda_k = 0
//   (I - tau f'(y_{k+1}))^T lambda_k - lambda_{k+1}        = 0
//
// for k = 0..m-1, with G = B B^T. The control is c_{k+1} = -B^T lambda_k / alpha.
// For f(y) = A y this is exactly
//   y_{k+1} = (I - tau A)^{-1} (y_k + tau c_{k+1}),  lambda_k = (I - tau A)^{-T} lambda_{k+1}.

template <typename Scalar>
struct LocalTrajectory {
  Scalar step = 0;
  Mat<Scalar> states;    // n x (m+1), column k is y_k
  Mat<Scalar> adjoints;  // n x (m+1), column k is lambda_k

  long long steps() const { return states.cols() - 1; }
  /// P(Y, Lambda+): state at the right end.
  Vec<Scalar> right_state() const { return states.col(states.cols() - 1); }
  /// Q(Y, Lambda+): adjoint at the left end.
  Vec<Scalar> left_adjoint() const { return adjoints.col(0); }
};

template <typename Scalar>
struct LocalSolveOptions {
  Scalar tol = Scalar(1e-12);
  int max_newton = 50;
};

template <typename Scalar>
struct Propagation {
  Vec<Scalar> P;
  Vec<Scalar> Q;
  LocalTrajectory<Scalar> trajectory;
  int newton_iterations = 0;
};

/// Residual of the discrete recurrences; column k stacks the state and the
/// adjoint equation of step k.
template <typename Scalar>
Mat<Scalar> discrete_residual(const ControlProblem<Scalar>& problem, const LocalTrajectory<Scalar>& traj) {
  const int n = problem.dim;
  const long long m = traj.steps();
  const Scalar tau = traj.step;
  const Mat<Scalar> G = problem.control_gram();
  Mat<Scalar> res(2 * n, m);
  for (long long k = 0; k < m; ++k) {
    const Vec<Scalar> y1 = traj.states.col(k + 1);
    const Vec<Scalar> lam = traj.adjoints.col(k);
    res.col(k).head(n) = y1 - traj.states.col(k) - tau * problem.rhs(y1) + (tau / problem.alpha) * (G * lam);
    res.col(k).tail(n) = lam - tau * problem.jacobian(y1).transpose() * lam - traj.adjoints.col(k + 1);
  }
  return res;
}

namespace detail {

/// Diagonal block D_k of the linearized system about `traj`.
template <typename Scalar>
struct LocalJacobianBlocks {
  const ControlProblem<Scalar>& problem;
  const LocalTrajectory<Scalar>& traj;
  Mat<Scalar> coupling;  // (tau/alpha) G
  bool with_hessian;

  LocalJacobianBlocks(const ControlProblem<Scalar>& p, const LocalTrajectory<Scalar>& t, bool hessian)
      : problem(p), traj(t), coupling((t.step / p.alpha) * p.control_gram()), with_hessian(hessian) {}

  Mat<Scalar> operator()(long long k) const {
    const int n = problem.dim;
    const Scalar tau = traj.step;
    const Vec<Scalar> y1 = traj.states.col(k + 1);
    const Mat<Scalar> E = Mat<Scalar>::Identity(n, n) - tau * problem.jacobian(y1);
    Mat<Scalar> D(2 * n, 2 * n);
    D.topLeftCorner(n, n) = E;
    D.topRightCorner(n, n) = coupling;
    D.bottomRightCorner(n, n) = E.transpose();
    if (with_hessian) {
      // d/dy [f'(y)^T lambda] z = H(y, z)^T lambda
      const Vec<Scalar> lam = traj.adjoints.col(k);
      Mat<Scalar> K(n, n);
      for (int j = 0; j < n; ++j) {
        K.col(j) = problem.hessian_action(y1, Vec<Scalar>::Unit(n, j)).transpose() * lam;
      }
      D.bottomLeftCorner(n, n) = -tau * K;
    } else {
      D.bottomLeftCorner(n, n).setZero();
    }
    return D;
  }
};

/// Product of the block-tridiagonal local operator with x (one 2n column per block).
template <typename Scalar, typename DiagFn>
Mat<Scalar> apply_block_operator(int n, long long m, const DiagFn& diag, const Mat<Scalar>& x) {
  Mat<Scalar> out(2 * n, m);
  for (long long k = 0; k < m; ++k) {
    out.col(k).noalias() = diag(k) * x.col(k);
    if (k > 0) out.col(k).head(n) -= x.col(k - 1).head(n);
    if (k + 1 < m) out.col(k).tail(n) -= x.col(k + 1).tail(n);
  }
  return out;
}

template <typename Scalar>
Eigen::PartialPivLU<Mat<Scalar>> step_factor(const ControlProblem<Scalar>& problem, Scalar tau) {
  const int n = problem.dim;
  Eigen::PartialPivLU<Mat<Scalar>> lu(Mat<Scalar>::Identity(n, n) - tau * (*problem.linear_operator));
  if (!(lu.rcond() > Scalar(64) * std::numeric_limits<Scalar>::epsilon())) {
    throw Error(ErrorCode::SingularStep, "I - tau A is singular to working precision");
  }
  return lu;
}

template <typename Scalar>
void check_inputs(const ControlProblem<Scalar>& problem, long long m, Scalar tau, const Vec<Scalar>& Y,
                  const Vec<Scalar>& lam_plus) {
  require(m >= 1 && tau > 0, ErrorCode::InvalidParameter, "local solve needs m >= 1 and tau > 0");
  require(Y.size() == problem.dim && lam_plus.size() == problem.dim, ErrorCode::DimensionMismatch,
          "boundary data must match the state dimension");
}

/// Starting iterate for the local Newton solve: states advanced with the
/// adjoint frozen at lam_plus, then the adjoint recurrence swept backwards
/// along those states.
template <typename Scalar>
LocalTrajectory<Scalar> sweep_initial_iterate(const ControlProblem<Scalar>& problem, long long m, Scalar tau,
                                              const Vec<Scalar>& Y, const Vec<Scalar>& lam_plus) {
  const int n = problem.dim;
  const Mat<Scalar> I = Mat<Scalar>::Identity(n, n);
  const Vec<Scalar> push = (tau / problem.alpha) * (problem.control_gram() * lam_plus);
  LocalTrajectory<Scalar> traj{tau, Mat<Scalar>(n, m + 1), Mat<Scalar>(n, m + 1)};
  traj.states.col(0) = Y;
  for (long long k = 0; k < m; ++k) {
    const Vec<Scalar> rhs = traj.states.col(k) - push;
    Vec<Scalar> y = traj.states.col(k);
    for (int it = 0; it < 20; ++it) {
      const Vec<Scalar> r = y - tau * problem.rhs(y) - rhs;
      const Vec<Scalar> dy = (I - tau * problem.jacobian(y)).partialPivLu().solve(r);
      y -= dy;
      if (!y.allFinite()) return {tau, Y.replicate(1, m + 1), lam_plus.replicate(1, m + 1)};
      if (inf_norm(dy) <= std::numeric_limits<Scalar>::epsilon() * (Scalar(1) + inf_norm(y))) break;
    }
    traj.states.col(k + 1) = y;
  }
  traj.adjoints.col(m) = lam_plus;
  for (long long k = m - 1; k >= 0; --k) {
    const Mat<Scalar> E = I - tau * problem.jacobian(Vec<Scalar>(traj.states.col(k + 1)));
    traj.adjoints.col(k) = E.transpose().partialPivLu().solve(Vec<Scalar>(traj.adjoints.col(k + 1)));
  }
  if (!traj.states.allFinite() || !traj.adjoints.allFinite()) {
    return {tau, Y.replicate(1, m + 1), lam_plus.replicate(1, m + 1)};
  }
  return traj;
}

}  // namespace detail

/// Linear problems: backward adjoint recurrence, then forward state recurrence.
template <typename Scalar>
LocalTrajectory<Scalar> linear_sweep(const ControlProblem<Scalar>& problem, long long m, Scalar tau,
                                     const Vec<Scalar>& Y, const Vec<Scalar>& lam_plus) {
  detail::check_inputs(problem, m, tau, Y, lam_plus);
  require(problem.is_linear(), ErrorCode::InvalidParameter, "linear sweep needs a linear problem");
  const int n = problem.dim;
  const auto lu = detail::step_factor(problem, tau);
  const Mat<Scalar> G = problem.control_gram();

  LocalTrajectory<Scalar> traj{tau, Mat<Scalar>(n, m + 1), Mat<Scalar>(n, m + 1)};
  traj.adjoints.col(m) = lam_plus;
  for (long long k = m - 1; k >= 0; --k) {
    traj.adjoints.col(k) = lu.transpose().solve(Vec<Scalar>(traj.adjoints.col(k + 1)));
  }
  traj.states.col(0) = Y;
  for (long long k = 0; k < m; ++k) {
    const Vec<Scalar> r = traj.states.col(k) - (tau / problem.alpha) * (G * traj.adjoints.col(k));
    traj.states.col(k + 1) = lu.solve(r);
  }
  return traj;
}

/// Solves the local two-point boundary value problem with y(left) = Y and
/// lambda(right) = lam_plus on m steps of size tau. Nonlinear problems use a
/// damped Newton iteration on all interior unknowns; `initial` (if given)
/// seeds it, otherwise the boundary data are extended as constants.
template <typename Scalar>
Propagation<Scalar> solve_local_bvp(const ControlProblem<Scalar>& problem, long long m, Scalar tau,
                                    const Vec<Scalar>& Y, const Vec<Scalar>& lam_plus,
                                    const LocalSolveOptions<Scalar>& opts = {},
                                    const LocalTrajectory<Scalar>* initial = nullptr) {
  detail::check_inputs(problem, m, tau, Y, lam_plus);
  if (problem.is_linear()) {
    auto traj = linear_sweep(problem, m, tau, Y, lam_plus);
    Propagation<Scalar> out{traj.right_state(), traj.left_adjoint(), std::move(traj), 0};
    return out;
  }

  const int n = problem.dim;
  LocalTrajectory<Scalar> traj;
  if (initial && initial->steps() == m && initial->states.rows() == n) {
    traj = *initial;
    traj.step = tau;
  } else {
    traj = detail::sweep_initial_iterate(problem, m, tau, Y, lam_plus);
  }
  traj.states.col(0) = Y;
  traj.adjoints.col(m) = lam_plus;

  const Scalar scale = Scalar(1) + std::max(inf_norm(Y), inf_norm(lam_plus));
  const Scalar tol = opts.tol * scale;
  // A converged iterate must also have taken a small final step, so that the
  // quadratic convergence has brought the error down to rounding level.
  const Scalar step_tol = Scalar(1e-7) * scale;

  Mat<Scalar> res = discrete_residual(problem, traj);
  Scalar rnorm = inf_norm(res);
  Scalar last_step = std::numeric_limits<Scalar>::infinity();
  int it = 0;
  for (;; ++it) {
    if (!std::isfinite(static_cast<double>(rnorm))) {
      throw Error(ErrorCode::NewtonDivergence, "local Newton produced a non-finite residual");
    }
    if (rnorm <= tol && last_step <= step_tol) break;
    if (it >= opts.max_newton) {
      throw Error(ErrorCode::NewtonDivergence,
                  "local Newton did not converge in " + std::to_string(opts.max_newton) +
                      " iterations (residual " + std::to_string(static_cast<double>(rnorm)) + ")");
    }

    // Damped step along `delta`; true if the residual went down.
    auto try_direction = [&](const Mat<Scalar>& delta) {
      Scalar t = 1;
      for (int halving = 0; halving <= 10; ++halving, t /= 2) {
        LocalTrajectory<Scalar> trial = traj;
        trial.states.rightCols(m) += t * delta.topRows(n);
        trial.adjoints.leftCols(m) += t * delta.bottomRows(n);
        Mat<Scalar> trial_res = discrete_residual(problem, trial);
        const Scalar trial_norm = inf_norm(trial_res);
        if (trial_norm < rnorm || (trial_norm <= tol && std::isfinite(static_cast<double>(trial_norm)))) {
          traj = std::move(trial);
          res = std::move(trial_res);
          rnorm = trial_norm;
          last_step = t * inf_norm(delta);
          return true;
        }
      }
      return false;
    };
    auto direction = [&](bool hessian) {
      const detail::LocalJacobianBlocks<Scalar> blocks(problem, traj, hessian);
      Mat<Scalar> delta = solve_block_bvp<Scalar>(n, m, blocks, Mat<Scalar>(-res));
      // The forward elimination can lose accuracy when the second-order term
      // is large; a few refinement sweeps recover it.
      for (int pass = 0; pass < 3; ++pass) {
        const Mat<Scalar> lin_res = -res - detail::apply_block_operator(n, m, blocks, delta);
        if (inf_norm(lin_res) <= Scalar(1e-8) * rnorm) break;
        delta += solve_block_bvp<Scalar>(n, m, blocks, lin_res);
      }
      return delta;
    };

    // Far from the solution the second-order term can make the elimination
    // break down or give a poor direction; the Gauss-Newton system is then used.
    bool accepted = false;
    try {
      accepted = try_direction(direction(true));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::SingularStep) throw;
    }
    if (!accepted) accepted = try_direction(direction(false));
    if (!accepted) {
      if (rnorm <= tol) break;  // rounding floor reached
      throw Error(ErrorCode::NewtonDivergence,
                  "local Newton step could not reduce the residual (" + std::to_string(static_cast<double>(rnorm)) +
                      ")");
    }
  }

  Propagation<Scalar> out{traj.right_state(), traj.left_adjoint(), std::move(traj), it};
  return out;
}

/// Fine propagators P, Q on sub-interval `ell` (0-based, [T_ell, T_ell+1]).
template <typename Scalar>
Propagation<Scalar> fine_propagate(const ControlProblem<Scalar>& problem, const TimeGrid<Scalar>& grid, int ell,
                                   const Vec<Scalar>& Y, const Vec<Scalar>& lam_plus,
                                   const LocalSolveOptions<Scalar>& opts = {}) {
  try {
    return solve_local_bvp(problem, grid.fine_steps, grid.fine_step(), Y, lam_plus, opts);
  } catch (const Error& e) {
    throw Error(e.code(), e.message() + " on sub-interval " + std::to_string(ell), ell);
  }
}

template <typename Scalar>
struct CoarseLinearization {
  int subinterval_index = 0;
  LocalTrajectory<Scalar> trajectory;
};

template <typename Scalar>
CoarseLinearization<Scalar> coarse_linearize(const ControlProblem<Scalar>& problem, const TimeGrid<Scalar>& grid,
                                             int ell, const Vec<Scalar>& Y, const Vec<Scalar>& lam_plus,
                                             const LocalSolveOptions<Scalar>& opts = {}) {
  try {
    auto prop = solve_local_bvp(problem, grid.coarse_steps, grid.coarse_step(), Y, lam_plus, opts);
    return {ell, std::move(prop.trajectory)};
  } catch (const Error& e) {
    throw Error(e.code(), e.message() + " on sub-interval " + std::to_string(ell), ell);
  }
}

/// Action of the linearized local propagators:
///   (dP, dQ) = (P_y dY + P_lambda dLam, Q_y dY + Q_lambda dLam),
/// obtained by solving the discrete derivative boundary value problem about
/// the stored trajectory. `gauss_newton` drops the second-derivative term.
template <typename Scalar>
std::pair<Vec<Scalar>, Vec<Scalar>> derivative_action(const ControlProblem<Scalar>& problem,
                                                      const CoarseLinearization<Scalar>& lin, const Vec<Scalar>& dY,
                                                      const Vec<Scalar>& dLam, bool gauss_newton = false) {
  const int n = problem.dim;
  require(dY.size() == n && dLam.size() == n, ErrorCode::DimensionMismatch, "perturbation has wrong dimension");
  const auto [top, bottom] = solve_block_bvp_endpoints<Scalar>(
      n, lin.trajectory.steps(), detail::LocalJacobianBlocks<Scalar>(problem, lin.trajectory, !gauss_newton),
      Mat<Scalar>(dY), Mat<Scalar>(dLam));
  return {Vec<Scalar>(top.col(0)), Vec<Scalar>(bottom.col(0))};
}

/// Dense 2n x 2n sensitivity of one sub-interval: [[P_y, P_lambda], [Q_y, Q_lambda]].
template <typename Scalar>
struct SensitivityBlocks {
  Mat<Scalar> Py, Plam, Qy, Qlam;

  std::pair<Vec<Scalar>, Vec<Scalar>> apply(const Vec<Scalar>& dY, const Vec<Scalar>& dLam) const {
    return {Py * dY + Plam * dLam, Qy * dY + Qlam * dLam};
  }
};

/// All derivative actions of a linearization at once (2n right-hand sides in
/// a single sweep).
template <typename Scalar>
SensitivityBlocks<Scalar> sensitivity_blocks(const ControlProblem<Scalar>& problem,
                                             const LocalTrajectory<Scalar>& trajectory, bool gauss_newton = false) {
  const int n = problem.dim;
  Mat<Scalar> first = Mat<Scalar>::Zero(n, 2 * n), last = Mat<Scalar>::Zero(n, 2 * n);
  first.leftCols(n).setIdentity();
  last.rightCols(n).setIdentity();
  const auto [top, bottom] = solve_block_bvp_endpoints<Scalar>(
      n, trajectory.steps(), detail::LocalJacobianBlocks<Scalar>(problem, trajectory, !gauss_newton), first, last);
  return {top.leftCols(n), top.rightCols(n), bottom.leftCols(n), bottom.rightCols(n)};
}

/// Affine sub-interval map of a linear problem:
///   P = Phi Y - Gamma Lambda+,   Q = Psi Lambda+.
template <typename Scalar>
struct LinearFlow {
  Mat<Scalar> Phi, Gamma, Psi;

  std::pair<Vec<Scalar>, Vec<Scalar>> apply(const Vec<Scalar>& Y, const Vec<Scalar>& lam_plus) const {
    return {Phi * Y - Gamma * lam_plus, Psi * lam_plus};
  }

  SensitivityBlocks<Scalar> blocks() const {
    const auto n = Phi.rows();
    return {Phi, -Gamma, Mat<Scalar>::Zero(n, n), Psi};
  }

  /// `first` on the earlier interval, then `second`.
  static LinearFlow compose(const LinearFlow& first, const LinearFlow& second) {
    return {second.Phi * first.Phi, second.Phi * first.Gamma * second.Psi + second.Gamma, first.Psi * second.Psi};
  }
};

/// m implicit-Euler steps of size tau composed by repeated doubling.
template <typename Scalar>
LinearFlow<Scalar> linear_flow(const ControlProblem<Scalar>& problem, Scalar tau, long long m) {
  require(problem.is_linear(), ErrorCode::InvalidParameter, "linear flow needs a linear problem");
  require(m >= 1 && tau > 0, ErrorCode::InvalidParameter, "linear flow needs m >= 1 and tau > 0");
  const int n = problem.dim;
  const auto lu = detail::step_factor(problem, tau);
  const Mat<Scalar> S = lu.solve(Mat<Scalar>::Identity(n, n));
  LinearFlow<Scalar> base{S, (tau / problem.alpha) * S * problem.control_gram() * S.transpose(), S.transpose()};
  LinearFlow<Scalar> acc{Mat<Scalar>::Identity(n, n), Mat<Scalar>::Zero(n, n), Mat<Scalar>::Identity(n, n)};
  for (long long e = m; e > 0; e >>= 1) {
    if (e & 1) acc = LinearFlow<Scalar>::compose(acc, base);
    if (e > 1) base = LinearFlow<Scalar>::compose(base, base);
  }
  return acc;
}

}  // namespace paraopt
