#pragma once

#include "paraopt/gmres.hpp"
#include "paraopt/model.hpp"
#include "paraopt/parallel.hpp"
#include "paraopt/propagators.hpp"

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace paraopt {

enum class InnerSolver { krylov, assembled_direct };
enum class Variant { newton, gauss_newton };
enum class InitialGuess { paper_default, zeros, user_supplied };

template <typename Scalar>
struct ParaoptOptions {
  /// Stop when |F|_inf <= outer_tol * max(1, |X|_inf).
  Scalar outer_tol = Scalar(1e-13);
  int max_outer = 50;
  InnerSolver inner_solver = InnerSolver::krylov;
  Scalar inner_tol = Scalar(1e-10);
  int inner_max_iters = 0;  // 0: size of the system
  Variant variant = Variant::newton;
  InitialGuess initial_guess = InitialGuess::paper_default;
  std::optional<InterfaceVector<Scalar>> user_guess;
  int workers = 1;
  LocalSolveOptions<Scalar> local;
  /// Abort once the residual exceeds this multiple of the initial residual.
  Scalar divergence_factor = Scalar(1e8);
  /// Nonlinear problems up to this dimension get dense per-interval
  /// sensitivities; larger ones use matrix-free derivative actions.
  int materialize_max_dim = 8;
  /// Keep the fine trajectories of the final residual evaluation in the report.
  bool keep_trajectories = false;

  void validate() const {
    require(outer_tol > 0 && inner_tol > 0 && local.tol > 0, ErrorCode::InvalidParameter, "tolerances must be positive");
    require(max_outer >= 1 && local.max_newton >= 1 && inner_max_iters >= 0, ErrorCode::InvalidParameter,
            "iteration limits must be at least 1");
    require(initial_guess != InitialGuess::user_supplied || user_guess.has_value(), ErrorCode::InvalidParameter,
            "user_supplied initial guess requires user_guess");
  }
};

template <typename Scalar>
struct IterationRecord {
  int iter = 0;
  Scalar residual_inf = 0;
  std::optional<Scalar> err_inf;
  int inner_iters = 0;
  bool inner_converged = true;
  double wall_seconds = 0;
};

template <typename Scalar>
struct ConvergenceReport {
  std::vector<IterationRecord<Scalar>> history;  // entry 0 is the initial guess
  bool converged = false;
  bool diverged = false;
  int iterations = 0;
  InterfaceVector<Scalar> solution;
  std::string stop_reason;
  std::vector<LocalTrajectory<Scalar>> trajectories;
};

template <typename Scalar>
InterfaceVector<Scalar> default_initial_guess(const ControlProblem<Scalar>& problem, const TimeGrid<Scalar>& grid,
                                              InitialGuess kind = InitialGuess::paper_default) {
  const int n = problem.dim, L = grid.num_subintervals;
  auto X = InterfaceVector<Scalar>::zeros(n, L);
  if (kind == InitialGuess::zeros) return X;
  for (int l = 0; l <= L; ++l) {
    const Scalar s = Scalar(l) / Scalar(L);
    X.states[l] = (Scalar(1) - s) * problem.y_init + s * problem.y_target;
  }
  X.states[0] = problem.y_init;
  X.states[L] = problem.y_target;
  for (auto& lam : X.adjoints) lam.setOnes();
  return X;
}

template <typename Scalar>
struct ResidualEvaluation {
  Vec<Scalar> F;
  std::vector<LocalTrajectory<Scalar>> trajectories;  // empty on the linear flow path
  std::vector<int> newton_iterations;
};

namespace detail {

template <typename Scalar>
void check_problem_grid(const ControlProblem<Scalar>& problem, const TimeGrid<Scalar>& grid) {
  require(problem.dim >= 1, ErrorCode::InvalidParameter, "problem dimension must be positive");
  require(grid.num_subintervals >= 1 && grid.coarse_steps >= 1 && grid.fine_steps >= grid.coarse_steps,
          ErrorCode::InvalidParameter, "invalid time grid");
}

template <typename Scalar>
Vec<Scalar> assemble_residual(const ControlProblem<Scalar>& problem, const InterfaceVector<Scalar>& X,
                              const std::vector<Vec<Scalar>>& P, const std::vector<Vec<Scalar>>& Q) {
  const int n = problem.dim, L = X.num_subintervals();
  Vec<Scalar> F(n * (2 * L + 1));
  F.segment(0, n) = X.states[0] - problem.y_init;
  for (int l = 1; l <= L; ++l) F.segment(l * n, n) = X.states[l] - P[l - 1];
  for (int l = 1; l < L; ++l) F.segment((L + l) * n, n) = X.adjoint(l) - Q[l];
  F.segment(2 * L * n, n) = X.adjoint(L) - X.states[L] + problem.y_target;
  return F;
}

}  // namespace detail

/// Interface residual F(X). Fine propagations run concurrently; the result
/// is assembled in index order. `warm` optionally seeds each local Newton solve.
template <typename Scalar>
ResidualEvaluation<Scalar> residual(const ControlProblem<Scalar>& problem, const TimeGrid<Scalar>& grid,
                                    const InterfaceVector<Scalar>& X, const LocalSolveOptions<Scalar>& opts = {},
                                    int workers = 1, const std::vector<LocalTrajectory<Scalar>>* warm = nullptr) {
  detail::check_problem_grid(problem, grid);
  const int n = problem.dim, L = grid.num_subintervals;
  check_consistent(X, n, L);

  std::vector<Vec<Scalar>> P(L), Q(L);
  ResidualEvaluation<Scalar> out;
  out.trajectories.resize(L);
  out.newton_iterations.assign(L, 0);
  parallel_for(static_cast<std::size_t>(L), workers, [&](std::size_t i) {
    const int l = static_cast<int>(i);
    const LocalTrajectory<Scalar>* init = (warm && warm->size() == static_cast<std::size_t>(L)) ? &(*warm)[i] : nullptr;
    try {
      auto prop =
          solve_local_bvp(problem, grid.fine_steps, grid.fine_step(), X.states[l], X.adjoint(l + 1), opts, init);
      P[i] = std::move(prop.P);
      Q[i] = std::move(prop.Q);
      out.trajectories[i] = std::move(prop.trajectory);
      out.newton_iterations[i] = prop.newton_iterations;
    } catch (const Error& e) {
      throw Error(e.code(), e.message() + " on sub-interval " + std::to_string(l), l);
    }
  });
  out.F = detail::assemble_residual(problem, X, P, Q);
  return out;
}

/// Residual of a linear problem through the sub-interval flow.
template <typename Scalar>
Vec<Scalar> residual(const ControlProblem<Scalar>& problem, const LinearFlow<Scalar>& fine_flow,
                     const InterfaceVector<Scalar>& X) {
  const int L = X.num_subintervals();
  std::vector<Vec<Scalar>> P(L), Q(L);
  for (int l = 0; l < L; ++l) std::tie(P[l], Q[l]) = fine_flow.apply(X.states[l], X.adjoint(l + 1));
  return detail::assemble_residual(problem, X, P, Q);
}

/// J^G for the current coarse linearizations. Either dense per-interval
/// sensitivity blocks or matrix-free derivative actions.
template <typename Scalar>
class ApproximateJacobian {
 public:
  ApproximateJacobian(const ControlProblem<Scalar>& problem, int L, std::vector<SensitivityBlocks<Scalar>> blocks,
                      int workers = 1)
      : problem_(&problem), n_(problem.dim), L_(L), blocks_(std::move(blocks)), workers_(workers) {
    require(static_cast<int>(blocks_.size()) == L, ErrorCode::DimensionMismatch, "need one block set per sub-interval");
  }

  ApproximateJacobian(const ControlProblem<Scalar>& problem, std::vector<CoarseLinearization<Scalar>> lins,
                      Variant variant, int workers = 1)
      : problem_(&problem),
        n_(problem.dim),
        L_(static_cast<int>(lins.size())),
        lins_(std::move(lins)),
        gauss_newton_(variant == Variant::gauss_newton),
        workers_(workers) {
    require(L_ >= 1, ErrorCode::DimensionMismatch, "need at least one linearization");
  }

  int size() const { return n_ * (2 * L_ + 1); }
  int num_subintervals() const { return L_; }

  Vec<Scalar> apply(const Vec<Scalar>& dX) const {
    require(dX.size() == size(), ErrorCode::DimensionMismatch, "Jacobian argument has wrong length");
    const int n = n_, L = L_;
    auto dY = [&](int l) { return dX.segment(l * n, n); };
    auto dLam = [&](int l) { return dX.segment((L + l) * n, n); };

    std::vector<Vec<Scalar>> dP(L), dQ(L);
    parallel_for(static_cast<std::size_t>(L), blocks_.empty() ? workers_ : 1, [&](std::size_t i) {
      const int l = static_cast<int>(i);
      const Vec<Scalar> y = dY(l), lam = dLam(l + 1);
      if (!blocks_.empty()) {
        std::tie(dP[i], dQ[i]) = blocks_[i].apply(y, lam);
      } else {
        std::tie(dP[i], dQ[i]) = derivative_action(*problem_, lins_[i], y, lam, gauss_newton_);
      }
    });

    Vec<Scalar> out(size());
    out.segment(0, n) = dY(0);
    for (int l = 1; l <= L; ++l) out.segment(l * n, n) = dY(l) - dP[l - 1];
    for (int l = 1; l < L; ++l) out.segment((L + l) * n, n) = dLam(l) - dQ[l];
    out.segment(2 * L * n, n) = dLam(L) - dY(L);
    return out;
  }

  /// Dense matrix, one column per unit vector.
  Mat<Scalar> assemble() const {
    const int N = size();
    Mat<Scalar> J(N, N);
    Vec<Scalar> e = Vec<Scalar>::Zero(N);
    for (int j = 0; j < N; ++j) {
      e(j) = 1;
      J.col(j) = apply(e);
      e(j) = 0;
    }
    return J;
  }

 private:
  const ControlProblem<Scalar>* problem_;
  int n_;
  int L_;
  std::vector<SensitivityBlocks<Scalar>> blocks_;
  std::vector<CoarseLinearization<Scalar>> lins_;
  bool gauss_newton_ = false;
  int workers_ = 1;
};

template <typename Scalar>
Vec<Scalar> apply_approx_jacobian(const ControlProblem<Scalar>& problem,
                                  const std::vector<CoarseLinearization<Scalar>>& lins, const Vec<Scalar>& dX,
                                  Variant variant = Variant::newton, int workers = 1) {
  return ApproximateJacobian<Scalar>(problem, lins, variant, workers).apply(dX);
}

struct InnerStats {
  int iterations = 0;
  double relative_residual = 0;
  bool converged = true;
};

/// Solves J^G dX = rhs. A Krylov solve that hits its iteration limit returns
/// its best iterate with stats.converged = false.
template <typename Scalar>
std::pair<Vec<Scalar>, InnerStats> solve_jacobian_system(const ApproximateJacobian<Scalar>& J, const Vec<Scalar>& rhs,
                                                         const ParaoptOptions<Scalar>& options) {
  require(rhs.size() == J.size(), ErrorCode::DimensionMismatch, "rhs has wrong length");
  require(rhs.allFinite(), ErrorCode::InvalidParameter, "rhs must be finite");
  InnerStats stats;
  if (options.inner_solver == InnerSolver::assembled_direct) {
    const Mat<Scalar> A = J.assemble();
    Eigen::PartialPivLU<Mat<Scalar>> lu(A);
    if (!(lu.rcond() > std::numeric_limits<Scalar>::epsilon())) {
      throw Error(ErrorCode::SingularMatrix, "approximate Jacobian is singular to working precision");
    }
    Vec<Scalar> dX = lu.solve(rhs);
    stats.iterations = 1;
    const Scalar bn = rhs.norm();
    stats.relative_residual = bn > 0 ? static_cast<double>((A * dX - rhs).norm() / bn) : 0.0;
    return {std::move(dX), stats};
  }
  const int max_iters = options.inner_max_iters > 0 ? options.inner_max_iters : J.size();
  auto res = gmres<Scalar>([&](const Vec<Scalar>& v) { return J.apply(v); }, rhs, options.inner_tol, max_iters);
  stats.iterations = res.iterations;
  stats.relative_residual = static_cast<double>(res.relative_residual);
  stats.converged = res.converged;
  return {std::move(res.x), stats};
}

template <typename Scalar>
Scalar interface_error(const InterfaceVector<Scalar>& X, const InterfaceVector<Scalar>& ref) {
  return inf_norm(Vec<Scalar>(X.stacked() - ref.stacked()));
}

/// ParaOpt: X <- X + dX with J^G(X) dX = -F(X), coarse linearizations
/// refreshed at every outer iteration.
template <typename Scalar>
ConvergenceReport<Scalar> paraopt_solve(const ControlProblem<Scalar>& problem, const TimeGrid<Scalar>& grid,
                                        const ParaoptOptions<Scalar>& options,
                                        const std::optional<InterfaceVector<Scalar>>& reference = std::nullopt) {
  detail::check_problem_grid(problem, grid);
  options.validate();
  const int n = problem.dim, L = grid.num_subintervals;
  if (reference) check_consistent(*reference, n, L);

  ConvergenceReport<Scalar> report;
  InterfaceVector<Scalar> X = options.initial_guess == InitialGuess::user_supplied
                                  ? *options.user_guess
                                  : default_initial_guess(problem, grid, options.initial_guess);
  check_consistent(X, n, L);

  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  const bool linear = problem.is_linear();
  const bool reuse_fine = grid.coarse_steps == grid.fine_steps;

  // Linear problems: all sub-intervals share one affine flow per grid.
  std::optional<LinearFlow<Scalar>> fine_flow, coarse_flow;
  if (linear) {
    fine_flow = linear_flow(problem, grid.fine_step(), grid.fine_steps);
    coarse_flow = reuse_fine ? fine_flow : linear_flow(problem, grid.coarse_step(), grid.coarse_steps);
  }

  std::vector<LocalTrajectory<Scalar>> fine_traj, coarse_traj;
  auto evaluate = [&](const InterfaceVector<Scalar>& x) -> Vec<Scalar> {
    if (linear) {
      if (options.keep_trajectories) {
        auto ev = residual(problem, grid, x, options.local, options.workers);
        fine_traj = std::move(ev.trajectories);
      }
      return residual(problem, *fine_flow, x);
    }
    auto ev = residual(problem, grid, x, options.local, options.workers, fine_traj.empty() ? nullptr : &fine_traj);
    fine_traj = std::move(ev.trajectories);
    return std::move(ev.F);
  };

  auto record = [&](int iter, Scalar res, int inner_iters, bool inner_ok) {
    IterationRecord<Scalar> rec;
    rec.iter = iter;
    rec.residual_inf = res;
    if (reference) rec.err_inf = interface_error(X, *reference);
    rec.inner_iters = inner_iters;
    rec.inner_converged = inner_ok;
    rec.wall_seconds = elapsed();
    report.history.push_back(rec);
  };

  Vec<Scalar> F;
  try {
    F = evaluate(X);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NewtonDivergence && e.code() != ErrorCode::SingularStep) throw;
    report.solution = X;
    report.stop_reason = e.what();
    return report;
  }
  Scalar res = inf_norm(F);
  const Scalar res0 = res;
  record(0, res, 0, true);

  int k = 0;
  for (;;) {
    if (std::isfinite(static_cast<double>(res)) && res <= options.outer_tol * std::max(Scalar(1), inf_norm(X.stacked()))) {
      report.converged = true;
      report.stop_reason = "converged";
      break;
    }
    if (!std::isfinite(static_cast<double>(res)) || res > options.divergence_factor * res0) {
      report.diverged = true;
      report.stop_reason = "diverged: residual grew beyond the divergence guard";
      break;
    }
    if (k >= options.max_outer) {
      report.stop_reason = "maximum number of outer iterations reached";
      break;
    }

    try {
      std::optional<ApproximateJacobian<Scalar>> J;
      if (linear) {
        J.emplace(problem, L, std::vector<SensitivityBlocks<Scalar>>(L, coarse_flow->blocks()), options.workers);
      } else {
        std::vector<LocalTrajectory<Scalar>> lin_traj(L);
        parallel_for(static_cast<std::size_t>(L), options.workers, [&](std::size_t i) {
          const int l = static_cast<int>(i);
          if (reuse_fine) {
            lin_traj[i] = fine_traj[i];
            return;
          }
          const LocalTrajectory<Scalar>* init = coarse_traj.size() == static_cast<std::size_t>(L) ? &coarse_traj[i] : nullptr;
          try {
            lin_traj[i] = solve_local_bvp(problem, grid.coarse_steps, grid.coarse_step(), X.states[l], X.adjoint(l + 1),
                                          options.local, init)
                              .trajectory;
          } catch (const Error& e) {
            throw Error(e.code(), e.message() + " on sub-interval " + std::to_string(l), l);
          }
        });
        if (n <= options.materialize_max_dim) {
          std::vector<SensitivityBlocks<Scalar>> blocks(L);
          const bool gn = options.variant == Variant::gauss_newton;
          parallel_for(static_cast<std::size_t>(L), options.workers,
                       [&](std::size_t i) { blocks[i] = sensitivity_blocks(problem, lin_traj[i], gn); });
          J.emplace(problem, L, std::move(blocks), options.workers);
        } else {
          std::vector<CoarseLinearization<Scalar>> lins(L);
          for (int l = 0; l < L; ++l) lins[l] = {l, lin_traj[l]};
          J.emplace(problem, std::move(lins), options.variant, options.workers);
        }
        if (!reuse_fine) coarse_traj = std::move(lin_traj);
      }

      auto [dX, stats] = solve_jacobian_system(*J, Vec<Scalar>(-F), options);
      X = InterfaceVector<Scalar>::unstack(X.stacked() + dX, n, L);
      ++k;
      F = evaluate(X);
      res = inf_norm(F);
      record(k, res, stats.iterations, stats.converged);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NewtonDivergence && e.code() != ErrorCode::SingularStep &&
          e.code() != ErrorCode::SingularMatrix) {
        throw;
      }
      report.diverged = true;
      report.stop_reason = e.what();
      break;
    }
  }

  report.iterations = k;
  report.solution = std::move(X);
  if (options.keep_trajectories) report.trajectories = std::move(fine_traj);
  return report;
}

/// Sequential fine solution (one sub-interval, exact Newton) restricted to
/// the interfaces of `grid`. Throws no-convergence when it fails.
template <typename Scalar>
InterfaceVector<Scalar> reference_solve(const ControlProblem<Scalar>& problem, const TimeGrid<Scalar>& grid,
                                        ParaoptOptions<Scalar> options = {}) {
  detail::check_problem_grid(problem, grid);
  const int L = grid.num_subintervals;
  const long long M = grid.total_fine_steps();
  const TimeGrid<Scalar> single{grid.horizon, 1, M, M};
  options.initial_guess =
      options.initial_guess == InitialGuess::user_supplied ? InitialGuess::paper_default : options.initial_guess;
  options.user_guess.reset();
  options.inner_solver = InnerSolver::assembled_direct;
  options.keep_trajectories = !problem.is_linear();

  auto rep = paraopt_solve(problem, single, options);
  if (!rep.converged) {
    throw Error(ErrorCode::NoConvergence, "reference solve did not converge (" + rep.stop_reason + ")");
  }

  auto X = InterfaceVector<Scalar>::zeros(problem.dim, L);
  if (problem.is_linear()) {
    const auto flow = linear_flow(problem, grid.fine_step(), grid.fine_steps);
    X.adjoint(L) = rep.solution.adjoint(1);
    for (int l = L - 1; l >= 1; --l) X.adjoint(l) = flow.Psi * X.adjoint(l + 1);
    X.states[0] = rep.solution.states[0];
    for (int l = 1; l <= L; ++l) X.states[l] = flow.Phi * X.states[l - 1] - flow.Gamma * X.adjoint(l);
  } else {
    const auto& traj = rep.trajectories.at(0);
    for (int l = 0; l <= L; ++l) X.states[l] = traj.states.col(static_cast<Eigen::Index>(l) * grid.fine_steps);
    for (int l = 1; l <= L; ++l) X.adjoint(l) = traj.adjoints.col(static_cast<Eigen::Index>(l) * grid.fine_steps);
  }
  return X;
}

}  // namespace paraopt
