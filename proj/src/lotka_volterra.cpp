#include "paraopt/experiments.hpp"
#include "report.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cmath>
#include <limits>

namespace paraopt::experiments {

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

ParaoptOptions<double> lv_options(const LotkaVolterraConfig& cfg) {
  ParaoptOptions<double> o;
  o.outer_tol = cfg.outer_tol;
  o.max_outer = cfg.max_outer;
  o.inner_solver = cfg.inner_solver;
  o.variant = cfg.variant;
  o.workers = cfg.workers;
  return o;
}

// Concatenates per-interval trajectories into one fine trajectory.
FineReference concatenate(const std::vector<LocalTrajectory<double>>& trajs) {
  FineReference ref;
  for (const auto& t : trajs) ref.total_steps += t.states.cols() - 1;
  const auto n = trajs.front().states.rows();
  ref.states.resize(n, ref.total_steps + 1);
  ref.adjoints.resize(n, ref.total_steps + 1);
  Eigen::Index offset = 0;
  for (const auto& t : trajs) {
    const auto m = t.states.cols() - 1;
    ref.states.middleCols(offset, m) = t.states.leftCols(m);
    ref.adjoints.middleCols(offset, m) = t.adjoints.leftCols(m);
    offset += m;
  }
  ref.states.col(offset) = trajs.back().states.rightCols(1);
  ref.adjoints.col(offset) = trajs.back().adjoints.rightCols(1);
  return ref;
}

}  // namespace

ControlProblemd lotka_volterra_problem(const LotkaVolterraConfig& cfg) {
  LotkaVolterraParams<double> prm;
  prm.alpha = cfg.alpha;
  return make_lotka_volterra<double>(prm);
}

TimeGridd lotka_volterra_grid(const LotkaVolterraConfig& cfg) {
  require(cfg.N0 >= 1 && cfg.L >= 1, ErrorCode::InvalidParameter, "N0 and L must be positive");
  require(cfg.N0 % cfg.L == 0, ErrorCode::InvalidParameter, "N0 must be divisible by L");
  require(cfg.ratio > 0 && cfg.ratio <= 1, ErrorCode::InvalidParameter, "ratio must lie in (0, 1]");
  const long long N = cfg.N0 / cfg.L;
  const double c = static_cast<double>(N) * cfg.ratio;
  const long long coarse = std::llround(c);
  require(coarse >= 1 && std::abs(c - static_cast<double>(coarse)) <= 1e-9 * c, ErrorCode::InvalidParameter,
          "N0/L * ratio must be a positive integer");
  return make_grid<double>(cfg.T, cfg.L, N, coarse);
}

FineReference lotka_volterra_reference(const LotkaVolterraConfig& cfg) {
  const auto start = std::chrono::steady_clock::now();
  const auto problem = lotka_volterra_problem(cfg);
  const auto grid = lotka_volterra_grid(cfg);
  ParaoptOptions<double> o = lv_options(cfg);
  o.variant = Variant::newton;
  o.inner_solver = InnerSolver::assembled_direct;
  o.keep_trajectories = true;

  std::string failure;
  const long long M = grid.total_fine_steps();
  const TimeGridd single{grid.horizon, 1, M, M};
  auto rep = paraopt_solve(problem, single, o);
  if (rep.converged) {
    auto ref = concatenate(rep.trajectories);
    ref.method = "single interval, exact Newton";
    ref.seconds = seconds_since(start);
    return ref;
  }
  failure = rep.stop_reason;

  if (cfg.L > 1) {
    const TimeGridd exact{grid.horizon, grid.num_subintervals, grid.fine_steps, grid.fine_steps};
    auto rep_l = paraopt_solve(problem, exact, o);
    if (rep_l.converged) {
      auto ref = concatenate(rep_l.trajectories);
      ref.method = "exact Newton on " + std::to_string(cfg.L) + " sub-intervals (single interval failed: " +
                   failure + ")";
      ref.seconds = seconds_since(start);
      return ref;
    }
    failure += "; " + rep_l.stop_reason;
  }
  throw Error(ErrorCode::NoConvergence, "reference solve did not converge (" + failure + ")");
}

InterfaceVector<double> restrict_reference(const FineReference& ref, int L) {
  require(L >= 1 && ref.total_steps % L == 0, ErrorCode::InvalidParameter,
          "reference steps must be divisible by the number of sub-intervals");
  const auto N = ref.total_steps / L;
  auto X = InterfaceVector<double>::zeros(static_cast<int>(ref.states.rows()), L);
  for (int l = 0; l <= L; ++l) X.states[l] = ref.states.col(l * N);
  for (int l = 1; l <= L; ++l) X.adjoint(l) = ref.adjoints.col(l * N);
  return X;
}

ExperimentResult lotka_volterra_run(const LotkaVolterraConfig& cfg, const FineReference* reference) {
  const auto problem = lotka_volterra_problem(cfg);
  const auto grid = lotka_volterra_grid(cfg);

  ExperimentResult res;
  res.name = "lv";
  res.parameters = {{"T", cfg.T},
                    {"alpha", cfg.alpha},
                    {"L", cfg.L},
                    {"ratio", cfg.ratio},
                    {"N0", static_cast<double>(cfg.N0)},
                    {"fine_per_sub", static_cast<double>(grid.fine_steps)},
                    {"coarse_per_sub", static_cast<double>(grid.coarse_steps)},
                    {"gauss_newton", cfg.variant == Variant::gauss_newton ? 1.0 : 0.0}};

  std::optional<FineReference> own;
  if (!reference && !(cfg.L == 1 && grid.coarse_steps == grid.fine_steps)) {
    try {
      own = lotka_volterra_reference(cfg);
      reference = &*own;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::NoConvergence) throw;
      res.notes.push_back(std::string("no reference: ") + e.what());
    }
  }
  std::optional<InterfaceVector<double>> X_ref;
  if (reference) {
    require(reference->total_steps == grid.total_fine_steps(), ErrorCode::DimensionMismatch,
            "reference was computed on a different fine grid");
    X_ref = restrict_reference(*reference, cfg.L);
    res.set("reference_seconds", reference->seconds);
    res.notes.push_back("reference: " + reference->method);
  }

  const auto rep = paraopt_solve(problem, grid, lv_options(cfg), X_ref);
  detail::record_report(res, rep);

  if (X_ref) {
    std::vector<double> errs;
    for (const auto& h : rep.history) errs.push_back(*h.err_inf);
    const double floor = 100 * cfg.outer_tol * std::max(1.0, inf_norm(X_ref->stacked()));
    res.set("fit_exponent", convergence_exponent(errs, floor));
    res.set("late_ratio", late_contraction(errs, floor));
  }
  return res;
}

double discrete_cost(const ControlProblemd& problem, const TimeGridd& grid, const ConvergenceReport<double>& rep) {
  require(static_cast<int>(rep.trajectories.size()) == grid.num_subintervals, ErrorCode::InvalidParameter,
          "cost needs the fine trajectories of the solution");
  const double tau = grid.fine_step();
  double control = 0;
  for (const auto& t : rep.trajectories) {
    const auto m = t.adjoints.cols() - 1;
    if (problem.control_operator) {
      control += (problem.control_operator->transpose() * t.adjoints.leftCols(m)).squaredNorm();
    } else {
      control += t.adjoints.leftCols(m).squaredNorm();
    }
  }
  const Vec<double> yM = rep.trajectories.back().states.rightCols(1);
  return 0.5 * (yM - problem.y_target).squaredNorm() + tau / (2 * problem.alpha) * control;
}

ExperimentResult lotka_volterra_minima(const LotkaVolterraConfig& cfg) {
  LotkaVolterraConfig c = cfg;
  c.ratio = 1;
  const auto problem = lotka_volterra_problem(c);
  const auto grid = lotka_volterra_grid(c);

  ExperimentResult res;
  res.name = "lv_minima";
  res.parameters = {{"T", c.T}, {"alpha", c.alpha}, {"L", c.L}, {"N0", static_cast<double>(c.N0)}};
  CsvTable traj{{"variant", "t", "y1", "y2", "eig1_re", "eig1_im", "eig2_re", "eig2_im"}, {}};

  const std::pair<Variant, std::string> runs[] = {{Variant::newton, "newton"},
                                                  {Variant::gauss_newton, "gauss_newton"}};
  std::vector<double> costs;
  for (const auto& [variant, label] : runs) {
    c.variant = variant;
    ParaoptOptions<double> o = lv_options(c);
    o.keep_trajectories = true;
    const auto rep = paraopt_solve(problem, grid, o);
    detail::record_report(res, rep, label + "_");
    if (!rep.converged) {
      res.solver_converged = false;
      costs.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const double J = discrete_cost(problem, grid, rep);
    costs.push_back(J);
    res.set("J_" + label, J);

    const long long total = grid.total_fine_steps();
    const long long stride = std::max(1LL, total / 1000);
    for (long long k = 0; k <= total; k += stride) {
      const auto l = std::min<long long>(k / grid.fine_steps, grid.num_subintervals - 1);
      const Vec<double> y = rep.trajectories[l].states.col(k - l * grid.fine_steps);
      const Eigen::EigenSolver<Mat<double>> es(problem.jacobian(y), false);
      const auto ev = es.eigenvalues();
      traj.add_row({variant == Variant::newton ? 0.0 : 1.0, static_cast<double>(k) * grid.fine_step(), y(0), y(1),
                    ev(0).real(), ev(0).imag(), ev(1).real(), ev(1).imag()});
    }
  }
  res.artifacts.emplace_back("trajectories", std::move(traj));

  // The published cost values equal twice the functional as defined.
  res.notes.push_back("published cost values correspond to 2 J; checks compare 2 J at 10% tolerance");
  res.checks.push_back(make_check("minima.newton_2J", 2 * costs[0], 1064.84, 0.1 * 1064.84));
  res.checks.push_back(make_check("minima.gauss_newton_2J", 2 * costs[1], 15.74, 0.1 * 15.74));
  const bool distinct = std::isfinite(costs[0]) && std::isfinite(costs[1]) &&
                        std::abs(costs[0] - costs[1]) > 0.1 * std::max(costs[0], costs[1]);
  res.checks.push_back(zero_check("minima.distinct_violations", distinct ? 0 : 1));
  return res;
}

}  // namespace paraopt::experiments
