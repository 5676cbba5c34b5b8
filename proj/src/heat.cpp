#include "paraopt/experiments.hpp"
#include "report.hpp"

#include <cmath>
#include <numbers>

namespace paraopt::experiments {

namespace {

long long exact_count(double x, const char* what) {
  const long long k = std::llround(x);
  require(k >= 1 && std::abs(x - static_cast<double>(k)) <= 1e-9 * x, ErrorCode::InvalidParameter,
          std::string(what) + " must be a positive integer");
  return k;
}

}  // namespace

ControlProblemd heat_problem(const HeatConfig& cfg) {
  auto p = make_heat_default<double>(cfg.n, cfg.alpha);
  if (cfg.full_control) p.control_operator.reset();
  return p;
}

TimeGridd heat_grid(const HeatConfig& cfg) {
  require(cfg.T > 0 && cfg.L >= 1 && cfg.fine_step > 0, ErrorCode::InvalidParameter, "invalid heat grid");
  require(cfg.ratio > 0 && cfg.ratio <= 1, ErrorCode::InvalidParameter, "ratio must lie in (0, 1]");
  const long long fine = exact_count(cfg.T / cfg.L / cfg.fine_step, "sub-interval length / fine step");
  const long long coarse = exact_count(static_cast<double>(fine) * cfg.ratio, "fine steps * ratio");
  return make_grid<double>(cfg.T, cfg.L, fine, coarse);
}

ExperimentResult heat_run(const HeatConfig& cfg) {
  const auto problem = heat_problem(cfg);
  const auto grid = heat_grid(cfg);

  ParaoptOptions<double> o;
  o.outer_tol = cfg.outer_tol;
  o.max_outer = cfg.max_outer;
  o.inner_solver = cfg.inner_solver;
  o.workers = cfg.workers;

  auto res = run_solver("heat", problem, grid, o, true);
  for (const auto& [k, v] : std::vector<std::pair<std::string, double>>{
           {"fine_step", grid.fine_step()},
           {"coarse_step", grid.coarse_step()},
           {"ratio", cfg.ratio},
           {"alpha", cfg.alpha},
           {"L", cfg.L},
           {"n", cfg.n},
           {"T", cfg.T},
           {"full_control", cfg.full_control ? 1.0 : 0.0}}) {
    res.set(k, v);
  }

  // Mode-wise prediction from the scalar analysis, exact only when B = I.
  CsvTable modes{{"k", "sigma", "rho", "rho_bound", "valid"}, {}};
  double max_rho = 0, max_bound = 0;
  const double h = 1.0 / cfg.n;
  for (int k = 0; k < cfg.n; ++k) {
    const double s = std::sin(std::numbers::pi * k / cfg.n);
    const double sigma = -4.0 / (h * h) * s * s;
    double rho = 0, bound = 0;
    if (sigma < 0) {
      const DahlquistSetup<double> setup{sigma, cfg.alpha, grid};
      rho = spectral_radius(charpoly_roots(setup));
      bound = spectral_summary(setup).rho_bound;
    }
    max_rho = std::max(max_rho, rho);
    max_bound = std::max(max_bound, bound);
    modes.add_row({static_cast<double>(k), sigma, rho, bound, cfg.full_control ? 1.0 : 0.0});
  }
  res.artifacts.emplace_back("modes", std::move(modes));
  res.set("max_mode_rho", max_rho);
  res.set("max_mode_rho_bound", max_bound);
  res.set("bound_valid", cfg.full_control ? 1.0 : 0.0);
  if (!cfg.full_control) res.notes.push_back("mode bounds assume B = I and are indicative only");

  const auto* hist = res.artifact("history");
  const auto errs = hist->column("err_inf");
  if (!errs.empty() && std::isfinite(errs.front())) {
    const double scale = res.parameter("reference_inf").value_or(1.0);
    const double contraction = late_contraction(errs, 1e-11 * std::max(1.0, scale));
    res.set("observed_contraction", contraction);
    if (cfg.full_control && std::isfinite(contraction)) {
      res.checks.push_back(zero_check("heat.contraction_le_bound_violations", contraction <= max_bound ? 0 : 1));
    }
  }
  return res;
}

}  // namespace paraopt::experiments
