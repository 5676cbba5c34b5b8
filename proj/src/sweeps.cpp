#include "paraopt/experiments.hpp"

#include <chrono>
#include <cmath>
#include <sstream>

namespace paraopt::experiments {

namespace {

std::string sigma_label(double sigma) {
  std::ostringstream s;
  s << sigma;
  return s.str();
}

TimeGridd rounded_grid(double T, int L, double coarse_step, double fine_step) {
  const double DT = T / L;
  const long long coarse = std::max(1LL, std::llround(DT / coarse_step));
  const long long fine = std::max(coarse, std::llround(DT / fine_step));
  return make_grid<double>(T, L, fine, coarse);
}

}  // namespace

const std::vector<Table31Row>& table31_published() {
  static const std::vector<Table31Row> rows = {
      {-1.0 / 8, {0.6604, 5e-5}, {2.2462, 5e-5}, {0.8268, 5e-5}, {0.4280, 5e-5}, {2.00e-3, 5e-6}, {-6.08e-3, 5e-6}},
      {-1.0 / 4, {0.4376, 5e-5}, {1.6037, 5e-5}, {0.6960, 5e-5}, {0.5300, 5e-5}, {3.67e-3, 5e-6}, {-9.34e-3, 5e-6}},
      {-1.0 / 2, {0.1941, 5e-5}, {0.9466, 5e-5}, {0.4713, 5e-5}, {0.5539, 5e-5}, {5.35e-3, 5e-6}, {-1.24e-2, 5e-5}},
      {-1.0, {0.0397, 5e-5}, {0.4831, 5e-5}, {0.1588, 5e-5}, {0.2930, 5e-5}, {3.97e-3, 5e-6}, {-1.36e-2, 5e-5}},
      {-2.0, {0.0019, 5e-5}, {0.2344, 5e-5}, {0.0116, 5e-5}, {0.0417, 5e-5}, {6.36e-4, 5e-7}, {-1.30e-2, 5e-5}},
      {-16.0, {1.72e-16, 5e-19}, {0.0204, 5e-5}, {5e-16, 5e-17}, {1.61e-14, 5e-17}, {1.72e-16, 5e-19}, {-1.05e-2, 5e-5}},
  };
  return rows;
}

TimeGridd table31_grid() { return make_grid<double>(100.0, 30, 5000, 50); }

ExperimentResult table31() {
  const auto start = std::chrono::steady_clock::now();
  ExperimentResult res;
  res.name = "table31";
  res.parameters = {{"T", 100}, {"L", 30}, {"coarse_per_sub", 50}, {"fine_per_coarse", 100}, {"alpha", 1}};
  CsvTable table{{"sigma", "beta", "gamma", "C", "L0", "disc_radius", "mu_star_bound"}, {}};
  const auto grid = table31_grid();

  for (const auto& row : table31_published()) {
    const auto s = spectral_summary(DahlquistSetup<double>{row.sigma, 1.0, grid});
    table.add_row({row.sigma, s.beta_coarse, s.gamma_coarse, s.C, s.L0, s.disc_radius, s.mu_star_bound});
    const std::pair<const char*, std::pair<double, PrintedValue>> cols[] = {
        {"beta", {s.beta_coarse, row.beta}}, {"gamma", {s.gamma_coarse, row.gamma}},
        {"C", {s.C, row.C}},                 {"L0", {s.L0, row.L0}},
        {"disc_radius", {s.disc_radius, row.radius}}, {"mu_star_bound", {s.mu_star_bound, row.mu_star}},
    };
    for (const auto& [col, vp] : cols) {
      const auto& [value, printed] = vp;
      const double tol = std::max(1e-3 * std::abs(printed.value), printed.half_unit);
      res.checks.push_back(
          make_check("table31.sigma=" + sigma_label(row.sigma) + "." + col, value, printed.value, tol));
    }
  }
  res.artifacts.emplace_back("table", std::move(table));
  res.set("seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  return res;
}

ExperimentResult analyze(const DahlquistSetup<double>& setup) {
  ExperimentResult res;
  res.name = "analyze";
  const auto& g = setup.grid;
  res.parameters = {{"sigma", setup.sigma},
                    {"alpha", setup.alpha},
                    {"T", g.horizon},
                    {"L", g.num_subintervals},
                    {"coarse_per_sub", static_cast<double>(g.coarse_steps)},
                    {"fine_per_sub", static_cast<double>(g.fine_steps)}};

  const auto s = spectral_summary(setup);
  const auto roots = charpoly_roots_detailed(setup);
  double rho = 0;
  CsvTable spectrum{{"re", "im", "abs", "outside_disc"}, {}};
  for (const auto& r : roots) {
    rho = std::max(rho, std::abs(r.mu));
    spectrum.add_row({r.mu.real(), r.mu.imag(), std::abs(r.mu), r.outside_disc ? 1.0 : 0.0});
  }
  // the iteration matrix has two further zero eigenvalues
  for (int i = 0; i < 2; ++i) spectrum.add_row({0, 0, 0, 0});

  CsvTable summary{{"sigma", "beta", "gamma", "C", "L0", "disc_center", "disc_radius", "exists_isolated",
                    "mu_star_bound", "rho", "rho_bound", "global_bound"},
                   {}};
  summary.add_row({setup.sigma, s.beta_coarse, s.gamma_coarse, s.C, s.L0, s.disc_center, s.disc_radius,
                   s.exists_isolated ? 1.0 : 0.0, s.mu_star_bound, rho, s.rho_bound, s.global_bound});
  res.set("rho", rho);
  res.set("rho_bound", s.rho_bound);
  res.artifacts.emplace_back("summary", std::move(summary));
  res.artifacts.emplace_back("spectrum", std::move(spectrum));
  return res;
}

std::optional<SweepMode> parse_sweep_mode(const std::string& s) {
  if (s == "vary_fine" || s == "a") return SweepMode::vary_fine;
  if (s == "vary_coarse" || s == "b") return SweepMode::vary_coarse;
  if (s == "fixed_ratio" || s == "c") return SweepMode::fixed_ratio;
  if (s == "scal_fixed_T" || s == "d") return SweepMode::scal_fixed_T;
  if (s == "scal_fixed_DT" || s == "e") return SweepMode::scal_fixed_DT;
  return std::nullopt;
}

std::string to_string(SweepMode mode) {
  switch (mode) {
    case SweepMode::vary_fine: return "vary_fine";
    case SweepMode::vary_coarse: return "vary_coarse";
    case SweepMode::fixed_ratio: return "fixed_ratio";
    case SweepMode::scal_fixed_T: return "scal_fixed_T";
    case SweepMode::scal_fixed_DT: return "scal_fixed_DT";
  }
  return "unknown";
}

ExperimentResult scalar_sweeps(SweepMode mode, const SweepConfig& cfg) {
  detail::check_alpha(cfg.alpha);
  require(cfg.sigma < 0, ErrorCode::UnsupportedRegime, "sweeps need sigma < 0");
  require(cfg.T > 0 && cfg.L >= 1 && cfg.max_L >= 1 && cfg.fine_per_coarse >= 1, ErrorCode::InvalidParameter,
          "invalid sweep configuration");

  ExperimentResult res;
  res.name = "sweep_" + to_string(mode);
  res.parameters = {{"sigma", cfg.sigma}, {"alpha", cfg.alpha}};
  CsvTable table{{"k", "L", "nominal_coarse_step", "nominal_fine_step", "coarse_step", "fine_step", "rho",
                  "rho_bound", "disc_reach"},
                 {}};
  long long violations = 0;

  auto emit = [&](double k, const TimeGridd& grid, double nominal_coarse, double nominal_fine) {
    const DahlquistSetup<double> setup{cfg.sigma, cfg.alpha, grid};
    const auto s = spectral_summary(setup);
    const double rho = spectral_radius(charpoly_roots(setup));
    if (rho > s.rho_bound * (1 + 1e-9) + 1e-300) ++violations;
    table.add_row({k, static_cast<double>(grid.num_subintervals), nominal_coarse, nominal_fine, grid.coarse_step(),
                   grid.fine_step(), rho, s.rho_bound, s.disc_reach});
  };

  switch (mode) {
    case SweepMode::vary_fine: {
      const double Dt = 1e-4;
      res.set("T", cfg.T);
      res.set("L", cfg.L);
      for (int k = 1; k <= 15; ++k) {
        const double dt = Dt / std::ldexp(1.0, k);
        emit(k, rounded_grid(cfg.T, cfg.L, Dt, dt), Dt, dt);
      }
      break;
    }
    case SweepMode::vary_coarse: {
      const double dt = 1e-2 * std::ldexp(1.0, -20);
      res.set("T", cfg.T);
      res.set("L", cfg.L);
      for (int k = 0; k <= 20; ++k) {
        const double Dt = std::ldexp(1.0, -k);
        emit(k, rounded_grid(cfg.T, cfg.L, Dt, dt), Dt, dt);
      }
      break;
    }
    case SweepMode::fixed_ratio: {
      res.set("T", cfg.T);
      res.set("L", cfg.L);
      for (int k = 1; k <= 15; ++k) {
        const double Dt = std::ldexp(1.0, -k);
        const double DT = cfg.T / cfg.L;
        const long long coarse = std::max(1LL, std::llround(DT / Dt));
        emit(k, make_grid<double>(cfg.T, cfg.L, 100 * coarse, coarse), Dt, Dt * 1e-2);
      }
      break;
    }
    case SweepMode::scal_fixed_T:
    case SweepMode::scal_fixed_DT: {
      const bool fixed_T = mode == SweepMode::scal_fixed_T;
      res.set("fine_per_coarse", static_cast<double>(cfg.fine_per_coarse));
      for (int L = 1; L <= cfg.max_L; ++L) {
        const double T = fixed_T ? cfg.T : static_cast<double>(L);
        const auto grid = make_grid<double>(T, L, cfg.fine_per_coarse, 1);
        emit(L, grid, grid.coarse_step(), grid.fine_step());
      }
      break;
    }
  }

  double max_rho = 0;
  for (const auto& row : table.rows) max_rho = std::max(max_rho, row[6]);
  res.set("max_rho", max_rho);
  res.checks.push_back(zero_check("sweep.rho_le_bound_violations", violations));
  res.artifacts.emplace_back("sweep", std::move(table));
  return res;
}

}  // namespace paraopt::experiments
