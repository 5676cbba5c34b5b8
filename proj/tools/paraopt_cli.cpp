#include "config.hpp"

#include "paraopt/experiments.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace cli = paraopt::cli;
namespace ex = paraopt::experiments;
using paraopt::ErrorCode;

namespace {

double value_or(const std::optional<double>& v, double d) { return v ? *v : d; }

paraopt::ParaoptOptions<double> solver_options(const cli::RunConfig& cfg, int L, paraopt::InnerSolver inner) {
  paraopt::ParaoptOptions<double> o;
  o.outer_tol = value_or(cfg.outer_tol, o.outer_tol);
  o.inner_tol = value_or(cfg.inner_tol, o.inner_tol);
  o.local.tol = value_or(cfg.local_tol, o.local.tol);
  if (cfg.max_outer) o.max_outer = *cfg.max_outer;
  if (cfg.max_newton) o.local.max_newton = *cfg.max_newton;
  o.inner_solver = inner;
  if (cfg.inner) o.inner_solver = *cfg.inner == "krylov" ? paraopt::InnerSolver::krylov : paraopt::InnerSolver::assembled_direct;
  o.variant = cfg.variant == "newton" ? paraopt::Variant::newton : paraopt::Variant::gauss_newton;
  o.workers = cli::resolve_workers(cfg, L);
  o.validate();
  return o;
}

ex::LotkaVolterraConfig lv_config(const cli::RunConfig& cfg) {
  ex::LotkaVolterraConfig lv;
  lv.T = value_or(cfg.T, lv.T);
  lv.alpha = value_or(cfg.alpha, lv.alpha);
  if (cfg.L) lv.L = *cfg.L;
  if (cfg.sigma) throw cli::ConfigError(cli::exit_conflict, "--sigma does not apply to the Lotka-Volterra problem");

  cli::RunConfig c = cfg;
  if (cfg.N0) {
    if (*cfg.N0 < 1 || *cfg.N0 % lv.L != 0) {
      throw cli::ConfigError(cli::exit_invalid_parameter, "--N0 must be a positive multiple of --L");
    }
    const long long per_sub = *cfg.N0 / lv.L;
    if (c.fine_per_sub && *c.fine_per_sub != per_sub) throw cli::ConfigError(cli::exit_conflict, "--N0 and --fine-per-sub disagree");
    c.fine_per_sub = per_sub;
  }
  if (!c.fine_per_sub && !c.fine_step) {
    if (lv.N0 % lv.L != 0) throw cli::ConfigError(cli::exit_invalid_parameter, "default N0 is not divisible by --L; set --N0");
    c.fine_per_sub = lv.N0 / lv.L;
  }
  const auto [fine, coarse] = cli::resolve_steps(c, lv.T, lv.L, 1, 1);
  lv.N0 = fine * lv.L;
  lv.ratio = static_cast<double>(coarse) / static_cast<double>(fine);
  const auto o = solver_options(cfg, lv.L, paraopt::InnerSolver::assembled_direct);
  lv.variant = o.variant;
  lv.inner_solver = o.inner_solver;
  lv.workers = o.workers;
  lv.max_outer = o.max_outer;
  lv.outer_tol = o.outer_tol;
  return lv;
}

ex::HeatConfig heat_config(const cli::RunConfig& cfg) {
  ex::HeatConfig h;
  h.T = value_or(cfg.T, h.T);
  h.alpha = value_or(cfg.alpha, h.alpha);
  if (cfg.L) h.L = *cfg.L;
  if (cfg.n) h.n = *cfg.n;
  if (cfg.sigma) throw cli::ConfigError(cli::exit_conflict, "--sigma does not apply to the heat problem");
  h.full_control = cfg.full_control;

  cli::RunConfig c = cfg;
  if (!c.fine_per_sub && !c.fine_step) c.fine_step = h.fine_step;
  if (!c.ratio && !c.fine_per_coarse && !c.coarse_per_sub && !c.dt_equals_fine) c.ratio = h.ratio;
  const auto [fine, coarse] = cli::resolve_steps(c, h.T, h.L, 1, 1);
  h.fine_step = h.T / h.L / static_cast<double>(fine);
  h.ratio = static_cast<double>(coarse) / static_cast<double>(fine);
  const auto o = solver_options(cfg, h.L, paraopt::InnerSolver::krylov);
  h.inner_solver = o.inner_solver;
  h.workers = o.workers;
  h.max_outer = o.max_outer;
  h.outer_tol = o.outer_tol;
  return h;
}

paraopt::TimeGridd scalar_grid(const cli::RunConfig& cfg, double T, int L, long long coarse, long long per) {
  const double t = value_or(cfg.T, T);
  const int l = cfg.L ? *cfg.L : L;
  const auto [fine, c] = cli::resolve_steps(cfg, t, l, coarse, per);
  return paraopt::make_grid<double>(t, l, fine, c);
}

ex::ExperimentResult run(const cli::RunConfig& cfg) {
  const auto& sub = cfg.subcommand;
  if (sub == "analyze") {
    const auto grid = scalar_grid(cfg, 100, 30, 50, 100);
    return ex::analyze(paraopt::DahlquistSetup<double>{value_or(cfg.sigma, -1), value_or(cfg.alpha, 1), grid});
  }
  if (sub == "sweep") {
    ex::SweepConfig s;
    s.sigma = value_or(cfg.sigma, s.sigma);
    s.alpha = value_or(cfg.alpha, s.alpha);
    s.T = value_or(cfg.T, s.T);
    if (cfg.L) s.L = *cfg.L;
    if (cfg.fine_per_coarse) s.fine_per_coarse = *cfg.fine_per_coarse;
    return ex::scalar_sweeps(*ex::parse_sweep_mode(cfg.mode), s);
  }
  if (sub == "table31") return ex::table31();
  if (sub == "solve") {
    const std::string preset = cfg.preset.value_or("dahlquist");
    if (preset == "lv") {
      const auto lv = lv_config(cfg);
      auto o = solver_options(cfg, lv.L, paraopt::InnerSolver::assembled_direct);
      return ex::run_solver("solve", ex::lotka_volterra_problem(lv), ex::lotka_volterra_grid(lv), o, true);
    }
    if (preset == "heat") {
      const auto h = heat_config(cfg);
      auto o = solver_options(cfg, h.L, paraopt::InnerSolver::krylov);
      return ex::run_solver("solve", ex::heat_problem(h), ex::heat_grid(h), o, true);
    }
    const auto grid = scalar_grid(cfg, 1, 10, 10, 10);
    const auto problem = paraopt::make_dahlquist<double>(value_or(cfg.sigma, -1), value_or(cfg.alpha, 1), 1.0, 0.0);
    auto o = solver_options(cfg, grid.num_subintervals, paraopt::InnerSolver::krylov);
    return ex::run_solver("solve", problem, grid, o, true);
  }
  if (sub == "lv") {
    const auto lv = lv_config(cfg);
    return cfg.minima ? ex::lotka_volterra_minima(lv) : ex::lotka_volterra_run(lv);
  }
  if (sub == "heat") return ex::heat_run(heat_config(cfg));
  if (sub == "bench") {
    ex::TimingConfig t;
    t.preset = cfg.preset.value_or("lv");
    if (t.preset == "dahlquist") throw cli::ConfigError(cli::exit_invalid_parameter, "bench supports the lv and heat presets");
    if (t.preset == "lv") {
      cli::RunConfig c = cfg;
      if (!c.N0 && !c.fine_per_sub && !c.fine_step) c.N0 = t.lv.N0;
      if (!c.ratio && !c.fine_per_coarse && !c.coarse_per_sub && !c.dt_equals_fine) c.ratio = t.lv.ratio;
      if (!c.L) c.L = t.lv.L;
      if (!c.inner) c.inner = "krylov";
      t.lv = lv_config(c);
      t.inner_solver = t.lv.inner_solver;
    } else {
      t.heat = heat_config(cfg);
      t.inner_solver = t.heat.inner_solver;
    }
    const int L = t.preset == "lv" ? t.lv.L : t.heat.L;
    t.workers = cfg.worker_list.empty() ? std::vector<int>{1, 4, L} : cfg.worker_list;
    return ex::timing_run(t);
  }
  ex::CheckSuiteConfig c;
  c.random_setups = cfg.random_setups;
  c.seed = cfg.seed;
  return ex::check_suite(c);
}

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(ex::format_number(v)); }

nlohmann::json to_json(const ex::ExperimentResult& res) {
  nlohmann::json j;
  j["name"] = res.name;
  j["solver_converged"] = res.solver_converged;
  j["checks_pass"] = res.checks_pass();
  j["parameters"] = nlohmann::json::object();
  for (const auto& [k, v] : res.parameters) j["parameters"][k] = number(v);
  j["checks"] = nlohmann::json::array();
  for (const auto& c : res.checks) {
    j["checks"].push_back({{"name", c.name},
                           {"value", number(c.value)},
                           {"expected", number(c.expected)},
                           {"tolerance", number(c.tolerance)},
                           {"pass", c.pass}});
  }
  j["notes"] = res.notes;
  j["artifacts"] = nlohmann::json::object();
  for (const auto& [k, t] : res.artifacts) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& r : t.rows) {
      nlohmann::json row = nlohmann::json::array();
      for (double v : r) row.push_back(number(v));
      rows.push_back(std::move(row));
    }
    j["artifacts"][k] = {{"columns", t.columns}, {"rows", std::move(rows)}};
  }
  return j;
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

void emit(const cli::RunConfig& cfg, const ex::ExperimentResult& res) {
  std::cout << "experiment " << res.name << '\n';
  for (const auto& [k, v] : res.parameters) std::cout << "  " << k << " = " << ex::format_number(v) << '\n';
  for (const auto& c : res.checks) {
    std::cout << "  check " << c.name << ": " << (c.pass ? "PASS" : "FAIL") << " value=" << ex::format_number(c.value)
              << " expected=" << ex::format_number(c.expected) << " tol=" << ex::format_number(c.tolerance) << '\n';
  }
  for (const auto& n : res.notes) std::cout << "  note: " << n << '\n';

  if (cfg.format == cli::OutputFormat::json) {
    const std::string text = to_json(res).dump(2) + "\n";
    if (cfg.out_dir) {
      std::filesystem::create_directories(*cfg.out_dir);
      const auto path = std::filesystem::path(*cfg.out_dir) / (res.name + ".json");
      write_file(path, text);
      std::cout << "wrote " << path.string() << '\n';
    } else {
      std::cout << text;
    }
    return;
  }
  if (cfg.out_dir) {
    std::filesystem::create_directories(*cfg.out_dir);
    for (const auto& [k, t] : res.artifacts) {
      const auto path = std::filesystem::path(*cfg.out_dir) / (res.name + "_" + k + ".csv");
      write_file(path, t.to_csv());
      std::cout << "wrote " << path.string() << '\n';
    }
  } else {
    for (const auto& [k, t] : res.artifacts) std::cout << "# " << k << '\n' << t.to_csv();
  }
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::NoConvergence:
    case ErrorCode::NewtonDivergence: return cli::exit_no_convergence;
    case ErrorCode::InvalidParameter:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::UnsupportedRegime: return cli::exit_invalid_parameter;
    default: return cli::exit_runtime_error;
  }
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const cli::RunConfig cfg = cli::parse_config(std::vector<std::string>(argv + 1, argv + argc));
    const auto res = run(cfg);
    emit(cfg, res);
    if (!res.solver_converged) return cli::exit_no_convergence;
    if (!res.checks_pass()) return cli::exit_golden_failure;
    return cli::exit_ok;
  } catch (const cli::ConfigError& e) {
    (e.code() == cli::exit_ok ? std::cout : std::cerr) << e.what() << (e.code() == cli::exit_ok ? "" : "\n");
    return e.code();
  } catch (const paraopt::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cli::exit_runtime_error;
  }
}
