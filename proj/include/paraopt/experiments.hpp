#pragma once

#include "paraopt/linear_analysis.hpp"
#include "paraopt/paraopt.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace paraopt::experiments {

using Matd = Mat<double>;

/// Numeric table written as CSV with 17 significant digits and '\n' line ends.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  void add_row(std::vector<double> row);
  std::string to_csv() const;
  /// Values of one column; throws invalid-parameter for unknown names.
  std::vector<double> column(const std::string& name) const;
};

std::string format_number(double v);

struct GoldenCheck {
  std::string name;
  double value = 0;
  double expected = 0;
  double tolerance = 0;  // absolute
  bool pass = false;
};

GoldenCheck make_check(std::string name, double value, double expected, double tolerance);
/// Check that a violation count is zero.
GoldenCheck zero_check(std::string name, long long violations);

struct ExperimentResult {
  std::string name;
  std::vector<std::pair<std::string, double>> parameters;
  std::vector<std::pair<std::string, CsvTable>> artifacts;
  std::vector<GoldenCheck> checks;
  std::vector<std::string> notes;
  bool solver_converged = true;

  bool checks_pass() const;
  const CsvTable* artifact(const std::string& key) const;
  std::optional<double> parameter(const std::string& key) const;
  const GoldenCheck* check(const std::string& name) const;
  void set(const std::string& key, double value);
};

/// Least-squares slope of log e_{k+1} against log e_k over consecutive pairs
/// with both errors above `floor`. NaN when fewer than two pairs qualify.
double convergence_exponent(const std::vector<double>& errors, double floor);

/// Geometric mean of the last `count` ratios e_{k+1}/e_k above `floor`; NaN if none.
double late_contraction(const std::vector<double>& errors, double floor, int count = 3);

// Printed scalar and the half-unit of its last printed digit.
struct PrintedValue {
  double value;
  double half_unit;
};

struct Table31Row {
  double sigma;
  PrintedValue beta, gamma, C, L0, radius, mu_star;
};

/// Published rows for T = 100, L = 30, 50 coarse steps per sub-interval and
/// 100 fine steps per coarse step, alpha = 1.
const std::vector<Table31Row>& table31_published();

TimeGridd table31_grid();

ExperimentResult table31();

/// Summary row and full iteration spectrum of one scalar setup.
ExperimentResult analyze(const DahlquistSetup<double>& setup);

enum class SweepMode { vary_fine, vary_coarse, fixed_ratio, scal_fixed_T, scal_fixed_DT };

std::optional<SweepMode> parse_sweep_mode(const std::string& s);
std::string to_string(SweepMode mode);

struct SweepConfig {
  double sigma = -16;
  double alpha = 1;
  double T = 1;
  int L = 10;
  /// Fine steps per coarse step in the L-sweeps.
  long long fine_per_coarse = 100;
  int max_L = 50;
};

/// Sub-interval step counts are rounded to integers; the effective steps are
/// emitted next to the nominal ones.
ExperimentResult scalar_sweeps(SweepMode mode, const SweepConfig& cfg = {});

/// Runs the reference (when possible) and ParaOpt, and records the history.
ExperimentResult run_solver(const std::string& name, const ControlProblemd& problem, const TimeGridd& grid,
                            const ParaoptOptions<double>& options, bool with_reference);

struct LotkaVolterraConfig {
  double T = 1.0 / 3.0;
  double alpha = 5e-2;
  int L = 10;
  double ratio = 1;        // delta t / Delta t
  long long N0 = 1200000;  // fine steps over [0, T]
  Variant variant = Variant::newton;
  int workers = 1;
  InnerSolver inner_solver = InnerSolver::assembled_direct;
  int max_outer = 50;
  double outer_tol = 1e-13;
};

ControlProblemd lotka_volterra_problem(const LotkaVolterraConfig& cfg);

/// Throws invalid-parameter unless N0/L and N0/L * ratio are integers.
TimeGridd lotka_volterra_grid(const LotkaVolterraConfig& cfg);

/// Converged fine solution on the whole horizon as one fine trajectory.
struct FineReference {
  long long total_steps = 0;
  Matd states;
  Matd adjoints;
  std::string method;
  double seconds = 0;
};

/// Single-interval exact Newton; when that fails, exact Newton on the
/// cfg.L decomposition of the same fine grid. Throws no-convergence if both fail.
FineReference lotka_volterra_reference(const LotkaVolterraConfig& cfg);

InterfaceVector<double> restrict_reference(const FineReference& ref, int L);

ExperimentResult lotka_volterra_run(const LotkaVolterraConfig& cfg, const FineReference* reference = nullptr);

/// Newton and Gauss-Newton outer iterations with r = 1 from the default guess.
ExperimentResult lotka_volterra_minima(const LotkaVolterraConfig& cfg);

/// 1/2|y_M - y_target|^2 + alpha/2 sum_k tau |c_k|^2 with c_k = -B^T lambda_k / alpha.
/// Needs the fine trajectories in the report.
double discrete_cost(const ControlProblemd& problem, const TimeGridd& grid, const ConvergenceReport<double>& rep);

struct HeatConfig {
  double fine_step = 1e-7;
  double ratio = 1e-1;
  double alpha = 1e-4;
  int L = 10;
  int n = 50;
  double T = 1e-2;
  int workers = 1;
  InnerSolver inner_solver = InnerSolver::krylov;
  int max_outer = 50;
  double outer_tol = 1e-13;
  /// Control on the whole domain (B = I), where the scalar analysis applies mode by mode.
  bool full_control = false;
};

ControlProblemd heat_problem(const HeatConfig& cfg);
TimeGridd heat_grid(const HeatConfig& cfg);

ExperimentResult heat_run(const HeatConfig& cfg);

struct TimingConfig {
  std::string preset = "lv";
  std::vector<int> workers = {1, 4};
  LotkaVolterraConfig lv{1.0 / 3.0, 5e-2, 12, 1e-2, 120000};
  HeatConfig heat;
  InnerSolver inner_solver = InnerSolver::krylov;
};

/// Runs the preset once per worker count; speedups are reported, bitwise
/// equality of the results is checked.
ExperimentResult timing_run(const TimingConfig& cfg);

struct CheckSuiteConfig {
  int appendix_grid = 100;
  int random_setups = 500;
  int iteration_setups = 10;
  unsigned seed = 20240601;
};

/// Invariant suites: appendix inequalities, randomized bound sweep, spectrum
/// oracle equivalence, iteration against spectrum, asymptotics, derivative
/// consistency of the built-in problems.
ExperimentResult check_suite(const CheckSuiteConfig& cfg = {});

}  // namespace paraopt::experiments
