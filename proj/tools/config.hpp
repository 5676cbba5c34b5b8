#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace paraopt::cli {

enum ExitCode : int {
  exit_ok = 0,
  exit_no_convergence = 1,
  exit_usage = 2,
  exit_golden_failure = 3,
  exit_unknown_key = 4,
  exit_parse_error = 5,
  exit_conflict = 6,
  exit_invalid_parameter = 7,
  exit_runtime_error = 8,
};

class ConfigError : public std::runtime_error {
 public:
  ConfigError(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

enum class OutputFormat { csv, json };

struct RunConfig {
  std::string subcommand;
  std::optional<std::string> preset;

  std::optional<double> sigma, alpha, T;
  std::optional<int> L;
  std::optional<long long> coarse_per_sub, fine_per_coarse, fine_per_sub, N0;
  std::optional<double> fine_step, ratio;
  std::optional<int> n;

  std::string variant = "newton";
  std::optional<std::string> inner;
  std::optional<int> workers;
  std::vector<int> worker_list;
  std::optional<int> max_outer, max_newton;
  std::optional<double> outer_tol, inner_tol, local_tol;

  std::string mode = "vary_fine";
  bool dt_equals_fine = false;
  bool full_control = false;
  bool minima = false;
  int random_setups = 500;
  unsigned seed = 20240601;

  std::optional<std::string> out_dir;
  OutputFormat format = OutputFormat::csv;
};

const std::vector<std::string>& subcommands();

std::string usage();

/// Parses `args` (without the program name). Values from a `--config` file
/// (flat key=value lines, '#' comments) are applied first, flags override them.
/// Throws ConfigError with the matching exit code.
RunConfig parse_config(const std::vector<std::string>& args);

/// Step counts per sub-interval (fine, coarse) implied by the grid keys, with
/// the given defaults. Throws ConfigError(exit_conflict) on inconsistent keys.
std::pair<long long, long long> resolve_steps(const RunConfig& cfg, double T, int L, long long default_coarse,
                                              long long default_fine_per_coarse);

/// Worker count: --workers, else PARAOPT_WORKERS, else min(L, hardware threads).
int resolve_workers(const RunConfig& cfg, int L);

}  // namespace paraopt::cli
