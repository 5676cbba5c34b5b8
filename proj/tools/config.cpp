#include "config.hpp"

#include "paraopt/experiments.hpp"
#include "paraopt/parallel.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <thread>

namespace paraopt::cli {

namespace {

const std::vector<std::string> integer_keys = {"L",  "coarse-per-sub", "fine-per-coarse", "fine-per-sub", "N0",
                                               "n",  "workers",        "max-outer",       "max-newton",
                                               "random-setups", "seed"};
const std::vector<std::string> real_keys = {"sigma",  "alpha",     "T",         "fine-step",
                                            "ratio",  "outer-tol", "inner-tol", "local-tol"};
const std::vector<std::string> text_keys = {"preset", "variant", "inner", "mode", "out", "format", "worker-list"};
const std::vector<std::string> flag_keys = {"dt-equals-fine", "full-control", "minima"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError(exit_parse_error, "--" + key + ": '" + text + "' is not a finite number");
  }
  return v;
}

long long parse_integer(const std::string& key, const std::string& text) {
  const double v = parse_real(key, text);
  if (v != std::floor(v) || std::abs(v) > 9.0e15) {
    throw ConfigError(exit_parse_error, "--" + key + ": '" + text + "' is not an integer");
  }
  return static_cast<long long>(v);
}

std::vector<std::string> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(exit_parse_error, "cannot read config file '" + path + "'");
  std::vector<std::string> args;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(exit_parse_error, path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.rfind("--", 0) == 0) key.erase(0, 2);
    if (key == "config") throw ConfigError(exit_parse_error, path + ": nested config files are not supported");
    if (key.empty()) throw ConfigError(exit_parse_error, path + ":" + std::to_string(lineno) + ": empty key");
    args.push_back("--" + key + "=" + value);
  }
  return args;
}

bool close(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max(std::abs(a), std::abs(b)); }

long long counted(double x, const std::string& what) {
  const long long r = std::llround(x);
  if (!(r >= 1) || std::abs(x - static_cast<double>(r)) > 1e-9 * std::max(1.0, std::abs(x))) {
    throw ConfigError(exit_invalid_parameter, what + " must be a positive integer, got " + experiments::format_number(x));
  }
  return r;
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names = {"analyze", "sweep", "table31", "solve",
                                                 "lv",      "heat",  "bench",   "check"};
  return names;
}

std::string usage() {
  return "usage: paraopt <subcommand> [--key=value ...] [--config=FILE]\n"
         "\n"
         "subcommands:\n"
         "  analyze   spectral summary and iteration spectrum of a scalar setup\n"
         "  sweep     scalar convergence-factor sweeps (--mode=vary_fine|vary_coarse|fixed_ratio|\n"
         "            scal_fixed_T|scal_fixed_DT)\n"
         "  table31   scalar bound table with golden checks\n"
         "  solve     ParaOpt on a preset (--preset=dahlquist|heat|lv)\n"
         "  lv        Lotka-Volterra run (--minima for the two local minima)\n"
         "  heat      heat-equation run\n"
         "  bench     timing and bitwise determinism across --worker-list\n"
         "  check     invariant suites\n"
         "\n"
         "run 'paraopt --help' for the list of keys\n";
}

RunConfig parse_config(const std::vector<std::string>& args) {
  if (args.empty()) throw ConfigError(exit_usage, usage());

  // file values go first so that later flags win
  std::vector<std::string> merged;
  std::vector<std::string> flags;
  std::optional<std::string> config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& a = args[i];
    if (a.rfind("--config=", 0) == 0) {
      config_path = a.substr(9);
    } else if (a == "--config") {
      if (i + 1 >= args.size()) throw ConfigError(exit_parse_error, "--config needs a file name");
      config_path = args[++i];
    } else {
      flags.push_back(a);
    }
  }
  if (config_path) merged = read_config_file(*config_path);
  merged.insert(merged.end(), flags.begin(), flags.end());

  CLI::App app{"ParaOpt solver and linear convergence analysis", "paraopt"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  std::string subcommand;
  app.add_option("subcommand", subcommand, "one of: analyze sweep table31 solve lv heat bench check");

  std::map<std::string, std::string> text;
  for (const auto& keys : {integer_keys, real_keys, text_keys}) {
    for (const auto& k : keys) app.add_option("--" + k, text[k]);
  }
  std::map<std::string, bool> flag;
  for (const auto& k : flag_keys) {
    flag[k] = false;
    app.add_flag("--" + k, flag[k]);
  }

  std::vector<std::string> reversed(merged.rbegin(), merged.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    throw ConfigError(exit_ok, app.help());
  } catch (const CLI::ExtrasError& e) {
    throw ConfigError(exit_unknown_key, e.what());
  } catch (const CLI::ParseError& e) {
    throw ConfigError(exit_parse_error, e.what());
  }

  if (subcommand.empty()) throw ConfigError(exit_usage, usage());
  const auto& names = subcommands();
  if (std::find(names.begin(), names.end(), subcommand) == names.end()) {
    throw ConfigError(exit_usage, "unknown subcommand '" + subcommand + "'\n" + usage());
  }

  RunConfig cfg;
  cfg.subcommand = subcommand;
  auto given = [&](const std::string& k) { return app.count("--" + k) > 0; };
  auto real = [&](const std::string& k, std::optional<double>& dst) {
    if (given(k)) dst = parse_real(k, text[k]);
  };
  auto integer = [&](const std::string& k, auto& dst) {
    if (given(k)) {
      const long long v = parse_integer(k, text[k]);
      using T = typename std::remove_reference_t<decltype(dst)>::value_type;
      if (v < std::numeric_limits<T>::min() || v > std::numeric_limits<T>::max()) {
        throw ConfigError(exit_parse_error, "--" + k + " is out of range");
      }
      dst = static_cast<T>(v);
    }
  };

  real("sigma", cfg.sigma);
  real("alpha", cfg.alpha);
  real("T", cfg.T);
  real("fine-step", cfg.fine_step);
  real("ratio", cfg.ratio);
  real("outer-tol", cfg.outer_tol);
  real("inner-tol", cfg.inner_tol);
  real("local-tol", cfg.local_tol);
  integer("L", cfg.L);
  integer("coarse-per-sub", cfg.coarse_per_sub);
  integer("fine-per-coarse", cfg.fine_per_coarse);
  integer("fine-per-sub", cfg.fine_per_sub);
  integer("N0", cfg.N0);
  integer("n", cfg.n);
  integer("workers", cfg.workers);
  integer("max-outer", cfg.max_outer);
  integer("max-newton", cfg.max_newton);
  if (given("random-setups")) {
    std::optional<int> v;
    integer("random-setups", v);
    cfg.random_setups = *v;
  }
  if (given("seed")) {
    const long long v = parse_integer("seed", text["seed"]);
    if (v < 0 || v > std::numeric_limits<unsigned>::max()) throw ConfigError(exit_parse_error, "--seed is out of range");
    cfg.seed = static_cast<unsigned>(v);
  }

  if (given("preset")) {
    cfg.preset = text["preset"];
    if (*cfg.preset != "dahlquist" && *cfg.preset != "heat" && *cfg.preset != "lv") {
      throw ConfigError(exit_parse_error, "--preset must be dahlquist, heat or lv");
    }
  }
  if (given("variant")) {
    const auto& v = text["variant"];
    if (v == "newton") {
      cfg.variant = "newton";
    } else if (v == "gauss-newton" || v == "gauss_newton") {
      cfg.variant = "gauss_newton";
    } else {
      throw ConfigError(exit_parse_error, "--variant must be newton or gauss-newton");
    }
  }
  if (given("inner")) {
    const auto& v = text["inner"];
    if (v == "krylov") {
      cfg.inner = "krylov";
    } else if (v == "direct" || v == "assembled_direct" || v == "assembled-direct") {
      cfg.inner = "assembled_direct";
    } else {
      throw ConfigError(exit_parse_error, "--inner must be krylov or direct");
    }
  }
  if (given("mode")) {
    const auto m = experiments::parse_sweep_mode(text["mode"]);
    if (!m) throw ConfigError(exit_parse_error, "unknown sweep mode '" + text["mode"] + "'");
    cfg.mode = experiments::to_string(*m);
  }
  if (given("format")) {
    const auto& v = text["format"];
    if (v == "csv") {
      cfg.format = OutputFormat::csv;
    } else if (v == "json") {
      cfg.format = OutputFormat::json;
    } else {
      throw ConfigError(exit_parse_error, "--format must be csv or json");
    }
  }
  if (given("out")) {
    if (text["out"].empty()) throw ConfigError(exit_parse_error, "--out needs a directory");
    cfg.out_dir = text["out"];
  }
  if (given("worker-list")) {
    std::string item;
    std::istringstream in(text["worker-list"]);
    while (std::getline(in, item, ',')) {
      const long long w = parse_integer("worker-list", item);
      if (w < 1 || w > 4096) throw ConfigError(exit_parse_error, "--worker-list entries must lie in [1, 4096]");
      cfg.worker_list.push_back(static_cast<int>(w));
    }
    if (cfg.worker_list.empty()) throw ConfigError(exit_parse_error, "--worker-list is empty");
  }
  cfg.dt_equals_fine = flag["dt-equals-fine"];
  cfg.full_control = flag["full-control"];
  cfg.minima = flag["minima"];

  if (cfg.dt_equals_fine) {
    if (cfg.ratio && *cfg.ratio != 1) throw ConfigError(exit_conflict, "--dt-equals-fine conflicts with --ratio");
    if (cfg.fine_per_coarse && *cfg.fine_per_coarse != 1) {
      throw ConfigError(exit_conflict, "--dt-equals-fine conflicts with --fine-per-coarse");
    }
  }
  if (cfg.ratio && cfg.fine_per_coarse && !close(*cfg.ratio * static_cast<double>(*cfg.fine_per_coarse), 1.0)) {
    throw ConfigError(exit_conflict, "--ratio and --fine-per-coarse disagree");
  }
  if (cfg.fine_per_sub && cfg.coarse_per_sub && cfg.fine_per_coarse &&
      *cfg.fine_per_sub != *cfg.coarse_per_sub * *cfg.fine_per_coarse) {
    throw ConfigError(exit_conflict, "--fine-per-sub differs from --coarse-per-sub times --fine-per-coarse");
  }
  if (cfg.workers && *cfg.workers < 1) throw ConfigError(exit_invalid_parameter, "--workers must be at least 1");
  if (cfg.L && *cfg.L < 1) throw ConfigError(exit_invalid_parameter, "--L must be at least 1");
  if (cfg.random_setups < 1) throw ConfigError(exit_invalid_parameter, "--random-setups must be at least 1");
  return cfg;
}

std::pair<long long, long long> resolve_steps(const RunConfig& cfg, double T, int L, long long default_coarse,
                                              long long default_fine_per_coarse) {
  if (!(T > 0) || L < 1) throw ConfigError(exit_invalid_parameter, "T and L must be positive");
  const double DT = T / L;

  std::optional<long long> fine, coarse;
  if (cfg.fine_per_sub) fine = *cfg.fine_per_sub;
  if (cfg.fine_step) {
    if (!(*cfg.fine_step > 0)) throw ConfigError(exit_invalid_parameter, "--fine-step must be positive");
    const long long f = counted(DT / *cfg.fine_step, "T / (L fine-step)");
    if (fine && *fine != f) throw ConfigError(exit_conflict, "--fine-step and --fine-per-sub disagree");
    fine = f;
  }
  if (cfg.coarse_per_sub) coarse = *cfg.coarse_per_sub;

  std::optional<double> per;
  if (cfg.fine_per_coarse) per = static_cast<double>(*cfg.fine_per_coarse);
  if (cfg.ratio) {
    if (!(*cfg.ratio > 0 && *cfg.ratio <= 1)) throw ConfigError(exit_invalid_parameter, "--ratio must lie in (0, 1]");
    per = 1.0 / *cfg.ratio;
  }
  if (cfg.dt_equals_fine) per = 1.0;

  if (!fine && !coarse) coarse = default_coarse;
  if (!per && !(fine && coarse)) per = static_cast<double>(default_fine_per_coarse);

  if (fine && coarse) {
    if (per && !close(static_cast<double>(*fine) / static_cast<double>(*coarse), *per)) {
      throw ConfigError(exit_conflict, "fine and coarse step keys disagree");
    }
  } else if (fine) {
    coarse = counted(static_cast<double>(*fine) / *per, "coarse steps per sub-interval");
  } else {
    fine = counted(static_cast<double>(*coarse) * *per, "fine steps per sub-interval");
  }
  if (*coarse < 1 || *fine < *coarse) {
    throw ConfigError(exit_invalid_parameter, "need 1 <= coarse steps <= fine steps per sub-interval");
  }
  return {*fine, *coarse};
}

int resolve_workers(const RunConfig& cfg, int L) {
  if (cfg.workers) return *cfg.workers;
  const int cores = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  return default_workers(std::max(1, std::min(L, cores)));
}

}  // namespace paraopt::cli
