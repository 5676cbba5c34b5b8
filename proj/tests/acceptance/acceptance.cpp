#include "paraopt/experiments.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>

using namespace paraopt;
using namespace paraopt::experiments;

namespace {

int failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(const std::string& name, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
}

void info(const std::string& line) { std::cout << "     " << line << std::endl; }

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

// every check whose name starts with `prefix` must pass
bool group_passes(const ExperimentResult& r, const std::string& prefix, std::string& detail) {
  bool ok = true;
  int count = 0;
  for (const auto& c : r.checks) {
    if (c.name.rfind(prefix, 0) != 0) continue;
    ++count;
    if (!c.pass) {
      ok = false;
      detail += " [" + c.name + " = " + num(c.value) + ", expected " + num(c.expected) + " +- " + num(c.tolerance) + "]";
    }
  }
  if (count == 0) {
    detail += " [no checks found]";
    return false;
  }
  return ok;
}

void guarded(const std::string& name, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    report(name, false, std::string("exception: ") + e.what());
  }
}

}  // namespace

int main() {
  guarded("table31", [] {
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = table31();
    const double secs = seconds_since(t0);
    int passed = 0;
    std::string failed;
    for (const auto& c : r.checks) {
      if (c.pass) {
        ++passed;
      } else {
        failed += " [" + c.name + " = " + num(c.value) + ", printed " + num(c.expected) + "]";
      }
    }
    report("table31", passed == static_cast<int>(r.checks.size()) && secs < 1.0,
           std::to_string(passed) + "/" + std::to_string(r.checks.size()) + " values within tolerance, " + num(secs) +
               " s" + failed);
  });

  guarded("alpha1000_mu_star", [] {
    const auto s = spectral_summary(DahlquistSetup<double>{-16.0, 1000.0, table31_grid()});
    const double expected = -1.07e-5;
    report("alpha1000_mu_star", std::abs(s.mu_star_bound - expected) <= 1e-2 * std::abs(expected),
           "mu* bound " + num(s.mu_star_bound) + " vs " + num(expected));
  });

  ExperimentResult suite;
  bool suite_ok = true;
  guarded("check_suite", [&] { suite = check_suite(); });
  suite_ok = !suite.checks.empty();

  if (suite_ok) {
    std::string d;
    const bool ok = group_passes(suite, "oracle.", d);
    report("oracle_equivalence", ok,
           "max eigenvalue mismatch " + num(suite.check("oracle.max_eigenvalue_mismatch")->value) + ", " +
               num(*suite.parameter("oracle.threshold_cases")) + " threshold cases" + d);

    d.clear();
    const double secs = *suite.parameter("seconds_after_bounds");
    const double setups = *suite.parameter("bounds.setups");
    const bool bok = group_passes(suite, "bounds.", d) && setups >= 500 && secs < 60;
    report("bound_suite", bok,
           num(setups) + " setups, " + num(*suite.parameter("bounds.alpha_criterion_setups")) +
               " with alpha > 0.4544 Dt, " + num(secs) + " s" + d);

    d.clear();
    report("iteration_vs_spectrum", group_passes(suite, "iteration.", d),
           num(*suite.parameter("iteration.setups")) + " setups, max relative gap " +
               num(suite.check("iteration.max_relative_gap")->value) + d);
  }

  guarded("exact_jacobian", [] {
    ParaoptOptions<double> o;
    o.inner_solver = InnerSolver::assembled_direct;
    const auto dq = paraopt_solve(make_dahlquist<double>(-1.0, 1.0, 1.0, 0.0), make_grid<double>(1.0, 10, 10, 10), o);
    HeatConfig h;
    h.fine_step = 1e-6;
    h.ratio = 1;
    h.inner_solver = InnerSolver::assembled_direct;
    const auto ht = paraopt_solve(heat_problem(h), heat_grid(h), o);
    const bool ok = dq.converged && dq.iterations == 1 && dq.history.back().residual_inf <= 1e-10 && ht.converged &&
                    ht.iterations == 1 && ht.history.back().residual_inf <= 1e-10;
    report("exact_jacobian", ok,
           "dahlquist " + std::to_string(dq.iterations) + " iteration(s), residual " +
               num(dq.history.back().residual_inf) + "; heat " + std::to_string(ht.iterations) +
               " iteration(s), residual " + num(ht.history.back().residual_inf));
  });

  guarded("lotka_volterra", [] {
    LotkaVolterraConfig base;
    const auto t0 = std::chrono::steady_clock::now();
    const auto ref = lotka_volterra_reference(base);
    info("reference: " + ref.method + ", " + num(ref.seconds) + " s, N0 = " + std::to_string(base.N0));

    bool ok = true;
    std::ostringstream detail;

    auto quad = base;
    quad.ratio = 1;
    const auto rq = lotka_volterra_run(quad, &ref);
    const double expo = rq.parameter("fit_exponent").value_or(NAN);
    ok = ok && rq.solver_converged && expo >= 1.8;
    detail << "r=1 exponent " << num(expo) << " (" << num(*rq.parameter("iterations")) << " it)";

    auto lin = base;
    lin.ratio = 1e-4;
    const auto rl = lotka_volterra_run(lin, &ref);
    const double res = rl.parameter("final_residual").value_or(NAN);
    ok = ok && rl.solver_converged;
    detail << "; r=1e-4 L=10 converged=" << rl.solver_converged << " residual " << num(res) << " ("
           << num(*rl.parameter("iterations")) << " it)";

    const int Ls[] = {3, 6, 12, 24};
    const int table[] = {10, 9, 9, 9};
    detail << "; counts";
    for (int i = 0; i < 4; ++i) {
      auto c = base;
      c.L = Ls[i];
      c.ratio = 1e-4;
      const auto r = lotka_volterra_run(c, &ref);
      const int it = static_cast<int>(*r.parameter("iterations"));
      ok = ok && r.solver_converged && std::abs(it - table[i]) <= 3;
      detail << " L=" << Ls[i] << ":" << it << (r.solver_converged ? "" : "(no conv)") << "/" << table[i];
    }
    detail << "; " << num(seconds_since(t0)) << " s";
    report("lotka_volterra", ok, detail.str());
  });

  guarded("heat", [] {
    struct Case {
      double fine, ratio;
    };
    const Case cases[] = {{1e-7, 1e-1}, {1e-7, 1e-2}, {1e-9, 1e-3}, {1e-9, 1e-4}};
    int its[4];
    bool conv[4];
    std::ostringstream detail;
    for (int i = 0; i < 4; ++i) {
      HeatConfig h;
      h.fine_step = cases[i].fine;
      h.ratio = cases[i].ratio;
      const auto r = heat_run(h);
      its[i] = static_cast<int>(*r.parameter("iterations"));
      conv[i] = r.solver_converged;
      detail << (i ? "; " : "") << "dt=" << num(cases[i].fine) << " r=" << num(cases[i].ratio) << ": " << its[i]
             << " it" << (conv[i] ? "" : " (no conv)");
    }
    const bool ok = conv[0] && conv[1] && conv[2] && conv[3] && std::abs(its[0] - its[2]) <= 1 &&
                    std::abs(its[1] - its[3]) <= 1;
    report("heat", ok, detail.str());
  });

  if (suite_ok) {
    std::string d;
    report("appendix_inequalities", group_passes(suite, "appendix.", d),
           num(*suite.parameter("appendix.points")) + " grid points" + d);
  }

  guarded("determinism", [] {
    std::ostringstream detail;
    bool ok = true;
    for (const std::string preset : {"lv", "heat"}) {
      TimingConfig t;
      t.preset = preset;
      const int L = preset == "lv" ? t.lv.L : t.heat.L;
      t.workers = {1, 4, L};
      const auto r = timing_run(t);
      const auto* c = r.check("bench.bitwise_mismatches");
      ok = ok && c && c->pass;
      detail << (preset == "lv" ? "" : "; ") << preset << " workers {1,4," << L << "} mismatches "
             << (c ? num(c->value) : "n/a");
      const auto* tab = r.artifact("timing");
      if (tab) {
        const auto w = tab->column("workers"), s = tab->column("speedup");
        std::string sp;
        for (std::size_t i = 0; i < w.size(); ++i) sp += " " + num(w[i]) + ":" + num(s[i]);
        info(preset + " speedups (not asserted):" + sp);
      }
    }
    report("determinism", ok, detail.str());
  });

  // replacements for the criteria that are not reproducible at desk scale; informational
  guarded("supplementary", [&] {
    LotkaVolterraConfig m;
    m.T = 1;
    m.N0 = 120000;
    const auto r = lotka_volterra_minima(m);
    info("two local minima (T=1, N0=" + std::to_string(m.N0) + "): 2J newton " + num(2 * *r.parameter("J_newton")) +
         ", 2J gauss-newton " + num(2 * *r.parameter("J_gauss_newton")) + ", checks " +
         (r.checks_pass() ? "pass" : "fail"));
    if (!suite.checks.empty()) {
      std::string d;
      info(std::string("asymptotics ") + (group_passes(suite, "asymptotics.", d) ? "pass" : "fail") + d);
      d.clear();
      info(std::string("derivative consistency ") + (group_passes(suite, "fd.", d) ? "pass" : "fail") + d);
    }
  });

  std::cout << (failures == 0 ? "ALL PASS" : std::to_string(failures) + " criterion/criteria FAILED") << std::endl;
  return failures == 0 ? 0 : 1;
}
