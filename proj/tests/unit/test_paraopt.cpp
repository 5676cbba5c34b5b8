#include <doctest.h>

#include "paraopt/linear_analysis.hpp"
#include "paraopt/paraopt.hpp"

#include <cstring>

using namespace paraopt;
using Vecd = Vec<double>;

namespace {

bool identical(const InterfaceVector<double>& a, const InterfaceVector<double>& b) {
  const Vecd x = a.stacked(), y = b.stacked();
  return x.size() == y.size() && std::memcmp(x.data(), y.data(), sizeof(double) * x.size()) == 0;
}

ControlProblem<double> small_lv() {
  LotkaVolterraParams<double> prm;
  return make_lotka_volterra<double>(prm);
}

}  // namespace

TEST_CASE("exact jacobian converges in one iteration") {
  const auto p = make_dahlquist<double>(-1.0, 1.0, 1.0, 0.0);
  const auto grid = make_grid<double>(1.0, 10, 10, 10);
  for (auto inner : {InnerSolver::krylov, InnerSolver::assembled_direct}) {
    ParaoptOptions<double> o;
    o.inner_solver = inner;
    const auto rep = paraopt_solve(p, grid, o);
    CHECK(rep.converged);
    CHECK(rep.iterations == 1);
    CHECK(rep.history.back().residual_inf <= 1e-10);
  }
}

TEST_CASE("linear solution solves the fine interface system") {
  const double sigma = -2, alpha = 0.5;
  const auto grid = make_grid<double>(2.0, 6, 60, 3);
  const auto p = make_dahlquist<double>(sigma, alpha, 1.0, 0.0);
  ParaoptOptions<double> o;
  o.inner_solver = InnerSolver::assembled_direct;
  const auto rep = paraopt_solve(p, grid, o);
  REQUIRE(rep.converged);

  const auto [Af, b] = assemble_system(DahlquistSetup<double>{sigma, alpha, grid}, GridLevel::fine);
  const Vecd X = Af.partialPivLu().solve(b);
  CHECK((rep.solution.stacked() - X).cwiseAbs().maxCoeff() < 1e-12);

  const auto ref = reference_solve(p, grid);
  CHECK(interface_error(rep.solution, ref) < 1e-12);
  CHECK(inf_norm(residual(p, grid, rep.solution).F) < 1e-12);
}

TEST_CASE("linear error contraction follows the spectral radius") {
  const DahlquistSetup<double> s{-1.0, 1.0, make_grid<double>(5.0, 5, 100, 2)};
  const double rho = spectral_radius(charpoly_roots(s));
  REQUIRE(rho > 0.01);
  const auto p = make_dahlquist<double>(s.sigma, s.alpha, 1.0, 0.0);
  const auto ref = reference_solve(p, s.grid);
  ParaoptOptions<double> o;
  o.inner_solver = InnerSolver::assembled_direct;
  o.outer_tol = 1e-15;
  const auto rep = paraopt_solve(p, s.grid, o, std::optional<InterfaceVector<double>>(ref));
  REQUIRE(rep.history.size() >= 4);
  for (std::size_t k = 1; k + 1 < rep.history.size(); ++k) {
    if (*rep.history[k + 1].err_inf < 1e-12) break;
    CHECK(*rep.history[k + 1].err_inf <= 1.5 * rho * *rep.history[k].err_inf + 1e-14);
  }
}

TEST_CASE("lotka-volterra converges with both inner solvers and is worker independent") {
  const auto p = small_lv();
  const auto grid = make_grid<double>(1.0 / 3, 6, 200, 200);
  ParaoptOptions<double> o;
  o.inner_solver = InnerSolver::assembled_direct;
  const auto direct = paraopt_solve(p, grid, o);
  CHECK(direct.converged);
  CHECK(direct.iterations <= 12);

  o.inner_solver = InnerSolver::krylov;
  o.inner_tol = 1e-12;
  const auto kr1 = paraopt_solve(p, grid, o);
  CHECK(kr1.converged);
  CHECK(interface_error(kr1.solution, direct.solution) < 1e-8 * (1 + inf_norm(direct.solution.stacked())));

  o.workers = 3;
  const auto kr3 = paraopt_solve(p, grid, o);
  CHECK(identical(kr1.solution, kr3.solution));
  REQUIRE(kr1.history.size() == kr3.history.size());
  for (std::size_t k = 0; k < kr1.history.size(); ++k) {
    CHECK(kr1.history[k].residual_inf == kr3.history[k].residual_inf);
  }
}

TEST_CASE("gauss-newton variant reaches the same solution") {
  const auto p = small_lv();
  const auto grid = make_grid<double>(1.0 / 3, 4, 120, 120);
  ParaoptOptions<double> o;
  o.inner_solver = InnerSolver::assembled_direct;
  const auto newton = paraopt_solve(p, grid, o);
  o.variant = Variant::gauss_newton;
  o.max_outer = 200;
  const auto gn = paraopt_solve(p, grid, o);
  REQUIRE(newton.converged);
  REQUIRE(gn.converged);
  CHECK(gn.iterations >= newton.iterations);
  CHECK(interface_error(gn.solution, newton.solution) < 1e-8 * (1 + inf_norm(newton.solution.stacked())));
}

TEST_CASE("iteration limit is reported") {
  const auto p = small_lv();
  const auto grid = make_grid<double>(1.0 / 3, 4, 120, 12);
  ParaoptOptions<double> o;
  o.max_outer = 1;
  const auto rep = paraopt_solve(p, grid, o);
  CHECK_FALSE(rep.converged);
  CHECK(rep.iterations == 1);
  CHECK(rep.history.size() == 2);
  CHECK(rep.stop_reason.find("maximum") != std::string::npos);
}

TEST_CASE("invalid options are rejected") {
  const auto p = make_dahlquist<double>(-1.0, 1.0, 1.0, 0.0);
  const auto grid = make_grid<double>(1.0, 2, 4, 2);
  ParaoptOptions<double> o;
  o.outer_tol = 0;
  CHECK_THROWS_AS(paraopt_solve(p, grid, o), Error);
  o = {};
  o.initial_guess = InitialGuess::user_supplied;
  CHECK_THROWS_AS(paraopt_solve(p, grid, o), Error);
  o.user_guess = InterfaceVector<double>::zeros(1, 3);
  CHECK_THROWS_AS(paraopt_solve(p, grid, o), Error);
}

TEST_CASE("default initial guess") {
  const auto p = small_lv();
  const auto X = default_initial_guess(p, make_grid<double>(1.0, 3, 3, 3), InitialGuess::paper_default);
  CHECK(X.states[0] == p.y_init);
  CHECK(X.states[3] == p.y_target);
  CHECK((X.states[1] - (2.0 / 3 * p.y_init + 1.0 / 3 * p.y_target)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(X.adjoint(2).isOnes());
}
