#include <doctest.h>

#include "paraopt/linear_analysis.hpp"
#include "paraopt/propagators.hpp"

using namespace paraopt;
using Vecd = Vec<double>;
using Matd = Mat<double>;

namespace {

Vecd vec(std::initializer_list<double> v) {
  Vecd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

}  // namespace

TEST_CASE("linear local solve satisfies the discrete recurrences") {
  const auto p = make_dahlquist<double>(-3.0, 0.7, 1.0, 0.0);
  const auto prop = solve_local_bvp<double>(p, 40, 0.025, vec({1.3}), vec({-0.4}));
  CHECK(discrete_residual(p, prop.trajectory).cwiseAbs().maxCoeff() < 1e-13);
  CHECK(prop.trajectory.states(0, 0) == 1.3);
  CHECK(prop.trajectory.adjoints(0, 40) == -0.4);
  CHECK(prop.P(0) == prop.trajectory.right_state()(0));
  CHECK(prop.Q(0) == prop.trajectory.left_adjoint()(0));
}

TEST_CASE("scalar flow is given by beta and gamma") {
  const double sigma = -2, alpha = 0.5, tau = 0.01;
  const long long m = 50;
  const auto p = make_dahlquist<double>(sigma, alpha, 1.0, 0.0);
  const auto flow = linear_flow<double>(p, tau, m);
  const double b = beta(sigma, tau, tau * m);
  const double g = gamma(sigma, tau, tau * m);
  CHECK(flow.Phi(0, 0) == doctest::Approx(b).epsilon(1e-13));
  CHECK(flow.Psi(0, 0) == doctest::Approx(b).epsilon(1e-13));
  CHECK(flow.Gamma(0, 0) * alpha == doctest::Approx(g).epsilon(1e-12));
  CHECK(b == doctest::Approx(std::pow(1 - sigma * tau, -double(m))).epsilon(1e-13));

  const auto prop = solve_local_bvp<double>(p, m, tau, vec({0.8}), vec({0.3}));
  const auto [P, Q] = flow.apply(vec({0.8}), vec({0.3}));
  CHECK(P(0) == doctest::Approx(prop.P(0)).epsilon(1e-13));
  CHECK(Q(0) == doctest::Approx(prop.Q(0)).epsilon(1e-13));
}

TEST_CASE("linear flow of the heat problem matches the local solve") {
  const auto p = make_heat_default<double>(12, 1e-2);
  const Vecd Y = Vecd::LinSpaced(12, -1, 1);
  const Vecd lam = Vecd::LinSpaced(12, 0.5, -0.25);
  const auto flow = linear_flow<double>(p, 1e-3, 20);
  const auto prop = solve_local_bvp<double>(p, 20, 1e-3, Y, lam);
  const auto [P, Q] = flow.apply(Y, lam);
  CHECK((P - prop.P).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((Q - prop.Q).cwiseAbs().maxCoeff() < 1e-12);
  const auto sweep = linear_sweep<double>(p, 20, 1e-3, Y, lam);
  CHECK((sweep.right_state() - prop.P).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("nonlinear local solve converges") {
  const auto p = make_lotka_volterra<double>();
  const auto prop = solve_local_bvp<double>(p, 200, (1.0 / 30) / 200, vec({20.0, 10.0}), vec({1.0, 1.0}));
  CHECK(discrete_residual(p, prop.trajectory).cwiseAbs().maxCoeff() < 1e-9);
  CHECK(prop.newton_iterations >= 1);
}

TEST_CASE("derivative action matches finite differences of the coarse propagator") {
  const auto p = make_lotka_volterra<double>();
  const auto grid = make_grid<double>(1.0 / 3, 10, 400, 40);
  const Vecd Y = vec({20.0, 10.0}), lam = vec({1.0, -0.5});
  LocalSolveOptions<double> opts;
  opts.tol = 1e-14;
  const auto lin = coarse_linearize<double>(p, grid, 0, Y, lam, opts);
  const Vecd dY = vec({0.3, -0.2}), dL = vec({0.1, 0.4});
  const auto [dP, dQ] = derivative_action<double>(p, lin, dY, dL);

  const double h = 1e-5;
  const auto plus = coarse_linearize<double>(p, grid, 0, Y + h * dY, lam + h * dL, opts);
  const auto minus = coarse_linearize<double>(p, grid, 0, Y - h * dY, lam - h * dL, opts);
  const Vecd fdP = (plus.trajectory.right_state() - minus.trajectory.right_state()) / (2 * h);
  const Vecd fdQ = (plus.trajectory.left_adjoint() - minus.trajectory.left_adjoint()) / (2 * h);
  const double scale = std::max(fdP.cwiseAbs().maxCoeff(), fdQ.cwiseAbs().maxCoeff());
  CHECK((dP - fdP).cwiseAbs().maxCoeff() < 1e-6 * scale);
  CHECK((dQ - fdQ).cwiseAbs().maxCoeff() < 1e-6 * scale);

  const auto blocks = sensitivity_blocks<double>(p, lin.trajectory);
  const auto [bP, bQ] = blocks.apply(dY, dL);
  CHECK((bP - dP).cwiseAbs().maxCoeff() < 1e-10 * scale);
  CHECK((bQ - dQ).cwiseAbs().maxCoeff() < 1e-10 * scale);

  const auto [gP, gQ] = derivative_action<double>(p, lin, dY, dL, true);
  CHECK((gP - dP).cwiseAbs().maxCoeff() > 1e-8 * scale);
}

TEST_CASE("gauss-newton and newton coincide for linear problems") {
  const auto p = make_dahlquist<double>(-1.0, 1.0, 1.0, 0.0);
  const auto grid = make_grid<double>(1.0, 4, 20, 5);
  const auto lin = coarse_linearize<double>(p, grid, 1, vec({1.0}), vec({0.5}));
  const auto [nP, nQ] = derivative_action<double>(p, lin, vec({1.0}), vec({2.0}));
  const auto [gP, gQ] = derivative_action<double>(p, lin, vec({1.0}), vec({2.0}), true);
  CHECK(nP(0) == doctest::Approx(gP(0)));
  CHECK(nQ(0) == doctest::Approx(gQ(0)));
}

TEST_CASE("invalid local inputs") {
  const auto p = make_dahlquist<double>(-1.0, 1.0, 1.0, 0.0);
  CHECK_THROWS_AS(solve_local_bvp<double>(p, 0, 0.1, vec({1.0}), vec({0.0})), Error);
  CHECK_THROWS_AS(solve_local_bvp<double>(p, 5, 0.1, vec({1.0, 2.0}), vec({0.0})), Error);
}
