#include <doctest.h>

#include "paraopt/model.hpp"

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

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::NoConvergence;
}

}  // namespace

TEST_CASE("dahlquist problem is linear with identity control") {
  const auto p = make_dahlquist<double>(-2.0, 0.5, 1.0, 0.25);
  CHECK(p.dim == 1);
  CHECK(p.is_linear());
  CHECK(p.rhs(vec({3.0}))(0) == doctest::Approx(-6.0));
  CHECK(p.jacobian(vec({3.0}))(0, 0) == -2.0);
  CHECK(p.hessian_action(vec({3.0}), vec({1.0}))(0, 0) == 0.0);
  CHECK(p.control_gram()(0, 0) == 1.0);
  CHECK(p.y_target(0) == 0.25);
}

TEST_CASE("non-positive alpha is rejected") {
  CHECK(code_of([] { make_dahlquist<double>(-1.0, 0.0, 1.0, 0.0); }) == ErrorCode::InvalidParameter);
  CHECK(code_of([] { make_dahlquist<double>(-1.0, -1.0, 1.0, 0.0); }) == ErrorCode::InvalidParameter);
  LotkaVolterraParams<double> prm;
  prm.alpha = 0;
  CHECK(code_of([&] { make_lotka_volterra<double>(prm); }) == ErrorCode::InvalidParameter);
}

TEST_CASE("lotka-volterra derivatives match finite differences") {
  const auto p = make_lotka_volterra<double>();
  CHECK_FALSE(p.is_linear());
  const Vecd y = vec({20.0, 10.0});
  CHECK(p.rhs(y)(0) == doctest::Approx(10 * 20 - 0.2 * 20 * 10));
  CHECK(p.rhs(y)(1) == doctest::Approx(0.2 * 20 * 10 - 10 * 10));

  const double h = 1e-6;
  Matd fd(2, 2);
  for (int j = 0; j < 2; ++j) {
    Vecd e = Vecd::Zero(2);
    e(j) = h;
    fd.col(j) = (p.rhs(y + e) - p.rhs(y - e)) / (2 * h);
  }
  CHECK((fd - p.jacobian(y)).cwiseAbs().maxCoeff() < 1e-6);

  const Vecd z = vec({0.3, -1.7});
  const Matd fdh = (p.jacobian(y + h * z) - p.jacobian(y - h * z)) / (2 * h);
  CHECK((fdh - p.hessian_action(y, z)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("periodic laplacian") {
  const auto A = periodic_laplacian<double>(8);
  CHECK(A.rows() == 8);
  CHECK((A - A.transpose()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(A.rowwise().sum().cwiseAbs().maxCoeff() < 1e-12);
  CHECK(A(0, 0) == doctest::Approx(-2 * 64.0));
  CHECK(A(0, 7) == doctest::Approx(64.0));
  CHECK(code_of([] { make_heat_default<double>(2); }) == ErrorCode::InvalidParameter);
}

TEST_CASE("default heat problem controls the middle third") {
  const auto p = make_heat_default<double>(40);
  REQUIRE(p.control_operator.has_value());
  const Matd G = p.control_gram();
  for (int i = 0; i < 40; ++i) {
    const double x = i / 40.0;
    CHECK(G(i, i) == ((x >= 1.0 / 3 && x <= 2.0 / 3) ? 1.0 : 0.0));
  }
  CHECK(p.y_init(20) == doctest::Approx(1.0));
  CHECK(p.y_target.maxCoeff() == doctest::Approx(0.5).epsilon(1e-3));
}

TEST_CASE("time grid") {
  const auto g = make_grid<double>(100.0, 30, 5000, 50);
  CHECK(g.subinterval_length() == doctest::Approx(10.0 / 3));
  CHECK(g.coarse_step() == doctest::Approx(1.0 / 15));
  CHECK(g.fine_step() == doctest::Approx(1.0 / 1500));
  CHECK(g.ratio() == doctest::Approx(0.01));
  CHECK(g.total_fine_steps() == 150000);
  CHECK(g.interface_time(30) == 100.0);

  CHECK(code_of([] { make_grid<double>(0.0, 1, 1, 1); }) == ErrorCode::InvalidParameter);
  CHECK(code_of([] { make_grid<double>(1.0, 0, 1, 1); }) == ErrorCode::InvalidParameter);
  CHECK(code_of([] { make_grid<double>(1.0, 2, 5, 10); }) == ErrorCode::InvalidParameter);
  CHECK(code_of([] { make_grid<double>(1.0, 2, 5, 0); }) == ErrorCode::InvalidParameter);
}

TEST_CASE("interface vector stacking round trip") {
  auto X = InterfaceVector<double>::zeros(2, 3);
  CHECK(X.num_subintervals() == 3);
  CHECK(X.states.size() == 4);
  for (int l = 0; l <= 3; ++l) X.states[l] = vec({1.0 * l, 10.0 * l});
  for (int l = 1; l <= 3; ++l) X.adjoint(l) = vec({-1.0 * l, -10.0 * l});
  const Vecd s = X.stacked();
  CHECK(s.size() == 2 * 7);
  CHECK(s(2) == 1.0);
  CHECK(s(8) == -1.0);
  const auto Y = InterfaceVector<double>::unstack(s, 2, 3);
  CHECK(Y.stacked() == s);

  X.adjoints.pop_back();
  CHECK(code_of([&] { check_consistent(X, 2, 3); }) == ErrorCode::DimensionMismatch);
}
