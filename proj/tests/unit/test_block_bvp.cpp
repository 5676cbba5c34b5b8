#include <doctest.h>

#include "paraopt/block_bvp.hpp"
#include "paraopt/propagators.hpp"

#include <random>

using namespace paraopt;
using Matd = Mat<double>;

namespace {

std::vector<Matd> random_blocks(int n, long long m, unsigned seed, double shift) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> nd;
  std::vector<Matd> D;
  for (long long k = 0; k < m; ++k) {
    Matd B = Matd::NullaryExpr(2 * n, 2 * n, [&] { return nd(rng); });
    B.diagonal().array() += shift;
    D.push_back(B);
  }
  return D;
}

}  // namespace

TEST_CASE("block solver inverts the block operator") {
  for (int n : {1, 2, 3}) {
    const long long m = 17;
    const auto D = random_blocks(n, m, 7 + n, 4.0);
    auto diag = [&](long long k) { return D[k]; };
    std::mt19937 rng(11);
    std::normal_distribution<double> nd;
    const Matd rhs = Matd::NullaryExpr(2 * n, m, [&] { return nd(rng); });
    const Matd x = solve_block_bvp<double>(n, m, diag, rhs);
    const Matd back = detail::apply_block_operator<double>(n, m, diag, x);
    CHECK((back - rhs).cwiseAbs().maxCoeff() < 1e-11);
  }
}

TEST_CASE("endpoint solver matches the full solve") {
  const int n = 2;
  const long long m = 9;
  const auto D = random_blocks(n, m, 3, 5.0);
  auto diag = [&](long long k) { return D[k]; };
  const Matd first = (Matd(n, 2) << 1, 2, -1, 0.5).finished();
  const Matd last = (Matd(n, 2) << 0.3, 0, 4, -2).finished();

  const auto [top_last, bottom_first] = solve_block_bvp_endpoints<double>(n, m, diag, first, last);
  for (int c = 0; c < 2; ++c) {
    Matd rhs = Matd::Zero(2 * n, m);
    rhs.col(0).head(n) = first.col(c);
    rhs.col(m - 1).tail(n) = last.col(c);
    const Matd x = solve_block_bvp<double>(n, m, diag, rhs);
    CHECK((x.col(m - 1).head(n) - top_last.col(c)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((x.col(0).tail(n) - bottom_first.col(c)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("single block") {
  const Matd D = (Matd(2, 2) << 2, 1, 0, 3).finished();
  const Matd rhs = (Matd(2, 1) << 5, 6).finished();
  const Matd x = solve_block_bvp<double>(1, 1, [&](long long) { return D; }, rhs);
  CHECK(x(1, 0) == doctest::Approx(2.0));
  CHECK(x(0, 0) == doctest::Approx(1.5));
}

TEST_CASE("singular block raises singular-step") {
  const Matd D = Matd::Zero(2, 2);
  const Matd rhs = Matd::Ones(2, 3);
  bool thrown = false;
  try {
    solve_block_bvp<double>(1, 3, [&](long long) { return D; }, rhs);
  } catch (const Error& e) {
    thrown = e.code() == ErrorCode::SingularStep;
  }
  CHECK(thrown);
}

TEST_CASE("shape mismatch") {
  const Matd D = Matd::Identity(4, 4);
  CHECK_THROWS_AS(solve_block_bvp<double>(2, 3, [&](long long) { return D; }, Matd::Zero(4, 2)), Error);
}
