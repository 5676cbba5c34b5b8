#include <doctest.h>

#include "paraopt/gmres.hpp"
#include "paraopt/parallel.hpp"

#include <atomic>
#include <random>

using namespace paraopt;
using Vecd = Vec<double>;
using Matd = Mat<double>;

TEST_CASE("gmres solves a nonsymmetric system") {
  std::mt19937 rng(5);
  std::normal_distribution<double> nd;
  const int n = 40;
  Matd A = Matd::NullaryExpr(n, n, [&] { return nd(rng); }) / std::sqrt(double(n));
  A.diagonal().array() += 3;
  const Vecd b = Vecd::NullaryExpr(n, [&] { return nd(rng); });
  const auto r = gmres<double>([&](const Vecd& v) -> Vecd { return A * v; }, b, 1e-12, 100);
  CHECK(r.converged);
  CHECK(r.iterations <= n);
  CHECK((A * r.x - b).norm() <= 1e-11 * b.norm());
  CHECK(r.relative_residual <= 1e-12);
}

TEST_CASE("gmres is exact after n steps") {
  const Matd A = (Matd(3, 3) << 0, 1, 0, 0, 0, 1, 1, 0, 0).finished();
  const Vecd b = (Vecd(3) << 1, 2, 3).finished();
  const auto r = gmres<double>([&](const Vecd& v) -> Vecd { return A * v; }, b, 1e-14, 10);
  CHECK(r.converged);
  CHECK((A * r.x - b).norm() < 1e-12);
}

TEST_CASE("gmres iteration limit returns the best iterate") {
  const int n = 50;
  Vecd d = Vecd::LinSpaced(n, 1, 1000);
  const Vecd b = Vecd::Ones(n);
  const auto r = gmres<double>([&](const Vecd& v) -> Vecd { return d.cwiseProduct(v); }, b, 1e-14, 3);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 3);
  CHECK(r.relative_residual < 1.0);
  CHECK((d.cwiseProduct(r.x) - b).norm() / b.norm() == doctest::Approx(r.relative_residual).epsilon(1e-6));
}

TEST_CASE("gmres with zero right-hand side") {
  const auto r = gmres<double>([](const Vecd& v) -> Vecd { return 2 * v; }, Vecd::Zero(4), 1e-10, 10);
  CHECK(r.converged);
  CHECK(r.x.norm() == 0.0);
}

TEST_CASE("parallel_for covers every index once") {
  for (int workers : {1, 2, 5}) {
    std::vector<int> hits(23, 0);
    parallel_for(hits.size(), workers, [&](std::size_t i) { hits[i] += static_cast<int>(i) + 1; });
    for (std::size_t i = 0; i < hits.size(); ++i) CHECK(hits[i] == static_cast<int>(i) + 1);
  }
}

TEST_CASE("parallel_for rethrows the lowest failing index") {
  for (int workers : {1, 4}) {
    std::string what;
    try {
      parallel_for(10, workers, [](std::size_t i) {
        if (i == 3 || i == 7) throw std::runtime_error("task " + std::to_string(i));
      });
    } catch (const std::runtime_error& e) {
      what = e.what();
    }
    CHECK(what == "task 3");
  }
}

TEST_CASE("default worker count honours the environment") {
  setenv("PARAOPT_WORKERS", "3", 1);
  CHECK(default_workers(8) == 3);
  setenv("PARAOPT_WORKERS", "junk", 1);
  CHECK(default_workers(8) == 8);
  unsetenv("PARAOPT_WORKERS");
  CHECK(default_workers(0) == 1);
}
