#pragma once

#include "paraopt/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace paraopt {

template <typename Scalar>
struct GmresResult {
  Vec<Scalar> x;
  int iterations = 0;
  Scalar relative_residual = 0;
  bool converged = false;
};

/// Unrestarted GMRES for A x = b from x0 = 0, with modified Gram-Schmidt
/// (one reorthogonalization pass) and Givens rotations. `apply(v)` returns A v.
/// Stops when |r|_2 <= tol |b|_2. On hitting max_iters the best iterate is
/// returned with converged = false.
template <typename Scalar, typename Apply>
GmresResult<Scalar> gmres(Apply&& apply, const Vec<Scalar>& b, Scalar tol, int max_iters) {
  const auto size = b.size();
  GmresResult<Scalar> out;
  out.x = Vec<Scalar>::Zero(size);
  const Scalar bnorm = b.norm();
  if (bnorm == Scalar(0)) {
    out.converged = true;
    return out;
  }

  const int kmax = std::max(1, std::min<int>(max_iters, static_cast<int>(size)));
  std::vector<Vec<Scalar>> V;
  V.reserve(kmax + 1);
  Mat<Scalar> H = Mat<Scalar>::Zero(kmax + 1, kmax);
  Vec<Scalar> cs = Vec<Scalar>::Zero(kmax), sn = Vec<Scalar>::Zero(kmax);
  Vec<Scalar> g = Vec<Scalar>::Zero(kmax + 1);
  g(0) = bnorm;
  V.push_back(b / bnorm);

  int k = 0;
  Scalar resid = bnorm;
  while (k < kmax) {
    Vec<Scalar> w = apply(V[k]);
    for (int pass = 0; pass < 2; ++pass) {
      for (int j = 0; j <= k; ++j) {
        const Scalar h = V[j].dot(w);
        H(j, k) += h;
        w -= h * V[j];
      }
    }
    H(k + 1, k) = w.norm();

    for (int j = 0; j < k; ++j) {
      const Scalar t = cs(j) * H(j, k) + sn(j) * H(j + 1, k);
      H(j + 1, k) = -sn(j) * H(j, k) + cs(j) * H(j + 1, k);
      H(j, k) = t;
    }
    const Scalar r = std::hypot(H(k, k), H(k + 1, k));
    if (r == Scalar(0)) {
      cs(k) = 1;
      sn(k) = 0;
    } else {
      cs(k) = H(k, k) / r;
      sn(k) = H(k + 1, k) / r;
    }
    const Scalar breakdown = H(k + 1, k);
    H(k, k) = r;
    H(k + 1, k) = 0;
    g(k + 1) = -sn(k) * g(k);
    g(k) = cs(k) * g(k);
    resid = std::abs(g(k + 1));
    ++k;

    if (resid <= tol * bnorm) break;
    if (breakdown <= std::numeric_limits<Scalar>::epsilon() * bnorm) break;  // happy breakdown
    V.push_back(w / breakdown);
  }

  const Vec<Scalar> y = H.topLeftCorner(k, k).template triangularView<Eigen::Upper>().solve(g.head(k));
  for (int j = 0; j < k; ++j) out.x += y(j) * V[j];
  out.iterations = k;
  out.relative_residual = resid / bnorm;
  out.converged = resid <= tol * bnorm;
  return out;
}

}  // namespace paraopt
