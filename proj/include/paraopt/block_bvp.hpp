#pragma once

#include "paraopt/core.hpp"

#include <limits>
#include <utility>

namespace paraopt {

// Block-tridiagonal solver for the linearized sub-interval optimality system.
//
// Unknown block k (k = 0..m-1) is u_k = (dy_{k+1}, dlambda_k), of size 2n.
// Row block k couples to its neighbours only through
//   lower:  -dy_k            (top half of u_{k-1}, in the state equation)
//   upper:  -dlambda_{k+1}   (bottom half of u_{k+1}, in the adjoint equation)
// so the off-diagonal blocks are fixed selectors and only the diagonal
// blocks D_k vary. Elimination runs backward in k: the unknowns are
// eliminated from the right end, a discrete backward Riccati sweep. The
// forward sweep can break down on long intervals when the second-order term
// is large, the backward one stays well conditioned there.
//
// Reversing the block order and swapping the two halves of every block maps
// the system onto one with identical coupling pattern, so both directions
// share one forward elimination kernel.

namespace detail {

template <typename Scalar>
Eigen::PartialPivLU<Mat<Scalar>> factor_block(const Mat<Scalar>& D, long long k) {
  Eigen::PartialPivLU<Mat<Scalar>> lu(D);
  const Scalar rc = lu.rcond();
  if (!(rc > Scalar(64) * std::numeric_limits<Scalar>::epsilon())) {
    throw Error(ErrorCode::SingularStep, "local system block " + std::to_string(k) + " is singular to working precision");
  }
  return lu;
}

/// Forward elimination on the block system (see above).
template <typename Scalar, typename DiagFn>
Mat<Scalar> forward_block_bvp(int n, long long m, DiagFn&& diag, const Mat<Scalar>& rhs) {
  const int b = 2 * n;
  require(rhs.rows() == b && rhs.cols() == m, ErrorCode::DimensionMismatch, "block rhs has wrong shape");

  Mat<Scalar> g(b, m);
  Mat<Scalar> wr(b, n * m);  // W_k = -(D'_k)^{-1}[:, n:2n]
  const Mat<Scalar> selector = (Mat<Scalar>(b, n) << Mat<Scalar>::Zero(n, n), Mat<Scalar>::Identity(n, n)).finished();

  for (long long k = 0; k < m; ++k) {
    Mat<Scalar> D = diag(k);
    Vec<Scalar> rk = rhs.col(k);
    if (k > 0) {
      D.topRightCorner(n, n) += wr.block(0, n * (k - 1), n, n);
      rk.head(n) += g.col(k - 1).head(n);
    }
    const auto lu = detail::factor_block<Scalar>(D, k);
    g.col(k) = lu.solve(rk);
    wr.block(0, n * k, b, n) = -lu.solve(selector);
  }

  Mat<Scalar> x(b, m);
  x.col(m - 1) = g.col(m - 1);
  for (long long k = m - 2; k >= 0; --k) {
    x.col(k) = g.col(k) - wr.block(0, n * k, b, n) * x.col(k + 1).tail(n);
  }
  return x;
}

/// Forward elimination for a right-hand side that is zero except for the top
/// half of block 0 (`first`) and the bottom half of block m-1 (`last`).
/// Returns (top of u_{m-1}, bottom of u_0). Constant memory in m.
template <typename Scalar, typename DiagFn>
std::pair<Mat<Scalar>, Mat<Scalar>> forward_block_bvp_endpoints(int n, long long m, DiagFn&& diag,
                                                              const Mat<Scalar>& first, const Mat<Scalar>& last) {
  const int b = 2 * n;
  const auto r = first.cols();
  require(first.rows() == n && last.rows() == n && last.cols() == r, ErrorCode::DimensionMismatch,
          "endpoint rhs has wrong shape");

  const Mat<Scalar> selector = (Mat<Scalar>(b, n) << Mat<Scalar>::Zero(n, n), Mat<Scalar>::Identity(n, n)).finished();
  Mat<Scalar> carry_top = Mat<Scalar>::Zero(n, r);
  Mat<Scalar> wr_top_prev = Mat<Scalar>::Zero(n, n);
  Mat<Scalar> transfer = Mat<Scalar>::Identity(n, n);
  Mat<Scalar> accum = Mat<Scalar>::Zero(n, r);
  Mat<Scalar> g(b, r);

  for (long long k = 0; k < m; ++k) {
    Mat<Scalar> D = diag(k);
    Mat<Scalar> rk = Mat<Scalar>::Zero(b, r);
    if (k == 0) rk.topRows(n) += first;
    if (k == m - 1) rk.bottomRows(n) += last;
    if (k > 0) {
      D.topRightCorner(n, n) += wr_top_prev;
      rk.topRows(n) += carry_top;
    }
    const auto lu = detail::factor_block<Scalar>(D, k);
    g = lu.solve(rk);
    const Mat<Scalar> wr = -lu.solve(selector);
    accum.noalias() += transfer * g.bottomRows(n);
    if (k + 1 < m) transfer = (transfer * (-wr.bottomRows(n))).eval();
    carry_top = g.topRows(n);
    wr_top_prev = wr.topRows(n);
  }
  return {g.topRows(n), accum};
}

template <typename Scalar>
Mat<Scalar> swap_halves(const Mat<Scalar>& D, int n) {
  Mat<Scalar> S(2 * n, 2 * n);
  S.topLeftCorner(n, n) = D.bottomRightCorner(n, n);
  S.topRightCorner(n, n) = D.bottomLeftCorner(n, n);
  S.bottomLeftCorner(n, n) = D.topRightCorner(n, n);
  S.bottomRightCorner(n, n) = D.topLeftCorner(n, n);
  return S;
}

}  // namespace detail

/// Solves the full system. `rhs` holds one column of length 2n per block.
/// `diag(k)` must return D_k.
template <typename Scalar, typename DiagFn>
Mat<Scalar> solve_block_bvp(int n, long long m, DiagFn&& diag, const Mat<Scalar>& rhs) {
  require(rhs.rows() == 2 * n && rhs.cols() == m, ErrorCode::DimensionMismatch, "block rhs has wrong shape");
  Mat<Scalar> rev(2 * n, m);
  for (long long k = 0; k < m; ++k) {
    rev.col(k).head(n) = rhs.col(m - 1 - k).tail(n);
    rev.col(k).tail(n) = rhs.col(m - 1 - k).head(n);
  }
  const Mat<Scalar> xr = detail::forward_block_bvp<Scalar>(
      n, m, [&](long long k) { return detail::swap_halves<Scalar>(diag(m - 1 - k), n); }, rev);
  Mat<Scalar> x(2 * n, m);
  for (long long k = 0; k < m; ++k) {
    x.col(m - 1 - k).head(n) = xr.col(k).tail(n);
    x.col(m - 1 - k).tail(n) = xr.col(k).head(n);
  }
  return x;
}

/// Solves the system whose right-hand side is zero except for the top half of
/// block 0 (`first`) and the bottom half of block m-1 (`last`), returning only
/// the endpoint values (top of u_{m-1}, bottom of u_0). Constant memory in m.
template <typename Scalar, typename DiagFn>
std::pair<Mat<Scalar>, Mat<Scalar>> solve_block_bvp_endpoints(int n, long long m, DiagFn&& diag,
                                                              const Mat<Scalar>& first, const Mat<Scalar>& last) {
  auto [bottom, top] = detail::forward_block_bvp_endpoints<Scalar>(
      n, m, [&](long long k) { return detail::swap_halves<Scalar>(diag(m - 1 - k), n); }, last, first);
  return {std::move(top), std::move(bottom)};
}

}  // namespace paraopt
