#pragma once

#include "paraopt/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <vector>

namespace paraopt {

// Scalar test problem y' = sigma y + c discretized by implicit Euler on the
// two-level grid. With N steps of size tau per sub-interval:
//   beta_tau  = (1 - sigma tau)^{-N}
//   gamma_tau = tau sum_{j=0}^{N-1} (1 - sigma tau)^{2(j-N)} = (beta^2 - 1) / (sigma (2 - sigma tau))
// The interface system reads
//   Y_0 = y_init,  Y_l = beta Y_{l-1} - (gamma/alpha) Lambda_l,
//   Lambda_l = beta Lambda_{l+1},  Lambda_L = Y_L - y_target.

template <typename Scalar>
struct DahlquistSetup {
  Scalar sigma = -1;
  Scalar alpha = 1;
  TimeGrid<Scalar> grid;
  Scalar y_init = 1;
  Scalar y_target = 0;
};

template <typename Scalar>
struct SpectralSummary {
  Scalar beta_fine = 0, beta_coarse = 0;
  Scalar gamma_fine = 0, gamma_coarse = 0;
  Scalar delta_beta = 0, delta_gamma = 0;
  Scalar C = 0, L0 = 0;
  Scalar disc_center = 0, disc_radius = 0;
  /// delta_beta / (1 - beta): farthest reach of the disc from the origin.
  Scalar disc_reach = 0;
  bool exists_isolated = false;
  Scalar mu_star_bound = 0;
  Scalar rho_bound = 0;
  Scalar global_bound = 0;
};

namespace detail {

/// -N log(1 - sigma tau), i.e. log(beta).
template <typename Scalar>
Scalar log_beta(Scalar sigma, Scalar tau, long long N) {
  require(Scalar(1) - sigma * tau > 0, ErrorCode::InvalidParameter, "need 1 - sigma tau > 0");
  return -Scalar(N) * std::log1p(-sigma * tau);
}

template <typename Scalar>
long long integer_ratio(Scalar DT, Scalar tau) {
  require(tau > 0 && DT > 0, ErrorCode::InvalidParameter, "step and sub-interval length must be positive");
  const Scalar r = DT / tau;
  const Scalar k = std::round(r);
  require(k >= 1 && std::abs(r - k) <= Scalar(1e-9) * k, ErrorCode::InvalidParameter,
          "sub-interval length must be an integer multiple of the step");
  return static_cast<long long>(k);
}

template <typename Scalar>
Scalar gamma_steps(Scalar sigma, Scalar tau, long long N) {
  require(sigma != 0, ErrorCode::InvalidParameter, "gamma needs sigma != 0");
  // beta^2 - 1 = expm1(2 log beta), accurate when beta is close to 1
  return std::expm1(Scalar(2) * log_beta(sigma, tau, N)) / (sigma * (Scalar(2) - sigma * tau));
}

}  // namespace detail

/// beta_tau = (1 - sigma tau)^{-DT/tau}; DT/tau must be an integer.
template <typename Scalar>
Scalar beta(Scalar sigma, Scalar tau, Scalar DT) {
  return std::exp(detail::log_beta(sigma, tau, detail::integer_ratio(DT, tau)));
}

template <typename Scalar>
Scalar gamma(Scalar sigma, Scalar tau, Scalar DT) {
  return detail::gamma_steps(sigma, tau, detail::integer_ratio(DT, tau));
}

template <typename Scalar>
Scalar global_bound(Scalar alpha, Scalar coarse_step) {
  return Scalar(0.79) * coarse_step / (alpha + std::sqrt(alpha * coarse_step)) + Scalar(0.3);
}

template <typename Scalar>
SpectralSummary<Scalar> spectral_summary(const DahlquistSetup<Scalar>& setup) {
  const Scalar sigma = setup.sigma, alpha = setup.alpha;
  const auto& g = setup.grid;
  if (!(sigma < 0)) throw Error(ErrorCode::UnsupportedRegime, "spectral analysis needs sigma < 0");
  detail::check_alpha(alpha);

  SpectralSummary<Scalar> s;
  const Scalar lb_coarse = detail::log_beta(sigma, g.coarse_step(), g.coarse_steps);
  const Scalar lb_fine = detail::log_beta(sigma, g.fine_step(), g.fine_steps);
  s.beta_coarse = std::exp(lb_coarse);
  s.beta_fine = std::exp(lb_fine);
  s.gamma_coarse = detail::gamma_steps(sigma, g.coarse_step(), g.coarse_steps);
  s.gamma_fine = detail::gamma_steps(sigma, g.fine_step(), g.fine_steps);
  // exp(a) - exp(b) = exp(b) expm1(a - b) avoids cancellation for nearby grids
  s.delta_beta = g.fine_steps == g.coarse_steps ? Scalar(0) : s.beta_fine * std::expm1(lb_coarse - lb_fine);
  s.delta_gamma = s.gamma_coarse - s.gamma_fine;

  const Scalar beta = s.beta_coarse, gam = s.gamma_coarse, db = s.delta_beta, adg = std::abs(s.delta_gamma);
  const Scalar one_m_b2 = -std::expm1(Scalar(2) * lb_coarse);
  const Scalar one_m_b = -std::expm1(lb_coarse);
  if (adg > 0) {
    s.C = beta + gam * db / adg;
    s.L0 = db / (adg * (Scalar(1) - s.C));
  } else {
    s.C = beta;
    s.L0 = 0;
  }
  s.disc_radius = db / one_m_b2;
  s.disc_center = -beta * s.disc_radius;
  s.disc_reach = db / one_m_b;
  s.exists_isolated = (adg > 0 || db > 0) && Scalar(g.num_subintervals) > alpha * s.L0;
  s.mu_star_bound = -(adg + alpha * db * (Scalar(1) + beta)) / (gam + alpha * one_m_b2);
  s.rho_bound = std::abs(s.mu_star_bound);
  s.global_bound = global_bound(alpha, g.coarse_step());
  return s;
}

enum class GridLevel { fine, coarse };

/// A_tau X = b for the scalar problem; unknowns ordered (Y_0..Y_L, Lambda_1..Lambda_L).
template <typename Scalar>
std::pair<Mat<Scalar>, Vec<Scalar>> assemble_system(const DahlquistSetup<Scalar>& setup, GridLevel which) {
  const auto& g = setup.grid;
  detail::check_alpha(setup.alpha);
  const int L = g.num_subintervals;
  const bool fine = which == GridLevel::fine;
  const Scalar tau = fine ? g.fine_step() : g.coarse_step();
  const long long N = fine ? g.fine_steps : g.coarse_steps;
  const Scalar b = std::exp(detail::log_beta(setup.sigma, tau, N));
  const Scalar c = setup.sigma == 0 ? tau * Scalar(N) : detail::gamma_steps(setup.sigma, tau, N);

  const int size = 2 * L + 1;
  Mat<Scalar> A = Mat<Scalar>::Identity(size, size);
  for (int l = 1; l <= L; ++l) {
    A(l, l - 1) = -b;
    A(l, L + l) = c / setup.alpha;
  }
  for (int l = 1; l < L; ++l) A(L + l, L + l + 1) = -b;
  A(2 * L, L) = -1;

  Vec<Scalar> rhs = Vec<Scalar>::Zero(size);
  rhs(0) = setup.y_init;
  rhs(2 * L) = -setup.y_target;
  return {std::move(A), std::move(rhs)};
}

/// Eigenvalues of I - A_coarse^{-1} A_fine by a dense eigensolve.
template <typename Scalar>
std::vector<std::complex<Scalar>> iteration_spectrum(const DahlquistSetup<Scalar>& setup) {
  const auto [Af, b] = assemble_system(setup, GridLevel::fine);
  const auto [Ac, bc] = assemble_system(setup, GridLevel::coarse);
  Eigen::PartialPivLU<Mat<Scalar>> lu(Ac);
  if (!(lu.rcond() > std::numeric_limits<Scalar>::epsilon())) {
    throw Error(ErrorCode::SingularMatrix, "coarse matrix is singular");
  }
  const Mat<Scalar> M = Mat<Scalar>::Identity(Ac.rows(), Ac.cols()) - lu.solve(Af);
  Eigen::EigenSolver<Mat<Scalar>> es(M, false);
  require(es.info() == Eigen::Success, ErrorCode::SingularMatrix, "eigenvalue iteration failed");
  std::vector<std::complex<Scalar>> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

/// Roots of a real polynomial c_0 + c_1 x + ... + c_d x^d (c_d != 0) as
/// eigenvalues of the balanced companion matrix.
template <typename Scalar>
std::vector<std::complex<Scalar>> polynomial_roots(const Vec<Scalar>& coeffs) {
  const auto d = coeffs.size() - 1;
  require(d >= 1 && coeffs(d) != 0, ErrorCode::InvalidParameter, "polynomial needs a nonzero leading coefficient");
  if (d == 1) return {std::complex<Scalar>(-coeffs(0) / coeffs(1), 0)};

  Mat<Scalar> M = Mat<Scalar>::Zero(d, d);
  for (Eigen::Index i = 1; i < d; ++i) M(i, i - 1) = 1;
  for (Eigen::Index i = 0; i < d; ++i) M(i, d - 1) = -coeffs(i) / coeffs(d);

  // Diagonal similarity by powers of two until row and column norms balance.
  const Scalar radix = 2, sqrdx = radix * radix;
  for (bool done = false; !done;) {
    done = true;
    for (Eigen::Index i = 0; i < d; ++i) {
      Scalar c = M.col(i).cwiseAbs().sum() - std::abs(M(i, i));
      const Scalar r = M.row(i).cwiseAbs().sum() - std::abs(M(i, i));
      if (c == 0 || r == 0) continue;
      const Scalar s = c + r;
      Scalar f = 1;
      while (c < r / radix) {
        f *= radix;
        c *= sqrdx;
      }
      while (c > r * radix) {
        f /= radix;
        c /= sqrdx;
      }
      if ((c + r) / f < Scalar(0.95) * s) {
        done = false;
        M.row(i) /= f;
        M.col(i) *= f;
      }
    }
  }

  Eigen::EigenSolver<Mat<Scalar>> es(M, false);
  require(es.info() == Eigen::Success, ErrorCode::SingularMatrix, "companion eigenvalue iteration failed");
  std::vector<std::complex<Scalar>> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  return out;
}

/// Coefficients (lowest degree first) of
///   P(mu) = alpha mu^{2L-1} + (mu gamma - dgamma) sum_l mu^{2(L-l-1)} (mu beta - dbeta)^{2l},
/// expanded with binomial sums. Only well conditioned for small L.
template <typename Scalar>
Vec<Scalar> charpoly_coefficients(const DahlquistSetup<Scalar>& setup) {
  const auto s = spectral_summary(setup);
  const int L = setup.grid.num_subintervals;
  const int deg = 2 * L - 1;
  Vec<Scalar> p = Vec<Scalar>::Zero(deg + 1);
  p(deg) = setup.alpha;
  for (int l = 0; l < L; ++l) {
    // (mu beta - dbeta)^{2l} = sum_j binom(2l, j) (mu beta)^j (-dbeta)^{2l-j}
    Vec<Scalar> q = Vec<Scalar>::Zero(deg);
    Scalar binom = 1;
    for (int j = 0; j <= 2 * l; ++j) {
      const int power = 2 * (L - l - 1) + j;
      q(power) += binom * std::pow(s.beta_coarse, j) * std::pow(-s.delta_beta, 2 * l - j);
      binom = binom * Scalar(2 * l - j) / Scalar(j + 1);
    }
    for (int k = 0; k < deg; ++k) {
      p(k + 1) += s.gamma_coarse * q(k);
      p(k) -= s.delta_gamma * q(k);
    }
  }
  return p;
}

template <typename Scalar>
struct CharpolyRoot {
  std::complex<Scalar> mu;
  /// a = beta - dbeta/mu; |a| < 1 iff mu lies outside the disc D_sigma.
  /// Roots with |a| within 1e-10 of the unit circle count as on the disc boundary.
  std::complex<Scalar> a;
  bool outside_disc = false;
};

/// The 2L-1 roots of P(mu) with their disc classification. P(mu) = 0 is
/// solved in the variable a = beta - dbeta/mu, where it becomes
///   kappa + (C - a) sum_{l<L} a^{2l} = 0,  kappa = alpha dbeta/|dgamma|,
/// whose roots are well separated; each root is then refined by Newton in
/// s = a - beta so that mu = -dbeta/s keeps full relative accuracy.
template <typename Scalar>
std::vector<CharpolyRoot<Scalar>> charpoly_roots_detailed(const DahlquistSetup<Scalar>& setup) {
  using Cx = std::complex<Scalar>;
  const auto s = spectral_summary(setup);
  const int L = setup.grid.num_subintervals;
  const Scalar alpha = setup.alpha, beta = s.beta_coarse, db = s.delta_beta, adg = std::abs(s.delta_gamma);
  std::vector<CharpolyRoot<Scalar>> out;

  if (db == 0 || adg == 0) {
    // P(mu) = mu^{2L-2} (alpha mu + (mu gamma - dgamma) sum_l beta^{2l})
    Scalar S = 0;
    for (int l = 0; l < L; ++l) S += std::pow(beta, 2 * l);
    const Scalar root = adg == 0 ? Scalar(0) : s.delta_gamma * S / (alpha + s.gamma_coarse * S);
    out.push_back({Cx(root, 0), Cx(0, 0), root != 0 && root < s.disc_center - s.disc_radius});
    for (int k = 0; k < 2 * L - 2; ++k) out.push_back({Cx(0, 0), Cx(0, 0), false});
    return out;
  }

  const Scalar kappa = alpha * db / adg;
  const Scalar g = s.gamma_coarse * db / adg;  // C - beta
  const int deg = 2 * L - 1;
  Vec<Scalar> coeffs(deg + 1);
  for (int l = 0; l < L; ++l) {
    coeffs(2 * l) = s.C;
    coeffs(2 * l + 1) = -1;
  }
  coeffs(0) += kappa;
  const auto a_roots = polynomial_roots<Scalar>(coeffs);

  // q(x) = kappa + (g - x) sum_l (beta + x)^{2l} with x = a - beta
  auto eval = [&](Cx x, Cx& dq) {
    const Cx a = Cx(beta) + x, a2 = a * a;
    Cx S(0), dS(0), pw(1), dpw(0);  // pw = a^{2l}, dpw = d/dx a^{2l}
    for (int l = 0; l < L; ++l) {
      S += pw;
      dS += dpw;
      dpw = dpw * a2 + pw * Scalar(2) * a;
      pw *= a2;
    }
    dq = -S + (Cx(g) - x) * dS;
    return Cx(kappa) + (Cx(g) - x) * S;
  };

  for (const Cx& a0 : a_roots) {
    Cx x = a0 - Cx(beta);
    Cx dq;
    Scalar fx = std::abs(eval(x, dq));
    for (int it = 0; it < 8 && fx > 0; ++it) {
      if (dq == Cx(0)) break;
      const Cx trial = x - eval(x, dq) / dq;
      Cx dq_trial;
      const Scalar ft = std::abs(eval(trial, dq_trial));
      if (!(ft < fx)) break;
      x = trial;
      fx = ft;
      eval(x, dq);
    }
    if (std::imag(a0) == 0) x = Cx(std::real(x), 0);
    const Cx a = Cx(beta) + x;
    out.push_back({Cx(-db) / x, a, std::abs(a) < Scalar(1) - Scalar(1e-10)});
  }
  return out;
}

template <typename Scalar>
std::vector<std::complex<Scalar>> charpoly_roots(const DahlquistSetup<Scalar>& setup) {
  detail::check_alpha(setup.alpha);
  std::vector<std::complex<Scalar>> out;
  for (const auto& r : charpoly_roots_detailed(setup)) out.push_back(r.mu);
  return out;
}

template <typename Scalar>
Scalar spectral_radius(const std::vector<std::complex<Scalar>>& eigs) {
  Scalar r = 0;
  for (const auto& e : eigs) r = std::max(r, std::abs(e));
  return r;
}

/// Number of eigenvalues with |mu - mu0| - radius > tol.
template <typename Scalar>
int count_outside_disc(const std::vector<std::complex<Scalar>>& eigs, const SpectralSummary<Scalar>& s,
                       Scalar tol = Scalar(1e-10)) {
  int count = 0;
  for (const auto& e : eigs) {
    if (std::abs(e - std::complex<Scalar>(s.disc_center, 0)) - s.disc_radius > tol) ++count;
  }
  return count;
}

template <typename Scalar>
struct LinearIterationResult {
  std::vector<Vec<Scalar>> iterates;
  std::vector<Scalar> errors;  // inf-norm distance to the fine solution
  Scalar contraction = 0;      // geometric mean of the last (up to) 5 error ratios
  bool converged = false;
  bool diverged = false;
};

/// X^{k+1} = (I - A_coarse^{-1} A_fine) X^k + A_coarse^{-1} b.
template <typename Scalar>
LinearIterationResult<Scalar> linear_iterate(const DahlquistSetup<Scalar>& setup, const Vec<Scalar>& X0,
                                             int max_iters, Scalar tol) {
  const auto [Af, b] = assemble_system(setup, GridLevel::fine);
  const auto [Ac, bc] = assemble_system(setup, GridLevel::coarse);
  require(X0.size() == Af.rows(), ErrorCode::DimensionMismatch, "initial iterate has wrong length");
  Eigen::PartialPivLU<Mat<Scalar>> lu(Ac);
  if (!(lu.rcond() > std::numeric_limits<Scalar>::epsilon())) {
    throw Error(ErrorCode::SingularMatrix, "coarse matrix is singular");
  }
  const Vec<Scalar> Xstar = Af.partialPivLu().solve(b);
  // Below this level the error is dominated by rounding and the ratios are meaningless.
  const Scalar floor = Scalar(1e-12) * std::max(Scalar(1), inf_norm(Xstar));

  LinearIterationResult<Scalar> out;
  Vec<Scalar> X = X0;
  out.iterates.push_back(X);
  out.errors.push_back(inf_norm(Vec<Scalar>(X - Xstar)));
  const Scalar e0 = out.errors.front();
  std::vector<Scalar> ratios;
  for (int k = 0; k < max_iters; ++k) {
    const Scalar ek = out.errors.back();
    if (ek <= tol) {
      out.converged = true;
      break;
    }
    if (!std::isfinite(static_cast<double>(ek)) || ek > Scalar(1e8) * std::max(e0, floor)) {
      out.diverged = true;
      break;
    }
    X = X + lu.solve(Vec<Scalar>(b - Af * X));
    out.iterates.push_back(X);
    const Scalar e1 = inf_norm(Vec<Scalar>(X - Xstar));
    out.errors.push_back(e1);
    if (ek > floor && e1 > floor) ratios.push_back(e1 / ek);
  }
  if (!out.converged && !out.diverged && out.errors.back() <= tol) out.converged = true;
  if (!ratios.empty()) {
    const std::size_t m = std::min<std::size_t>(5, ratios.size());
    Scalar logsum = 0;
    for (std::size_t i = ratios.size() - m; i < ratios.size(); ++i) logsum += std::log(ratios[i]);
    out.contraction = std::exp(logsum / Scalar(m));
  }
  return out;
}

template <typename Scalar>
struct RhoSample {
  Scalar sigma;
  Scalar rho;
  Scalar rho_bound;
};

template <typename Scalar>
struct RhoMaxResult {
  Scalar max_rho = 0;
  Scalar argmax_sigma = 0;
  std::vector<RhoSample<Scalar>> table;
};

template <typename Scalar>
RhoMaxResult<Scalar> rho_max_over_sigma(Scalar alpha, const TimeGrid<Scalar>& grid, const std::vector<Scalar>& sigmas) {
  RhoMaxResult<Scalar> out;
  for (const Scalar sigma : sigmas) {
    const DahlquistSetup<Scalar> setup{sigma, alpha, grid};
    const Scalar rho = spectral_radius(charpoly_roots(setup));
    out.table.push_back({sigma, rho, spectral_summary(setup).rho_bound});
    if (out.table.size() == 1 || rho > out.max_rho) {
      out.max_rho = rho;
      out.argmax_sigma = sigma;
    }
  }
  return out;
}

struct AppendixCheck {
  bool exp_inequality = false;  // (1+x)^{k/x} > k (2+x)/(1+x) - 1
  bool log_inequality = false;  // ln(1+x) >= u + u^2/2 with u = x/(1+x)
};

template <typename Scalar>
AppendixCheck check_appendix_inequalities(Scalar k, Scalar x) {
  require(k > 0 && x > 0 && x <= k, ErrorCode::InvalidParameter, "need k > 0 and 0 < x <= k");
  const Scalar lhs = std::exp(k / x * std::log1p(x));
  const Scalar rhs = k * (Scalar(2) + x) / (Scalar(1) + x) - Scalar(1);
  const Scalar u = x / (x + Scalar(1));
  return {lhs > rhs, std::log1p(x) >= u + u * u / Scalar(2)};
}

}  // namespace paraopt
