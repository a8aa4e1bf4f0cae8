#pragma once

// Test-only oracles. Distribution CDFs computed by adaptive Simpson
// quadrature of the densities, independent of the library's
// continued-fraction implementation. Also exact binomial tail sums for
// the calibration acceptance interval.

#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracle {

namespace detail {

template <typename F>
double adapt(const F& f, double a, double b, double fa, double fm, double fb,
             double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::fabs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return adapt(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adapt(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

template <typename F>
double integrate(const F& f, double a, double b, double tol = 1e-13) {
  if (a == b) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::adapt(f, a, b, fa, fm, fb, whole, tol, 60);
}

inline double normal_cdf(double z) {
  const auto phi = [](double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  };
  if (z < 0.0) return 0.5 - integrate(phi, 0.0, -z);
  return 0.5 + integrate(phi, 0.0, z);
}

inline double t_cdf(double x, double nu) {
  const double ln_norm = std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) -
                         0.5 * std::log(nu * M_PI);
  const auto density = [&](double t) {
    return std::exp(ln_norm - 0.5 * (nu + 1.0) * std::log1p(t * t / nu));
  };
  if (x < 0.0) return 0.5 - integrate(density, 0.0, -x);
  return 0.5 + integrate(density, 0.0, x);
}

inline double f_cdf(double x, double nu1, double nu2) {
  if (x <= 0.0) return 0.0;
  const double a = 0.5 * nu1;
  const double ln_norm = 0.5 * nu1 * std::log(nu1) + 0.5 * nu2 * std::log(nu2) -
                         (std::lgamma(0.5 * nu1) + std::lgamma(0.5 * nu2) -
                          std::lgamma(0.5 * (nu1 + nu2)));
  if (nu1 >= 2.0) {
    const auto density = [&](double t) {
      if (t <= 0.0) return 0.0;
      return std::exp(ln_norm + (a - 1.0) * std::log(t) -
                      0.5 * (nu1 + nu2) * std::log(nu1 * t + nu2));
    };
    // Piecewise dyadic segments so a far upper limit cannot make the
    // initial Simpson probes straddle the density peak and miss it.
    double total = 0.0;
    double lo = 0.0;
    double hi = std::min(x, 1.0);
    while (true) {
      total += integrate(density, lo, hi);
      if (hi >= x) break;
      lo = hi;
      hi = std::min(x, 2.0 * hi);
    }
    return total;
  }
  // Substitute t = u^(1/a): the t^(a-1) factor becomes exactly du/a, so the
  // integrand is regular at zero for any a > 0.
  const auto transformed = [&](double u) {
    if (u <= 0.0) u = 1e-300;
    const double t = std::pow(u, 1.0 / a);
    return std::exp(ln_norm - 0.5 * (nu1 + nu2) * std::log(nu1 * t + nu2)) / a;
  };
  return integrate(transformed, 0.0, std::pow(x, a));
}

// Regularized incomplete beta by quadrature; substitutes t = u^(1/a) so the
// integrand is regular at zero, and switches sides to stay away from the
// other endpoint.
inline double inc_beta(double x, double a, double b) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  if (x > a / (a + b)) return 1.0 - inc_beta(1.0 - x, b, a);
  const double ln_beta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
  const auto g = [&](double u) {
    if (u <= 0.0) return 0.0;
    return std::exp((b - 1.0) * std::log1p(-std::pow(u, 1.0 / a)) - ln_beta) / a;
  };
  return integrate(g, 0.0, std::pow(x, a));
}

// Exact Binomial(n, p) lower tail by direct summation.
inline double binom_cdf(int k, int n, double p) {
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  double sum = 0.0;
  for (int i = 0; i <= k; ++i) {
    const double ln_term = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) -
                           std::lgamma(n - i + 1.0) + i * std::log(p) +
                           (n - i) * std::log1p(-p);
    sum += std::exp(ln_term);
  }
  return sum;
}

// Central interval [lo, hi] holding at least 1 - 2*tail of the mass.
inline std::pair<int, int> binom_central_interval(int n, double p, double tail) {
  int lo = 0;
  while (lo < n && binom_cdf(lo, n, p) < tail) ++lo;
  int hi = 0;
  while (hi < n && binom_cdf(hi, n, p) < 1.0 - tail) ++hi;
  return {lo, hi};
}

}  // namespace oracle
