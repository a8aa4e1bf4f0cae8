#include "fairprint/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fairprint/errors.hpp"

namespace fairprint::stats {

namespace {

constexpr double kCfEps = 3e-16;
constexpr double kCfTiny = 1e-300;
constexpr int kCfMaxIter = 300000;

// Modified Lentz evaluation of the incomplete-beta continued fraction.
double beta_cf(double a, double b, double x) {
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kCfTiny) d = kCfTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kCfMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kCfTiny) d = kCfTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kCfTiny) c = kCfTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kCfTiny) d = kCfTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kCfTiny) c = kCfTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kCfEps) return h;
  }
  throw NumericError("incomplete beta continued fraction did not converge (a=" +
                     std::to_string(a) + ", b=" + std::to_string(b) +
                     ", x=" + std::to_string(x) + ")");
}

double p_value_two_sided_normal(double z) {
  return 2.0 * (1.0 - normal_cdf(std::fabs(z)));
}

void check_gamma(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) {
    throw NumericError("quantile level must lie in (0,1), got " + std::to_string(gamma));
  }
}

// Generic monotone-CDF inversion: expand the bracket until it straddles
// gamma, then bisect to floating-point resolution.
template <typename Cdf>
double invert_cdf(const Cdf& cdf, double lo, double hi, double gamma) {
  double flo = cdf(lo);
  double fhi = cdf(hi);
  int guard = 0;
  while (flo > gamma) {
    hi = lo;
    lo = lo < 0.0 ? lo * 2.0 : lo - std::max(1.0, std::fabs(lo));
    flo = cdf(lo);
    if (++guard > 2048) throw NumericError("quantile bracket expansion failed (low side)");
  }
  while (fhi < gamma) {
    lo = hi;
    hi = hi > 0.0 ? hi * 2.0 : hi + std::max(1.0, std::fabs(hi));
    fhi = cdf(hi);
    if (++guard > 2048) throw NumericError("quantile bracket expansion failed (high side)");
  }
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // interval at floating-point resolution
    const double fm = cdf(mid);
    if (fm < gamma) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  const double q = 0.5 * (lo + hi);
  if (std::fabs(cdf(q) - gamma) > 1e-9) {
    throw NumericError("quantile inversion did not reach tolerance at gamma=" +
                       std::to_string(gamma));
  }
  return q;
}

double sample_mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

double reg_incomplete_beta(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw NumericError("reg_incomplete_beta requires a > 0 and b > 0");
  }
  if (!(x >= 0.0 && x <= 1.0)) {
    throw NumericError("reg_incomplete_beta requires x in [0,1], got " + std::to_string(x));
  }
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_cf(a, b, x) / a;
  }
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double t_cdf(double t, double nu) {
  if (!(nu > 0.0)) throw NumericError("t_cdf requires nu > 0");
  if (std::isinf(t)) return t > 0.0 ? 1.0 : 0.0;
  // P(|T| > |t|) = I_{nu/(nu+t^2)}(nu/2, 1/2)
  const double tail = reg_incomplete_beta(nu / (nu + t * t), 0.5 * nu, 0.5);
  return t >= 0.0 ? 1.0 - 0.5 * tail : 0.5 * tail;
}

double f_cdf(double f, double nu1, double nu2) {
  if (!(nu1 > 0.0) || !(nu2 > 0.0)) throw NumericError("f_cdf requires nu1, nu2 > 0");
  if (!(f >= 0.0)) throw NumericError("f_cdf requires f >= 0");
  if (std::isinf(f)) return 1.0;
  return reg_incomplete_beta(nu1 * f / (nu1 * f + nu2), 0.5 * nu1, 0.5 * nu2);
}

double normal_quantile(double gamma) {
  check_gamma(gamma);
  // Acklam's rational approximation, then two Halley steps against erfc.
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                             2.445134137142996e+00, 3.754408661907416e+00};
  const double p_low = 0.02425;
  double x;
  if (gamma < p_low) {
    const double q = std::sqrt(-2.0 * std::log(gamma));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (gamma <= 1.0 - p_low) {
    const double q = gamma - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-gamma));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  for (int i = 0; i < 2; ++i) {
    const double err = normal_cdf(x) - gamma;
    const double u = err * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double t_quantile(double gamma, double nu) {
  check_gamma(gamma);
  if (!(nu > 0.0)) throw NumericError("t_quantile requires nu > 0");
  if (gamma == 0.5) return 0.0;
  const double z = normal_quantile(gamma);
  const double span = std::fabs(z) + 1.0;
  return invert_cdf([nu](double t) { return t_cdf(t, nu); }, -span, span, gamma);
}

double f_quantile(double gamma, double nu1, double nu2) {
  check_gamma(gamma);
  if (!(nu1 > 0.0) || !(nu2 > 0.0)) throw NumericError("f_quantile requires nu1, nu2 > 0");
  return invert_cdf([nu1, nu2](double f) { return f_cdf(std::max(f, 0.0), nu1, nu2); },
                    0.0, 4.0, gamma);
}

double quantile(Dist dist, double gamma, double df1, double df2) {
  switch (dist) {
    case Dist::normal:
      return normal_quantile(gamma);
    case Dist::t:
      return t_quantile(gamma, df1);
    case Dist::f:
      return f_quantile(gamma, df1, df2);
  }
  throw NumericError("unknown distribution");
}

TestResult two_prop_z(const ProportionSummary& g0, const ProportionSummary& g1,
                      double alpha) {
  if (g0.n < 1 || g1.n < 1) throw ValidationError("two_prop_z requires n >= 1 on both sides");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  const double n0 = static_cast<double>(g0.n);
  const double n1 = static_cast<double>(g1.n);
  const double pooled = (n0 * g0.p_hat + n1 * g1.p_hat) / (n0 + n1);
  if (pooled <= 0.0 || pooled >= 1.0) {
    throw NumericError(
        "degenerate pooled proportion (p-hat is 0 or 1); the z statistic is undefined "
        "on perfectly separated data");
  }
  const double se = std::sqrt(pooled * (1.0 - pooled) * (1.0 / n0 + 1.0 / n1));
  TestResult r;
  r.kind = TestKind::two_prop_z;
  r.statistic = (g0.p_hat - g1.p_hat) / se;
  r.p_value = p_value_two_sided_normal(r.statistic);
  r.alpha = alpha;
  r.reject = r.p_value < alpha;
  return r;
}

TestResult welch_t(const GroupSummary& g0, const GroupSummary& g1, double alpha) {
  if (g0.m < 2 || g1.m < 2) throw ValidationError("welch_t requires m >= 2 on both sides");
  if (g0.unit != g1.unit) {
    throw ValidationError("welch_t unit mismatch: one summary is percent, the other fraction");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  if (!(g0.std >= 0.0) || !(g1.std >= 0.0)) throw ValidationError("std must be >= 0");
  if (g0.std == 0.0 && g1.std == 0.0) {
    if (g0.mean == g1.mean) {
      // Identical constants: no evidence of a difference.
      TestResult r;
      r.kind = TestKind::welch_t;
      r.statistic = 0.0;
      r.df = static_cast<double>(g0.m + g1.m - 2);
      r.p_value = 1.0;
      r.alpha = alpha;
      r.reject = false;
      r.degenerate = true;
      return r;
    }
    throw NumericError(
        "no replicate variance: both stds are zero with unequal means; increase the "
        "replicate count m or use two_prop_z on the point estimates");
  }
  const double m0 = static_cast<double>(g0.m);
  const double m1 = static_cast<double>(g1.m);
  const double v0 = g0.std * g0.std / m0;
  const double v1 = g1.std * g1.std / m1;
  const double nu = (v0 + v1) * (v0 + v1) /
                    (v0 * v0 / (m0 - 1.0) + v1 * v1 / (m1 - 1.0));
  TestResult r;
  r.kind = TestKind::welch_t;
  r.statistic = (g0.mean - g1.mean) / std::sqrt(v0 + v1);
  r.df = nu;
  r.p_value = 2.0 * (1.0 - t_cdf(std::fabs(r.statistic), nu));
  r.alpha = alpha;
  r.reject = r.p_value < alpha;
  return r;
}

namespace {

TestResult anova_from_moments(const std::vector<double>& means,
                              const std::vector<double>& within_ss_per_group,
                              std::size_t m, double alpha, GrandMean mode,
                              std::optional<double> supplied_grand_mean) {
  const std::size_t k = means.size();
  if (k < 2) throw ValidationError("anova_f requires k >= 2 groups");
  if (m < 2) throw ValidationError("anova_f requires m >= 2 replicates per group");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0,1)");
  double grand;
  if (mode == GrandMean::supplied) {
    if (!supplied_grand_mean) {
      throw ValidationError("GrandMean::supplied requires an explicit grand-mean value");
    }
    grand = *supplied_grand_mean;
  } else {
    grand = sample_mean(means);
  }

  double between = 0.0;
  for (double mu : means) between += (mu - grand) * (mu - grand);
  between *= static_cast<double>(m) / static_cast<double>(k - 1);

  double within = 0.0;
  for (double ss : within_ss_per_group) within += ss;
  within /= static_cast<double>(k * (m - 1));

  const double nu1 = static_cast<double>(k - 1);
  const double nu2 = static_cast<double>(k * (m - 1));

  TestResult r;
  r.kind = TestKind::anova_f;
  r.df = nu1;
  r.df2 = nu2;
  r.alpha = alpha;
  if (between == 0.0) {
    // No between-group variation at all; nothing to reject.
    r.statistic = 0.0;
    r.p_value = 1.0;
    r.reject = false;
    r.degenerate = within == 0.0;
    return r;
  }
  if (within == 0.0) {
    // Unequal means with zero replicate variance: the statistic diverges.
    r.statistic = std::numeric_limits<double>::infinity();
    r.p_value = 0.0;
    r.reject = true;
    r.degenerate = true;
    return r;
  }
  r.statistic = between / within;
  r.p_value = 1.0 - f_cdf(r.statistic, nu1, nu2);
  r.reject = r.p_value < alpha;
  return r;
}

}  // namespace

TestResult anova_f(const std::vector<std::vector<double>>& groups, double alpha,
                   GrandMean mode, std::optional<double> supplied_grand_mean) {
  if (groups.size() < 2) throw ValidationError("anova_f requires k >= 2 groups");
  const std::size_t m = groups.front().size();
  for (const auto& g : groups) {
    if (g.size() != m) {
      throw ValidationError(
          "balanced design required: all groups must have the same replicate count");
    }
  }
  if (m < 2) throw ValidationError("anova_f requires m >= 2 replicates per group");
  std::vector<double> means;
  std::vector<double> within_ss;
  means.reserve(groups.size());
  within_ss.reserve(groups.size());
  for (const auto& g : groups) {
    const double mu = sample_mean(g);
    double ss = 0.0;
    for (double x : g) ss += (x - mu) * (x - mu);
    means.push_back(mu);
    within_ss.push_back(ss);
  }
  return anova_from_moments(means, within_ss, m, alpha, mode, supplied_grand_mean);
}

TestResult anova_f_from_summaries(const std::vector<GroupSummary>& groups,
                                  double alpha, GrandMean mode,
                                  std::optional<double> supplied_grand_mean) {
  if (groups.size() < 2) throw ValidationError("anova_f requires k >= 2 groups");
  const std::size_t m = groups.front().m;
  std::vector<double> means;
  std::vector<double> within_ss;
  for (const auto& g : groups) {
    if (g.m != m) {
      throw ValidationError(
          "balanced design required: all summaries must have the same replicate count");
    }
    if (g.unit != groups.front().unit) {
      throw ValidationError("anova_f unit mismatch across group summaries");
    }
    means.push_back(g.mean);
    within_ss.push_back(g.std * g.std * static_cast<double>(m - 1));
  }
  if (m < 2) throw ValidationError("anova_f requires m >= 2 replicates per group");
  return anova_from_moments(means, within_ss, m, alpha, mode, supplied_grand_mean);
}

}  // namespace fairprint::stats
