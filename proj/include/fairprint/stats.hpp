#pragma once

#include <cstddef>
#include <optional>
#include <vector>

namespace fairprint::stats {

// ---------------------------------------------------------------------------
// Special functions and distribution CDFs. All pure and reentrant.
// ---------------------------------------------------------------------------

// Regularized incomplete beta I_x(a, b), absolute error <= 1e-12.
// Continued fraction (modified Lentz) with the symmetry switch at
// x = (a+1)/(a+b+2). Domain: x in [0,1], a > 0, b > 0.
double reg_incomplete_beta(double x, double a, double b);

// Standard normal CDF via erfc.
double normal_cdf(double z);

// Student-t CDF; nu may be fractional (Welch degrees of freedom).
double t_cdf(double t, double nu);

// F CDF for f >= 0; nu1, nu2 > 0, fractional allowed.
double f_cdf(double f, double nu1, double nu2);

// Quantile functions: |cdf(quantile(g)) - g| <= 1e-9 for g in (0,1).
// Normal uses a rational initial guess plus Halley refinement; t and F
// invert their CDFs by bracket expansion and bisection.
double normal_quantile(double gamma);
double t_quantile(double gamma, double nu);
double f_quantile(double gamma, double nu1, double nu2);

enum class Dist { normal, t, f };

// Dispatching wrapper; df2 is only read for Dist::f.
double quantile(Dist dist, double gamma, double df1 = 0.0, double df2 = 0.0);

// ---------------------------------------------------------------------------
// Hypothesis tests.
// ---------------------------------------------------------------------------

enum class Unit { fraction, percent };

// Mean/std/replicate-count summary of one group's bootstrap (or sample)
// values. `unit` guards against comparing percent rows with fraction rows;
// the Welch statistic itself is scale-invariant.
struct GroupSummary {
  double mean = 0.0;
  double std = 0.0;
  std::size_t m = 0;
  Unit unit = Unit::fraction;
};

// Point estimate of a Bernoulli proportion from n trials.
struct ProportionSummary {
  double p_hat = 0.0;
  std::size_t n = 0;
};

enum class TestKind { two_prop_z, welch_t, anova_f };

struct TestResult {
  TestKind kind = TestKind::welch_t;
  double statistic = 0.0;
  std::optional<double> df;   // nu for t, nu1 for F, unset for z
  std::optional<double> df2;  // nu2 for F
  double p_value = 1.0;
  double alpha = 0.05;
  bool reject = false;
  // Set when a zero-variance input forced the decision (see anova_f).
  bool degenerate = false;
};

// Two-proportion z-test on point estimates. Two-sided. Throws NumericError
// when the pooled proportion is 0 or 1 (the statistic is 0/0 there).
TestResult two_prop_z(const ProportionSummary& g0, const ProportionSummary& g1,
                      double alpha);

// Welch's unequal-variance t-test on two summaries, fractional
// Welch-Satterthwaite degrees of freedom used directly in the t CDF.
// Two-sided. Requires m >= 2 on both sides, matching units, and at least
// one nonzero std.
TestResult welch_t(const GroupSummary& g0, const GroupSummary& g1, double alpha);

enum class GrandMean { unweighted, supplied };

// Balanced one-way ANOVA over k groups of m replicate values each.
// The grand mean is the unweighted mean of group means by default; pass
// GrandMean::supplied plus a value to use an externally computed overall
// rate. Upper-tail test against F(k-1, k(m-1)).
TestResult anova_f(const std::vector<std::vector<double>>& groups, double alpha,
                   GrandMean mode = GrandMean::unweighted,
                   std::optional<double> supplied_grand_mean = std::nullopt);

// Same test evaluated from (mean, std, m) summaries; the replicate sums in
// the statistic depend only on these.
TestResult anova_f_from_summaries(const std::vector<GroupSummary>& groups,
                                  double alpha,
                                  GrandMean mode = GrandMean::unweighted,
                                  std::optional<double> supplied_grand_mean = std::nullopt);

}  // namespace fairprint::stats
