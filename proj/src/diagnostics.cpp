#include "fairprint/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "fairprint/errors.hpp"
#include "fairprint/rng.hpp"

namespace fairprint::diag {

namespace {

// Welch test that reports the zero-variance/unequal-means corner as a
// degenerate rejection instead of throwing, mirroring the ANOVA rule.
stats::TestResult welch_or_degenerate(const stats::GroupSummary& g0,
                                      const stats::GroupSummary& g1, double alpha) {
  if (g0.std == 0.0 && g1.std == 0.0 && g0.mean != g1.mean) {
    stats::TestResult r;
    r.kind = stats::TestKind::welch_t;
    r.statistic = std::numeric_limits<double>::infinity();
    r.df = static_cast<double>(g0.m + g1.m - 2);
    r.p_value = 0.0;
    r.alpha = alpha;
    r.reject = true;
    r.degenerate = true;
    return r;
  }
  return stats::welch_t(g0, g1, alpha);
}

// Two-proportion z that treats the all-saturated case (both proportions 0
// or both 1, hence a 0/0 statistic) as an equal-rate retain.
stats::TestResult z_or_degenerate(const stats::ProportionSummary& g0,
                                  const stats::ProportionSummary& g1, double alpha) {
  const double pooled = (static_cast<double>(g0.n) * g0.p_hat +
                         static_cast<double>(g1.n) * g1.p_hat) /
                        static_cast<double>(g0.n + g1.n);
  if (pooled <= 0.0 || pooled >= 1.0) {
    stats::TestResult r;
    r.kind = stats::TestKind::two_prop_z;
    r.statistic = 0.0;
    r.p_value = 1.0;
    r.alpha = alpha;
    r.reject = false;
    r.degenerate = true;
    return r;
  }
  return stats::two_prop_z(g0, g1, alpha);
}

}  // namespace

FlipReport minimal_flips(const core::ScoreSet& scores, const core::DemographicGroup& group0,
                         const core::DemographicGroup& group1, double threshold, double alpha,
                         FlipMode mode, const boot::BootstrapConfig& config) {
  core::ScoreSet gen0 = core::genuine_for_group(scores, group0);
  core::ScoreSet gen1 = core::genuine_for_group(scores, group1);
  if (gen0.genuine_count() == 0 || gen1.genuine_count() == 0) {
    throw ValidationError("minimal_flips needs genuine comparisons in both groups");
  }

  const auto point_tmr = [threshold](const core::ScoreSet& s) {
    return *core::verification_rates(s, threshold).tmr;
  };

  // The group with the lower full-sample TMR is the one whose scores get
  // flipped; flipping the higher group could only widen the differential.
  const bool swap_groups = point_tmr(gen0) > point_tmr(gen1);
  const core::DemographicGroup flipped_group = swap_groups ? group1 : group0;
  const core::DemographicGroup other_group = swap_groups ? group0 : group1;
  const core::ScoreSet& flipped = swap_groups ? gen1 : gen0;
  const core::ScoreSet& other = swap_groups ? gen0 : gen1;

  // Flip order: lowest score first, probe sample id as the deterministic
  // tie-break. Every below-threshold flip moves TMR by the same 1/n, so
  // the ordering is narrative, not functional.
  std::vector<std::size_t> below;
  for (std::size_t i = 0; i < flipped.comparisons().size(); ++i) {
    if (flipped.comparisons()[i].score < threshold) below.push_back(i);
  }
  std::sort(below.begin(), below.end(), [&](std::size_t a, std::size_t b) {
    const auto& ca = flipped.comparisons()[a];
    const auto& cb = flipped.comparisons()[b];
    if (ca.score != cb.score) return ca.score < cb.score;
    return ca.probe_sample < cb.probe_sample;
  });

  // Flipped scores land exactly on the threshold: the minimal raise that
  // satisfies the >= match convention.
  const auto flipped_set_at = [&](std::size_t k) {
    std::vector<core::ComparisonRecord> comps = flipped.comparisons();
    for (std::size_t j = 0; j < k; ++j) comps[below[j]].score = threshold;
    return core::ScoreSet(flipped.subjects(), std::move(comps));
  };

  const std::size_t n_flipped = flipped.genuine_count();
  const std::size_t n_other = other.genuine_count();
  const std::size_t matches_flipped = n_flipped - below.size();
  std::size_t matches_other = 0;
  for (const auto& c : other.comparisons()) {
    if (c.score >= threshold) ++matches_other;
  }

  // The unflipped group's estimate does not depend on k.
  std::optional<boot::BootstrapEstimate> other_estimate;
  if (mode == FlipMode::bootstrap_welch) {
    other_estimate = boot::bootstrap_tmr(other, threshold, config, other_group);
  }

  const auto evaluate = [&](std::size_t k) -> stats::TestResult {
    if (mode == FlipMode::point_z) {
      stats::ProportionSummary pf{
          static_cast<double>(matches_flipped + k) / static_cast<double>(n_flipped),
          n_flipped};
      stats::ProportionSummary po{
          static_cast<double>(matches_other) / static_cast<double>(n_other), n_other};
      return z_or_degenerate(pf, po, alpha);
    }
    const core::ScoreSet fset = k == 0 ? flipped : flipped_set_at(k);
    const auto ef = boot::bootstrap_tmr(fset, threshold, config, flipped_group);
    return welch_or_degenerate({ef.mean, ef.std, ef.config.m},
                               {other_estimate->mean, other_estimate->std,
                                other_estimate->config.m},
                               alpha);
  };

  FlipReport report;
  report.group0 = group0;
  report.group1 = group1;
  report.mode = mode;
  report.flipped_group = flipped_group;
  report.flippable = below.size();
  report.test_before = evaluate(0);

  const double n_flipped_genuine = static_cast<double>(n_flipped);

  if (!report.test_before.reject) {
    report.status = FlipStatus::already_nonsignificant;
    report.flips_needed = 0;
    report.flipped_fraction = 0.0;
    report.test_after = report.test_before;
    return report;
  }

  const std::size_t K = below.size();
  stats::TestResult at_k_max = K == 0 ? report.test_before : evaluate(K);
  if (at_k_max.reject) {
    report.status = FlipStatus::not_erasable;
    report.flips_needed = 0;
    report.flipped_fraction = 0.0;
    report.test_after = at_k_max;
    return report;
  }

  std::size_t found = K;
  stats::TestResult found_result = at_k_max;
  if (mode == FlipMode::point_z || K <= 64) {
    // Cheap per-k evaluation: exhaustive scan from below.
    for (std::size_t k = 1; k < K; ++k) {
      const auto r = evaluate(k);
      if (!r.reject) {
        found = k;
        found_result = r;
        break;
      }
    }
  } else {
    // Binary search for the first retain; the decision sequence is
    // monotone when |Z| decreases in k, which we verify at the boundary
    // and fall back to a linear scan if it does not hold.
    std::size_t lo = 0, hi = K;  // reject at lo, retain at hi
    while (hi - lo > 1) {
      const std::size_t mid = lo + (hi - lo) / 2;
      const auto r = evaluate(mid);
      if (r.reject) {
        lo = mid;
      } else {
        hi = mid;
        found_result = r;
      }
    }
    found = hi;
    const bool boundary_ok = evaluate(hi - 1).reject && !evaluate(hi).reject;
    if (!boundary_ok) {
      for (std::size_t k = 1; k <= K; ++k) {
        const auto r = evaluate(k);
        if (!r.reject) {
          found = k;
          found_result = r;
          break;
        }
      }
    }
  }

  report.status = FlipStatus::erased;
  report.flips_needed = found;
  report.flipped_fraction = static_cast<double>(found) / n_flipped_genuine;
  report.test_after = found_result;
  return report;
}

std::vector<OutlierRecord> flag_outliers(const core::ScoreSet& scores, double threshold,
                                         const std::map<std::string, double>* quality) {
  if (scores.genuine_count() == 0) {
    throw ValidationError("flag_outliers needs at least one mated comparison");
  }
  std::vector<OutlierRecord> out;
  for (const auto& c : scores.comparisons()) {
    if (!c.mated || c.score >= threshold) continue;
    OutlierRecord rec;
    rec.comparison = c;
    rec.group = scores.subject(c.probe_subject).group;
    rec.margin = threshold - c.score;
    if (quality) {
      const auto it = quality->find(c.probe_sample);
      if (it != quality->end()) rec.probe_quality = it->second;
    }
    out.push_back(std::move(rec));
  }
  std::sort(out.begin(), out.end(), [](const OutlierRecord& a, const OutlierRecord& b) {
    if (a.comparison.score != b.comparison.score) {
      return a.comparison.score < b.comparison.score;
    }
    return a.comparison.probe_sample < b.comparison.probe_sample;
  });
  return out;
}

QualityComparison quality_compare(
    const std::map<std::string, double>& quality, const core::ScoreSet& scores,
    const std::vector<core::DemographicGroup>& groups,
    const std::vector<std::pair<core::DemographicGroup, core::DemographicGroup>>& pairs,
    double alpha, const QualityCompareOptions& options) {
  for (const auto& [sample, q] : quality) {
    if (!(q >= 0.0 && q <= 100.0)) {
      throw ValidationError("quality score for sample '" + sample +
                            "' outside [0,100]: " + std::to_string(q));
    }
  }

  // Attribute each scored sample to its subject.
  std::unordered_map<std::string, std::string> sample_subject;
  const auto note = [&](const std::string& sample, const std::string& subject) {
    const auto [it, inserted] = sample_subject.emplace(sample, subject);
    if (!inserted && it->second != subject) {
      throw ValidationError("sample '" + sample + "' is attributed to two subjects ('" +
                            it->second + "' and '" + subject + "')");
    }
  };
  for (const auto& c : scores.comparisons()) {
    note(c.probe_sample, c.probe_subject);
    note(c.gallery_sample, c.gallery_subject);
  }

  // Per-group sample values, sample ids sorted for determinism.
  std::vector<std::vector<std::pair<std::string, double>>> values(groups.size());
  for (const auto& [sample, q] : quality) {
    const auto it = sample_subject.find(sample);
    if (it == sample_subject.end()) continue;  // quality rows for unscored samples
    const auto& g = scores.subject(it->second).group;
    for (std::size_t i = 0; i < groups.size(); ++i) {
      if (groups[i].matches(g)) values[i].emplace_back(sample, q);
    }
  }

  if (options.equalize) {
    std::size_t smallest = std::numeric_limits<std::size_t>::max();
    for (const auto& v : values) smallest = std::min(smallest, v.size());
    const Rng master(options.seed);
    for (std::size_t i = 0; i < values.size(); ++i) {
      Rng stream = master.child(i);
      values[i] = sample_without_replacement(std::move(values[i]), smallest, stream);
    }
  }

  QualityComparison out;
  std::map<std::string, std::size_t> index_by_label;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    QualitySummary s;
    s.group = groups[i];
    s.n_samples = values[i].size();
    if (s.n_samples == 0) {
      throw ValidationError("no quality samples for group " + groups[i].label());
    }
    std::vector<double> q;
    q.reserve(values[i].size());
    for (const auto& [_, v] : values[i]) q.push_back(v);
    std::sort(q.begin(), q.end());
    double sum = 0.0;
    for (double x : q) sum += x;
    s.mean = sum / static_cast<double>(q.size());
    s.median = q.size() % 2 == 1 ? q[q.size() / 2]
                                 : 0.5 * (q[q.size() / 2 - 1] + q[q.size() / 2]);
    double ss = 0.0;
    for (double x : q) ss += (x - s.mean) * (x - s.mean);
    s.std = q.size() > 1 ? std::sqrt(ss / static_cast<double>(q.size() - 1)) : 0.0;
    for (double x : q) {
      const auto bin = std::min<std::size_t>(static_cast<std::size_t>(x / 5.0), 19);
      s.histogram[bin]++;
    }
    index_by_label[groups[i].label()] = out.summaries.size();
    out.summaries.push_back(std::move(s));
  }

  for (const auto& [g0, g1] : pairs) {
    const auto i0 = index_by_label.find(g0.label());
    const auto i1 = index_by_label.find(g1.label());
    if (i0 == index_by_label.end() || i1 == index_by_label.end()) {
      throw ValidationError("quality pair references a group without a summary: " +
                            g0.label() + ":" + g1.label());
    }
    const auto& s0 = out.summaries[i0->second];
    const auto& s1 = out.summaries[i1->second];
    if (s0.n_samples < 2 || s1.n_samples < 2) {
      throw ValidationError("quality comparison needs >= 2 samples per group (" +
                            g0.label() + ":" + g1.label() + ")");
    }
    QualityComparison::PairResult pr;
    pr.group0 = g0;
    pr.group1 = g1;
    pr.welch = welch_or_degenerate({s0.mean, s0.std, s0.n_samples},
                                   {s1.mean, s1.std, s1.n_samples}, alpha);
    out.pairwise.push_back(std::move(pr));
  }
  return out;
}

}  // namespace fairprint::diag
