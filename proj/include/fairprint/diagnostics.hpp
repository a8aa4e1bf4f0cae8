#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairprint/core.hpp"
#include "fairprint/resampler.hpp"
#include "fairprint/stats.hpp"

namespace fairprint::diag {

enum class FlipMode { point_z, bootstrap_welch };

enum class FlipStatus {
  already_nonsignificant,  // 0 flips needed
  erased,                  // flips_needed flips make the pair non-significant
  not_erasable,            // every available flip still leaves it significant
};

// How few below-threshold genuine scores of the lower-TMR group must be
// raised to the threshold before the pairwise test stops rejecting.
struct FlipReport {
  core::DemographicGroup group0;
  core::DemographicGroup group1;
  FlipMode mode = FlipMode::point_z;
  FlipStatus status = FlipStatus::already_nonsignificant;
  std::size_t flips_needed = 0;        // meaningful unless not_erasable
  std::size_t flippable = 0;           // below-threshold genuine scores available
  double flipped_fraction = 0.0;       // flips_needed / genuine count of flipped group
  core::DemographicGroup flipped_group;
  stats::TestResult test_before;
  stats::TestResult test_after;
};

// Point mode evaluates the two-proportion z-test on full-sample TMRs (O(1)
// per k, scanned exhaustively); bootstrap mode evaluates the Welch test on
// seeded bootstrap estimates and binary-searches k, falling back to a
// linear scan if the significance sequence is not monotone.
FlipReport minimal_flips(const core::ScoreSet& scores, const core::DemographicGroup& group0,
                         const core::DemographicGroup& group1, double threshold, double alpha,
                         FlipMode mode, const boot::BootstrapConfig& config = {});

struct OutlierRecord {
  core::ComparisonRecord comparison;
  core::DemographicGroup group;        // probe subject's group
  double margin = 0.0;                 // threshold - score, > 0
  std::optional<double> probe_quality; // when a quality map is supplied
};

// All mated comparisons under the threshold, ascending by score (ties by
// probe sample id).
std::vector<OutlierRecord> flag_outliers(
    const core::ScoreSet& scores, double threshold,
    const std::map<std::string, double>* quality = nullptr);

struct QualitySummary {
  core::DemographicGroup group;
  std::size_t n_samples = 0;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;
  // Fixed bins covering [0,100]: [0,5), [5,10), ..., [95,100].
  std::vector<std::size_t> histogram = std::vector<std::size_t>(20, 0);
};

struct QualityCompareOptions {
  // Subsample every group to the smallest group's sample count.
  bool equalize = false;
  std::uint64_t seed = 1;
};

struct QualityComparison {
  std::vector<QualitySummary> summaries;
  struct PairResult {
    core::DemographicGroup group0;
    core::DemographicGroup group1;
    stats::TestResult welch;
  };
  std::vector<PairResult> pairwise;
};

// Per-group quality summaries (sample-level) plus pairwise Welch tests on
// the mean quality. Sample-to-group attribution follows the probe/gallery
// subject referencing each sample in `scores`.
QualityComparison quality_compare(
    const std::map<std::string, double>& quality, const core::ScoreSet& scores,
    const std::vector<core::DemographicGroup>& groups,
    const std::vector<std::pair<core::DemographicGroup, core::DemographicGroup>>& pairs,
    double alpha, const QualityCompareOptions& options = {});

}  // namespace fairprint::diag
