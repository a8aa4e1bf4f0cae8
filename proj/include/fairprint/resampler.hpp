#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fairprint/core.hpp"

namespace fairprint::boot {

enum class ResampleUnit { subject, comparison };

// Defaults mirror the evaluation protocol this toolkit reproduces:
// m = 10 replicates, subject-level resampling. m = 10 gives coarse std
// estimates; reports always echo the config so readers can judge.
struct BootstrapConfig {
  std::size_t m = 10;
  std::uint64_t seed = 1;
  ResampleUnit unit = ResampleUnit::subject;
};

enum class Metric { tmr, fpir, fnir, tpir };

const char* metric_name(Metric metric);

struct BootstrapEstimate {
  core::DemographicGroup group;
  Metric metric = Metric::tmr;
  double mean = 0.0;
  double std = 0.0;                // sample standard deviation (m-1 denominator)
  std::vector<double> replicates;  // deterministic order, replicate 0..m-1
  BootstrapConfig config;
};

// The replicate stream is child(seed, replicate_index) of the counter RNG,
// so replicates are reproducible independently of evaluation order.
// Returns n draws of indices in [0, n).
std::vector<std::size_t> bootstrap_indices(std::size_t n, const BootstrapConfig& config,
                                           std::size_t replicate_index);

// Per-item draw counts for one replicate. In subject mode items are the
// subjects sorted by id; in comparison mode they are the comparisons in
// input order.
std::vector<std::size_t> draw_counts(const core::ScoreSet& scores,
                                     const BootstrapConfig& config,
                                     std::size_t replicate_index);

// One bootstrap replicate of `scores`. Subject mode draws N subjects with
// replacement (N = roster size) and keeps every comparison of a drawn
// subject, with multiplicity equal to its draw count, so a subject's
// dependent comparisons always move together. Comparison mode draws
// comparisons directly.
core::ScoreSet resample(const core::ScoreSet& scores, const BootstrapConfig& config,
                        std::size_t replicate_index);

// Mean/std/replicates over m replicate metric values.
BootstrapEstimate summarize(const core::DemographicGroup& group, Metric metric,
                            std::vector<double> replicates, const BootstrapConfig& config);

// Applies `metric_fn` to each of m resamples of `scores`. A replicate on
// which the metric is undefined raises an error naming the replicate.
BootstrapEstimate bootstrap_estimate(
    const core::ScoreSet& scores, const BootstrapConfig& config,
    const core::DemographicGroup& group, Metric metric,
    const std::function<double(const core::ScoreSet&)>& metric_fn);

// Convenience: TMR at `threshold` per replicate.
BootstrapEstimate bootstrap_tmr(const core::ScoreSet& scores, double threshold,
                                const BootstrapConfig& config,
                                const core::DemographicGroup& group);

}  // namespace fairprint::boot
