#include "fairprint/resampler.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "fairprint/errors.hpp"
#include "fairprint/rng.hpp"

namespace fairprint::boot {

const char* metric_name(Metric metric) {
  switch (metric) {
    case Metric::tmr: return "tmr";
    case Metric::fpir: return "fpir";
    case Metric::fnir: return "fnir";
    case Metric::tpir: return "tpir";
  }
  return "?";
}

std::vector<std::size_t> bootstrap_indices(std::size_t n, const BootstrapConfig& config,
                                           std::size_t replicate_index) {
  if (n == 0) throw ValidationError("cannot resample an empty collection");
  Rng stream = Rng(config.seed).child(replicate_index);
  std::vector<std::size_t> idx(n);
  for (std::size_t j = 0; j < n; ++j) {
    idx[j] = static_cast<std::size_t>(stream.below(n));
  }
  return idx;
}

namespace {

std::vector<std::size_t> sorted_subject_order(const core::ScoreSet& scores) {
  std::vector<std::size_t> order(scores.subjects().size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores.subjects()[a].subject_id < scores.subjects()[b].subject_id;
  });
  return order;
}

}  // namespace

std::vector<std::size_t> draw_counts(const core::ScoreSet& scores,
                                     const BootstrapConfig& config,
                                     std::size_t replicate_index) {
  const std::size_t n = config.unit == ResampleUnit::subject
                            ? scores.subjects().size()
                            : scores.comparisons().size();
  std::vector<std::size_t> counts(n, 0);
  for (std::size_t i : bootstrap_indices(n, config, replicate_index)) counts[i]++;
  return counts;
}

core::ScoreSet resample(const core::ScoreSet& scores, const BootstrapConfig& config,
                        std::size_t replicate_index) {
  if (scores.subjects().empty()) throw ValidationError("cannot resample an empty score set");
  if (config.m < 2) throw ValidationError("bootstrap requires m >= 2 replicates");

  if (config.unit == ResampleUnit::comparison) {
    const auto counts = draw_counts(scores, config, replicate_index);
    std::vector<core::ComparisonRecord> comps;
    comps.reserve(scores.comparisons().size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      for (std::size_t k = 0; k < counts[i]; ++k) comps.push_back(scores.comparisons()[i]);
    }
    return core::ScoreSet(scores.subjects(), std::move(comps));
  }

  // Subject mode: draws are positions in the id-sorted subject list so the
  // stream consumption is independent of input ordering.
  const auto order = sorted_subject_order(scores);
  const auto counts = draw_counts(scores, config, replicate_index);

  std::unordered_map<std::string, std::size_t> multiplicity;
  multiplicity.reserve(order.size());
  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    multiplicity[scores.subjects()[order[pos]].subject_id] = counts[pos];
  }

  std::vector<core::ComparisonRecord> comps;
  comps.reserve(scores.comparisons().size());
  for (const auto& c : scores.comparisons()) {
    const std::size_t times = multiplicity.at(c.probe_subject);
    for (std::size_t k = 0; k < times; ++k) comps.push_back(c);
  }
  return core::ScoreSet(scores.subjects(), std::move(comps));
}

BootstrapEstimate summarize(const core::DemographicGroup& group, Metric metric,
                            std::vector<double> replicates, const BootstrapConfig& config) {
  if (replicates.size() < 2) throw ValidationError("bootstrap summary requires m >= 2 replicates");
  BootstrapEstimate est;
  est.group = group;
  est.metric = metric;
  est.replicates = std::move(replicates);
  est.config = config;
  double sum = 0.0;
  for (double v : est.replicates) sum += v;
  est.mean = sum / static_cast<double>(est.replicates.size());
  double ss = 0.0;
  for (double v : est.replicates) ss += (v - est.mean) * (v - est.mean);
  est.std = std::sqrt(ss / static_cast<double>(est.replicates.size() - 1));
  return est;
}

BootstrapEstimate bootstrap_estimate(
    const core::ScoreSet& scores, const BootstrapConfig& config,
    const core::DemographicGroup& group, Metric metric,
    const std::function<double(const core::ScoreSet&)>& metric_fn) {
  if (config.m < 2) throw ValidationError("bootstrap requires m >= 2 replicates");
  std::vector<double> values;
  values.reserve(config.m);
  for (std::size_t r = 0; r < config.m; ++r) {
    const core::ScoreSet rep = resample(scores, config, r);
    try {
      values.push_back(metric_fn(rep));
    } catch (const Error& e) {
      throw NumericError("metric '" + std::string(metric_name(metric)) +
                         "' undefined on bootstrap replicate " + std::to_string(r) +
                         " of group " + group.label() + ": " + e.what());
    }
  }
  return summarize(group, metric, std::move(values), config);
}

BootstrapEstimate bootstrap_tmr(const core::ScoreSet& scores, double threshold,
                                const BootstrapConfig& config,
                                const core::DemographicGroup& group) {
  return bootstrap_estimate(scores, config, group, Metric::tmr,
                            [threshold](const core::ScoreSet& rep) {
                              const auto rates = core::verification_rates(rep, threshold);
                              if (!rates.tmr) {
                                throw NumericError("no genuine comparisons in replicate");
                              }
                              return *rates.tmr;
                            });
}

}  // namespace fairprint::boot
