#include "fairprint/audit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "fairprint/errors.hpp"
#include "fairprint/rng.hpp"

namespace fairprint::audit {

namespace {

using nlohmann::json;

// Audit-level stream indices off the master seed; every per-group stream
// is child(child(seed, phase), group_index) with groups in label order.
constexpr std::uint64_t kStreamVerifyBoot = 0;
constexpr std::uint64_t kStreamGallery = 1;
constexpr std::uint64_t kStreamFpirBoot = 2;

std::string pair_label(const GroupPair& p) {
  return p.first.label() + ":" + p.second.label();
}

std::string hex64(std::uint64_t v) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json estimate_to_json(const boot::BootstrapEstimate& est) {
  json j;
  j["metric"] = boot::metric_name(est.metric);
  j["unit"] = "fraction";
  j["mean"] = est.mean;
  j["std"] = est.std;
  j["m"] = est.config.m;
  j["seed"] = est.config.seed;
  j["resample_unit"] =
      est.config.unit == boot::ResampleUnit::subject ? "subject" : "comparison";
  j["replicates"] = est.replicates;
  return j;
}

const char* test_kind_name(stats::TestKind k) {
  switch (k) {
    case stats::TestKind::two_prop_z: return "two_prop_z";
    case stats::TestKind::welch_t: return "welch_t";
    case stats::TestKind::anova_f: return "anova_f";
  }
  return "?";
}

json rate_point_to_json(const core::RatePoint& p) {
  json j;
  j["threshold"] = p.threshold;
  j["n_genuine"] = p.n_genuine;
  j["n_impostor"] = p.n_impostor;
  if (p.tmr) {
    j["tmr"] = *p.tmr;
    j["fnmr"] = *p.fnmr();
  } else {
    j["tmr"] = nullptr;
    j["fnmr"] = nullptr;
  }
  if (p.fmr) {
    j["fmr"] = *p.fmr;
  } else {
    j["fmr"] = nullptr;
  }
  return j;
}

json threshold_spec_to_json(const ThresholdSpec& spec, std::optional<double> resolved,
                            std::optional<double> achieved) {
  json j;
  switch (spec.source) {
    case ThresholdSource::fixed:
      j["source"] = "fixed";
      j["value"] = spec.value;
      break;
    case ThresholdSource::target_fmr:
      j["source"] = "target_fmr";
      j["target"] = spec.target;
      break;
    case ThresholdSource::target_fnir:
      j["source"] = "target_fnir";
      j["target"] = spec.target;
      j["reference_group"] = spec.reference_group.label();
      break;
  }
  if (resolved) j["value"] = *resolved;
  if (achieved) {
    j[spec.source == ThresholdSource::target_fnir ? "achieved_fnir" : "achieved_fmr"] =
        *achieved;
  }
  return j;
}

json bootstrap_config_to_json(const boot::BootstrapConfig& cfg) {
  json j;
  j["m"] = cfg.m;
  j["seed"] = cfg.seed;
  j["unit"] = cfg.unit == boot::ResampleUnit::subject ? "subject" : "comparison";
  return j;
}

std::vector<std::string> pair_labels(const std::vector<GroupPair>& pairs) {
  std::vector<std::string> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) out.push_back(pair_label(p));
  return out;
}

}  // namespace

json test_result_to_json(const stats::TestResult& r) {
  json j;
  j["test"] = test_kind_name(r.kind);
  if (std::isinf(r.statistic)) {
    j["statistic"] = r.statistic > 0 ? "inf" : "-inf";
    j["abs_statistic"] = "inf";
  } else {
    j["statistic"] = r.statistic;
    j["abs_statistic"] = std::fabs(r.statistic);
  }
  if (r.df) j["df"] = *r.df;
  if (r.df2) j["df2"] = *r.df2;
  j["p_value"] = r.p_value;
  j["alpha"] = r.alpha;
  j["reject"] = r.reject;
  if (r.degenerate) j["degenerate"] = true;
  return j;
}

std::vector<GroupPair> default_verify_pairs() {
  using G = core::DemographicGroup;
  return {
      {G::composite("W", "F"), G::composite("W", "M")},
      {G::composite("B", "F"), G::composite("B", "M")},
      {G::composite("W", "M"), G::composite("B", "M")},
      {G::composite("W", "F"), G::composite("B", "F")},
      {G::gender_only("F"), G::gender_only("M")},
      {G::race_only("B"), G::race_only("W")},
  };
}

std::vector<GroupPair> default_ident_pairs() {
  using G = core::DemographicGroup;
  return {
      {G::composite("W", "F"), G::composite("W", "M")},
      {G::composite("B", "F"), G::composite("B", "M")},
      {G::composite("W", "M"), G::composite("B", "M")},
      {G::composite("W", "F"), G::composite("B", "F")},
  };
}

std::vector<GroupPair> parse_pairs(const std::string& csv,
                                   const core::GroupTaxonomy& taxonomy) {
  std::vector<GroupPair> out;
  std::stringstream ss(csv);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token.find_first_not_of(" \t") == std::string::npos) continue;
    const auto colon = token.find(':');
    if (colon == std::string::npos) {
      throw UsageError("pair '" + token + "' must be GROUP:GROUP");
    }
    out.emplace_back(core::parse_group(token.substr(0, colon), taxonomy),
                     core::parse_group(token.substr(colon + 1), taxonomy));
  }
  if (out.empty()) throw UsageError("no pairs given");
  return out;
}

// ---------------------------------------------------------------------------
// Verification audit
// ---------------------------------------------------------------------------

namespace {

struct GroupEstimates {
  std::vector<core::DemographicGroup> groups;  // label-sorted
  std::map<std::string, boot::BootstrapEstimate> estimate;
  std::map<std::string, core::RatePoint> point;
};

bool group_has_subjects(const core::ScoreSet& scores, const core::DemographicGroup& g) {
  for (const auto& s : scores.subjects()) {
    if (g.matches(s.group)) return true;
  }
  return false;
}

GroupEstimates compute_group_estimates(const VerifyConfig& config,
                                       const core::ScoreSet& scores, double threshold,
                                       std::vector<std::string>& warnings) {
  // Estimate every composite cell present plus every group a pair names.
  std::set<core::DemographicGroup> wanted;
  for (const auto& race : config.taxonomy.races) {
    for (const auto& gender : config.taxonomy.genders) {
      const auto cell = core::DemographicGroup::composite(race, gender);
      if (group_has_subjects(scores, cell)) wanted.insert(cell);
    }
  }
  for (const auto& p : config.pairs) {
    for (const auto& g : {p.first, p.second}) {
      if (group_has_subjects(scores, g)) {
        wanted.insert(g);
      } else {
        warnings.push_back("group " + g.label() + " has no subjects; pair " +
                           pair_label(p) + " skipped");
      }
    }
  }

  GroupEstimates out;
  out.groups.assign(wanted.begin(), wanted.end());
  const Rng boot_master = Rng(config.bootstrap.seed).child(kStreamVerifyBoot);
  for (std::size_t i = 0; i < out.groups.size(); ++i) {
    const auto& g = out.groups[i];
    const core::ScoreSet genuine = core::genuine_for_group(scores, g);
    if (genuine.genuine_count() == 0) {
      throw ValidationError("group " + g.label() + " has no genuine comparisons");
    }
    boot::BootstrapConfig cfg = config.bootstrap;
    cfg.seed = boot_master.child(i).key();
    out.estimate.emplace(g.label(), boot::bootstrap_tmr(genuine, threshold, cfg, g));
    out.point.emplace(g.label(),
                      core::verification_rates(core::filter_group(scores, g), threshold));
  }
  return out;
}

json anova_section(const std::vector<core::DemographicGroup>& composites,
                   const GroupEstimates& est, const core::ScoreSet& scores,
                   double threshold, double alpha) {
  json j;
  if (composites.size() < 2) {
    j["skipped"] = "fewer than two composite groups present";
    return j;
  }
  std::vector<std::vector<double>> replicates;
  std::vector<std::string> labels;
  std::size_t genuine_hits = 0;
  std::size_t genuine_total = 0;
  for (const auto& g : composites) {
    replicates.push_back(est.estimate.at(g.label()).replicates);
    labels.push_back(g.label());
    for (const auto& c : core::genuine_for_group(scores, g).comparisons()) {
      ++genuine_total;
      if (c.score >= threshold) ++genuine_hits;
    }
  }
  j["groups"] = labels;
  j["unweighted"] = test_result_to_json(stats::anova_f(replicates, alpha));
  const double dataset_rate =
      static_cast<double>(genuine_hits) / static_cast<double>(genuine_total);
  json weighted = test_result_to_json(
      stats::anova_f(replicates, alpha, stats::GrandMean::supplied, dataset_rate));
  weighted["grand_mean"] = dataset_rate;
  j["weighted"] = weighted;
  return j;
}

json flips_section(const VerifyConfig& config, const core::ScoreSet& scores,
                   double threshold, const std::set<std::string>& skipped_pairs) {
  json arr = json::array();
  for (const auto& p : config.pairs) {
    if (skipped_pairs.count(pair_label(p))) continue;
    const auto rep = diag::minimal_flips(scores, p.first, p.second, threshold,
                                         config.alpha, diag::FlipMode::point_z,
                                         config.bootstrap);
    json j;
    j["pair"] = pair_label(p);
    j["mode"] = "point_z";
    switch (rep.status) {
      case diag::FlipStatus::already_nonsignificant:
        j["status"] = "already_nonsignificant";
        break;
      case diag::FlipStatus::erased:
        j["status"] = "erased";
        break;
      case diag::FlipStatus::not_erasable:
        j["status"] = "not_erasable";
        break;
    }
    j["flips_needed"] = rep.flips_needed;
    j["flippable"] = rep.flippable;
    j["flipped_fraction"] = rep.flipped_fraction;
    j["flipped_group"] = rep.flipped_group.label();
    j["test_before"] = test_result_to_json(rep.test_before);
    j["test_after"] = test_result_to_json(rep.test_after);
    arr.push_back(std::move(j));
  }
  return arr;
}

json outliers_section(const VerifyConfig& config, const core::ScoreSet& scores,
                      double threshold, const std::map<std::string, double>& quality) {
  const auto outliers = diag::flag_outliers(
      scores, threshold, quality.empty() ? nullptr : &quality);
  json j;
  j["total"] = outliers.size();
  const std::size_t shown = std::min(outliers.size(), config.max_outliers);
  j["shown"] = shown;
  json items = json::array();
  for (std::size_t i = 0; i < shown; ++i) {
    const auto& o = outliers[i];
    json item;
    item["group"] = o.group.label();
    item["probe_subject"] = o.comparison.probe_subject;
    item["probe_sample"] = o.comparison.probe_sample;
    item["gallery_sample"] = o.comparison.gallery_sample;
    item["score"] = o.comparison.score;
    item["margin"] = o.margin;
    if (o.probe_quality) item["probe_quality"] = *o.probe_quality;
    items.push_back(std::move(item));
  }
  j["items"] = std::move(items);
  return j;
}

json quality_section(const VerifyConfig& config, const core::ScoreSet& scores,
                     const std::map<std::string, double>& quality,
                     const std::vector<core::DemographicGroup>& composites) {
  diag::QualityCompareOptions opts;
  opts.equalize = config.equalize_quality;
  opts.seed = config.bootstrap.seed;
  std::vector<std::pair<core::DemographicGroup, core::DemographicGroup>> pairs;
  for (std::size_t i = 0; i < composites.size(); ++i) {
    for (std::size_t k = i + 1; k < composites.size(); ++k) {
      pairs.emplace_back(composites[i], composites[k]);
    }
  }
  const auto cmp =
      diag::quality_compare(quality, scores, composites, pairs, config.alpha, opts);
  json j;
  json summaries = json::array();
  for (const auto& s : cmp.summaries) {
    json row;
    row["group"] = s.group.label();
    row["n_samples"] = s.n_samples;
    row["mean"] = s.mean;
    row["median"] = s.median;
    row["std"] = s.std;
    row["histogram"] = s.histogram;
    row["bin_width"] = 5;
    summaries.push_back(std::move(row));
  }
  j["summaries"] = std::move(summaries);
  j["equalized"] = opts.equalize;
  json pw = json::array();
  for (const auto& p : cmp.pairwise) {
    json row;
    row["pair"] = p.group0.label() + ":" + p.group1.label();
    row["welch"] = test_result_to_json(p.welch);
    pw.push_back(std::move(row));
  }
  j["pairwise"] = std::move(pw);
  return j;
}

json roc_section(const core::ScoreSet& scores,
                 const std::vector<core::DemographicGroup>& composites,
                 std::vector<std::string>& warnings) {
  json j;
  for (const auto& g : composites) {
    const core::ScoreSet sub = core::filter_group(scores, g);
    if (sub.genuine_count() == 0 || sub.impostor_count() == 0) {
      warnings.push_back("roc skipped for " + g.label() +
                         ": needs both genuine and impostor comparisons");
      continue;
    }
    const auto curve = core::roc_curve(sub);
    json thresholds = json::array();
    json tmr = json::array();
    json fmr = json::array();
    for (const auto& p : curve) {
      if (std::isinf(p.threshold)) {
        thresholds.push_back(p.threshold > 0 ? "inf" : "-inf");
      } else {
        thresholds.push_back(p.threshold);
      }
      tmr.push_back(*p.tmr);
      fmr.push_back(*p.fmr);
    }
    json entry;
    entry["thresholds"] = std::move(thresholds);
    entry["tmr"] = std::move(tmr);
    entry["fmr"] = std::move(fmr);
    j[g.label()] = std::move(entry);
  }
  return j;
}

}  // namespace

json run_verification_audit(const VerifyConfig& config, const io::Dataset& data,
                            const std::vector<io::SummaryRow>& summaries) {
  if (!summaries.empty()) return run_summary_audit(config, summaries);
  const core::ScoreSet& scores = data.scores;
  if (scores.empty()) throw ValidationError("empty score set");

  std::vector<std::string> warnings;
  if (config.bootstrap.m <= 10) {
    warnings.push_back("bootstrap m=" + std::to_string(config.bootstrap.m) +
                       " yields coarse standard-deviation estimates; consider a larger m");
  }

  // Resolve the decision threshold.
  double threshold = config.threshold.value;
  std::optional<double> achieved;
  if (config.threshold.source == ThresholdSource::target_fmr) {
    const auto impostors = core::impostor_scores(scores);
    if (impostors.empty()) {
      throw ValidationError("target-fmr calibration needs impostor comparisons");
    }
    const auto cal = core::calibrate_threshold_fmr(impostors, config.threshold.target);
    threshold = cal.threshold;
    achieved = cal.achieved_fmr;
  } else if (config.threshold.source == ThresholdSource::target_fnir) {
    throw ValidationError("target-fnir calibration applies to identification audits");
  }

  const auto est = compute_group_estimates(config, scores, threshold, warnings);
  std::set<std::string> skipped_pairs;
  for (const auto& p : config.pairs) {
    if (!est.estimate.count(p.first.label()) || !est.estimate.count(p.second.label())) {
      skipped_pairs.insert(pair_label(p));
    }
  }

  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["kind"] = "verification_audit";
  report["threshold_convention"] = core::kThresholdConvention;

  json cfg;
  cfg["alpha"] = config.alpha;
  cfg["bootstrap"] = bootstrap_config_to_json(config.bootstrap);
  cfg["pairs"] = pair_labels(config.pairs);
  cfg["threshold"] = threshold_spec_to_json(config.threshold, threshold, achieved);
  report["config"] = std::move(cfg);

  json inputs;
  inputs["subjects"] = {{"rows", data.stats.subject_rows},
                        {"fnv1a", hex64(data.stats.subjects_fnv1a)}};
  inputs["scores"] = {{"rows", data.stats.score_rows},
                      {"rejected_rows", data.stats.rejected_rows},
                      {"fnv1a", hex64(data.stats.scores_fnv1a)}};
  if (data.stats.quality_rows > 0) {
    inputs["quality"] = {{"rows", data.stats.quality_rows}};
  }
  report["inputs"] = std::move(inputs);
  if (data.stats.rejected_rows > 0) {
    warnings.push_back(std::to_string(data.stats.rejected_rows) +
                       " malformed score row(s) rejected in permissive mode");
  }

  json groups = json::array();
  std::vector<core::DemographicGroup> composites;
  for (const auto& g : est.groups) {
    if (g.is_composite()) composites.push_back(g);
    json row;
    row["group"] = g.label();
    row["marginal"] = !g.is_composite();
    row["estimate"] = estimate_to_json(est.estimate.at(g.label()));
    row["point"] = rate_point_to_json(est.point.at(g.label()));
    groups.push_back(std::move(row));
  }
  report["groups"] = std::move(groups);
  report["global_point"] = rate_point_to_json(core::verification_rates(scores, threshold));

  json welch_rows = json::array();
  json z_rows = json::array();
  for (const auto& p : config.pairs) {
    const std::string label = pair_label(p);
    if (skipped_pairs.count(label)) {
      json row;
      row["pair"] = label;
      row["status"] = "skipped: missing group";
      welch_rows.push_back(row);
      if (config.with_point_z) z_rows.push_back(row);
      continue;
    }
    const auto& e0 = est.estimate.at(p.first.label());
    const auto& e1 = est.estimate.at(p.second.label());
    json row;
    row["pair"] = label;
    try {
      const auto r = stats::welch_t({e0.mean, e0.std, e0.config.m},
                                    {e1.mean, e1.std, e1.config.m}, config.alpha);
      row["status"] = "ok";
      row.update(test_result_to_json(r));
    } catch (const NumericError& e) {
      row["status"] = std::string("degenerate: ") + e.what();
    }
    welch_rows.push_back(std::move(row));

    if (config.with_point_z) {
      const auto& p0 = est.point.at(p.first.label());
      const auto& p1 = est.point.at(p.second.label());
      json zrow;
      zrow["pair"] = label;
      try {
        const auto r = stats::two_prop_z({*p0.tmr, p0.n_genuine}, {*p1.tmr, p1.n_genuine},
                                         config.alpha);
        zrow["status"] = "ok";
        zrow.update(test_result_to_json(r));
      } catch (const NumericError& e) {
        zrow["status"] = std::string("degenerate: ") + e.what();
      }
      z_rows.push_back(std::move(zrow));
    }
  }
  report["pairwise_welch"] = std::move(welch_rows);
  if (config.with_point_z) report["pairwise_z"] = std::move(z_rows);

  report["anova"] = anova_section(composites, est, scores, threshold, config.alpha);

  json diagnostics;
  diagnostics["outliers"] = outliers_section(config, scores, threshold, data.quality);
  if (config.with_flips) {
    diagnostics["flips"] = flips_section(config, scores, threshold, skipped_pairs);
  }
  if (!data.quality.empty() && composites.size() >= 2) {
    diagnostics["quality"] = quality_section(config, scores, data.quality, composites);
  }
  report["diagnostics"] = std::move(diagnostics);

  if (config.with_roc) {
    report["roc"] = roc_section(scores, composites, warnings);
  }
  report["warnings"] = warnings;
  return report;
}

json run_summary_audit(const VerifyConfig& config,
                       const std::vector<io::SummaryRow>& summaries) {
  if (summaries.empty()) throw ValidationError("summary audit needs at least one row");
  std::map<std::string, stats::GroupSummary> by_label;
  for (const auto& row : summaries) by_label[row.group.label()] = row.summary;

  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["kind"] = "summary_audit";

  json cfg;
  cfg["alpha"] = config.alpha;
  cfg["pairs"] = pair_labels(config.pairs);
  report["config"] = std::move(cfg);

  json rows = json::array();
  for (const auto& row : summaries) {
    json r;
    r["group"] = row.group.label();
    r["mean"] = row.summary.mean;
    r["std"] = row.summary.std;
    r["m"] = row.summary.m;
    r["unit"] = row.summary.unit == stats::Unit::percent ? "percent" : "fraction";
    rows.push_back(std::move(r));
  }
  report["groups"] = std::move(rows);

  json welch_rows = json::array();
  for (const auto& p : config.pairs) {
    const auto it0 = by_label.find(p.first.label());
    const auto it1 = by_label.find(p.second.label());
    json row;
    row["pair"] = pair_label(p);
    if (it0 == by_label.end() || it1 == by_label.end()) {
      row["status"] = "skipped: missing group";
    } else {
      try {
        const auto r = stats::welch_t(it0->second, it1->second, config.alpha);
        row["status"] = "ok";
        row.update(test_result_to_json(r));
      } catch (const NumericError& e) {
        row["status"] = std::string("degenerate: ") + e.what();
      }
    }
    welch_rows.push_back(std::move(row));
  }
  report["pairwise_welch"] = std::move(welch_rows);

  // ANOVA over the composite rows when a balanced set is present.
  std::vector<stats::GroupSummary> cells;
  std::vector<std::string> labels;
  for (const auto& row : summaries) {
    if (row.group.is_composite()) {
      cells.push_back(row.summary);
      labels.push_back(row.group.label());
    }
  }
  json anova;
  if (cells.size() >= 2) {
    anova["groups"] = labels;
    anova["unweighted"] =
        test_result_to_json(stats::anova_f_from_summaries(cells, config.alpha));
    report["anova"] = std::move(anova);
  } else {
    anova["skipped"] = "fewer than two composite rows";
    report["anova"] = std::move(anova);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Identification audit
// ---------------------------------------------------------------------------

namespace {

struct GroupRun {
  core::DemographicGroup group;
  openset::GalleryBuild build;
  std::vector<openset::SearchOutcome> mated;
  std::vector<openset::SearchOutcome> nonmated;
};

std::vector<openset::SubjectSamples> subject_samples_from_store(
    const openset::EmbeddingStore& store) {
  std::vector<openset::SubjectSamples> out;
  for (const auto& subject : store.subject_ids()) {
    auto samples = store.samples_of(subject);
    std::sort(samples.begin(), samples.end());
    out.push_back({subject, std::move(samples)});
  }
  return out;
}

}  // namespace

json run_identification_audit(const IdentConfig& config,
                              const openset::EmbeddingStore& embeddings,
                              const std::vector<core::SubjectRecord>& subjects) {
  const openset::EmbeddingScoreSource source(embeddings);
  return run_identification_audit(config, source, subject_samples_from_store(embeddings),
                                  subjects);
}

json run_identification_audit(const IdentConfig& config,
                              const openset::ScoreSource& source,
                              const std::vector<openset::SubjectSamples>& samples,
                              const std::vector<core::SubjectRecord>& subjects) {
  if (config.rank < 1) throw ValidationError("rank must be >= 1");
  std::vector<std::string> warnings;
  if (config.bootstrap.m <= 10) {
    warnings.push_back("bootstrap m=" + std::to_string(config.bootstrap.m) +
                       " yields coarse standard-deviation estimates; consider a larger m");
  }

  std::map<std::string, core::DemographicGroup> label_of;
  for (const auto& s : subjects) {
    if (!label_of.emplace(s.subject_id, s.group).second) {
      throw ValidationError("duplicate subject id '" + s.subject_id + "' in labels");
    }
  }

  // Labeled subjects form the cohorts; unlabeled ones are the distractor
  // pool ("no demographic information" identities).
  std::map<std::string, std::vector<openset::SubjectSamples>> cohort_map;
  std::vector<openset::SubjectSamples> distractor_pool;
  std::map<std::string, core::DemographicGroup> group_by_label;
  for (const auto& s : samples) {
    const auto it = label_of.find(s.subject_id);
    if (it == label_of.end()) {
      distractor_pool.push_back(s);
    } else {
      group_by_label.emplace(it->second.label(), it->second);
      cohort_map[it->second.label()].push_back(s);
    }
  }
  if (cohort_map.size() < 2) {
    throw ValidationError("identification audit needs at least two labeled groups");
  }
  std::sort(distractor_pool.begin(), distractor_pool.end(),
            [](const auto& a, const auto& b) { return a.subject_id < b.subject_id; });
  if (config.n_distractors > 0) {
    if (config.n_distractors > distractor_pool.size()) {
      throw ValidationError("requested " + std::to_string(config.n_distractors) +
                            " distractors but only " +
                            std::to_string(distractor_pool.size()) + " unlabeled subjects");
    }
    distractor_pool.resize(config.n_distractors);
  }

  std::vector<std::pair<core::DemographicGroup, std::vector<openset::SubjectSamples>>>
      cohorts;
  for (const auto& [label, list] : cohort_map) {
    cohorts.emplace_back(group_by_label.at(label), list);
  }

  std::vector<core::DemographicGroup> audited = config.audited_groups;
  if (audited.empty()) {
    for (const auto& [g, _] : cohorts) audited.push_back(g);
  }
  for (const auto& g : audited) {
    if (!cohort_map.count(g.label())) {
      throw ValidationError("audited group " + g.label() + " has no labeled subjects");
    }
    if (!g.is_composite()) {
      throw ValidationError("audited groups must be composite cells, got " + g.label());
    }
  }

  const Rng master(config.bootstrap.seed);
  const Rng gallery_master = master.child(kStreamGallery);
  const Rng fpir_master = master.child(kStreamFpirBoot);

  std::vector<GroupRun> runs;
  for (std::size_t i = 0; i < audited.size(); ++i) {
    GroupRun run;
    run.group = audited[i];
    openset::GalleryBuildOptions opts;
    opts.cohort_size = config.cohort_size;
    opts.seed = gallery_master.child(i).key();
    run.build = openset::build_gallery(distractor_pool, cohorts, run.group,
                                       config.n_mates, opts);
    for (const auto& probe : run.build.cohort.mated) {
      run.mated.push_back(openset::search(probe, run.build.gallery, source, config.rank));
    }
    for (const auto& probe : run.build.cohort.nonmated) {
      run.nonmated.push_back(openset::search(probe, run.build.gallery, source, config.rank));
    }
    runs.push_back(std::move(run));
  }

  // One threshold shared by every group's FPIR, per the audit protocol.
  double threshold = config.threshold.value;
  std::optional<double> achieved;
  if (config.threshold.source == ThresholdSource::target_fnir) {
    const GroupRun* ref = nullptr;
    for (const auto& run : runs) {
      if (run.group == config.threshold.reference_group) ref = &run;
    }
    if (!ref) {
      throw ValidationError("reference group " + config.threshold.reference_group.label() +
                            " is not among the audited groups");
    }
    const auto cal = openset::calibrate_threshold_fnir(ref->mated, config.threshold.target,
                                                       config.rank);
    threshold = cal.threshold;
    achieved = cal.achieved_fnir;
  } else if (config.threshold.source == ThresholdSource::target_fmr) {
    throw ValidationError("target-fmr calibration applies to verification audits");
  }

  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["kind"] = "identification_audit";
  report["threshold_convention"] = core::kThresholdConvention;

  json cfg;
  cfg["alpha"] = config.alpha;
  cfg["bootstrap"] = bootstrap_config_to_json(config.bootstrap);
  cfg["pairs"] = pair_labels(config.pairs);
  cfg["rank"] = config.rank;
  cfg["n_mates"] = config.n_mates;
  cfg["n_distractors"] = distractor_pool.size();
  report["config"] = std::move(cfg);

  json thr = threshold_spec_to_json(config.threshold, threshold, achieved);
  thr["shared_across_groups"] = true;
  report["threshold"] = std::move(thr);

  json group_rows = json::array();
  std::map<std::string, boot::BootstrapEstimate> fpir_estimates;
  double sweep_lo = std::numeric_limits<double>::infinity();
  double sweep_hi = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto& run = runs[i];
    json row;
    row["group"] = run.group.label();
    row["gallery_size"] = run.build.gallery.size();
    row["cohort_size"] = run.build.cohort_size;
    row["n_mated_probes"] = run.build.cohort.mated.size();
    row["n_nonmated_probes"] = run.build.cohort.nonmated.size();

    if (!run.nonmated.empty()) {
      boot::BootstrapConfig cfg_g = config.bootstrap;
      cfg_g.seed = fpir_master.child(i).key();
      std::vector<double> reps;
      reps.reserve(cfg_g.m);
      for (std::size_t r = 0; r < cfg_g.m; ++r) {
        const auto idx = boot::bootstrap_indices(run.nonmated.size(), cfg_g, r);
        std::size_t hits = 0;
        for (std::size_t k : idx) {
          const auto& o = run.nonmated[k];
          if (!o.candidates.empty() && o.candidates.front().score >= threshold) ++hits;
        }
        reps.push_back(static_cast<double>(hits) / static_cast<double>(idx.size()));
      }
      const auto est = boot::summarize(run.group, boot::Metric::fpir, std::move(reps), cfg_g);
      row["fpir"] = estimate_to_json(est);
      fpir_estimates.emplace(run.group.label(), est);
      row["fpir_point"] = *openset::fpir(run.nonmated, threshold);
    } else {
      row["fpir"] = nullptr;
      row["fpir_point"] = nullptr;
      warnings.push_back("group " + run.group.label() +
                         " has an empty non-mated cohort; fpir undefined");
    }

    const auto fnir_point = openset::fnir(run.mated, threshold, config.rank);
    const auto tpir_point = openset::tpir(run.mated, config.rank);
    if (fnir_point) {
      row["fnir_point"] = *fnir_point;
      row["tpir_point"] = *tpir_point;
    } else {
      row["fnir_point"] = nullptr;
      row["tpir_point"] = nullptr;
      warnings.push_back("group " + run.group.label() +
                         " has an empty mated cohort; fnir undefined");
    }
    group_rows.push_back(std::move(row));

    for (const auto& outcomes : {run.mated, run.nonmated}) {
      for (const auto& o : outcomes) {
        for (const auto& c : o.candidates) {
          sweep_lo = std::min(sweep_lo, c.score);
          sweep_hi = std::max(sweep_hi, c.score);
        }
      }
    }
  }
  report["groups"] = std::move(group_rows);

  json welch_rows = json::array();
  for (const auto& p : config.pairs) {
    json row;
    row["pair"] = pair_label(p);
    const auto it0 = fpir_estimates.find(p.first.label());
    const auto it1 = fpir_estimates.find(p.second.label());
    if (it0 == fpir_estimates.end() || it1 == fpir_estimates.end()) {
      row["status"] = "skipped: missing fpir estimate";
    } else {
      try {
        const auto r = stats::welch_t(
            {it0->second.mean, it0->second.std, it0->second.config.m},
            {it1->second.mean, it1->second.std, it1->second.config.m}, config.alpha);
        row["status"] = "ok";
        row.update(test_result_to_json(r));
      } catch (const NumericError& e) {
        row["status"] = std::string("degenerate: ") + e.what();
      }
    }
    welch_rows.push_back(std::move(row));
  }
  report["pairwise_welch"] = std::move(welch_rows);

  // FPIR/FNIR tradeoff sweep over a shared threshold grid.
  if (config.sweep_points >= 2 && sweep_lo < sweep_hi) {
    const double lo = config.sweep_lo.value_or(sweep_lo);
    const double hi = config.sweep_hi.value_or(sweep_hi);
    json sweep;
    json thresholds = json::array();
    std::vector<double> grid;
    for (std::size_t i = 0; i < config.sweep_points; ++i) {
      const double t = lo + (hi - lo) * static_cast<double>(i) /
                                static_cast<double>(config.sweep_points - 1);
      grid.push_back(t);
      thresholds.push_back(t);
    }
    sweep["thresholds"] = std::move(thresholds);
    json per_group;
    for (const auto& run : runs) {
      json fpir_arr = json::array();
      json fnir_arr = json::array();
      for (double t : grid) {
        const auto f = openset::fpir(run.nonmated, t);
        const auto n = openset::fnir(run.mated, t, config.rank);
        fpir_arr.push_back(f ? json(*f) : json(nullptr));
        fnir_arr.push_back(n ? json(*n) : json(nullptr));
      }
      json entry;
      entry["fpir"] = std::move(fpir_arr);
      entry["fnir"] = std::move(fnir_arr);
      per_group[run.group.label()] = std::move(entry);
    }
    sweep["groups"] = std::move(per_group);
    report["sweep"] = std::move(sweep);
  }

  report["warnings"] = warnings;
  return report;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << text;
}

std::string cell(const json& j) {
  if (j.is_null()) return "";
  if (j.is_string()) return j.get<std::string>();
  return j.dump();
}

std::string fixed(const json& j, int digits = 4) {
  if (j.is_null()) return "-";
  if (j.is_string()) return j.get<std::string>();
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, j.get<double>());
  return buf;
}

std::string render_test_csv_row(const json& row) {
  std::string line = row.value("pair", std::string("-")) + "," + row.value("status", std::string("ok"));
  for (const char* key : {"abs_statistic", "statistic", "df", "df2", "p_value", "alpha"}) {
    line += ",";
    if (row.contains(key)) line += cell(row.at(key));
  }
  line += ",";
  if (row.contains("reject")) line += row.at("reject").get<bool>() ? "1" : "0";
  return line + "\n";
}

constexpr const char* kTestCsvHeader =
    "pair,status,abs_statistic,statistic,df,df2,p_value,alpha,reject\n";

void emit_csv_tables(const json& report, const std::filesystem::path& dir,
                     std::vector<std::filesystem::path>& written) {
  const std::string kind = report.at("kind").get<std::string>();

  if (report.contains("groups")) {
    std::string csv;
    if (kind == "summary_audit") {
      csv = "group,mean,std,m,unit\n";
      for (const auto& row : report.at("groups")) {
        csv += row.at("group").get<std::string>() + "," + cell(row.at("mean")) + "," +
               cell(row.at("std")) + "," + cell(row.at("m")) + "," +
               row.at("unit").get<std::string>() + "\n";
      }
    } else if (kind == "verification_audit") {
      csv = "group,metric,mean,std,m,seed,point_tmr,point_fmr,n_genuine,n_impostor\n";
      for (const auto& row : report.at("groups")) {
        const auto& est = row.at("estimate");
        const auto& point = row.at("point");
        csv += row.at("group").get<std::string>() + "," +
               est.at("metric").get<std::string>() + "," + cell(est.at("mean")) + "," +
               cell(est.at("std")) + "," + cell(est.at("m")) + "," + cell(est.at("seed")) +
               "," + cell(point.at("tmr")) + "," + cell(point.at("fmr")) + "," +
               cell(point.at("n_genuine")) + "," + cell(point.at("n_impostor")) + "\n";
      }
    } else {
      csv = "group,gallery_size,n_mated_probes,n_nonmated_probes,fpir_mean,fpir_std,"
            "fpir_point,fnir_point,tpir_point\n";
      for (const auto& row : report.at("groups")) {
        const auto& est = row.at("fpir");
        csv += row.at("group").get<std::string>() + "," + cell(row.at("gallery_size")) +
               "," + cell(row.at("n_mated_probes")) + "," +
               cell(row.at("n_nonmated_probes")) + "," +
               (est.is_null() ? "" : cell(est.at("mean"))) + "," +
               (est.is_null() ? "" : cell(est.at("std"))) + "," +
               cell(row.at("fpir_point")) + "," + cell(row.at("fnir_point")) + "," +
               cell(row.at("tpir_point")) + "\n";
      }
    }
    const auto path = dir / "group_estimates.csv";
    write_text(path, csv);
    written.push_back(path);
  }

  for (const char* section : {"pairwise_welch", "pairwise_z"}) {
    if (!report.contains(section)) continue;
    std::string csv = kTestCsvHeader;
    for (const auto& row : report.at(section)) csv += render_test_csv_row(row);
    const auto path = dir / (std::string(section) + ".csv");
    write_text(path, csv);
    written.push_back(path);
  }

  if (report.contains("anova") && !report.at("anova").contains("skipped")) {
    const auto& anova = report.at("anova");
    std::string csv = "grand_mean_mode,statistic,df,df2,p_value,alpha,reject\n";
    for (const char* mode : {"unweighted", "weighted"}) {
      if (!anova.contains(mode)) continue;
      const auto& r = anova.at(mode);
      csv += std::string(mode) + "," + cell(r.at("statistic")) + "," + cell(r.at("df")) +
             "," + cell(r.at("df2")) + "," + cell(r.at("p_value")) + "," +
             cell(r.at("alpha")) + "," + (r.at("reject").get<bool>() ? "1" : "0") + "\n";
    }
    const auto path = dir / "anova.csv";
    write_text(path, csv);
    written.push_back(path);
  }

  if (report.contains("roc")) {
    for (const auto& [label, entry] : report.at("roc").items()) {
      std::string csv = "threshold,tmr,fmr\n";
      const auto& thr = entry.at("thresholds");
      const auto& tmr = entry.at("tmr");
      const auto& fmr = entry.at("fmr");
      for (std::size_t i = 0; i < thr.size(); ++i) {
        csv += cell(thr[i]) + "," + cell(tmr[i]) + "," + cell(fmr[i]) + "\n";
      }
      const auto path = dir / ("roc_" + label + ".csv");
      write_text(path, csv);
      written.push_back(path);
    }
  }

  if (report.contains("sweep")) {
    const auto& sweep = report.at("sweep");
    std::string csv = "group,threshold,fpir,fnir\n";
    const auto& thr = sweep.at("thresholds");
    for (const auto& [label, entry] : sweep.at("groups").items()) {
      for (std::size_t i = 0; i < thr.size(); ++i) {
        csv += label + "," + cell(thr[i]) + "," + cell(entry.at("fpir")[i]) + "," +
               cell(entry.at("fnir")[i]) + "\n";
      }
    }
    const auto path = dir / "sweep.csv";
    write_text(path, csv);
    written.push_back(path);
  }

  if (report.contains("diagnostics")) {
    const auto& d = report.at("diagnostics");
    if (d.contains("outliers")) {
      std::string csv = "group,probe_subject,probe_sample,gallery_sample,score,margin,probe_quality\n";
      for (const auto& item : d.at("outliers").at("items")) {
        csv += item.at("group").get<std::string>() + "," +
               item.at("probe_subject").get<std::string>() + "," +
               item.at("probe_sample").get<std::string>() + "," +
               item.at("gallery_sample").get<std::string>() + "," +
               cell(item.at("score")) + "," + cell(item.at("margin")) + "," +
               (item.contains("probe_quality") ? cell(item.at("probe_quality")) : "") + "\n";
      }
      const auto path = dir / "outliers.csv";
      write_text(path, csv);
      written.push_back(path);
    }
    if (d.contains("flips")) {
      std::string csv =
          "pair,mode,status,flips_needed,flippable,flipped_fraction,flipped_group\n";
      for (const auto& f : d.at("flips")) {
        csv += f.at("pair").get<std::string>() + "," + f.at("mode").get<std::string>() +
               "," + f.at("status").get<std::string>() + "," + cell(f.at("flips_needed")) +
               "," + cell(f.at("flippable")) + "," + cell(f.at("flipped_fraction")) + "," +
               f.at("flipped_group").get<std::string>() + "\n";
      }
      const auto path = dir / "flips.csv";
      write_text(path, csv);
      written.push_back(path);
    }
    if (d.contains("quality")) {
      std::string csv = "group,n_samples,mean,median,std\n";
      for (const auto& s : d.at("quality").at("summaries")) {
        csv += s.at("group").get<std::string>() + "," + cell(s.at("n_samples")) + "," +
               cell(s.at("mean")) + "," + cell(s.at("median")) + "," + cell(s.at("std")) +
               "\n";
      }
      const auto path = dir / "quality_summary.csv";
      write_text(path, csv);
      written.push_back(path);
      std::string wcsv = kTestCsvHeader;
      for (const auto& row : d.at("quality").at("pairwise")) {
        json flat = row.at("welch");
        flat["pair"] = row.at("pair");
        flat["status"] = "ok";
        wcsv += render_test_csv_row(flat);
      }
      const auto wpath = dir / "quality_welch.csv";
      write_text(wpath, wcsv);
      written.push_back(wpath);
    }
  }
}

void markdown_test_table(std::string& md, const json& rows) {
  md += "| pair | |stat| | df | p-value | reject |\n";
  md += "|------|--------|----|---------|--------|\n";
  for (const auto& row : rows) {
    if (row.value("status", std::string("ok")).rfind("ok", 0) != 0) {
      md += "| " + row.value("pair", std::string("-")) + " | - | - | - | " +
            row.value("status", std::string("")) + " |\n";
      continue;
    }
    md += "| " + row.value("pair", std::string("-")) + " | " +
          fixed(row.at("abs_statistic"), 2) + " | " +
          (row.contains("df") ? fixed(row.at("df"), 2) : std::string("-")) + " | " +
          fixed(row.at("p_value"), 4) + " | " +
          (row.at("reject").get<bool>() ? "**Yes**" : "No") + " |\n";
  }
  md += "\n";
}

std::string render_markdown(const json& report) {
  const std::string kind = report.at("kind").get<std::string>();
  std::string md = "# ";
  if (kind == "verification_audit") {
    md += "Verification fairness audit";
  } else if (kind == "identification_audit") {
    md += "Open-set identification fairness audit";
  } else {
    md += "Summary-table fairness audit";
  }
  md += "\n\n";

  if (report.contains("threshold_convention")) {
    md += "Decision convention: `" +
          report.at("threshold_convention").get<std::string>() + "`\n\n";
  }
  if (report.contains("config")) {
    md += "Config: `" + report.at("config").dump() + "`\n\n";
  }
  if (report.contains("threshold")) {
    md += "Shared threshold: `" + report.at("threshold").dump() + "`\n\n";
  }

  if (kind == "verification_audit") {
    md += "## Per-group TMR (bootstrap)\n\n";
    md += "| group | mean TMR % | std % | m | point TMR | point FMR |\n";
    md += "|-------|-----------|-------|---|-----------|----------|\n";
    for (const auto& row : report.at("groups")) {
      const auto& est = row.at("estimate");
      const auto& point = row.at("point");
      char buf[128];
      std::snprintf(buf, sizeof(buf), "| %s | %.2f | %.3f | %zu | %s | %s |\n",
                    row.at("group").get<std::string>().c_str(),
                    est.at("mean").get<double>() * 100.0,
                    est.at("std").get<double>() * 100.0, est.at("m").get<std::size_t>(),
                    fixed(point.at("tmr")).c_str(), fixed(point.at("fmr")).c_str());
      md += buf;
    }
    md += "\n";
  } else if (kind == "summary_audit") {
    md += "## Group summaries\n\n";
    md += "| group | mean | std | m | unit |\n|---|---|---|---|---|\n";
    for (const auto& row : report.at("groups")) {
      md += "| " + row.at("group").get<std::string>() + " | " + fixed(row.at("mean"), 2) +
            " | " + fixed(row.at("std"), 2) + " | " + cell(row.at("m")) + " | " +
            row.at("unit").get<std::string>() + " |\n";
    }
    md += "\n";
  } else {
    md += "## Per-group open-set rates\n\n";
    md += "| group | gallery | FPIR % (mean ± std) | FPIR point | FNIR point | TPIR point |\n";
    md += "|-------|---------|---------------------|------------|------------|------------|\n";
    for (const auto& row : report.at("groups")) {
      const auto& est = row.at("fpir");
      std::string fpir_cell = "-";
      if (!est.is_null()) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f ± %.2f", est.at("mean").get<double>() * 100.0,
                      est.at("std").get<double>() * 100.0);
        fpir_cell = buf;
      }
      md += "| " + row.at("group").get<std::string>() + " | " +
            cell(row.at("gallery_size")) + " | " + fpir_cell + " | " +
            fixed(row.at("fpir_point")) + " | " + fixed(row.at("fnir_point")) + " | " +
            fixed(row.at("tpir_point")) + " |\n";
    }
    md += "\n";
  }

  if (report.contains("pairwise_welch")) {
    md += "## Pairwise Welch t-tests\n\n";
    markdown_test_table(md, report.at("pairwise_welch"));
  }
  if (report.contains("pairwise_z")) {
    md += "## Pairwise two-proportion z-tests (point estimates)\n\n";
    markdown_test_table(md, report.at("pairwise_z"));
  }
  if (report.contains("anova") && !report.at("anova").contains("skipped")) {
    const auto& anova = report.at("anova");
    md += "## One-way ANOVA\n\n";
    md += "| grand mean | F | df | p-value | reject |\n|---|---|---|---|---|\n";
    for (const char* mode : {"unweighted", "weighted"}) {
      if (!anova.contains(mode)) continue;
      const auto& r = anova.at(mode);
      md += "| " + std::string(mode) + " | " + fixed(r.at("statistic"), 3) + " | (" +
            fixed(r.at("df"), 0) + ", " + fixed(r.at("df2"), 0) + ") | " +
            fixed(r.at("p_value"), 5) + " | " +
            (r.at("reject").get<bool>() ? "**Yes**" : "No") + " |\n";
    }
    md += "\n";
  }
  if (report.contains("diagnostics")) {
    const auto& d = report.at("diagnostics");
    if (d.contains("outliers")) {
      md += "## Below-threshold genuine comparisons\n\n";
      md += "Total: " + cell(d.at("outliers").at("total")) + " (showing " +
            cell(d.at("outliers").at("shown")) + ")\n\n";
    }
    if (d.contains("flips")) {
      md += "## Minimal score flips to erase significance\n\n";
      md += "| pair | status | flips | fraction | flipped group |\n|---|---|---|---|---|\n";
      for (const auto& f : d.at("flips")) {
        md += "| " + f.at("pair").get<std::string>() + " | " +
              f.at("status").get<std::string>() + " | " + cell(f.at("flips_needed")) +
              " | " + fixed(f.at("flipped_fraction"), 5) + " | " +
              f.at("flipped_group").get<std::string>() + " |\n";
      }
      md += "\n";
    }
    if (d.contains("quality")) {
      md += "## Sample quality by group\n\n";
      md += "| group | n | mean | median | std |\n|---|---|---|---|---|\n";
      for (const auto& s : d.at("quality").at("summaries")) {
        md += "| " + s.at("group").get<std::string>() + " | " + cell(s.at("n_samples")) +
              " | " + fixed(s.at("mean"), 2) + " | " + fixed(s.at("median"), 2) + " | " +
              fixed(s.at("std"), 2) + " |\n";
      }
      md += "\n";
    }
  }
  if (report.contains("warnings") && !report.at("warnings").empty()) {
    md += "## Warnings\n\n";
    for (const auto& w : report.at("warnings")) {
      md += "- " + w.get<std::string>() + "\n";
    }
    md += "\n";
  }
  return md;
}

}  // namespace

std::vector<std::filesystem::path> emit_report(const json& report,
                                               const std::filesystem::path& out_dir,
                                               const EmitOptions& options) {
  validate_report(report);
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> written;
  if (options.json) {
    const auto path = out_dir / "report.json";
    write_text(path, report.dump(2) + "\n");
    written.push_back(path);
  }
  if (options.csv) {
    emit_csv_tables(report, out_dir, written);
  }
  if (options.markdown) {
    const auto path = out_dir / "report.md";
    write_text(path, render_markdown(report));
    written.push_back(path);
  }
  return written;
}

void validate_report(const json& report) {
  if (!report.is_object()) throw ValidationError("report must be a JSON object");
  if (!report.contains("schema_version") ||
      report.at("schema_version").get<int>() != kReportSchemaVersion) {
    throw ValidationError("unsupported or missing report schema_version (expected " +
                          std::to_string(kReportSchemaVersion) + ")");
  }
  if (!report.contains("kind")) throw ValidationError("report lacks 'kind'");
  const std::string kind = report.at("kind").get<std::string>();
  if (kind != "verification_audit" && kind != "identification_audit" &&
      kind != "summary_audit") {
    throw ValidationError("unknown report kind '" + kind + "'");
  }
  for (const char* key : {"config", "groups", "pairwise_welch"}) {
    if (!report.contains(key)) {
      throw ValidationError("report lacks required section '" + std::string(key) + "'");
    }
  }
  if (kind == "identification_audit") {
    if (!report.contains("threshold") ||
        !report.at("threshold").value("shared_across_groups", false)) {
      throw ValidationError(
          "identification report must assert a shared threshold across groups");
    }
  }
}

}  // namespace fairprint::audit
