#include "fairprint/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fairprint/errors.hpp"

namespace fairprint::core {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::string checked_label(const std::string& raw, const char* what) {
  const std::string t = trim(raw);
  if (t.empty()) {
    throw ValidationError(std::string(what) + " label must be non-empty after trimming");
  }
  return t;
}

}  // namespace

bool GroupTaxonomy::has_race(const std::string& r) const {
  return std::find(races.begin(), races.end(), r) != races.end();
}

bool GroupTaxonomy::has_gender(const std::string& g) const {
  return std::find(genders.begin(), genders.end(), g) != genders.end();
}

DemographicGroup DemographicGroup::composite(const std::string& race,
                                             const std::string& gender) {
  DemographicGroup g;
  g.race_ = checked_label(race, "race");
  g.gender_ = checked_label(gender, "gender");
  return g;
}

DemographicGroup DemographicGroup::race_only(const std::string& race) {
  DemographicGroup g;
  g.race_ = checked_label(race, "race");
  return g;
}

DemographicGroup DemographicGroup::gender_only(const std::string& gender) {
  DemographicGroup g;
  g.gender_ = checked_label(gender, "gender");
  return g;
}

std::string DemographicGroup::label() const { return race_ + gender_; }

bool DemographicGroup::matches(const DemographicGroup& composite_group) const {
  if (!race_.empty() && race_ != composite_group.race()) return false;
  if (!gender_.empty() && gender_ != composite_group.gender()) return false;
  return true;
}

DemographicGroup parse_group(const std::string& token, const GroupTaxonomy& taxonomy) {
  const std::string t = trim(token);
  if (t.empty()) throw ValidationError("empty group token");
  const auto dot = t.find('.');
  if (dot != std::string::npos) {
    const std::string race = t.substr(0, dot);
    const std::string gender = t.substr(dot + 1);
    if (race.empty() && gender.empty()) throw ValidationError("group token '.' names no labels");
    if (race.empty()) return DemographicGroup::gender_only(gender);
    if (gender.empty()) return DemographicGroup::race_only(race);
    return DemographicGroup::composite(race, gender);
  }
  if (taxonomy.has_race(t)) return DemographicGroup::race_only(t);
  if (taxonomy.has_gender(t)) return DemographicGroup::gender_only(t);
  if (t.size() == 2) {
    const std::string race = t.substr(0, 1);
    const std::string gender = t.substr(1, 1);
    if (taxonomy.has_race(race) && taxonomy.has_gender(gender)) {
      return DemographicGroup::composite(race, gender);
    }
  }
  throw ValidationError("cannot parse group token '" + t +
                        "'; use a canonical label (e.g. BF, B, F) or the explicit "
                        "race.gender form");
}

ComparisonRecord make_comparison(std::string probe_subject, std::string probe_sample,
                                 std::string gallery_subject, std::string gallery_sample,
                                 double score) {
  ComparisonRecord r;
  r.mated = probe_subject == gallery_subject;
  r.probe_subject = std::move(probe_subject);
  r.probe_sample = std::move(probe_sample);
  r.gallery_subject = std::move(gallery_subject);
  r.gallery_sample = std::move(gallery_sample);
  r.score = score;
  return r;
}

ScoreSet::ScoreSet(std::vector<SubjectRecord> subjects,
                   std::vector<ComparisonRecord> comparisons)
    : subjects_(std::move(subjects)), comparisons_(std::move(comparisons)) {
  by_id_.reserve(subjects_.size());
  for (std::size_t i = 0; i < subjects_.size(); ++i) {
    const auto& s = subjects_[i];
    if (!s.group.is_composite()) {
      throw ValidationError("subject '" + s.subject_id +
                            "' must carry a composite (race, gender) group");
    }
    if (!by_id_.emplace(s.subject_id, i).second) {
      throw ValidationError("duplicate subject id '" + s.subject_id + "'");
    }
  }
  for (const auto& c : comparisons_) {
    if (!by_id_.count(c.probe_subject)) {
      throw ValidationError("comparison references unknown probe subject '" +
                            c.probe_subject + "'");
    }
    if (!by_id_.count(c.gallery_subject)) {
      throw ValidationError("comparison references unknown gallery subject '" +
                            c.gallery_subject + "'");
    }
    if (c.mated != (c.probe_subject == c.gallery_subject)) {
      throw ValidationError("mated flag inconsistent with subject equality for probe '" +
                            c.probe_subject + "' vs gallery '" + c.gallery_subject + "'");
    }
    if (c.mated && c.probe_sample == c.gallery_sample) {
      throw ValidationError("mated self-comparison of sample '" + c.probe_sample +
                            "' (probe and gallery sample must differ)");
    }
    if (!std::isfinite(c.score)) {
      throw ValidationError("non-finite score for probe sample '" + c.probe_sample + "'");
    }
    if (c.mated) ++genuine_count_;
  }
}

const SubjectRecord* ScoreSet::find_subject(const std::string& id) const {
  const auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &subjects_[it->second];
}

const SubjectRecord& ScoreSet::subject(const std::string& id) const {
  const SubjectRecord* s = find_subject(id);
  if (!s) throw ValidationError("unknown subject id '" + id + "'");
  return *s;
}

RatePoint verification_rates(const ScoreSet& scores, double threshold) {
  if (scores.empty()) throw ValidationError("empty score set");
  RatePoint p;
  p.threshold = threshold;
  std::size_t genuine_hits = 0;
  std::size_t impostor_hits = 0;
  for (const auto& c : scores.comparisons()) {
    if (c.mated) {
      p.n_genuine++;
      if (c.score >= threshold) ++genuine_hits;
    } else {
      p.n_impostor++;
      if (c.score >= threshold) ++impostor_hits;
    }
  }
  if (p.n_genuine > 0) {
    p.tmr = static_cast<double>(genuine_hits) / static_cast<double>(p.n_genuine);
  }
  if (p.n_impostor > 0) {
    p.fmr = static_cast<double>(impostor_hits) / static_cast<double>(p.n_impostor);
  }
  return p;
}

std::vector<RatePoint> roc_curve(const ScoreSet& scores) {
  if (scores.genuine_count() == 0) throw ValidationError("roc_curve requires genuine comparisons");
  if (scores.impostor_count() == 0) throw ValidationError("roc_curve requires impostor comparisons");

  std::set<double> thresholds;
  for (const auto& c : scores.comparisons()) thresholds.insert(c.score);

  std::vector<RatePoint> curve;
  curve.reserve(thresholds.size() + 2);

  RatePoint top;
  top.threshold = std::numeric_limits<double>::infinity();
  top.tmr = 0.0;
  top.fmr = 0.0;
  top.n_genuine = scores.genuine_count();
  top.n_impostor = scores.impostor_count();
  curve.push_back(top);

  for (auto it = thresholds.rbegin(); it != thresholds.rend(); ++it) {
    curve.push_back(verification_rates(scores, *it));
  }

  RatePoint bottom = top;
  bottom.threshold = -std::numeric_limits<double>::infinity();
  bottom.tmr = 1.0;
  bottom.fmr = 1.0;
  curve.push_back(bottom);
  return curve;
}

CalibratedThreshold calibrate_threshold_fmr(std::span<const double> impostor_scores,
                                            double target_fmr) {
  if (impostor_scores.empty()) {
    throw ValidationError("calibrate_threshold_fmr requires a non-empty impostor list");
  }
  if (!(target_fmr > 0.0 && target_fmr < 1.0)) {
    throw ValidationError("target_fmr must lie in (0,1)");
  }
  std::vector<double> sorted(impostor_scores.begin(), impostor_scores.end());
  for (double s : sorted) {
    if (!std::isfinite(s)) throw ValidationError("non-finite impostor score");
  }
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());

  // Candidates ascending: distinct scores, then the first representable
  // value above the maximum (fmr 0 there). fmr at candidate s = count of
  // scores >= s over n; scanning ascending finds the smallest admissible.
  std::vector<double> candidates;
  candidates.reserve(sorted.size() + 1);
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (i == 0 || sorted[i] != sorted[i - 1]) candidates.push_back(sorted[i]);
  }
  candidates.push_back(std::nextafter(sorted.back(), std::numeric_limits<double>::infinity()));

  for (double t : candidates) {
    const auto ge = sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t);
    const double fmr = static_cast<double>(ge) / n;
    if (fmr <= target_fmr) return {t, fmr};
  }
  // Unreachable: the sentinel candidate always has fmr 0.
  throw NumericError("calibrate_threshold_fmr found no admissible threshold");
}

namespace {

// Collects the subset of `scores` given a comparison predicate and a roster
// rule; used by the partition and filter operations below.
template <typename KeepComparison>
ScoreSet subset(const ScoreSet& scores, const KeepComparison& keep,
                const std::vector<const SubjectRecord*>& roster_subjects) {
  std::vector<ComparisonRecord> comps;
  std::set<std::string> roster_ids;
  std::vector<SubjectRecord> roster;
  for (const SubjectRecord* s : roster_subjects) {
    if (roster_ids.insert(s->subject_id).second) roster.push_back(*s);
  }
  for (const auto& c : scores.comparisons()) {
    if (!keep(c)) continue;
    comps.push_back(c);
    for (const std::string* id : {&c.probe_subject, &c.gallery_subject}) {
      if (roster_ids.insert(*id).second) roster.push_back(scores.subject(*id));
    }
  }
  return ScoreSet(std::move(roster), std::move(comps));
}

}  // namespace

GroupPartition partition_by_group(const ScoreSet& scores, bool marginals,
                                  const GroupTaxonomy& taxonomy) {
  GroupPartition out;
  for (const auto& race : taxonomy.races) {
    for (const auto& gender : taxonomy.genders) {
      const auto cell = DemographicGroup::composite(race, gender);
      bool any = false;
      for (const auto& s : scores.subjects()) {
        if (cell.matches(s.group)) {
          any = true;
          break;
        }
      }
      if (!any) continue;
      out.composite.emplace_back(cell, filter_group(scores, cell));
    }
  }
  std::sort(out.composite.begin(), out.composite.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  if (marginals) {
    for (const auto& race : taxonomy.races) {
      out.marginal.emplace_back(DemographicGroup::race_only(race),
                                filter_group(scores, DemographicGroup::race_only(race)));
    }
    for (const auto& gender : taxonomy.genders) {
      out.marginal.emplace_back(DemographicGroup::gender_only(gender),
                                filter_group(scores, DemographicGroup::gender_only(gender)));
    }
  }

  // Everything whose probe subject is outside the taxonomy.
  std::vector<const SubjectRecord*> unlabeled_roster;
  for (const auto& s : scores.subjects()) {
    if (!taxonomy.has_race(s.group.race()) || !taxonomy.has_gender(s.group.gender())) {
      unlabeled_roster.push_back(&s);
    }
  }
  out.unlabeled = subset(
      scores,
      [&](const ComparisonRecord& c) {
        const auto& g = scores.subject(c.probe_subject).group;
        return !taxonomy.has_race(g.race()) || !taxonomy.has_gender(g.gender());
      },
      unlabeled_roster);
  return out;
}

ScoreSet filter_group(const ScoreSet& scores, const DemographicGroup& group) {
  std::vector<const SubjectRecord*> roster;
  for (const auto& s : scores.subjects()) {
    if (group.matches(s.group)) roster.push_back(&s);
  }
  return subset(
      scores,
      [&](const ComparisonRecord& c) {
        return group.matches(scores.subject(c.probe_subject).group);
      },
      roster);
}

ScoreSet genuine_for_group(const ScoreSet& scores, const DemographicGroup& group) {
  std::vector<SubjectRecord> roster;
  for (const auto& s : scores.subjects()) {
    if (group.matches(s.group)) roster.push_back(s);
  }
  std::vector<ComparisonRecord> comps;
  for (const auto& c : scores.comparisons()) {
    if (c.mated && group.matches(scores.subject(c.probe_subject).group)) {
      comps.push_back(c);
    }
  }
  return ScoreSet(std::move(roster), std::move(comps));
}

std::vector<double> genuine_scores(const ScoreSet& scores) {
  std::vector<double> out;
  out.reserve(scores.genuine_count());
  for (const auto& c : scores.comparisons()) {
    if (c.mated) out.push_back(c.score);
  }
  return out;
}

std::vector<double> impostor_scores(const ScoreSet& scores) {
  std::vector<double> out;
  out.reserve(scores.impostor_count());
  for (const auto& c : scores.comparisons()) {
    if (!c.mated) out.push_back(c.score);
  }
  return out;
}

}  // namespace fairprint::core
