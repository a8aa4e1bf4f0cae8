#pragma once

// Small builders shared across the test suites.

#include <string>
#include <tuple>
#include <vector>

#include "fairprint/core.hpp"

namespace fixtures {

using fairprint::core::ComparisonRecord;
using fairprint::core::DemographicGroup;
using fairprint::core::ScoreSet;
using fairprint::core::SubjectRecord;

struct SubjectSpec {
  std::string id;
  std::string race;
  std::string gender;
};

// (probe_subject, probe_sample, gallery_subject, gallery_sample, score)
using CompSpec = std::tuple<std::string, std::string, std::string, std::string, double>;

inline ScoreSet make_scoreset(const std::vector<SubjectSpec>& subjects,
                              const std::vector<CompSpec>& comps) {
  std::vector<SubjectRecord> subs;
  for (const auto& s : subjects) {
    subs.push_back({s.id, DemographicGroup::composite(s.race, s.gender)});
  }
  std::vector<ComparisonRecord> records;
  for (const auto& [ps, psa, gs, gsa, score] : comps) {
    records.push_back(fairprint::core::make_comparison(ps, psa, gs, gsa, score));
  }
  return ScoreSet(std::move(subs), std::move(records));
}

// One subject per genuine score; subject ids `prefix0`, `prefix1`, ...
inline ScoreSet genuine_only(const std::string& race, const std::string& gender,
                             const std::vector<double>& scores,
                             const std::string& prefix = "s") {
  std::vector<SubjectSpec> subjects;
  std::vector<CompSpec> comps;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const std::string id = prefix + std::to_string(i);
    subjects.push_back({id, race, gender});
    comps.emplace_back(id, id + "a", id, id + "b", scores[i]);
  }
  return make_scoreset(subjects, comps);
}

// Two-group set with per-group genuine scores, plus optional shared
// impostor scores (cross-subject, attributed to the first group's probes).
inline ScoreSet two_groups(const std::vector<double>& genuine0,
                           const std::vector<double>& genuine1,
                           const std::vector<double>& impostors = {}) {
  std::vector<SubjectSpec> subjects;
  std::vector<CompSpec> comps;
  for (std::size_t i = 0; i < genuine0.size(); ++i) {
    const std::string id = "a" + std::to_string(i);
    subjects.push_back({id, "B", "F"});
    comps.emplace_back(id, id + "x", id, id + "y", genuine0[i]);
  }
  for (std::size_t i = 0; i < genuine1.size(); ++i) {
    const std::string id = "b" + std::to_string(i);
    subjects.push_back({id, "W", "M"});
    comps.emplace_back(id, id + "x", id, id + "y", genuine1[i]);
  }
  if (!impostors.empty()) {
    // Dedicated gallery-side identity so impostor rows stay non-mated even
    // for single-subject groups.
    subjects.push_back({"zimp", "W", "M"});
    for (std::size_t i = 0; i < impostors.size(); ++i) {
      const std::string p = "a" + std::to_string(i % genuine0.size());
      comps.emplace_back(p, p + "x", "zimp", "z" + std::to_string(i), impostors[i]);
    }
  }
  return make_scoreset(subjects, comps);
}

}  // namespace fixtures
