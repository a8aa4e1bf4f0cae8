#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace fairprint::core {

// The single decision convention used everywhere in this toolkit:
// score >= threshold  =>  match.
inline constexpr const char* kThresholdConvention = "score >= threshold => match";

// Group taxonomy: which race/gender labels form the composite cells.
// Subjects outside the taxonomy land in the "unlabeled" bucket of a
// partition instead of being dropped.
struct GroupTaxonomy {
  std::vector<std::string> races{"B", "W"};
  std::vector<std::string> genders{"F", "M"};

  bool has_race(const std::string& r) const;
  bool has_gender(const std::string& g) const;
};

// A demographic cell. Composite groups carry both labels ("BF"); marginal
// groups carry exactly one ("B", "F") and act as selectors that aggregate
// composite cells, so a marginal can never collide with a composite label.
class DemographicGroup {
 public:
  static DemographicGroup composite(const std::string& race, const std::string& gender);
  static DemographicGroup race_only(const std::string& race);
  static DemographicGroup gender_only(const std::string& gender);

  const std::string& race() const { return race_; }      // empty when gender-only
  const std::string& gender() const { return gender_; }  // empty when race-only
  bool is_composite() const { return !race_.empty() && !gender_.empty(); }

  // "BF" for composites, "B" / "F" for marginals.
  std::string label() const;

  bool matches(const DemographicGroup& composite_group) const;

  auto operator<=>(const DemographicGroup&) const = default;

 private:
  std::string race_;
  std::string gender_;
};

// Parses a group token: "BF" (composite of canonical one-char labels),
// "B"/"F" (marginals), or the explicit "race.gender" / "race." / ".gender"
// forms for labels outside the taxonomy.
DemographicGroup parse_group(const std::string& token, const GroupTaxonomy& taxonomy = {});

struct SubjectRecord {
  std::string subject_id;
  DemographicGroup group;  // always composite
};

// One probe-vs-gallery similarity score. `mated` is true iff the two
// subjects are the same; scores are matcher-native (higher = more similar).
struct ComparisonRecord {
  std::string probe_subject;
  std::string probe_sample;
  std::string gallery_subject;
  std::string gallery_sample;
  double score = 0.0;
  bool mated = false;
};

// Builds a record with the mated flag derived from subject equality.
ComparisonRecord make_comparison(std::string probe_subject, std::string probe_sample,
                                 std::string gallery_subject, std::string gallery_sample,
                                 double score);

// Immutable collection of subjects and comparisons. Construction validates:
// unique subject ids, every referenced subject present, mated consistent
// with subject equality, finite scores, no mated self-comparison.
class ScoreSet {
 public:
  ScoreSet() = default;
  ScoreSet(std::vector<SubjectRecord> subjects, std::vector<ComparisonRecord> comparisons);

  const std::vector<SubjectRecord>& subjects() const { return subjects_; }
  const std::vector<ComparisonRecord>& comparisons() const { return comparisons_; }

  const SubjectRecord* find_subject(const std::string& id) const;
  const SubjectRecord& subject(const std::string& id) const;

  std::size_t genuine_count() const { return genuine_count_; }
  std::size_t impostor_count() const { return comparisons_.size() - genuine_count_; }
  bool empty() const { return comparisons_.empty(); }

 private:
  std::vector<SubjectRecord> subjects_;
  std::vector<ComparisonRecord> comparisons_;
  std::unordered_map<std::string, std::size_t> by_id_;
  std::size_t genuine_count_ = 0;
};

// Verification error rates at one threshold. tmr/fmr are empty when the
// corresponding denominator is empty (explicit tri-state, never NaN);
// fnmr is derived so tmr + fnmr = 1 holds exactly.
struct RatePoint {
  double threshold = 0.0;
  std::optional<double> tmr;
  std::optional<double> fmr;
  std::size_t n_genuine = 0;
  std::size_t n_impostor = 0;

  std::optional<double> fnmr() const {
    if (!tmr) return std::nullopt;
    return 1.0 - *tmr;
  }
};

// Rates over all comparisons of `scores` at `threshold`. Throws on an
// empty score set; a missing genuine or impostor side leaves that rate
// unset instead.
RatePoint verification_rates(const ScoreSet& scores, double threshold);

// Empirical ROC: one point per distinct observed score used as threshold,
// plus sentinels at threshold=+inf (fmr 0) and threshold=-inf (fmr 1),
// ordered by threshold descending. Tied scores move together.
std::vector<RatePoint> roc_curve(const ScoreSet& scores);

struct CalibratedThreshold {
  double threshold = 0.0;
  double achieved_fmr = 0.0;
};

// Smallest threshold with fmr <= target_fmr. Candidates are the distinct
// observed impostor scores plus the smallest representable value above the
// maximum (which always achieves fmr = 0).
CalibratedThreshold calibrate_threshold_fmr(std::span<const double> impostor_scores,
                                            double target_fmr);

// Partition of a ScoreSet by the probe subject's composite group.
// Comparisons whose probe subject is outside the taxonomy go to
// `unlabeled`; marginal cells are unions of composite cells.
struct GroupPartition {
  std::vector<std::pair<DemographicGroup, ScoreSet>> composite;
  std::vector<std::pair<DemographicGroup, ScoreSet>> marginal;
  ScoreSet unlabeled;
};

GroupPartition partition_by_group(const ScoreSet& scores, bool marginals,
                                  const GroupTaxonomy& taxonomy = {});

// All comparisons whose probe subject matches `group` (composite or
// marginal). The result keeps the matching subjects plus any gallery
// subjects its comparisons reference.
ScoreSet filter_group(const ScoreSet& scores, const DemographicGroup& group);

// Mated comparisons of `group` only, with the group's subjects as the
// roster. This is the unit the bootstrap resamples for per-group TMR.
ScoreSet genuine_for_group(const ScoreSet& scores, const DemographicGroup& group);

std::vector<double> genuine_scores(const ScoreSet& scores);
std::vector<double> impostor_scores(const ScoreSet& scores);

}  // namespace fairprint::core
