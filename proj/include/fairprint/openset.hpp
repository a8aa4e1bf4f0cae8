#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "fairprint/core.hpp"

namespace fairprint::openset {

// Similarity oracle over (probe sample, gallery sample). Implementations
// must be total over the domain they are asked about, and deterministic.
class ScoreSource {
 public:
  virtual ~ScoreSource() = default;
  virtual double score(const std::string& probe_sample,
                       const std::string& gallery_sample) const = 0;
};

// Precomputed (probe sample, gallery sample) -> score table.
class TableScoreSource final : public ScoreSource {
 public:
  void add(const std::string& probe_sample, const std::string& gallery_sample, double score);
  double score(const std::string& probe_sample,
               const std::string& gallery_sample) const override;
  std::size_t size() const { return table_.size(); }

 private:
  std::map<std::pair<std::string, std::string>, double> table_;
};

// Fixed-length embeddings with inner-product similarity.
class EmbeddingStore {
 public:
  EmbeddingStore() = default;
  explicit EmbeddingStore(std::size_t dim) : dim_(dim) {}

  void add(const std::string& sample_id, const std::string& subject_id,
           std::vector<double> vec);
  std::size_t dim() const { return dim_; }
  std::size_t size() const { return samples_.size(); }

  struct Entry {
    std::string sample_id;
    std::string subject_id;
    std::vector<double> vec;
  };
  const std::vector<Entry>& entries() const { return samples_; }
  const Entry& entry(const std::string& sample_id) const;
  const Entry* find(const std::string& sample_id) const;

  // subject -> sample ids in insertion order.
  std::vector<std::string> samples_of(const std::string& subject_id) const;
  std::vector<std::string> subject_ids() const;

 private:
  std::size_t dim_ = 0;
  std::vector<Entry> samples_;
  std::unordered_map<std::string, std::size_t> by_sample_;
  std::map<std::string, std::vector<std::size_t>> by_subject_;
};

class EmbeddingScoreSource final : public ScoreSource {
 public:
  explicit EmbeddingScoreSource(const EmbeddingStore& store) : store_(store) {}
  double score(const std::string& probe_sample,
               const std::string& gallery_sample) const override;

 private:
  const EmbeddingStore& store_;
};

// Enrolled gallery: one biometric sample per identity.
class Gallery {
 public:
  struct Entry {
    std::string sample_id;
    std::string subject_id;
  };

  void enroll(const std::string& sample_id, const std::string& subject_id);
  std::size_t size() const { return entries_.size(); }
  // Sorted by sample id; the search tie order follows this ordering.
  // Call after enrollment is complete (it finalizes the sort).
  const std::vector<Entry>& entries() const;
  bool has_subject(const std::string& subject_id) const;

 private:
  mutable std::vector<Entry> entries_;
  mutable bool sorted_ = true;
  std::unordered_set<std::string> sample_ids_;
  std::unordered_set<std::string> subject_ids_;
};

struct Probe {
  std::string sample_id;
  std::string subject_id;
};

// P_G (subjects with an enrolled mate) and P_N (subjects without).
struct ProbeCohort {
  std::vector<Probe> mated;
  std::vector<Probe> nonmated;
};

struct Candidate {
  std::string gallery_subject;
  std::string gallery_sample;
  double score = 0.0;
};

struct SearchOutcome {
  std::string probe_sample;
  std::string probe_subject;
  std::size_t rank_cutoff = 0;        // R used for this search
  std::vector<Candidate> candidates;  // descending score, ties by sample id
};

// A subject and its ordered sample ids. The first sample is the one that
// gets enrolled; the second (when present) is used as the probe.
struct SubjectSamples {
  std::string subject_id;
  std::vector<std::string> samples;
};

struct GalleryBuildOptions {
  // Subjects sampled per cohort group; 0 means min group size so every
  // group contributes the same count.
  std::size_t cohort_size = 0;
  std::uint64_t seed = 1;
};

struct GalleryBuild {
  Gallery gallery;
  ProbeCohort cohort;
  std::size_t cohort_size = 0;  // per-group count actually used
};

// Gallery = distractors + every sampled subject of the non-audited groups
// + the enrolled mates of n_mates audited-group probes. The audited
// group's sampled subjects become the probe cohort, split into P_G
// (n_mates of them, enrolled) and P_N (the rest, not enrolled).
GalleryBuild build_gallery(const std::vector<SubjectSamples>& distractors,
                           const std::vector<std::pair<core::DemographicGroup,
                                                       std::vector<SubjectSamples>>>& cohorts,
                           const core::DemographicGroup& audited_group,
                           std::size_t n_mates, const GalleryBuildOptions& options = {});

// Exact top-R by exhaustive scoring of every gallery entry. Ties break by
// gallery sample id ascending.
SearchOutcome search(const Probe& probe, const Gallery& gallery, const ScoreSource& source,
                     std::size_t rank_cutoff);

// Fraction of non-mated searches whose best candidate scores >= threshold.
// The top-1 is the maximum, so "one or more candidates above threshold"
// and "top-1 above threshold" coincide. Empty input -> unset.
std::optional<double> fpir(std::span<const SearchOutcome> nonmated_outcomes,
                           double threshold);

// Fraction of mated searches where the mate is outside the top R ranks or
// scores below the threshold. Empty input -> unset.
std::optional<double> fnir(std::span<const SearchOutcome> mated_outcomes, double threshold,
                           std::size_t rank_cutoff);

// Closed-set variant: mate within the top R ranks, no threshold clause.
std::optional<double> tpir(std::span<const SearchOutcome> mated_outcomes,
                           std::size_t rank_cutoff);

struct CalibratedFnirThreshold {
  double threshold = 0.0;
  double achieved_fnir = 0.0;
};

// Largest threshold with fnir <= target on the reference outcomes.
// Candidates are the observed mate scores plus a +inf sentinel (admissible
// only when target = 1). Searches already failing by rank bound fnir from
// below; a target under that floor is an error reporting the floor.
CalibratedFnirThreshold calibrate_threshold_fnir(
    std::span<const SearchOutcome> reference_mated_outcomes, double target_fnir,
    std::size_t rank_cutoff);

}  // namespace fairprint::openset
