#include "fairprint/openset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "fairprint/errors.hpp"
#include "fairprint/rng.hpp"

namespace fairprint::openset {

void TableScoreSource::add(const std::string& probe_sample,
                           const std::string& gallery_sample, double score) {
  if (!std::isfinite(score)) {
    throw ValidationError("non-finite score for (" + probe_sample + ", " + gallery_sample + ")");
  }
  table_[{probe_sample, gallery_sample}] = score;
}

double TableScoreSource::score(const std::string& probe_sample,
                               const std::string& gallery_sample) const {
  const auto it = table_.find({probe_sample, gallery_sample});
  if (it == table_.end()) {
    throw ValidationError("score table has no entry for (" + probe_sample + ", " +
                          gallery_sample + ")");
  }
  return it->second;
}

void EmbeddingStore::add(const std::string& sample_id, const std::string& subject_id,
                         std::vector<double> vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_) {
    throw ValidationError("embedding dimension mismatch for sample '" + sample_id + "': got " +
                          std::to_string(vec.size()) + ", expected " + std::to_string(dim_));
  }
  if (!by_sample_.emplace(sample_id, samples_.size()).second) {
    throw ValidationError("duplicate embedding sample id '" + sample_id + "'");
  }
  by_subject_[subject_id].push_back(samples_.size());
  samples_.push_back({sample_id, subject_id, std::move(vec)});
}

const EmbeddingStore::Entry& EmbeddingStore::entry(const std::string& sample_id) const {
  const Entry* e = find(sample_id);
  if (!e) throw ValidationError("unknown embedding sample id '" + sample_id + "'");
  return *e;
}

const EmbeddingStore::Entry* EmbeddingStore::find(const std::string& sample_id) const {
  const auto it = by_sample_.find(sample_id);
  return it == by_sample_.end() ? nullptr : &samples_[it->second];
}

std::vector<std::string> EmbeddingStore::samples_of(const std::string& subject_id) const {
  const auto it = by_subject_.find(subject_id);
  std::vector<std::string> out;
  if (it == by_subject_.end()) return out;
  out.reserve(it->second.size());
  for (std::size_t i : it->second) out.push_back(samples_[i].sample_id);
  return out;
}

std::vector<std::string> EmbeddingStore::subject_ids() const {
  std::vector<std::string> out;
  out.reserve(by_subject_.size());
  for (const auto& [id, _] : by_subject_) out.push_back(id);
  return out;
}

double EmbeddingScoreSource::score(const std::string& probe_sample,
                                   const std::string& gallery_sample) const {
  const auto& a = store_.entry(probe_sample).vec;
  const auto& b = store_.entry(gallery_sample).vec;
  double dot = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) dot += a[i] * b[i];
  return dot;
}

void Gallery::enroll(const std::string& sample_id, const std::string& subject_id) {
  if (!sample_ids_.insert(sample_id).second) {
    throw ValidationError("duplicate gallery sample id '" + sample_id + "'");
  }
  if (!subject_ids_.insert(subject_id).second) {
    throw ValidationError("identity '" + subject_id +
                          "' already enrolled; galleries hold one sample per identity");
  }
  entries_.push_back({sample_id, subject_id});
  sorted_ = entries_.size() <= 1;
}

const std::vector<Gallery::Entry>& Gallery::entries() const {
  if (!sorted_) {
    std::sort(entries_.begin(), entries_.end(),
              [](const Entry& a, const Entry& b) { return a.sample_id < b.sample_id; });
    sorted_ = true;
  }
  return entries_;
}

bool Gallery::has_subject(const std::string& subject_id) const {
  return subject_ids_.count(subject_id) > 0;
}

GalleryBuild build_gallery(
    const std::vector<SubjectSamples>& distractors,
    const std::vector<std::pair<core::DemographicGroup, std::vector<SubjectSamples>>>& cohorts,
    const core::DemographicGroup& audited_group, std::size_t n_mates,
    const GalleryBuildOptions& options) {
  if (cohorts.empty()) throw ValidationError("build_gallery requires at least one cohort group");

  std::set<std::string> cohort_subject_ids;
  const std::vector<SubjectSamples>* audited = nullptr;
  std::size_t min_group = std::numeric_limits<std::size_t>::max();
  for (const auto& [group, subjects] : cohorts) {
    min_group = std::min(min_group, subjects.size());
    for (const auto& s : subjects) {
      if (!cohort_subject_ids.insert(s.subject_id).second) {
        throw ValidationError("subject '" + s.subject_id + "' appears in more than one cohort");
      }
    }
    if (group == audited_group) audited = &subjects;
  }
  if (!audited) {
    throw ValidationError("audited group " + audited_group.label() +
                          " is not among the cohort groups");
  }
  for (const auto& d : distractors) {
    if (cohort_subject_ids.count(d.subject_id)) {
      throw ValidationError("distractor '" + d.subject_id + "' overlaps a cohort subject");
    }
    if (d.samples.empty()) {
      throw ValidationError("distractor '" + d.subject_id + "' has no sample");
    }
  }

  const std::size_t cohort_size = options.cohort_size == 0 ? min_group : options.cohort_size;
  if (cohort_size > min_group) {
    throw ValidationError("cohort_size " + std::to_string(cohort_size) +
                          " exceeds the smallest group (" + std::to_string(min_group) + ")");
  }
  if (n_mates > cohort_size) {
    throw ValidationError("n_mates " + std::to_string(n_mates) + " exceeds cohort size " +
                          std::to_string(cohort_size));
  }
  if (audited->size() < n_mates + 1) {
    throw ValidationError("audited group " + audited_group.label() + " needs at least " +
                          std::to_string(n_mates + 1) + " subjects");
  }

  GalleryBuild out;
  out.cohort_size = cohort_size;
  for (const auto& d : distractors) out.gallery.enroll(d.samples.front(), d.subject_id);

  // Per-group sampling uses a child stream indexed by the group's position
  // in id-sorted cohort order, so adding a group never shifts the others.
  std::vector<std::size_t> order(cohorts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return cohorts[a].first < cohorts[b].first;
  });
  const Rng master(options.seed);

  for (std::size_t pos = 0; pos < order.size(); ++pos) {
    const auto& [group, subjects] = cohorts[order[pos]];
    std::vector<SubjectSamples> sorted_subjects = subjects;
    std::sort(sorted_subjects.begin(), sorted_subjects.end(),
              [](const SubjectSamples& a, const SubjectSamples& b) {
                return a.subject_id < b.subject_id;
              });
    Rng stream = master.child(pos);
    std::vector<SubjectSamples> sampled =
        sample_without_replacement(std::move(sorted_subjects), cohort_size, stream);

    if (group == audited_group) {
      for (std::size_t i = 0; i < sampled.size(); ++i) {
        const auto& s = sampled[i];
        if (i < n_mates) {
          if (s.samples.size() < 2) {
            throw ValidationError("mated probe subject '" + s.subject_id +
                                  "' needs two samples (enroll + probe)");
          }
          out.gallery.enroll(s.samples[0], s.subject_id);
          out.cohort.mated.push_back({s.samples[1], s.subject_id});
        } else {
          const std::string& probe_sample =
              s.samples.size() >= 2 ? s.samples[1] : s.samples.front();
          out.cohort.nonmated.push_back({probe_sample, s.subject_id});
        }
      }
    } else {
      for (const auto& s : sampled) {
        if (s.samples.empty()) {
          throw ValidationError("cohort subject '" + s.subject_id + "' has no sample");
        }
        out.gallery.enroll(s.samples.front(), s.subject_id);
      }
    }
  }
  return out;
}

SearchOutcome search(const Probe& probe, const Gallery& gallery, const ScoreSource& source,
                     std::size_t rank_cutoff) {
  if (gallery.size() == 0) throw ValidationError("cannot search an empty gallery");
  if (rank_cutoff < 1) throw ValidationError("rank cutoff must be >= 1");

  struct Scored {
    double score;
    const Gallery::Entry* entry;
  };
  std::vector<Scored> scored;
  scored.reserve(gallery.size());
  for (const auto& e : gallery.entries()) {
    scored.push_back({source.score(probe.sample_id, e.sample_id), &e});
  }
  const std::size_t k = std::min(rank_cutoff, scored.size());
  const auto better = [](const Scored& a, const Scored& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entry->sample_id < b.entry->sample_id;
  };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k),
                    scored.end(), better);

  SearchOutcome out;
  out.probe_sample = probe.sample_id;
  out.probe_subject = probe.subject_id;
  out.rank_cutoff = rank_cutoff;
  out.candidates.reserve(k);
  for (std::size_t i = 0; i < k; ++i) {
    out.candidates.push_back(
        {scored[i].entry->subject_id, scored[i].entry->sample_id, scored[i].score});
  }
  return out;
}

std::optional<double> fpir(std::span<const SearchOutcome> nonmated_outcomes,
                           double threshold) {
  if (nonmated_outcomes.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (const auto& o : nonmated_outcomes) {
    if (!o.candidates.empty() && o.candidates.front().score >= threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(nonmated_outcomes.size());
}

namespace {

// Mate candidate within the first `rank_cutoff` positions, if any.
const Candidate* mate_within_rank(const SearchOutcome& o, std::size_t rank_cutoff) {
  if (rank_cutoff > o.rank_cutoff) {
    throw ValidationError("asked for rank " + std::to_string(rank_cutoff) +
                          " but the search kept only the top " +
                          std::to_string(o.rank_cutoff));
  }
  const std::size_t limit = std::min(rank_cutoff, o.candidates.size());
  for (std::size_t i = 0; i < limit; ++i) {
    if (o.candidates[i].gallery_subject == o.probe_subject) return &o.candidates[i];
  }
  return nullptr;
}

}  // namespace

std::optional<double> fnir(std::span<const SearchOutcome> mated_outcomes, double threshold,
                           std::size_t rank_cutoff) {
  if (mated_outcomes.empty()) return std::nullopt;
  std::size_t failures = 0;
  for (const auto& o : mated_outcomes) {
    const Candidate* mate = mate_within_rank(o, rank_cutoff);
    if (!mate || mate->score < threshold) ++failures;
  }
  return static_cast<double>(failures) / static_cast<double>(mated_outcomes.size());
}

std::optional<double> tpir(std::span<const SearchOutcome> mated_outcomes,
                           std::size_t rank_cutoff) {
  if (mated_outcomes.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (const auto& o : mated_outcomes) {
    if (mate_within_rank(o, rank_cutoff) != nullptr) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(mated_outcomes.size());
}

CalibratedFnirThreshold calibrate_threshold_fnir(
    std::span<const SearchOutcome> reference_mated_outcomes, double target_fnir,
    std::size_t rank_cutoff) {
  if (reference_mated_outcomes.empty()) {
    throw ValidationError("calibrate_threshold_fnir requires mated reference outcomes");
  }
  if (!(target_fnir > 0.0 && target_fnir <= 1.0)) {
    throw ValidationError("target_fnir must lie in (0,1]");
  }
  const double n = static_cast<double>(reference_mated_outcomes.size());
  std::size_t rank_failures = 0;
  std::vector<double> mate_scores;
  for (const auto& o : reference_mated_outcomes) {
    const Candidate* mate = mate_within_rank(o, rank_cutoff);
    if (mate) {
      mate_scores.push_back(mate->score);
    } else {
      ++rank_failures;
    }
  }
  const double floor = static_cast<double>(rank_failures) / n;
  if (floor > target_fnir) {
    throw NumericError("target_fnir " + std::to_string(target_fnir) +
                       " is below the rank-failure floor " + std::to_string(floor) +
                       " (mates outside the top ranks fail at any threshold)");
  }

  // Candidates descending: +inf sentinel (fnir = 1), then distinct
  // observed mate scores. fnir is non-decreasing in the threshold, so the
  // first admissible candidate is the largest.
  std::sort(mate_scores.begin(), mate_scores.end(), std::greater<>());
  std::vector<double> candidates{std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < mate_scores.size(); ++i) {
    if (i == 0 || mate_scores[i] != mate_scores[i - 1]) candidates.push_back(mate_scores[i]);
  }
  for (double t : candidates) {
    std::size_t below = 0;
    for (double s : mate_scores) {
      if (s < t) ++below;
    }
    const double f = (static_cast<double>(rank_failures) + static_cast<double>(below)) / n;
    if (f <= target_fnir) return {t, f};
  }
  // Unreachable: the smallest mate score has fnir equal to the rank floor.
  throw NumericError("calibrate_threshold_fnir found no admissible threshold");
}

}  // namespace fairprint::openset
