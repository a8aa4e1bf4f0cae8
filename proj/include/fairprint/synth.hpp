#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairprint/core.hpp"
#include "fairprint/openset.hpp"

namespace fairprint::synth {

struct Law {
  double mean = 0.0;
  double std = 1.0;
};

// Score-generation model for one demographic group. Gaussian laws are
// truncated to the score range by redrawing, never by clamping (clamping
// would pile an atom on the boundary and corrupt ROC tie handling).
// Outliers are per-sample: a flagged probe sample draws its genuine scores
// from the outlier law and, when quality_outlier_link is set, its quality
// from outlier_quality.
struct GroupScoreModel {
  core::DemographicGroup group;  // composite
  std::size_t n_subjects = 0;
  std::size_t samples_per_subject = 2;
  Law genuine{75.0, 8.0};
  Law impostor{25.0, 8.0};
  double score_lo = 0.0;
  double score_hi = 100.0;
  double outlier_fraction = 0.0;
  Law outlier_genuine{10.0, 5.0};
  Law quality{60.0, 12.0};
  Law outlier_quality{15.0, 8.0};
  bool quality_outlier_link = true;
  // Non-mated probe/gallery pairs sampled within the group; 0 means
  // 10 * n_subjects.
  std::size_t impostor_budget = 0;
  // Embedding-mode knobs (generate_embeddings only).
  double embed_noise = 0.1;
  double embed_outlier_noise = 1.5;
};

void validate(const GroupScoreModel& model);

// Everything needed to regenerate the dataset bit-identically.
struct Provenance {
  std::vector<GroupScoreModel> models;
  std::uint64_t seed = 1;
};

struct SynthDataset {
  core::ScoreSet score_set;
  std::map<std::string, double> quality;  // sample id -> quality in [0,100]
  Provenance provenance;
};

// Deterministic generation: group g uses child stream g of the master
// seed, and fixed draw order within a group (subjects, outlier flags,
// genuine scores, impostor pairs, quality).
SynthDataset generate(const std::vector<GroupScoreModel>& models, std::uint64_t seed);
inline SynthDataset generate(const Provenance& provenance) {
  return generate(provenance.models, provenance.seed);
}

struct SynthEmbeddings {
  openset::EmbeddingStore store;
  std::vector<core::SubjectRecord> subjects;
  Provenance provenance;
  std::size_t dim = 0;
};

// Unit-sphere embeddings: per-subject centroid, per-sample normalized
// centroid-plus-noise; outlier samples get embed_outlier_noise. Inner
// product of the emitted vectors is the identification score.
SynthEmbeddings generate_embeddings(const std::vector<GroupScoreModel>& models,
                                    std::uint64_t seed, std::size_t dim);

}  // namespace fairprint::synth
