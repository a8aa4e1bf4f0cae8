#include "fairprint/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>

#include "fairprint/errors.hpp"
#include "fairprint/rng.hpp"
#include "fairprint/stats.hpp"

namespace fairprint::synth {

namespace {

double gaussian(Rng& rng, const Law& law) {
  return law.mean + law.std * stats::normal_quantile(rng.unit_open());
}

double truncated_gaussian(Rng& rng, const Law& law, double lo, double hi) {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const double x = gaussian(rng, law);
    if (x >= lo && x <= hi) return x;
  }
  throw NumericError("truncated draw failed: law (" + std::to_string(law.mean) + ", " +
                     std::to_string(law.std) + ") has negligible mass in [" +
                     std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

std::string subject_id(const GroupScoreModel& m, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s%05zu", m.group.label().c_str(), i);
  return buf;
}

std::string sample_id(const std::string& subject, std::size_t k) {
  return subject + "s" + std::to_string(k);
}

// Per-group stream layout: child(g) of the master, with fixed sub-streams
// per draw phase so adding samples to one phase never shifts another.
enum Phase : std::uint64_t {
  kOutlierFlags = 0,
  kGenuine = 1,
  kImpostorPairs = 2,
  kImpostorScores = 3,
  kQuality = 4,
  kCentroids = 5,
  kSampleNoise = 6,
};

}  // namespace

void validate(const GroupScoreModel& model) {
  std::vector<std::string> bad;
  if (!model.group.is_composite()) bad.push_back("group (must be composite)");
  if (model.n_subjects < 2) bad.push_back("n_subjects (>= 2)");
  if (model.samples_per_subject < 2) bad.push_back("samples_per_subject (>= 2)");
  if (!(model.score_lo < model.score_hi) || !std::isfinite(model.score_lo) ||
      !std::isfinite(model.score_hi)) {
    bad.push_back("score range (finite, lo < hi)");
  }
  if (!(model.outlier_fraction >= 0.0 && model.outlier_fraction < 1.0)) {
    bad.push_back("outlier_fraction ([0,1))");
  }
  for (const auto& [name, law] :
       {std::pair{"genuine", model.genuine}, {"impostor", model.impostor},
        {"outlier_genuine", model.outlier_genuine}, {"quality", model.quality},
        {"outlier_quality", model.outlier_quality}}) {
    if (!(law.std >= 0.0) || !std::isfinite(law.mean) || !std::isfinite(law.std)) {
      bad.push_back(std::string(name) + " law");
    }
  }
  if (!(model.embed_noise >= 0.0) || !(model.embed_outlier_noise >= 0.0)) {
    bad.push_back("embedding noise (>= 0)");
  }
  if (!bad.empty()) {
    std::string msg = "invalid group model";
    if (model.group.is_composite()) msg += " for " + model.group.label();
    msg += ": ";
    for (std::size_t i = 0; i < bad.size(); ++i) {
      if (i) msg += ", ";
      msg += bad[i];
    }
    throw ValidationError(msg);
  }
}

SynthDataset generate(const std::vector<GroupScoreModel>& models, std::uint64_t seed) {
  if (models.empty()) throw ValidationError("generate requires at least one group model");
  for (const auto& m : models) validate(m);

  SynthDataset out;
  out.provenance = {models, seed};
  std::vector<core::SubjectRecord> subjects;
  std::vector<core::ComparisonRecord> comparisons;
  const Rng master(seed);

  for (std::size_t g = 0; g < models.size(); ++g) {
    const auto& model = models[g];
    const Rng group_stream = master.child(g);
    const std::size_t n = model.n_subjects;
    const std::size_t sps = model.samples_per_subject;

    std::vector<std::string> ids(n);
    for (std::size_t i = 0; i < n; ++i) {
      ids[i] = subject_id(model, i);
      subjects.push_back({ids[i], model.group});
    }

    // Sample-level outlier flags, row-major (subject, sample).
    Rng flags = group_stream.child(kOutlierFlags);
    std::vector<std::vector<bool>> outlier(n, std::vector<bool>(sps, false));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < sps; ++k) {
        outlier[i][k] = flags.unit() < model.outlier_fraction;
      }
    }

    // Mated comparisons: every sample pair of a subject; the probe-side
    // flag selects the law, which keeps the expected outlier-affected
    // fraction of genuine scores equal to outlier_fraction.
    Rng genuine = group_stream.child(kGenuine);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t a = 0; a + 1 < sps; ++a) {
        for (std::size_t b = a + 1; b < sps; ++b) {
          const Law& law = outlier[i][a] ? model.outlier_genuine : model.genuine;
          const double score =
              truncated_gaussian(genuine, law, model.score_lo, model.score_hi);
          comparisons.push_back(core::make_comparison(ids[i], sample_id(ids[i], a), ids[i],
                                                      sample_id(ids[i], b), score));
        }
      }
    }

    // Impostor comparisons: distinct random within-group pairs (the emitted
    // file format rejects duplicate rows, so collisions are redrawn).
    const std::size_t distinct_pairs = n * (n - 1) * sps * sps;
    const std::size_t budget = model.impostor_budget == 0
                                   ? std::min(10 * n, distinct_pairs / 2)
                                   : model.impostor_budget;
    if (budget > distinct_pairs / 2) {
      throw ValidationError("impostor_budget " + std::to_string(budget) + " for group " +
                            model.group.label() + " exceeds half the distinct pairs (" +
                            std::to_string(distinct_pairs) + ")");
    }
    Rng pairs = group_stream.child(kImpostorPairs);
    Rng impostor = group_stream.child(kImpostorScores);
    std::set<std::array<std::size_t, 4>> seen;
    std::size_t attempts = 0;
    while (seen.size() < budget) {
      if (++attempts > 100 * budget + 1000) {
        throw NumericError("impostor pair sampling stalled for group " +
                           model.group.label());
      }
      const std::size_t pi = static_cast<std::size_t>(pairs.below(n));
      std::size_t gi = static_cast<std::size_t>(pairs.below(n - 1));
      if (gi >= pi) ++gi;
      const std::size_t pk = static_cast<std::size_t>(pairs.below(sps));
      const std::size_t gk = static_cast<std::size_t>(pairs.below(sps));
      if (!seen.insert({pi, gi, pk, gk}).second) continue;
      const double score =
          truncated_gaussian(impostor, model.impostor, model.score_lo, model.score_hi);
      comparisons.push_back(core::make_comparison(ids[pi], sample_id(ids[pi], pk), ids[gi],
                                                  sample_id(ids[gi], gk), score));
    }

    // Quality per sample, depressed for outlier samples when linked.
    Rng quality = group_stream.child(kQuality);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < sps; ++k) {
        const Law& law = (model.quality_outlier_link && outlier[i][k])
                             ? model.outlier_quality
                             : model.quality;
        out.quality[sample_id(ids[i], k)] =
            truncated_gaussian(quality, law, 0.0, 100.0);
      }
    }
  }

  out.score_set = core::ScoreSet(std::move(subjects), std::move(comparisons));
  return out;
}

namespace {

std::vector<double> unit_gaussian_vector(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  for (auto& x : v) x = stats::normal_quantile(rng.unit_open());
  return v;
}

void normalize(std::vector<double>& v) {
  double norm = 0.0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  if (norm == 0.0) throw NumericError("zero-norm embedding draw");
  for (double& x : v) x /= norm;
}

}  // namespace

SynthEmbeddings generate_embeddings(const std::vector<GroupScoreModel>& models,
                                    std::uint64_t seed, std::size_t dim) {
  if (dim < 2) throw ValidationError("embedding dimension must be >= 2");
  if (models.empty()) throw ValidationError("generate_embeddings requires group models");
  for (const auto& m : models) validate(m);

  SynthEmbeddings out;
  out.dim = dim;
  out.provenance = {models, seed};
  out.store = openset::EmbeddingStore(dim);
  const Rng master(seed);

  for (std::size_t g = 0; g < models.size(); ++g) {
    const auto& model = models[g];
    const Rng group_stream = master.child(g);
    Rng flags = group_stream.child(kOutlierFlags);
    Rng centroids = group_stream.child(kCentroids);
    Rng noise = group_stream.child(kSampleNoise);

    for (std::size_t i = 0; i < model.n_subjects; ++i) {
      const std::string sid = subject_id(model, i);
      out.subjects.push_back({sid, model.group});
      std::vector<double> centroid = unit_gaussian_vector(centroids, dim);
      normalize(centroid);
      for (std::size_t k = 0; k < model.samples_per_subject; ++k) {
        const bool is_outlier = flags.unit() < model.outlier_fraction;
        const double sigma = is_outlier ? model.embed_outlier_noise : model.embed_noise;
        std::vector<double> vec = centroid;
        if (sigma > 0.0) {
          for (std::size_t d = 0; d < dim; ++d) {
            vec[d] += sigma * stats::normal_quantile(noise.unit_open());
          }
        }
        normalize(vec);
        out.store.add(sample_id(sid, k), sid, std::move(vec));
      }
    }
  }
  return out;
}

}  // namespace fairprint::synth
