#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fairprint/core.hpp"
#include "fairprint/errors.hpp"
#include "fairprint/stats.hpp"
#include "fairprint/synth.hpp"

using namespace fairprint;
using core::DemographicGroup;
using synth::GroupScoreModel;

namespace {

GroupScoreModel base_model(const std::string& race, const std::string& gender,
                           std::size_t n = 60) {
  GroupScoreModel m;
  m.group = DemographicGroup::composite(race, gender);
  m.n_subjects = n;
  m.samples_per_subject = 2;
  m.genuine = {70.0, 8.0};
  m.impostor = {20.0, 7.0};
  m.impostor_budget = 50;
  return m;
}

}  // namespace

TEST_CASE("generation is deterministic and provenance reproduces it") {
  const std::vector<GroupScoreModel> models{base_model("B", "F"), base_model("W", "M")};
  const auto a = synth::generate(models, 321);
  const auto b = synth::generate(a.provenance);
  REQUIRE(a.score_set.comparisons().size() == b.score_set.comparisons().size());
  for (std::size_t i = 0; i < a.score_set.comparisons().size(); ++i) {
    const auto& ca = a.score_set.comparisons()[i];
    const auto& cb = b.score_set.comparisons()[i];
    CHECK(ca.probe_sample == cb.probe_sample);
    CHECK(ca.score == cb.score);  // bit-identical
  }
  CHECK(a.quality == b.quality);
  const auto c = synth::generate(models, 322);
  CHECK(a.score_set.comparisons().front().score != c.score_set.comparisons().front().score);
}

TEST_CASE("identical models give statistically indistinguishable groups") {
  const std::vector<GroupScoreModel> models{base_model("B", "F", 400),
                                            base_model("W", "M", 400)};
  const auto data = synth::generate(models, 7);
  const double threshold = 66.0;
  const auto g0 = core::verification_rates(
      core::genuine_for_group(data.score_set, models[0].group), threshold);
  const auto g1 = core::verification_rates(
      core::genuine_for_group(data.score_set, models[1].group), threshold);
  const double p = 0.5 * (*g0.tmr + *g1.tmr);
  const double se =
      std::sqrt(p * (1 - p) * (1.0 / g0.n_genuine + 1.0 / g1.n_genuine));
  CHECK(std::fabs(*g0.tmr - *g1.tmr) < 3.0 * se);
}

TEST_CASE("outlier fraction depresses TMR by about epsilon") {
  auto model = base_model("B", "F", 4000);
  model.outlier_fraction = 0.05;
  model.outlier_genuine = {20.0, 4.0};  // entirely below the threshold
  const double threshold = 50.0;
  const auto data = synth::generate({model}, 11);
  const auto rates = core::verification_rates(
      core::genuine_for_group(data.score_set, model.group), threshold);
  // Closed form: (1-eps) * clean mass above thr + eps * outlier mass.
  const double clean_mass = 1.0 - stats::normal_cdf((threshold - 70.0) / 8.0);
  const double outlier_mass = 1.0 - stats::normal_cdf((threshold - 20.0) / 4.0);
  const double expect = 0.95 * clean_mass + 0.05 * outlier_mass;
  const double se = std::sqrt(expect * (1 - expect) / rates.n_genuine);
  CHECK(std::fabs(*rates.tmr - expect) < 4.0 * se);
  CHECK(*rates.tmr < 0.985);  // visibly depressed from ~0.994
}

TEST_CASE("linked outliers get low quality") {
  auto model = base_model("B", "F", 800);
  model.outlier_fraction = 0.2;
  model.outlier_genuine = {20.0, 4.0};
  model.quality = {70.0, 5.0};
  model.outlier_quality = {10.0, 3.0};
  model.quality_outlier_link = true;
  const auto data = synth::generate({model}, 13);
  std::size_t low = 0;
  for (const auto& [sample, q] : data.quality) {
    if (q < 40.0) ++low;
  }
  const double frac = static_cast<double>(low) / data.quality.size();
  CHECK(frac > 0.1);
  CHECK(frac < 0.3);
}

TEST_CASE("model validation lists offending fields") {
  GroupScoreModel bad = base_model("B", "F");
  bad.n_subjects = 1;
  bad.outlier_fraction = 1.5;
  try {
    synth::validate(bad);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("n_subjects") != std::string::npos);
    CHECK(msg.find("outlier_fraction") != std::string::npos);
  }
}

TEST_CASE("scores respect the truncation range") {
  auto model = base_model("B", "F", 200);
  model.score_lo = 0.0;
  model.score_hi = 100.0;
  model.genuine = {95.0, 20.0};  // substantial mass outside without truncation
  const auto data = synth::generate({model}, 17);
  for (const auto& c : data.score_set.comparisons()) {
    CHECK(c.score >= 0.0);
    CHECK(c.score <= 100.0);
  }
}

TEST_CASE("embeddings: zero noise makes mated similarity one") {
  auto model = base_model("B", "F", 20);
  model.embed_noise = 0.0;
  const auto emb = synth::generate_embeddings({model}, 5, 16);
  const openset::EmbeddingScoreSource source(emb.store);
  for (const auto& s : emb.subjects) {
    const auto samples = emb.store.samples_of(s.subject_id);
    REQUIRE(samples.size() == 2);
    CHECK(source.score(samples[0], samples[1]) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("embeddings are unit norm") {
  auto model = base_model("W", "F", 30);
  model.outlier_fraction = 0.1;
  const auto emb = synth::generate_embeddings({model}, 9, 24);
  CHECK(emb.store.dim() == 24);
  for (const auto& e : emb.store.entries()) {
    double norm = 0.0;
    for (double x : e.vec) norm += x * x;
    CHECK(std::fabs(std::sqrt(norm) - 1.0) <= 1e-9);
  }
}

TEST_CASE("an injected outlier sample has the minimum mated similarity") {
  auto clean = base_model("B", "M", 40);
  clean.embed_noise = 0.05;
  clean.embed_outlier_noise = 3.0;
  clean.outlier_fraction = 0.0;
  // Regenerate with exactly one outlier by brute-force seed scan: flip the
  // fraction slightly and look for a store with a single flagged sample.
  auto probed = clean;
  probed.outlier_fraction = 0.015;
  for (std::uint64_t seed = 1; seed < 200; ++seed) {
    const auto emb = synth::generate_embeddings({probed}, seed, 16);
    const openset::EmbeddingScoreSource source(emb.store);
    std::vector<double> sims;
    for (const auto& s : emb.subjects) {
      const auto samples = emb.store.samples_of(s.subject_id);
      sims.push_back(source.score(samples[0], samples[1]));
    }
    std::size_t low = 0;
    for (double s : sims) {
      if (s < 0.8) ++low;
    }
    if (low == 1) {
      // The single outlier pair is the global minimum of mated similarity.
      double min_sim = 2.0;
      for (double s : sims) min_sim = std::min(min_sim, s);
      CHECK(min_sim < 0.8);
      return;
    }
  }
  FAIL("no seed produced exactly one embedding outlier");
}

TEST_CASE("generate rejects bad inputs") {
  CHECK_THROWS_AS(synth::generate({}, 1), ValidationError);
  CHECK_THROWS_AS(synth::generate_embeddings({base_model("B", "F")}, 1, 1),
                  ValidationError);
  auto impossible = base_model("B", "F");
  impossible.genuine = {1000.0, 0.001};  // no mass inside [0,100]
  CHECK_THROWS_AS(synth::generate({impossible}, 1), NumericError);
}
