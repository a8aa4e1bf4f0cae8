#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "fairprint/errors.hpp"
#include "fairprint/openset.hpp"
#include "fairprint/rng.hpp"

using namespace fairprint;
using core::DemographicGroup;
using openset::Gallery;
using openset::Probe;
using openset::SearchOutcome;
using openset::SubjectSamples;
using openset::TableScoreSource;

namespace {

std::vector<SubjectSamples> make_pool(const std::string& prefix, std::size_t n,
                                      std::size_t samples = 2) {
  std::vector<SubjectSamples> out;
  for (std::size_t i = 0; i < n; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%04zu", prefix.c_str(), i);
    SubjectSamples s;
    s.subject_id = buf;
    for (std::size_t k = 0; k < samples; ++k) {
      s.samples.push_back(s.subject_id + "s" + std::to_string(k));
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::pair<DemographicGroup, std::vector<SubjectSamples>>> four_cohorts(
    std::size_t per_group) {
  std::vector<std::pair<DemographicGroup, std::vector<SubjectSamples>>> cohorts;
  for (const char* race : {"B", "W"}) {
    for (const char* gender : {"F", "M"}) {
      cohorts.emplace_back(DemographicGroup::composite(race, gender),
                           make_pool(std::string(race) + gender, per_group));
    }
  }
  return cohorts;
}

}  // namespace

TEST_CASE("desk-scale gallery arithmetic") {
  openset::GalleryBuildOptions opts;
  opts.seed = 5;
  const auto build = openset::build_gallery(make_pool("D", 1000, 1), four_cohorts(50),
                                            DemographicGroup::composite("B", "F"), 20, opts);
  CHECK(build.gallery.size() == 1000 + 3 * 50 + 20);  // 1,170
  CHECK(build.cohort.mated.size() == 20);
  CHECK(build.cohort.nonmated.size() == 30);
  for (const auto& p : build.cohort.mated) CHECK(build.gallery.has_subject(p.subject_id));
  for (const auto& p : build.cohort.nonmated) {
    CHECK_FALSE(build.gallery.has_subject(p.subject_id));
  }
}

TEST_CASE("zero mates leaves fnir undefined but fpir computable") {
  openset::GalleryBuildOptions opts;
  opts.seed = 5;
  const auto build = openset::build_gallery(make_pool("D", 30, 1), four_cohorts(8),
                                            DemographicGroup::composite("W", "M"), 0, opts);
  CHECK(build.cohort.mated.empty());
  CHECK(build.cohort.nonmated.size() == 8);
  CHECK_FALSE(openset::fnir({}, 0.5, 5).has_value());
}

TEST_CASE("gallery build gate checks") {
  auto cohorts = four_cohorts(8);
  // Distractor overlapping a cohort subject.
  auto overlap = make_pool("D", 3, 1);
  overlap[0].subject_id = cohorts[0].second[0].subject_id;
  CHECK_THROWS_WITH_AS(
      openset::build_gallery(overlap, cohorts, DemographicGroup::composite("B", "F"), 2, {}),
      doctest::Contains("overlaps"), ValidationError);
  // Asking for more mates than subjects.
  CHECK_THROWS_AS(
      openset::build_gallery(make_pool("D", 3, 1), cohorts,
                             DemographicGroup::composite("B", "F"), 9, {}),
      ValidationError);
  // Mated probes require a second sample.
  auto one_sample = four_cohorts(8);
  for (auto& [g, subjects] : one_sample) {
    for (auto& s : subjects) s.samples.resize(1);
  }
  CHECK_THROWS_WITH_AS(
      openset::build_gallery(make_pool("D", 3, 1), one_sample,
                             DemographicGroup::composite("B", "F"), 2, {}),
      doctest::Contains("two samples"), ValidationError);
}

TEST_CASE("search returns the exact top R with documented tie order") {
  Gallery gallery;
  TableScoreSource table;
  const double scores[] = {9, 7, 7, 5, 3, 1};
  for (int i = 0; i < 6; ++i) {
    const std::string sample = "g" + std::to_string(i);
    gallery.enroll(sample, "id" + std::to_string(i));
    table.add("probe", sample, scores[i]);
  }
  const auto outcome = openset::search({"probe", "someone"}, gallery, table, 3);
  REQUIRE(outcome.candidates.size() == 3);
  CHECK(outcome.candidates[0].score == 9);
  CHECK(outcome.candidates[1].score == 7);
  CHECK(outcome.candidates[2].score == 7);
  // Tie between g1 and g2 resolves by gallery sample id ascending.
  CHECK(outcome.candidates[1].gallery_sample == "g1");
  CHECK(outcome.candidates[2].gallery_sample == "g2");

  const auto all = openset::search({"probe", "someone"}, gallery, table, 10);
  CHECK(all.candidates.size() == 6);
  for (std::size_t i = 1; i < all.candidates.size(); ++i) {
    CHECK(all.candidates[i].score <= all.candidates[i - 1].score);
  }
}

TEST_CASE("identity retrieval ranks the duplicate first") {
  Gallery gallery;
  TableScoreSource table;
  for (int i = 0; i < 5; ++i) {
    const std::string sample = "g" + std::to_string(i);
    gallery.enroll(sample, "id" + std::to_string(i));
    table.add("probe", sample, i == 3 ? 1.0 : 0.2);
  }
  const auto outcome = openset::search({"probe", "id3"}, gallery, table, 2);
  CHECK(outcome.candidates.front().gallery_subject == "id3");
}

namespace {

SearchOutcome outcome_with(const std::string& subject, std::size_t rank_cutoff,
                           std::vector<std::pair<std::string, double>> ranked) {
  SearchOutcome o;
  o.probe_sample = subject + "_probe";
  o.probe_subject = subject;
  o.rank_cutoff = rank_cutoff;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    o.candidates.push_back({ranked[i].first, "smp" + std::to_string(i), ranked[i].second});
  }
  return o;
}

}  // namespace

TEST_CASE("fpir counts non-mated searches above threshold") {
  std::vector<SearchOutcome> outcomes;
  for (int i = 0; i < 10; ++i) {
    outcomes.push_back(outcome_with("p" + std::to_string(i), 1,
                                    {{"other", i < 3 ? 0.9 : 0.1}}));
  }
  CHECK(*openset::fpir(outcomes, 0.5) == doctest::Approx(0.3));
  CHECK(*openset::fpir(outcomes, 0.95) == 0.0);
  CHECK(*openset::fpir(outcomes, 0.1) == 1.0);  // threshold at the minimum top score
  CHECK_FALSE(openset::fpir({}, 0.5).has_value());
}

TEST_CASE("fnir clauses: rank and threshold") {
  std::vector<SearchOutcome> outcomes;
  // 180 hits (rank 1, score 0.9), 20 failures (rank outside R).
  for (int i = 0; i < 200; ++i) {
    if (i < 180) {
      outcomes.push_back(outcome_with("s" + std::to_string(i), 5,
                                      {{"s" + std::to_string(i), 0.9}}));
    } else {
      outcomes.push_back(outcome_with("s" + std::to_string(i), 5, {{"other", 0.95}}));
    }
  }
  CHECK(*openset::fnir(outcomes, 0.5, 5) == doctest::Approx(0.1));

  // Mate at rank 6 with a passing score still fails the rank clause.
  std::vector<std::pair<std::string, double>> six;
  for (int r = 0; r < 5; ++r) six.emplace_back("other" + std::to_string(r), 0.9 - 0.01 * r);
  six.emplace_back("me", 0.8);
  const auto rank6 = outcome_with("me", 6, six);
  CHECK(*openset::fnir({&rank6, 1}, 0.0, 5) == 1.0);
  CHECK(*openset::fnir({&rank6, 1}, 0.0, 6) == 0.0);

  // No failure conditions at all.
  const auto lenient = openset::fnir(outcomes, -std::numeric_limits<double>::infinity(),
                                     5);
  CHECK(*lenient == doctest::Approx(0.1));  // rank failures remain
}

TEST_CASE("tpir is the rank-only variant") {
  std::vector<SearchOutcome> outcomes;
  outcomes.push_back(outcome_with("a", 2, {{"a", 0.9}, {"x", 0.8}}));        // rank 1
  outcomes.push_back(outcome_with("b", 2, {{"x", 0.9}, {"b", 0.8}}));        // rank 2
  outcomes.push_back(outcome_with("c", 2, {{"x", 0.9}, {"y", 0.8}}));        // outside
  outcomes.push_back(outcome_with("d", 2, {{"d", 0.2}, {"x", 0.1}}));        // rank 1, low score
  outcomes.push_back(outcome_with("e", 2, {{"x", 0.9}, {"e", 0.05}}));       // rank 2
  CHECK(*openset::tpir(outcomes, 2) == doctest::Approx(4.0 / 5.0));
  CHECK(*openset::tpir(outcomes, 1) == doctest::Approx(2.0 / 5.0));
}

TEST_CASE("fnir threshold calibration") {
  std::vector<SearchOutcome> outcomes;
  for (int i = 0; i < 10; ++i) {
    outcomes.push_back(outcome_with("s" + std::to_string(i), 5,
                                    {{"s" + std::to_string(i), 0.1 * (i + 1)}}));
  }
  // One failure allowed at target 0.1: the second-lowest mate score.
  const auto cal = openset::calibrate_threshold_fnir(outcomes, 0.1, 5);
  CHECK(cal.threshold == doctest::Approx(0.2));
  CHECK(cal.achieved_fnir == doctest::Approx(0.1));

  const auto vacuous = openset::calibrate_threshold_fnir(outcomes, 1.0, 5);
  CHECK(std::isinf(vacuous.threshold));
  CHECK(vacuous.achieved_fnir <= 1.0);

  // 20% of mates outside rank R: target 0.1 is below the floor.
  std::vector<SearchOutcome> floored = outcomes;
  floored[0] = outcome_with("s0", 5, {{"other", 0.9}});
  floored[1] = outcome_with("s1", 5, {{"other", 0.9}});
  CHECK_THROWS_WITH_AS(openset::calibrate_threshold_fnir(floored, 0.1, 5),
                       doctest::Contains("floor"), NumericError);
}

TEST_CASE("metric results match a direct recomputation from the score table") {
  // Brute-force oracle on a small random gallery.
  Rng rng(17);
  Gallery gallery;
  TableScoreSource table;
  const std::size_t n_gallery = 40;
  const std::size_t n_probes = 25;
  std::vector<std::string> gallery_samples;
  for (std::size_t i = 0; i < n_gallery; ++i) {
    const std::string sample = "g" + std::to_string(i);
    gallery.enroll(sample, "id" + std::to_string(i));
    gallery_samples.push_back(sample);
  }
  struct ProbeCase {
    Probe probe;
    bool mated;
  };
  std::vector<ProbeCase> probes;
  for (std::size_t p = 0; p < n_probes; ++p) {
    const bool mated = p % 2 == 0;
    const std::string subject = mated ? "id" + std::to_string(p) : "np" + std::to_string(p);
    probes.push_back({{"probe" + std::to_string(p), subject}, mated});
    for (const auto& gs : gallery_samples) {
      table.add("probe" + std::to_string(p), gs, std::floor(rng.unit() * 50.0));
    }
  }
  const std::size_t R = 4;
  std::vector<SearchOutcome> mated, nonmated;
  for (const auto& pc : probes) {
    auto o = openset::search(pc.probe, gallery, table, R);
    (pc.mated ? mated : nonmated).push_back(std::move(o));
  }
  for (double threshold : {5.0, 20.0, 35.0, 49.0}) {
    // Direct recomputation from the raw table.
    std::size_t fp = 0;
    for (const auto& pc : probes) {
      if (pc.mated) continue;
      double best = -1e300;
      for (const auto& gs : gallery_samples) {
        best = std::max(best, table.score(pc.probe.sample_id, gs));
      }
      if (best >= threshold) ++fp;
    }
    const double fpir_direct = static_cast<double>(fp) / static_cast<double>(nonmated.size());
    CHECK(*openset::fpir(nonmated, threshold) == doctest::Approx(fpir_direct));

    std::size_t fn = 0, tp = 0;
    for (const auto& pc : probes) {
      if (!pc.mated) continue;
      const std::string mate_sample = "g" + pc.probe.subject_id.substr(2);
      const double mate_score = table.score(pc.probe.sample_id, mate_sample);
      std::size_t strictly_better = 0, tied_earlier = 0;
      for (const auto& gs : gallery_samples) {
        const double s = table.score(pc.probe.sample_id, gs);
        if (s > mate_score) ++strictly_better;
        if (s == mate_score && gs < mate_sample) ++tied_earlier;
      }
      const std::size_t rank = 1 + strictly_better + tied_earlier;
      const bool in_rank = rank <= R;
      if (in_rank) ++tp;
      if (!in_rank || mate_score < threshold) ++fn;
    }
    CHECK(*openset::fnir(mated, threshold, R) ==
          doctest::Approx(static_cast<double>(fn) / static_cast<double>(mated.size())));
    CHECK(*openset::tpir(mated, R) ==
          doctest::Approx(static_cast<double>(tp) / static_cast<double>(mated.size())));
  }
}

TEST_CASE("fpir and fnir are monotone in the threshold") {
  Rng rng(29);
  std::vector<SearchOutcome> mated, nonmated;
  for (int i = 0; i < 40; ++i) {
    const std::string id = "s" + std::to_string(i);
    mated.push_back(outcome_with(id, 5, {{id, rng.unit()}}));
    nonmated.push_back(outcome_with("n" + std::to_string(i), 5, {{"other", rng.unit()}}));
  }
  double prev_fpir = 1.1, prev_fnir = -0.1;
  for (int k = 0; k <= 50; ++k) {
    const double t = k / 50.0;
    const double f = *openset::fpir(nonmated, t);
    const double n = *openset::fnir(mated, t, 5);
    CHECK(f <= prev_fpir);
    CHECK(n >= prev_fnir);
    prev_fpir = f;
    prev_fnir = n;
  }
}

TEST_CASE("embedding store and inner-product source") {
  openset::EmbeddingStore store(3);
  store.add("a", "s1", {1.0, 0.0, 0.0});
  store.add("b", "s2", {0.0, 1.0, 0.0});
  store.add("c", "s1", {1.0, 0.0, 0.0});
  CHECK_THROWS_AS(store.add("a", "s3", {1, 0, 0}), ValidationError);
  CHECK_THROWS_AS(store.add("d", "s3", {1, 0}), ValidationError);
  const openset::EmbeddingScoreSource source(store);
  CHECK(source.score("a", "c") == doctest::Approx(1.0));
  CHECK(source.score("a", "b") == doctest::Approx(0.0));
  CHECK(store.samples_of("s1") == std::vector<std::string>{"a", "c"});
}
