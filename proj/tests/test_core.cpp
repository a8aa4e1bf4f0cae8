#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fairprint/core.hpp"
#include "fairprint/errors.hpp"
#include "fairprint/rng.hpp"
#include "support/fixtures.hpp"

using namespace fairprint;
using core::DemographicGroup;
using fixtures::make_scoreset;

TEST_CASE("group labels, parsing, and matching") {
  const auto bf = DemographicGroup::composite("B", "F");
  CHECK(bf.label() == "BF");
  CHECK(bf.is_composite());
  const auto b = DemographicGroup::race_only("B");
  CHECK(b.label() == "B");
  CHECK_FALSE(b.is_composite());
  CHECK(b.matches(bf));
  CHECK(DemographicGroup::gender_only("F").matches(bf));
  CHECK_FALSE(DemographicGroup::gender_only("M").matches(bf));

  CHECK(core::parse_group("BF") == bf);
  CHECK(core::parse_group("B") == b);
  CHECK(core::parse_group("F") == DemographicGroup::gender_only("F"));
  CHECK(core::parse_group("Asian.F") == DemographicGroup::composite("Asian", "F"));
  CHECK(core::parse_group("X.") == DemographicGroup::race_only("X"));
  CHECK(core::parse_group(".X") == DemographicGroup::gender_only("X"));
  CHECK_THROWS_AS(core::parse_group("ZZ"), ValidationError);
  CHECK_THROWS_AS(core::parse_group("  "), ValidationError);
  CHECK_THROWS_AS(DemographicGroup::composite(" ", "F"), ValidationError);
}

TEST_CASE("score set validation") {
  CHECK_THROWS_WITH_AS(
      make_scoreset({{"s1", "B", "F"}}, {{"s1", "a", "s2", "b", 5.0}}),
      doctest::Contains("unknown gallery subject"), ValidationError);
  CHECK_THROWS_WITH_AS(
      make_scoreset({{"s1", "B", "F"}, {"s1", "B", "M"}}, {}),
      doctest::Contains("duplicate subject"), ValidationError);
  CHECK_THROWS_WITH_AS(
      make_scoreset({{"s1", "B", "F"}}, {{"s1", "a", "s1", "a", 5.0}}),
      doctest::Contains("self-comparison"), ValidationError);
  // A hand-built record with a mated flag contradicting subject equality.
  core::ComparisonRecord bad;
  bad.probe_subject = "s1";
  bad.probe_sample = "a";
  bad.gallery_subject = "s1";
  bad.gallery_sample = "b";
  bad.score = 1.0;
  bad.mated = false;
  CHECK_THROWS_WITH_AS(
      core::ScoreSet({{"s1", DemographicGroup::composite("B", "F")}}, {bad}),
      doctest::Contains("mated flag inconsistent"), ValidationError);
  core::ComparisonRecord nan_score =
      core::make_comparison("s1", "a", "s1", "b", std::nan(""));
  CHECK_THROWS_WITH_AS(
      core::ScoreSet({{"s1", DemographicGroup::composite("B", "F")}}, {nan_score}),
      doctest::Contains("non-finite"), ValidationError);
}

TEST_CASE("verification rates hand cases") {
  const auto set = fixtures::genuine_only("B", "F", {50, 47, 60, 10});
  const auto r = core::verification_rates(set, 48.0);
  CHECK(*r.tmr == doctest::Approx(0.5));
  CHECK(*r.fnmr() == doctest::Approx(0.5));
  CHECK(r.n_genuine == 4);
  CHECK_FALSE(r.fmr.has_value());  // no impostor side present

  const auto saturated = core::verification_rates(fixtures::genuine_only("B", "F", {60, 70}), 48.0);
  CHECK(*saturated.tmr == 1.0);

  // Boundary: a score equal to the threshold counts as a match.
  const auto boundary = core::verification_rates(fixtures::genuine_only("B", "F", {48}), 48.0);
  CHECK(*boundary.tmr == 1.0);

  CHECK_THROWS_WITH_AS(core::verification_rates(core::ScoreSet{}, 1.0),
                       doctest::Contains("empty score set"), ValidationError);
}

TEST_CASE("tmr times denominator recovers the integer match count") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<double> scores;
    std::size_t expect = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double s = rng.unit() * 100.0;
      scores.push_back(s);
      if (s >= 50.0) ++expect;
    }
    const auto r = core::verification_rates(fixtures::genuine_only("W", "M", scores), 50.0);
    const double recovered = *r.tmr * static_cast<double>(r.n_genuine);
    CHECK(std::llround(recovered) == static_cast<long long>(expect));
    CHECK(std::fabs(recovered - static_cast<double>(expect)) < 1e-9);
  }
}

TEST_CASE("roc hand cases") {
  const auto set = fixtures::two_groups({3, 5, 7}, {}, {2, 4, 6});
  const auto curve = core::roc_curve(set);
  REQUIRE(curve.size() >= 3);
  CHECK(std::isinf(curve.front().threshold));
  CHECK(*curve.front().tmr == 0.0);
  CHECK(*curve.front().fmr == 0.0);
  CHECK(std::isinf(curve.back().threshold));
  CHECK(*curve.back().tmr == 1.0);
  CHECK(*curve.back().fmr == 1.0);
  bool found = false;
  for (const auto& p : curve) {
    if (p.threshold == 5.0) {
      CHECK(*p.tmr == doctest::Approx(2.0 / 3.0));
      CHECK(*p.fmr == doctest::Approx(1.0 / 3.0));
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("roc separable and identical distributions") {
  const auto separable = fixtures::two_groups({0.9}, {}, {0.1});
  bool perfect = false;
  for (const auto& p : core::roc_curve(separable)) {
    if (*p.fmr == 0.0 && *p.tmr == 1.0) perfect = true;
  }
  CHECK(perfect);

  const auto identical = fixtures::two_groups({1, 2, 3, 4}, {}, {1, 2, 3, 4});
  for (const auto& p : core::roc_curve(identical)) {
    if (*p.fmr == 0.5) CHECK(*p.tmr == doctest::Approx(0.5));
  }
}

TEST_CASE("roc monotonicity over random sets") {
  Rng rng(23);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> genuine, impostor;
    for (std::size_t i = 0; i < 5 + rng.below(30); ++i) {
      genuine.push_back(std::floor(rng.unit() * 20.0));
    }
    for (std::size_t i = 0; i < 5 + rng.below(30); ++i) {
      impostor.push_back(std::floor(rng.unit() * 20.0));
    }
    const auto curve = core::roc_curve(fixtures::two_groups(genuine, {}, impostor));
    for (std::size_t i = 1; i < curve.size(); ++i) {
      CHECK(curve[i].threshold <= curve[i - 1].threshold);
      CHECK(*curve[i].tmr >= *curve[i - 1].tmr);
      CHECK(*curve[i].fmr >= *curve[i - 1].fmr);
    }
  }
}

TEST_CASE("fmr threshold calibration") {
  std::vector<double> impostors;
  for (int i = 1; i <= 100; ++i) impostors.push_back(i);
  const auto cal = core::calibrate_threshold_fmr(impostors, 0.01);
  CHECK(cal.threshold == 100.0);
  CHECK(cal.achieved_fmr == doctest::Approx(0.01));

  const std::vector<double> four{1, 2, 3, 4};
  const auto half = core::calibrate_threshold_fmr(four, 0.5);
  CHECK(half.threshold == 3.0);
  CHECK(half.achieved_fmr == doctest::Approx(0.5));

  const std::vector<double> mass{7, 7, 7};
  const auto degenerate = core::calibrate_threshold_fmr(mass, 0.9);
  CHECK(degenerate.threshold > 7.0);
  CHECK(degenerate.threshold == doctest::Approx(7.0));
  CHECK(degenerate.achieved_fmr == 0.0);

  CHECK_THROWS_AS(core::calibrate_threshold_fmr({}, 0.5), ValidationError);
  CHECK_THROWS_AS(core::calibrate_threshold_fmr(four, 0.0), ValidationError);
  CHECK_THROWS_AS(core::calibrate_threshold_fmr(four, 1.0), ValidationError);
}

TEST_CASE("calibration soundness and tightness") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> impostors;
    const std::size_t n = 3 + rng.below(60);
    for (std::size_t i = 0; i < n; ++i) {
      impostors.push_back(std::floor(rng.unit() * 25.0));
    }
    const double target = 0.05 + rng.unit() * 0.9;
    const auto cal = core::calibrate_threshold_fmr(impostors, target);
    const auto fmr_at = [&](double t) {
      std::size_t c = 0;
      for (double s : impostors) {
        if (s >= t) ++c;
      }
      return static_cast<double>(c) / static_cast<double>(impostors.size());
    };
    CHECK(fmr_at(cal.threshold) <= target);
    CHECK(fmr_at(cal.threshold) == doctest::Approx(cal.achieved_fmr));
    // Tightness: any strictly lower candidate threshold overshoots.
    double below = -1e300;
    for (double s : impostors) {
      if (s < cal.threshold) below = std::max(below, s);
    }
    if (below > -1e300) CHECK(fmr_at(below) > target);
  }
}

TEST_CASE("partition by group") {
  const auto set = make_scoreset(
      {{"bf", "B", "F"}, {"bm", "B", "M"}, {"wf", "W", "F"}, {"wm", "W", "M"}},
      {{"bf", "a", "bf", "b", 1.0},
       {"bm", "a", "bm", "b", 2.0},
       {"wf", "a", "wf", "b", 3.0},
       {"wm", "a", "wm", "b", 4.0}});
  const auto part = core::partition_by_group(set, true);
  REQUIRE(part.composite.size() == 4);
  for (const auto& [group, sub] : part.composite) {
    CHECK(sub.comparisons().size() == 1);
  }
  bool found_f = false;
  for (const auto& [group, sub] : part.marginal) {
    if (group.label() == "F") {
      CHECK(sub.comparisons().size() == 2);  // BF union WF
      found_f = true;
    }
  }
  CHECK(found_f);
  CHECK(part.unlabeled.comparisons().empty());
}

TEST_CASE("partition of an empty set is empty") {
  const auto part = core::partition_by_group(core::ScoreSet{}, true);
  CHECK(part.composite.empty());
  CHECK(part.unlabeled.comparisons().empty());
}

TEST_CASE("unknown labels land in the unlabeled bucket") {
  const auto set = make_scoreset(
      {{"bf", "B", "F"}, {"bm", "B", "M"}, {"wf", "W", "F"}, {"wm", "W", "M"},
       {"xx", "X", "F"}},
      {{"bf", "a", "bf", "b", 1.0},
       {"bm", "a", "bm", "b", 2.0},
       {"wf", "a", "wf", "b", 3.0},
       {"wm", "a", "wm", "b", 4.0},
       {"xx", "a", "xx", "b", 5.0}});
  const auto part = core::partition_by_group(set, false);
  CHECK(part.composite.size() == 4);
  CHECK(part.unlabeled.comparisons().size() == 1);
  CHECK(part.unlabeled.comparisons().front().probe_subject == "xx");

  // Partition completeness over mated counts.
  std::size_t total = part.unlabeled.genuine_count();
  for (const auto& [_, sub] : part.composite) total += sub.genuine_count();
  CHECK(total == set.genuine_count());
}

TEST_CASE("filter and genuine_for_group") {
  const auto set = make_scoreset(
      {{"bf", "B", "F"}, {"wm", "W", "M"}},
      {{"bf", "a", "bf", "b", 10.0}, {"bf", "a", "wm", "b", 2.0}});
  const auto filtered = core::filter_group(set, DemographicGroup::composite("B", "F"));
  CHECK(filtered.comparisons().size() == 2);  // genuine + impostor by probe group
  const auto genuine = core::genuine_for_group(set, DemographicGroup::composite("B", "F"));
  CHECK(genuine.comparisons().size() == 1);
  CHECK(genuine.subjects().size() == 1);
  CHECK(genuine.subjects().front().subject_id == "bf");
}
