#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "fairprint/errors.hpp"
#include "fairprint/resampler.hpp"
#include "fairprint/rng.hpp"
#include "support/fixtures.hpp"

using namespace fairprint;
using boot::BootstrapConfig;
using core::DemographicGroup;

namespace {

std::vector<std::string> comparison_keys(const core::ScoreSet& s) {
  std::vector<std::string> keys;
  for (const auto& c : s.comparisons()) {
    keys.push_back(c.probe_sample + "|" + c.gallery_sample);
  }
  return keys;
}

}  // namespace

TEST_CASE("golden stream trace matches the frozen fixture") {
  std::ifstream in("data/rng_trace.txt");
  REQUIRE(in.good());
  std::string line;
  std::size_t checked = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "stream") {
      std::uint64_t key, counter;
      std::string hex;
      ss >> key >> counter >> hex;
      CHECK(Rng(key).at(counter) == std::stoull(hex, nullptr, 16));
      ++checked;
    } else if (kind == "child") {
      std::uint64_t key, index;
      std::string hex;
      ss >> key >> index >> hex;
      CHECK(Rng(key).child(index).key() == std::stoull(hex, nullptr, 16));
      ++checked;
    } else if (kind == "draws") {
      std::uint64_t seed;
      std::size_t n, replicate;
      ss >> seed >> n >> replicate;
      BootstrapConfig cfg;
      cfg.seed = seed;
      const auto got = boot::bootstrap_indices(n, cfg, replicate);
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t want;
        ss >> want;
        CHECK(got[i] == want);
      }
      ++checked;
    }
  }
  CHECK(checked == 14);
}

TEST_CASE("resampling is deterministic") {
  const auto set = fixtures::genuine_only("B", "F", {10, 50, 60});
  BootstrapConfig cfg;
  cfg.seed = 24601;
  const auto a = boot::resample(set, cfg, 1);
  const auto b = boot::resample(set, cfg, 1);
  CHECK(comparison_keys(a) == comparison_keys(b));
  const auto other = boot::resample(set, cfg, 2);
  CHECK(comparison_keys(a) != comparison_keys(other));
}

TEST_CASE("single subject resamples to itself") {
  const auto set = fixtures::genuine_only("B", "F", {42.0});
  BootstrapConfig cfg;
  cfg.seed = 9;
  for (std::size_t r = 0; r < 5; ++r) {
    const auto rep = boot::resample(set, cfg, r);
    CHECK(rep.comparisons().size() == 1);
    CHECK(rep.comparisons().front().score == 42.0);
  }
}

TEST_CASE("hand-traced estimate over the golden draws") {
  // Subjects s0,s1,s2 (sorted) with genuine scores 10, 50, 60 at thr 48.
  // seed 24601: replicate 0 draws {1,1,0} -> scores {50,50,10} -> TMR 2/3;
  // replicate 1 draws {0,0,0} -> {10,10,10} -> TMR 0.
  const auto set = fixtures::genuine_only("B", "F", {10, 50, 60});
  BootstrapConfig cfg;
  cfg.m = 2;
  cfg.seed = 24601;
  const auto est =
      boot::bootstrap_tmr(set, 48.0, cfg, DemographicGroup::composite("B", "F"));
  REQUIRE(est.replicates.size() == 2);
  CHECK(est.replicates[0] == doctest::Approx(2.0 / 3.0));
  CHECK(est.replicates[1] == doctest::Approx(0.0));
  CHECK(est.mean == doctest::Approx(1.0 / 3.0));
  CHECK(est.std == doctest::Approx(std::sqrt(2.0) / 3.0));
}

TEST_CASE("subject draws keep a subject's comparisons together") {
  // Two comparisons per subject so multiplicity is visible.
  const auto set = fixtures::make_scoreset(
      {{"s0", "B", "F"}, {"s1", "B", "F"}, {"s2", "B", "F"}},
      {{"s0", "s0a", "s0", "s0b", 1.0},
       {"s0", "s0a", "s0", "s0c", 2.0},
       {"s1", "s1a", "s1", "s1b", 3.0},
       {"s1", "s1a", "s1", "s1c", 4.0},
       {"s2", "s2a", "s2", "s2b", 5.0},
       {"s2", "s2a", "s2", "s2c", 6.0}});
  BootstrapConfig cfg;
  cfg.seed = 77;
  for (std::size_t r = 0; r < 6; ++r) {
    const auto counts = boot::draw_counts(set, cfg, r);
    const auto rep = boot::resample(set, cfg, r);
    std::map<std::string, std::size_t> per_subject;
    for (const auto& c : rep.comparisons()) per_subject[c.probe_subject]++;
    for (std::size_t i = 0; i < 3; ++i) {
      const std::string id = "s" + std::to_string(i);
      CHECK(per_subject[id] == counts[i] * 2);
    }
  }
}

TEST_CASE("comparison mode draws comparisons directly") {
  const auto set = fixtures::genuine_only("B", "F", {10, 50, 60});
  BootstrapConfig cfg;
  cfg.seed = 3;
  cfg.unit = boot::ResampleUnit::comparison;
  const auto rep = boot::resample(set, cfg, 0);
  CHECK(rep.comparisons().size() == set.comparisons().size());
  CHECK(rep.subjects().size() == set.subjects().size());
}

TEST_CASE("saturated metric gives zero bootstrap spread") {
  const auto set = fixtures::genuine_only("B", "F", {60, 70, 80, 90});
  BootstrapConfig cfg;
  cfg.seed = 12;
  const auto est =
      boot::bootstrap_tmr(set, 48.0, cfg, DemographicGroup::composite("B", "F"));
  CHECK(est.mean == 1.0);
  CHECK(est.std == 0.0);
  for (double v : est.replicates) CHECK(v == 1.0);
}

TEST_CASE("bootstrap mean approaches the point estimate as m grows") {
  std::vector<double> scores;
  Rng rng(31);
  for (int i = 0; i < 60; ++i) scores.push_back(rng.unit() * 100.0);
  const auto set = fixtures::genuine_only("W", "M", scores);
  const double point = *core::verification_rates(set, 50.0).tmr;
  BootstrapConfig cfg;
  cfg.m = 200;
  cfg.seed = 8;
  const auto est =
      boot::bootstrap_tmr(set, 50.0, cfg, DemographicGroup::composite("W", "M"));
  CHECK(std::fabs(est.mean - point) <=
        3.0 * est.std / std::sqrt(static_cast<double>(cfg.m)));
  double lo = 1e300, hi = -1e300;
  for (double v : est.replicates) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(est.mean >= lo);
  CHECK(est.mean <= hi);
}

TEST_CASE("undefined replicate metric names the replicate") {
  // Only impostor comparisons: TMR undefined on every replicate.
  const auto set = fixtures::make_scoreset(
      {{"s0", "B", "F"}, {"s1", "B", "F"}},
      {{"s0", "a", "s1", "b", 5.0}});
  BootstrapConfig cfg;
  cfg.seed = 4;
  CHECK_THROWS_WITH_AS(
      boot::bootstrap_tmr(set, 10.0, cfg, DemographicGroup::composite("B", "F")),
      doctest::Contains("replicate 0"), NumericError);
}

TEST_CASE("empty input cannot be resampled") {
  BootstrapConfig cfg;
  CHECK_THROWS_AS(boot::resample(core::ScoreSet{}, cfg, 0), ValidationError);
  CHECK_THROWS_AS(boot::bootstrap_indices(0, cfg, 0), ValidationError);
}
