#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairprint/core.hpp"
#include "fairprint/diagnostics.hpp"
#include "fairprint/io.hpp"
#include "fairprint/openset.hpp"
#include "fairprint/resampler.hpp"
#include "fairprint/stats.hpp"

namespace fairprint::audit {

inline constexpr int kReportSchemaVersion = 1;

using GroupPair = std::pair<core::DemographicGroup, core::DemographicGroup>;

// Default pair list: the six demographic comparisons reported for
// verification (four composite pairs plus the gender and race marginals).
std::vector<GroupPair> default_verify_pairs();
// The four composite pairs reported for identification.
std::vector<GroupPair> default_ident_pairs();

std::vector<GroupPair> parse_pairs(const std::string& csv,
                                   const core::GroupTaxonomy& taxonomy = {});

enum class ThresholdSource { fixed, target_fmr, target_fnir };

struct ThresholdSpec {
  ThresholdSource source = ThresholdSource::fixed;
  double value = 0.0;        // fixed threshold
  double target = 0.0;       // target fmr / fnir
  core::DemographicGroup reference_group;  // fnir calibration cohort
};

struct VerifyConfig {
  ThresholdSpec threshold;
  double alpha = 0.05;
  boot::BootstrapConfig bootstrap;
  std::vector<GroupPair> pairs = default_verify_pairs();
  core::GroupTaxonomy taxonomy;
  bool with_point_z = true;
  bool with_flips = true;       // point-mode minimal flips per pair
  bool with_roc = true;
  std::size_t max_outliers = 100;
  bool equalize_quality = false;
};

struct IdentConfig {
  ThresholdSpec threshold;  // fixed or target_fnir
  double alpha = 0.05;
  boot::BootstrapConfig bootstrap;
  std::vector<core::DemographicGroup> audited_groups;  // default: 4 composites
  std::vector<GroupPair> pairs = default_ident_pairs();
  core::GroupTaxonomy taxonomy;
  std::size_t rank = 5;
  std::size_t n_distractors = 0;   // 0: all available
  std::size_t cohort_size = 0;     // 0: smallest group
  std::size_t n_mates = 200;
  std::size_t sweep_points = 50;
  std::optional<double> sweep_lo;  // default: observed score range
  std::optional<double> sweep_hi;
};

// Reports are canonical JSON documents (schema-versioned, sorted keys);
// the CSV/markdown renderers consume the JSON so every export agrees.
nlohmann::json run_verification_audit(const VerifyConfig& config, const io::Dataset& data,
                                      const std::vector<io::SummaryRow>& summaries = {});

// Summaries-only entry point: pairwise tests and ANOVA straight from
// published (mean, std, m) rows, no raw scores involved.
nlohmann::json run_summary_audit(const VerifyConfig& config,
                                 const std::vector<io::SummaryRow>& summaries);

nlohmann::json run_identification_audit(const IdentConfig& config,
                                        const openset::EmbeddingStore& embeddings,
                                        const std::vector<core::SubjectRecord>& subjects);

// Same audit against a precomputed score table; `samples` lists each
// subject's sample ids in enrollment order.
nlohmann::json run_identification_audit(const IdentConfig& config,
                                        const openset::ScoreSource& source,
                                        const std::vector<openset::SubjectSamples>& samples,
                                        const std::vector<core::SubjectRecord>& subjects);

struct EmitOptions {
  bool json = true;
  bool csv = true;
  bool markdown = true;
};

// Writes report.json (canonical bytes), per-table CSVs, and report.md into
// `out_dir`. Returns the paths written.
std::vector<std::filesystem::path> emit_report(const nlohmann::json& report,
                                               const std::filesystem::path& out_dir,
                                               const EmitOptions& options = {});

// Structural validation of a loaded report document (schema version and
// required sections). Throws ValidationError on mismatch.
void validate_report(const nlohmann::json& report);

nlohmann::json test_result_to_json(const stats::TestResult& r);

}  // namespace fairprint::audit
