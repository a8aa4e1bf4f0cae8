#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fairprint/core.hpp"
#include "fairprint/openset.hpp"
#include "fairprint/stats.hpp"
#include "fairprint/synth.hpp"

namespace fairprint::io {

// File formats (UTF-8, comma-separated, mandatory header row, '.' decimal
// point, no thousands separators, no quoting):
//   subjects.csv    subject_id,race,gender
//   scores.csv      probe_subject,probe_sample,gallery_subject,gallery_sample,score[,mated]
//                   mated is derived from subject equality; when the
//                   optional column is present it must agree.
//   quality.csv     sample_id,quality
//   embeddings      JSON lines, {"sample_id":...,"subject_id":...,"vec":[...]}
//   summaries.csv   group,mean,std,m[,unit]   unit: percent (default) | fraction

struct IngestStats {
  std::size_t subject_rows = 0;
  std::size_t score_rows = 0;      // rows kept
  std::size_t rejected_rows = 0;   // rows dropped in permissive mode
  std::size_t quality_rows = 0;
  std::size_t embedding_rows = 0;
  std::uint64_t scores_fnv1a = 0;
  std::uint64_t subjects_fnv1a = 0;
};

struct Dataset {
  core::ScoreSet scores;
  std::map<std::string, double> quality;
  IngestStats stats;
};

std::vector<core::SubjectRecord> read_subjects_csv(const std::filesystem::path& path);

// Reads subjects + scores (+ optional quality). Duplicate comparison rows
// (same probe/gallery sample 4-tuple) are rejected; every error names the
// file, line, and column. A bad score row aborts the ingest unless
// `permissive` is set, in which case it is counted in rejected_rows and
// skipped (never silently: kept + rejected = rows seen).
Dataset ingest(const std::filesystem::path& subjects_path,
               const std::filesystem::path& scores_path,
               const std::optional<std::filesystem::path>& quality_path = std::nullopt,
               bool permissive = false);

std::map<std::string, double> read_quality_csv(const std::filesystem::path& path);

openset::EmbeddingStore read_embeddings_jsonl(const std::filesystem::path& path);

struct SummaryRow {
  core::DemographicGroup group;
  stats::GroupSummary summary;
};

std::vector<SummaryRow> read_summaries_csv(const std::filesystem::path& path);

// Writers emit exactly the formats ingest reads (round-trip identity).
void write_subjects_csv(const std::filesystem::path& path,
                        const std::vector<core::SubjectRecord>& subjects);
void write_scores_csv(const std::filesystem::path& path, const core::ScoreSet& scores);
void write_quality_csv(const std::filesystem::path& path,
                       const std::map<std::string, double>& quality);
void write_embeddings_jsonl(const std::filesystem::path& path,
                            const openset::EmbeddingStore& store);

// Shortest round-trip decimal rendering (deterministic across runs).
std::string format_double(double v);

std::uint64_t fnv1a_file(const std::filesystem::path& path);

}  // namespace fairprint::io
