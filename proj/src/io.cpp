#include "fairprint/io.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fairprint/errors.hpp"

namespace fairprint::io {

namespace {

std::string location(const std::filesystem::path& path, std::size_t line, std::size_t column) {
  std::string s = path.string() + ":" + std::to_string(line);
  if (column > 0) s += ":col" + std::to_string(column);
  return s;
}

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line,
                       std::size_t column, const std::string& message) {
  throw ValidationError(location(path, line, column) + ": " + message);
}

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return {};
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::string::size_type start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

double parse_double(const std::string& field, const std::filesystem::path& path,
                    std::size_t line, std::size_t column) {
  double value = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    fail(path, line, column, "expected a decimal number, got '" + field + "'");
  }
  return value;
}

std::size_t parse_count(const std::string& field, const std::filesystem::path& path,
                        std::size_t line, std::size_t column) {
  std::size_t value = 0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || field.empty()) {
    fail(path, line, column, "expected a non-negative integer, got '" + field + "'");
  }
  return value;
}

// Strict CSV walker: opens, checks the header, and hands rows to `row_fn`.
template <typename RowFn>
std::size_t for_each_row(const std::filesystem::path& path,
                         const std::vector<std::string>& header,
                         std::size_t optional_tail_columns, const RowFn& row_fn) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line)) {
    throw ValidationError(path.string() + ": empty file (header row is mandatory)");
  }
  const auto got = split_csv(line);
  const std::size_t required = header.size() - optional_tail_columns;
  bool header_ok = got.size() >= required && got.size() <= header.size();
  if (header_ok) {
    for (std::size_t i = 0; i < got.size(); ++i) header_ok &= got[i] == header[i];
  }
  if (!header_ok) {
    std::string want;
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) want += ",";
      want += header[i];
      if (i + 1 == required && optional_tail_columns > 0) want += "[";
    }
    if (optional_tail_columns > 0) want += "]";
    fail(path, 1, 0, "unknown header '" + line + "', expected '" + want + "'");
  }
  const std::size_t n_columns = got.size();

  std::size_t rows = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split_csv(line);
    if (fields.size() != n_columns) {
      fail(path, lineno, fields.size(),
           "expected " + std::to_string(n_columns) + " fields, got " +
               std::to_string(fields.size()));
    }
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (fields[i].empty()) fail(path, lineno, i + 1, "empty field");
    }
    row_fn(fields, lineno);
    ++rows;
  }
  return rows;
}

}  // namespace

std::vector<core::SubjectRecord> read_subjects_csv(const std::filesystem::path& path) {
  std::vector<core::SubjectRecord> subjects;
  for_each_row(path, {"subject_id", "race", "gender"}, 0,
               [&](const std::vector<std::string>& f, std::size_t lineno) {
                 try {
                   subjects.push_back(
                       {f[0], core::DemographicGroup::composite(f[1], f[2])});
                 } catch (const Error& e) {
                   fail(path, lineno, 2, e.what());
                 }
               });
  return subjects;
}

Dataset ingest(const std::filesystem::path& subjects_path,
               const std::filesystem::path& scores_path,
               const std::optional<std::filesystem::path>& quality_path,
               bool permissive) {
  Dataset out;
  auto subjects = read_subjects_csv(subjects_path);
  out.stats.subject_rows = subjects.size();
  out.stats.subjects_fnv1a = fnv1a_file(subjects_path);

  std::set<std::string> known_subjects;
  for (const auto& s : subjects) known_subjects.insert(s.subject_id);

  std::vector<core::ComparisonRecord> comparisons;
  std::set<std::array<std::string, 4>> seen;
  for_each_row(
      scores_path,
      {"probe_subject", "probe_sample", "gallery_subject", "gallery_sample", "score",
       "mated"},
      1, [&](const std::vector<std::string>& f, std::size_t lineno) {
        try {
          const double score = parse_double(f[4], scores_path, lineno, 5);
          auto rec = core::make_comparison(f[0], f[1], f[2], f[3], score);
          if (!known_subjects.count(f[0])) {
            fail(scores_path, lineno, 1, "unknown probe subject '" + f[0] + "'");
          }
          if (!known_subjects.count(f[2])) {
            fail(scores_path, lineno, 3, "unknown gallery subject '" + f[2] + "'");
          }
          if (rec.mated && f[1] == f[3]) {
            fail(scores_path, lineno, 4, "mated self-comparison of sample '" + f[1] + "'");
          }
          if (f.size() == 6) {
            if (f[5] != "0" && f[5] != "1") {
              fail(scores_path, lineno, 6, "mated must be 0 or 1, got '" + f[5] + "'");
            }
            if ((f[5] == "1") != rec.mated) {
              fail(scores_path, lineno, 6,
                   "mated column says " + f[5] + " but probe subject '" + f[0] +
                       "' and gallery subject '" + f[2] +
                       (rec.mated ? "' are equal" : "' differ"));
            }
          }
          if (!seen.insert({f[0], f[1], f[2], f[3]}).second) {
            fail(scores_path, lineno, 0, "duplicate comparison row");
          }
          comparisons.push_back(std::move(rec));
          ++out.stats.score_rows;
        } catch (const ValidationError&) {
          if (!permissive) throw;
          ++out.stats.rejected_rows;
        }
      });
  out.stats.scores_fnv1a = fnv1a_file(scores_path);

  try {
    out.scores = core::ScoreSet(std::move(subjects), std::move(comparisons));
  } catch (const Error& e) {
    throw ValidationError(scores_path.string() + ": " + e.what());
  }

  if (quality_path) {
    out.quality = read_quality_csv(*quality_path);
    out.stats.quality_rows = out.quality.size();
  }
  return out;
}

std::map<std::string, double> read_quality_csv(const std::filesystem::path& path) {
  std::map<std::string, double> quality;
  for_each_row(path, {"sample_id", "quality"}, 0,
               [&](const std::vector<std::string>& f, std::size_t lineno) {
                 const double q = parse_double(f[1], path, lineno, 2);
                 if (!(q >= 0.0 && q <= 100.0)) {
                   fail(path, lineno, 2, "quality outside [0,100]: " + f[1]);
                 }
                 if (!quality.emplace(f[0], q).second) {
                   fail(path, lineno, 1, "duplicate sample id '" + f[0] + "'");
                 }
               });
  return quality;
}

openset::EmbeddingStore read_embeddings_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  openset::EmbeddingStore store;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail(path, lineno, 0, std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("sample_id") || !j.contains("subject_id") ||
        !j.contains("vec") || !j["vec"].is_array()) {
      fail(path, lineno, 0, "expected {\"sample_id\":..., \"subject_id\":..., \"vec\":[...]}");
    }
    try {
      store.add(j["sample_id"].get<std::string>(), j["subject_id"].get<std::string>(),
                j["vec"].get<std::vector<double>>());
    } catch (const Error& e) {
      fail(path, lineno, 0, e.what());
    } catch (const nlohmann::json::exception& e) {
      fail(path, lineno, 0, std::string("invalid field type: ") + e.what());
    }
  }
  return store;
}

std::vector<SummaryRow> read_summaries_csv(const std::filesystem::path& path) {
  std::vector<SummaryRow> rows;
  std::set<std::string> seen;
  for_each_row(path, {"group", "mean", "std", "m", "unit"}, 1,
               [&](const std::vector<std::string>& f, std::size_t lineno) {
                 SummaryRow row;
                 try {
                   row.group = core::parse_group(f[0]);
                 } catch (const Error& e) {
                   fail(path, lineno, 1, e.what());
                 }
                 row.summary.mean = parse_double(f[1], path, lineno, 2);
                 row.summary.std = parse_double(f[2], path, lineno, 3);
                 row.summary.m = parse_count(f[3], path, lineno, 4);
                 row.summary.unit = stats::Unit::percent;
                 if (f.size() == 5) {
                   if (f[4] == "fraction") {
                     row.summary.unit = stats::Unit::fraction;
                   } else if (f[4] != "percent") {
                     fail(path, lineno, 5, "unit must be percent or fraction, got '" + f[4] + "'");
                   }
                 }
                 if (row.summary.std < 0.0) fail(path, lineno, 3, "std must be >= 0");
                 if (row.summary.m < 2) fail(path, lineno, 4, "m must be >= 2");
                 if (!seen.insert(row.group.label()).second) {
                   fail(path, lineno, 1, "duplicate group '" + row.group.label() + "'");
                 }
                 rows.push_back(std::move(row));
               });
  return rows;
}

std::string format_double(double v) {
  nlohmann::json j = v;
  return j.dump();
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

void write_subjects_csv(const std::filesystem::path& path,
                        const std::vector<core::SubjectRecord>& subjects) {
  auto out = open_out(path);
  out << "subject_id,race,gender\n";
  for (const auto& s : subjects) {
    out << s.subject_id << ',' << s.group.race() << ',' << s.group.gender() << '\n';
  }
}

void write_scores_csv(const std::filesystem::path& path, const core::ScoreSet& scores) {
  auto out = open_out(path);
  out << "probe_subject,probe_sample,gallery_subject,gallery_sample,score\n";
  for (const auto& c : scores.comparisons()) {
    out << c.probe_subject << ',' << c.probe_sample << ',' << c.gallery_subject << ','
        << c.gallery_sample << ',' << format_double(c.score) << '\n';
  }
}

void write_quality_csv(const std::filesystem::path& path,
                       const std::map<std::string, double>& quality) {
  auto out = open_out(path);
  out << "sample_id,quality\n";
  for (const auto& [sample, q] : quality) {
    out << sample << ',' << format_double(q) << '\n';
  }
}

void write_embeddings_jsonl(const std::filesystem::path& path,
                            const openset::EmbeddingStore& store) {
  auto out = open_out(path);
  for (const auto& e : store.entries()) {
    nlohmann::json j;
    j["sample_id"] = e.sample_id;
    j["subject_id"] = e.subject_id;
    j["vec"] = e.vec;
    out << j.dump() << '\n';
  }
}

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize n = in.gcount();
    for (std::streamsize i = 0; i < n; ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
    if (!in) break;
  }
  return h;
}

}  // namespace fairprint::io
