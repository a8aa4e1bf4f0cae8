// fairprint: demographic-differential audit CLI for biometric matchers.
//
// Subcommands: verify, ident, calibrate, synth, sensitivity, quality, report.
// Exit codes: 0 success, 1 usage/validation, 2 data error, 3 numeric failure.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairprint/audit.hpp"
#include "fairprint/core.hpp"
#include "fairprint/diagnostics.hpp"
#include "fairprint/errors.hpp"
#include "fairprint/io.hpp"
#include "fairprint/synth.hpp"

namespace {

using nlohmann::json;
namespace audit = fairprint::audit;
namespace core = fairprint::core;
namespace io = fairprint::io;

struct CommonFlags {
  double alpha = 0.05;
  std::size_t bootstrap_m = 10;
  std::uint64_t seed = 1;
  std::string out_dir = "audit_out";
  std::string formats = "json,csv,md";
  std::string pairs;
};

void add_common(CLI::App* cmd, CommonFlags& flags, bool with_pairs = true) {
  cmd->add_option("--alpha", flags.alpha, "Significance level")->capture_default_str();
  cmd->add_option("--bootstrap-m", flags.bootstrap_m, "Bootstrap replicate count")
      ->capture_default_str();
  cmd->add_option("--seed", flags.seed, "Master RNG seed")->capture_default_str();
  cmd->add_option("--out", flags.out_dir, "Output directory")->capture_default_str();
  cmd->add_option("--format", flags.formats, "Comma list of json,csv,md")
      ->capture_default_str();
  if (with_pairs) {
    cmd->add_option("--pairs", flags.pairs,
                    "Comma list of GROUP:GROUP pairs (e.g. WF:WM,B:W)");
  }
}

audit::EmitOptions parse_formats(const std::string& formats) {
  audit::EmitOptions opts{false, false, false};
  std::stringstream ss(formats);
  std::string token;
  while (std::getline(ss, token, ',')) {
    if (token == "json") {
      opts.json = true;
    } else if (token == "csv") {
      opts.csv = true;
    } else if (token == "md" || token == "markdown") {
      opts.markdown = true;
    } else if (!token.empty()) {
      throw fairprint::UsageError("unknown format '" + token + "'");
    }
  }
  if (!opts.json && !opts.csv && !opts.markdown) {
    throw fairprint::UsageError("--format selects none of json,csv,md");
  }
  return opts;
}

void emit_and_log(const json& report, const std::string& out_dir,
                  const std::string& formats) {
  const auto written = audit::emit_report(report, out_dir, parse_formats(formats));
  for (const auto& path : written) std::cerr << "wrote " << path.string() << "\n";
  for (const auto& w : report.value("warnings", json::array())) {
    std::cerr << "warning: " << w.get<std::string>() << "\n";
  }
}

fairprint::synth::Law law_from_json(const json& j, fairprint::synth::Law fallback) {
  fairprint::synth::Law law = fallback;
  if (j.contains("mean")) law.mean = j.at("mean").get<double>();
  if (j.contains("std")) law.std = j.at("std").get<double>();
  return law;
}

std::vector<fairprint::synth::GroupScoreModel> models_from_json(const json& j) {
  std::vector<fairprint::synth::GroupScoreModel> models;
  for (const auto& g : j.at("groups")) {
    fairprint::synth::GroupScoreModel m;
    m.group = core::DemographicGroup::composite(g.at("race").get<std::string>(),
                                                g.at("gender").get<std::string>());
    m.n_subjects = g.at("n_subjects").get<std::size_t>();
    if (g.contains("samples_per_subject")) {
      m.samples_per_subject = g.at("samples_per_subject").get<std::size_t>();
    }
    if (g.contains("genuine")) m.genuine = law_from_json(g.at("genuine"), m.genuine);
    if (g.contains("impostor")) m.impostor = law_from_json(g.at("impostor"), m.impostor);
    if (g.contains("score_range")) {
      m.score_lo = g.at("score_range").at(0).get<double>();
      m.score_hi = g.at("score_range").at(1).get<double>();
    }
    if (g.contains("outlier_fraction")) {
      m.outlier_fraction = g.at("outlier_fraction").get<double>();
    }
    if (g.contains("outlier_genuine")) {
      m.outlier_genuine = law_from_json(g.at("outlier_genuine"), m.outlier_genuine);
    }
    if (g.contains("quality")) m.quality = law_from_json(g.at("quality"), m.quality);
    if (g.contains("outlier_quality")) {
      m.outlier_quality = law_from_json(g.at("outlier_quality"), m.outlier_quality);
    }
    if (g.contains("quality_outlier_link")) {
      m.quality_outlier_link = g.at("quality_outlier_link").get<bool>();
    }
    if (g.contains("impostor_budget")) {
      m.impostor_budget = g.at("impostor_budget").get<std::size_t>();
    }
    if (g.contains("embed_noise")) m.embed_noise = g.at("embed_noise").get<double>();
    if (g.contains("embed_outlier_noise")) {
      m.embed_outlier_noise = g.at("embed_outlier_noise").get<double>();
    }
    models.push_back(std::move(m));
  }
  return models;
}

json models_to_json(const std::vector<fairprint::synth::GroupScoreModel>& models,
                    std::uint64_t seed) {
  json out;
  out["seed"] = seed;
  json groups = json::array();
  for (const auto& m : models) {
    json g;
    g["race"] = m.group.race();
    g["gender"] = m.group.gender();
    g["n_subjects"] = m.n_subjects;
    g["samples_per_subject"] = m.samples_per_subject;
    g["genuine"] = {{"mean", m.genuine.mean}, {"std", m.genuine.std}};
    g["impostor"] = {{"mean", m.impostor.mean}, {"std", m.impostor.std}};
    g["score_range"] = {m.score_lo, m.score_hi};
    g["outlier_fraction"] = m.outlier_fraction;
    g["outlier_genuine"] = {{"mean", m.outlier_genuine.mean}, {"std", m.outlier_genuine.std}};
    g["quality"] = {{"mean", m.quality.mean}, {"std", m.quality.std}};
    g["outlier_quality"] = {{"mean", m.outlier_quality.mean}, {"std", m.outlier_quality.std}};
    g["quality_outlier_link"] = m.quality_outlier_link;
    g["impostor_budget"] = m.impostor_budget;
    g["embed_noise"] = m.embed_noise;
    g["embed_outlier_noise"] = m.embed_outlier_noise;
    groups.push_back(std::move(g));
  }
  out["groups"] = std::move(groups);
  return out;
}

std::vector<fairprint::synth::GroupScoreModel> preset_models(const std::string& preset,
                                                             double effect_size) {
  std::vector<fairprint::synth::GroupScoreModel> models;
  for (const char* race : {"B", "W"}) {
    for (const char* gender : {"F", "M"}) {
      fairprint::synth::GroupScoreModel m;
      m.group = core::DemographicGroup::composite(race, gender);
      m.n_subjects = 120;
      m.samples_per_subject = 2;
      m.genuine = {70.0, 8.0};
      m.impostor = {20.0, 7.0};
      m.quality = {60.0, 12.0};
      models.push_back(std::move(m));
    }
  }
  if (preset == "identical") return models;
  if (preset == "effect") {
    // Depress one group's genuine scores and inject outliers there.
    models[0].genuine.mean -= effect_size * models[0].genuine.std;
    models[0].outlier_fraction = 0.05;
    models[0].outlier_genuine = {25.0, 6.0};
    return models;
  }
  throw fairprint::UsageError("unknown preset '" + preset + "' (identical | effect)");
}

int dispatch(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const fairprint::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const fairprint::ValidationError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const fairprint::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Demographic-differential audits for biometric recognition systems"};
  app.require_subcommand(1);

  // --- verify ---------------------------------------------------------------
  auto* verify = app.add_subcommand(
      "verify", "Verification-mode audit: bootstrap TMR, Welch/z tests, ANOVA");
  CommonFlags vflags;
  std::string v_scores, v_subjects, v_quality, v_summaries, v_unit = "subject";
  double v_threshold = 0.0, v_target_fmr = 0.0;
  bool v_have_threshold = false;
  bool v_no_flips = false, v_no_roc = false, v_equalize_quality = false;
  bool v_permissive = false;
  std::size_t v_max_outliers = 100;
  verify->add_option("--scores", v_scores, "scores.csv");
  verify->add_option("--subjects", v_subjects, "subjects.csv");
  verify->add_option("--quality", v_quality, "quality.csv (optional)");
  verify->add_option("--summaries", v_summaries,
                     "summaries.csv: run tests on pre-aggregated (mean,std,m) rows");
  auto* vthr = verify->add_option("--threshold", v_threshold, "Fixed decision threshold");
  auto* vfmr = verify->add_option("--target-fmr", v_target_fmr,
                                  "Calibrate the threshold to this FMR on the impostor side");
  vthr->excludes(vfmr);
  verify->add_option("--resample-unit", v_unit, "subject | comparison")
      ->capture_default_str();
  verify->add_flag("--permissive", v_permissive,
                   "Skip malformed score rows instead of aborting (rejections are "
                   "counted and echoed in the report)");
  verify->add_flag("--no-flips", v_no_flips, "Skip minimal-flip sensitivity");
  verify->add_flag("--no-roc", v_no_roc, "Skip ROC plot data");
  verify->add_flag("--equalize-quality", v_equalize_quality,
                   "Subsample quality to equal per-group counts");
  verify->add_option("--max-outliers", v_max_outliers, "Outlier rows kept in the report")
      ->capture_default_str();
  add_common(verify, vflags);
  verify->callback([&]() {
    v_have_threshold = vthr->count() > 0;
  });

  // --- ident ----------------------------------------------------------------
  auto* ident = app.add_subcommand(
      "ident", "Open-set identification audit: FPIR/FNIR at a shared threshold");
  CommonFlags iflags;
  std::string i_embeddings, i_subjects, i_ref_group = "BF", i_groups;
  double i_threshold = 0.0, i_target_fnir = 0.0;
  std::size_t i_rank = 5, i_mates = 200, i_cohort = 0, i_distractors = 0, i_sweep = 50;
  double i_sweep_lo = 0.0, i_sweep_hi = 0.0;
  ident->add_option("--embeddings", i_embeddings, "embeddings.jsonl")->required();
  ident->add_option("--subjects", i_subjects, "subjects.csv (labeled cohort subjects)")
      ->required();
  auto* ithr = ident->add_option("--threshold", i_threshold, "Fixed shared threshold");
  auto* ifnir = ident->add_option(
      "--target-fnir", i_target_fnir,
      "Calibrate the shared threshold to this FNIR on --ref-group");
  ithr->excludes(ifnir);
  ident->add_option("--ref-group", i_ref_group, "FNIR calibration group")
      ->capture_default_str();
  ident->add_option("--rank", i_rank, "Rank cutoff R")->capture_default_str();
  ident->add_option("--n-mates", i_mates, "Mated probe subjects |P_G|")
      ->capture_default_str();
  ident->add_option("--cohort-size", i_cohort,
                    "Probe subjects sampled per group (0: smallest group)");
  ident->add_option("--n-distractors", i_distractors,
                    "Distractor identities enrolled (0: all unlabeled)");
  ident->add_option("--audit-groups", i_groups,
                    "Comma list of audited composite groups (default: all)");
  ident->add_option("--sweep-points", i_sweep, "FPIR/FNIR sweep grid size")
      ->capture_default_str();
  auto* ilo = ident->add_option("--sweep-lo", i_sweep_lo, "Sweep lower threshold");
  auto* ihi = ident->add_option("--sweep-hi", i_sweep_hi, "Sweep upper threshold");
  add_common(ident, iflags);

  // --- calibrate ------------------------------------------------------------
  auto* calibrate = app.add_subcommand(
      "calibrate", "FMR-targeted threshold from the impostor score distribution");
  std::string c_scores, c_subjects, c_group;
  double c_target = 0.0001;
  calibrate->add_option("--scores", c_scores, "scores.csv")->required();
  calibrate->add_option("--subjects", c_subjects, "subjects.csv")->required();
  calibrate->add_option("--target-fmr", c_target, "Target FMR")->capture_default_str();
  calibrate->add_option("--group", c_group,
                        "Restrict to one group's impostor comparisons (default: all)");

  // --- synth ----------------------------------------------------------------
  auto* synth_cmd = app.add_subcommand(
      "synth", "Generate a synthetic demographic-labeled dataset");
  std::string s_config, s_preset = "identical", s_out = "synth_out";
  std::uint64_t s_seed = 1;
  double s_effect = 3.0;
  std::size_t s_dim = 0;
  synth_cmd->add_option("--config", s_config, "Model config JSON (see README)");
  synth_cmd->add_option("--preset", s_preset, "identical | effect (used without --config)")
      ->capture_default_str();
  synth_cmd->add_option("--effect-size", s_effect,
                        "Genuine-mean gap in pooled stds for the effect preset")
      ->capture_default_str();
  synth_cmd->add_option("--seed", s_seed, "Master RNG seed")->capture_default_str();
  synth_cmd->add_option("--embedding-dim", s_dim,
                        "Also emit embeddings.jsonl with this dimension");
  synth_cmd->add_option("--out", s_out, "Output directory")->capture_default_str();

  // --- sensitivity ----------------------------------------------------------
  auto* sens = app.add_subcommand(
      "sensitivity", "Minimal score flips that erase a pair's significance");
  CommonFlags sflags;
  std::string x_scores, x_subjects, x_pair = "B:W", x_mode = "point";
  double x_threshold = 0.0;
  sens->add_option("--scores", x_scores, "scores.csv")->required();
  sens->add_option("--subjects", x_subjects, "subjects.csv")->required();
  sens->add_option("--threshold", x_threshold, "Decision threshold")->required();
  sens->add_option("--pair", x_pair, "GROUP:GROUP")->capture_default_str();
  sens->add_option("--mode", x_mode, "point | bootstrap")->capture_default_str();
  add_common(sens, sflags, false);

  // --- quality --------------------------------------------------------------
  auto* quality_cmd = app.add_subcommand(
      "quality", "Per-group quality distributions and Welch tests");
  CommonFlags qflags;
  std::string q_scores, q_subjects, q_quality;
  bool q_equalize = false;
  quality_cmd->add_option("--scores", q_scores, "scores.csv")->required();
  quality_cmd->add_option("--subjects", q_subjects, "subjects.csv")->required();
  quality_cmd->add_option("--quality", q_quality, "quality.csv")->required();
  quality_cmd->add_flag("--equalize", q_equalize, "Equal per-group sample counts");
  add_common(quality_cmd, qflags);

  // --- report ---------------------------------------------------------------
  auto* report_cmd = app.add_subcommand(
      "report", "Re-render CSV/markdown exports from a report.json");
  std::string r_in, r_out = "audit_out", r_formats = "csv,md";
  report_cmd->add_option("--in", r_in, "report.json")->required();
  report_cmd->add_option("--out", r_out, "Output directory")->capture_default_str();
  report_cmd->add_option("--format", r_formats, "Comma list of json,csv,md")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  if (verify->parsed()) {
    return dispatch([&]() {
      audit::VerifyConfig config;
      config.alpha = vflags.alpha;
      config.bootstrap.m = vflags.bootstrap_m;
      config.bootstrap.seed = vflags.seed;
      if (v_unit == "comparison") {
        config.bootstrap.unit = fairprint::boot::ResampleUnit::comparison;
      } else if (v_unit != "subject") {
        throw fairprint::UsageError("--resample-unit must be subject or comparison");
      }
      if (!vflags.pairs.empty()) config.pairs = audit::parse_pairs(vflags.pairs);
      config.with_flips = !v_no_flips;
      config.with_roc = !v_no_roc;
      config.max_outliers = v_max_outliers;
      config.equalize_quality = v_equalize_quality;

      if (!v_summaries.empty()) {
        const auto rows = io::read_summaries_csv(v_summaries);
        emit_and_log(audit::run_summary_audit(config, rows), vflags.out_dir,
                     vflags.formats);
        return 0;
      }
      if (v_scores.empty() || v_subjects.empty()) {
        throw fairprint::UsageError("verify needs --scores and --subjects (or --summaries)");
      }
      if (vfmr->count() > 0) {
        config.threshold.source = audit::ThresholdSource::target_fmr;
        config.threshold.target = v_target_fmr;
      } else if (v_have_threshold) {
        config.threshold.source = audit::ThresholdSource::fixed;
        config.threshold.value = v_threshold;
      } else {
        throw fairprint::UsageError("verify needs exactly one of --threshold/--target-fmr");
      }
      const auto data = io::ingest(
          v_subjects, v_scores,
          v_quality.empty() ? std::nullopt
                            : std::optional<std::filesystem::path>(v_quality),
          v_permissive);
      emit_and_log(audit::run_verification_audit(config, data), vflags.out_dir,
                   vflags.formats);
      return 0;
    });
  }

  if (ident->parsed()) {
    return dispatch([&]() {
      audit::IdentConfig config;
      config.alpha = iflags.alpha;
      config.bootstrap.m = iflags.bootstrap_m;
      config.bootstrap.seed = iflags.seed;
      config.rank = i_rank;
      config.n_mates = i_mates;
      config.cohort_size = i_cohort;
      config.n_distractors = i_distractors;
      config.sweep_points = i_sweep;
      if (ilo->count() > 0) config.sweep_lo = i_sweep_lo;
      if (ihi->count() > 0) config.sweep_hi = i_sweep_hi;
      if (!iflags.pairs.empty()) config.pairs = audit::parse_pairs(iflags.pairs);
      if (!i_groups.empty()) {
        config.audited_groups.clear();
        std::stringstream ss(i_groups);
        std::string token;
        while (std::getline(ss, token, ',')) {
          config.audited_groups.push_back(core::parse_group(token));
        }
      }
      if (ithr->count() > 0) {
        config.threshold.source = audit::ThresholdSource::fixed;
        config.threshold.value = i_threshold;
      } else {
        config.threshold.source = audit::ThresholdSource::target_fnir;
        config.threshold.target = ifnir->count() > 0 ? i_target_fnir : 0.1;
        config.threshold.reference_group = core::parse_group(i_ref_group);
      }
      const auto store = io::read_embeddings_jsonl(i_embeddings);
      const auto subjects = io::read_subjects_csv(i_subjects);
      auto report = audit::run_identification_audit(config, store, subjects);
      const auto hex = [](std::uint64_t v) {
        char buf[19];
        std::snprintf(buf, sizeof(buf), "0x%016llx", static_cast<unsigned long long>(v));
        return std::string(buf);
      };
      report["inputs"] = {
          {"embeddings",
           {{"rows", store.size()}, {"fnv1a", hex(io::fnv1a_file(i_embeddings))}}},
          {"subjects",
           {{"rows", subjects.size()}, {"fnv1a", hex(io::fnv1a_file(i_subjects))}}}};
      emit_and_log(report, iflags.out_dir, iflags.formats);
      return 0;
    });
  }

  if (calibrate->parsed()) {
    return dispatch([&]() {
      const auto data = io::ingest(c_subjects, c_scores);
      const core::ScoreSet scores =
          c_group.empty() ? data.scores
                          : core::filter_group(data.scores, core::parse_group(c_group));
      const auto impostors = core::impostor_scores(scores);
      const auto cal = core::calibrate_threshold_fmr(impostors, c_target);
      json out;
      out["target_fmr"] = c_target;
      out["threshold"] = cal.threshold;
      out["achieved_fmr"] = cal.achieved_fmr;
      out["n_impostor"] = impostors.size();
      if (!c_group.empty()) out["group"] = c_group;
      std::cout << out.dump(2) << "\n";
      return 0;
    });
  }

  if (synth_cmd->parsed()) {
    return dispatch([&]() {
      std::vector<fairprint::synth::GroupScoreModel> models;
      if (!s_config.empty()) {
        std::ifstream in(s_config);
        if (!in) throw fairprint::ValidationError("cannot open '" + s_config + "'");
        json j = json::parse(in);
        if (j.contains("seed") && synth_cmd->get_option("--seed")->count() == 0) {
          s_seed = j.at("seed").get<std::uint64_t>();
        }
        models = models_from_json(j);
      } else {
        models = preset_models(s_preset, s_effect);
      }
      const auto dataset = fairprint::synth::generate(models, s_seed);
      const std::filesystem::path dir(s_out);
      io::write_subjects_csv(dir / "subjects.csv", dataset.score_set.subjects());
      io::write_scores_csv(dir / "scores.csv", dataset.score_set);
      io::write_quality_csv(dir / "quality.csv", dataset.quality);
      std::ofstream prov(dir / "provenance.json");
      prov << models_to_json(dataset.provenance.models, dataset.provenance.seed).dump(2)
           << "\n";
      std::cerr << "wrote " << (dir / "subjects.csv").string() << " ("
                << dataset.score_set.subjects().size() << " subjects, "
                << dataset.score_set.comparisons().size() << " comparisons)\n";
      if (s_dim > 0) {
        const auto emb = fairprint::synth::generate_embeddings(models, s_seed, s_dim);
        io::write_embeddings_jsonl(dir / "embeddings.jsonl", emb.store);
        std::cerr << "wrote " << (dir / "embeddings.jsonl").string() << " ("
                  << emb.store.size() << " vectors, dim " << s_dim << ")\n";
      }
      return 0;
    });
  }

  if (sens->parsed()) {
    return dispatch([&]() {
      const auto data = io::ingest(x_subjects, x_scores);
      const auto pairs = audit::parse_pairs(x_pair);
      fairprint::diag::FlipMode mode;
      if (x_mode == "point") {
        mode = fairprint::diag::FlipMode::point_z;
      } else if (x_mode == "bootstrap") {
        mode = fairprint::diag::FlipMode::bootstrap_welch;
      } else {
        throw fairprint::UsageError("--mode must be point or bootstrap");
      }
      fairprint::boot::BootstrapConfig bcfg;
      bcfg.m = sflags.bootstrap_m;
      bcfg.seed = sflags.seed;
      const auto rep = fairprint::diag::minimal_flips(
          data.scores, pairs.front().first, pairs.front().second, x_threshold,
          sflags.alpha, mode, bcfg);
      json out;
      out["pair"] = pairs.front().first.label() + ":" + pairs.front().second.label();
      out["mode"] = x_mode == "point" ? "point_z" : "bootstrap_welch";
      out["status"] = rep.status == fairprint::diag::FlipStatus::already_nonsignificant
                          ? "already_nonsignificant"
                          : rep.status == fairprint::diag::FlipStatus::erased
                                ? "erased"
                                : "not_erasable";
      out["flips_needed"] = rep.flips_needed;
      out["flippable"] = rep.flippable;
      out["flipped_fraction"] = rep.flipped_fraction;
      out["flipped_group"] = rep.flipped_group.label();
      out["test_before"] = audit::test_result_to_json(rep.test_before);
      out["test_after"] = audit::test_result_to_json(rep.test_after);
      std::cout << out.dump(2) << "\n";
      return 0;
    });
  }

  if (quality_cmd->parsed()) {
    return dispatch([&]() {
      const auto data = io::ingest(q_subjects, q_scores, std::filesystem::path(q_quality));
      std::vector<core::DemographicGroup> groups;
      for (const char* race : {"B", "W"}) {
        for (const char* gender : {"F", "M"}) {
          groups.push_back(core::DemographicGroup::composite(race, gender));
        }
      }
      std::vector<std::pair<core::DemographicGroup, core::DemographicGroup>> pairs;
      if (!qflags.pairs.empty()) {
        for (const auto& p : audit::parse_pairs(qflags.pairs)) pairs.push_back(p);
      } else {
        for (std::size_t i = 0; i < groups.size(); ++i) {
          for (std::size_t k = i + 1; k < groups.size(); ++k) {
            pairs.emplace_back(groups[i], groups[k]);
          }
        }
      }
      fairprint::diag::QualityCompareOptions opts;
      opts.equalize = q_equalize;
      opts.seed = qflags.seed;
      const auto cmp = fairprint::diag::quality_compare(data.quality, data.scores, groups,
                                                        pairs, qflags.alpha, opts);
      json out;
      json summaries = json::array();
      for (const auto& s : cmp.summaries) {
        json row;
        row["group"] = s.group.label();
        row["n_samples"] = s.n_samples;
        row["mean"] = s.mean;
        row["median"] = s.median;
        row["std"] = s.std;
        row["histogram"] = s.histogram;
        summaries.push_back(std::move(row));
      }
      out["summaries"] = std::move(summaries);
      json pw = json::array();
      for (const auto& p : cmp.pairwise) {
        json row;
        row["pair"] = p.group0.label() + ":" + p.group1.label();
        row["welch"] = audit::test_result_to_json(p.welch);
        pw.push_back(std::move(row));
      }
      out["pairwise"] = std::move(pw);
      std::cout << out.dump(2) << "\n";
      return 0;
    });
  }

  if (report_cmd->parsed()) {
    return dispatch([&]() {
      std::ifstream in(r_in);
      if (!in) throw fairprint::ValidationError("cannot open '" + r_in + "'");
      json report = json::parse(in);
      audit::validate_report(report);
      const auto written = audit::emit_report(report, r_out, parse_formats(r_formats));
      for (const auto& path : written) std::cerr << "wrote " << path.string() << "\n";
      return 0;
    });
  }

  return 0;
}
