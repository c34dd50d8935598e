// dtnarrate: command-line front end. Exit codes: 0 ok, 1 invalid input, 2 I/O.
#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "dtnarrate/analytics.hpp"
#include "dtnarrate/attribution.hpp"
#include "dtnarrate/dataset.hpp"
#include "dtnarrate/explain.hpp"
#include "dtnarrate/narrate.hpp"
#include "dtnarrate/study.hpp"
#include "dtnarrate/survey.hpp"
#include "dtnarrate/tree.hpp"

using namespace dtnarrate;

namespace {

void emit(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text << std::flush;
    return;
  }
  write_file(path, text);
}

struct Inputs {
  std::string spec, expectations, scale, study_config;

  // Flags win over the study config's paths.
  study::LoadedInputs load() const {
    study::StudyConfig cfg;
    if (!study_config.empty()) cfg = study::StudyConfig::load(study_config);
    if (!spec.empty()) cfg.category_spec_path = spec;
    if (!expectations.empty()) cfg.expectation_map_path = expectations;
    if (!scale.empty()) cfg.verbal_scale_path = scale;
    return study::load_inputs(cfg);
  }

  void add_to(CLI::App* app, bool narration) {
    app->add_option("--spec", spec, "Category spec JSON (default: built-in CHD spec)");
    if (narration) {
      app->add_option("--expectations", expectations, "Expectation map JSON (default: built-in)");
      app->add_option("--scale", scale, "Verbal probability scale JSON (default: built-in)");
    }
    app->add_option("--study-config", study_config, "Take spec/expectation/scale paths from a study config");
  }
};

dataset::LoadResult load_table(const std::string& path, const std::string& format,
                               std::shared_ptr<const dataset::CategorySpec> spec) {
  if (format == "categorized") return dataset::load_categorized(path, spec);
  return dataset::load_records(path, spec);
}

nlohmann::ordered_json attribution_json(const attribution::AttributionVector& a) {
  nlohmann::ordered_json j;
  j["baseline"] = a.baseline;
  j["prediction"] = a.prediction;
  j["scores"] = nlohmann::ordered_json::object();
  for (std::size_t i = 0; i < a.features.size(); ++i) j["scores"][a.features[i]] = a.scores[i];
  j["positive"] = nlohmann::ordered_json::array();
  for (const auto& [f, s] : attribution::filter_positive_sorted(a)) j["positive"].push_back({{"feature", f}, {"score", s}});
  return j;
}

survey::HttpServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decision-tree narrative explanations and survey analytics"};
  app.require_subcommand(1);
  Inputs in;

  // categorize
  std::string cat_input, cat_out = "-", cat_report;
  auto* categorize = app.add_subcommand("categorize", "Bin a raw table into categories");
  categorize->add_option("--input", cat_input, "Raw table (CSV)")->required();
  categorize->add_option("--out", cat_out, "Categorized table, '-' for stdout");
  categorize->add_option("--report", cat_report, "Write the drop report here (default: stderr)");
  in.add_to(categorize, false);

  // synth
  std::string syn_rules, syn_out = "-";
  std::uint64_t syn_seed = 1;
  std::size_t syn_n = 1000, syn_incomplete = 0;
  double syn_noise = 0.0;
  bool syn_categorized = false;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic patient table from ground-truth rules");
  synth->add_option("--rules", syn_rules, "Ground-truth rules JSON")->required();
  synth->add_option("--n", syn_n, "Number of complete records");
  synth->add_option("--seed", syn_seed, "RNG seed");
  synth->add_option("--noise", syn_noise, "Label flip probability")->check(CLI::Range(0.0, 1.0));
  synth->add_option("--incomplete", syn_incomplete, "Extra rows with one blank cell (raw output only)");
  synth->add_flag("--categorized", syn_categorized, "Write category labels instead of raw numbers");
  synth->add_option("--out", syn_out, "Output table, '-' for stdout");
  in.add_to(synth, false);

  // fit
  std::string fit_records, fit_format = "raw", fit_out = "-", fit_gender, fit_type = "-";
  int fit_age_min = 0, fit_age_max = 200;
  tree::FitOptions fit_opts;
  auto* fit = app.add_subcommand("fit", "Fit a depth-bounded tree on a cohort");
  fit->add_option("--records", fit_records, "Patient table")->required();
  fit->add_option("--format", fit_format, "raw or categorized")->check(CLI::IsMember({"raw", "categorized"}));
  fit->add_option("--age-min", fit_age_min, "Cohort lower age (inclusive)");
  fit->add_option("--age-max", fit_age_max, "Cohort upper age (inclusive)");
  fit->add_option("--gender", fit_gender, "Cohort gender (default: all)");
  fit->add_option("--max-depth", fit_opts.max_depth, "Maximum depth")->check(CLI::PositiveNumber);
  fit->add_option("--min-leaf-support", fit_opts.min_leaf_support, "Minimum node size to split");
  fit->add_option("--min-gain", fit_opts.min_gain, "Minimum information gain (bits) to split");
  fit->add_option("--label", fit_type, "Explanation type column of the summary row");
  fit->add_option("--out", fit_out, "Tree document, '-' for stdout");
  in.add_to(fit, false);

  // explain
  std::string ex_tree, ex_records, ex_format = "raw", ex_patient, ex_kind = "local", ex_out = "-";
  bool ex_ir = false;
  auto* explain_cmd = app.add_subcommand("explain", "Narrate a prediction for one patient");
  explain_cmd->add_option("--tree", ex_tree, "Tree document")->required();
  explain_cmd->add_option("--records", ex_records, "Patient table (also the SHAP background)")->required();
  explain_cmd->add_option("--format", ex_format, "raw or categorized")->check(CLI::IsMember({"raw", "categorized"}));
  explain_cmd->add_option("--patient", ex_patient, "Patient id")->required();
  explain_cmd->add_option("--kind", ex_kind, "local, global or shap")->check(CLI::IsMember({"local", "global", "shap"}));
  explain_cmd->add_flag("--ir", ex_ir, "Print the structured explanation instead of text");
  explain_cmd->add_option("--out", ex_out, "Output, '-' for stdout");
  in.add_to(explain_cmd, true);

  // attribute
  std::string at_tree, at_records, at_format = "raw", at_patient, at_out = "-";
  bool at_kernel = false;
  auto* attribute = app.add_subcommand("attribute", "Exact Shapley attributions for one patient");
  attribute->add_option("--tree", at_tree, "Tree document")->required();
  attribute->add_option("--records", at_records, "Patient table (background = tree cohort)")->required();
  attribute->add_option("--format", at_format, "raw or categorized")->check(CLI::IsMember({"raw", "categorized"}));
  attribute->add_option("--patient", at_patient, "Patient id")->required();
  attribute->add_flag("--kernel", at_kernel, "Use the kernel-weighted regression form");
  attribute->add_option("--out", at_out, "Output JSON, '-' for stdout");
  in.add_to(attribute, false);

  // build-study
  std::string bs_config, bs_out = "-";
  auto* build = app.add_subcommand("build-study", "Build the five scenario bundles (includes C vectors)");
  build->add_option("--study-config", bs_config, "Study config JSON")->required();
  build->add_option("--out", bs_out, "Study JSON, '-' for stdout");

  // analyze
  std::string an_responses, an_config, an_out = "-", an_table;
  analytics::AnalysisOptions an_opts;
  bool an_keep_all = false;
  auto* analyze = app.add_subcommand("analyze", "Means, Wilcoxon tests, clusters and error tables");
  analyze->add_option("--responses", an_responses, "Response export JSON")->required();
  analyze->add_option("--study-config", an_config, "Study config JSON")->required();
  analyze->add_option("--out", an_out, "Report JSON, '-' for stdout");
  analyze->add_option("--table", an_table, "Also write a Markdown report here");
  analyze->add_option("--seed", an_opts.seed, "k-means seed");
  analyze->add_option("--k", an_opts.k, "Number of participant groups")->check(CLI::PositiveNumber);
  analyze->add_option("--alpha", an_opts.alpha, "Significance threshold after correction");
  analyze->add_flag("--keep-low-effort", an_keep_all, "Do not exclude low-effort participants");

  // serve
  std::string sv_config, sv_log = "responses.log", sv_token, sv_static, sv_host = "0.0.0.0";
  int sv_port = 8080;
  std::uint64_t sv_seed = 0;
  bool sv_seeded = false, sv_random = false;
  auto* serve = app.add_subcommand("serve", "Run the survey service");
  serve->add_option("--study-config", sv_config, "Study config JSON")->required();
  serve->add_option("--port", sv_port, "TCP port");
  serve->add_option("--host", sv_host, "Bind address");
  serve->add_option("--log", sv_log, "Response log (sessions go to <log>.sessions)");
  serve->add_option("--operator-token", sv_token, "Token required by GET /api/export");
  serve->add_option("--static-dir", sv_static, "Serve a built UI from this directory");
  serve->add_option("--seed", sv_seed, "Session id seed (default: config seed)")->each([&](const std::string&) {
    sv_seeded = true;
  });
  serve->add_flag("--randomize-order", sv_random, "Shuffle scenario order per session");

  // export
  std::string xp_log = "responses.log", xp_sessions, xp_out = "-";
  auto* export_cmd = app.add_subcommand("export", "Join logged pages into survey responses");
  export_cmd->add_option("--log", xp_log, "Response log");
  export_cmd->add_option("--sessions", xp_sessions, "Session log (default: <log>.sessions)");
  export_cmd->add_option("--out", xp_out, "Export JSON, '-' for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*categorize) {
      const auto loaded = in.load();
      const auto lr = dataset::load_records(cat_input, loaded.spec);
      emit(cat_out, dataset::serialize_records(lr.records));
      const std::string report = dataset::format_drop_report(lr.drops);
      if (cat_report.empty()) std::cerr << report;
      else emit(cat_report, report);
    } else if (*synth) {
      const auto loaded = in.load();
      const auto truth = dataset::load_ground_truth(syn_rules);
      dataset::SyntheticOptions opts{syn_seed, syn_n, syn_noise, truth.default_label};
      const auto rs = dataset::generate_synthetic(opts, loaded.spec, truth.rules);
      if (syn_categorized) {
        if (syn_incomplete) throw ValidationError("--incomplete applies to raw output only");
        emit(syn_out, dataset::serialize_records(rs));
      } else {
        std::ostringstream os;
        dataset::write_raw(os, rs, syn_seed, syn_incomplete);
        emit(syn_out, os.str());
      }
    } else if (*fit) {
      const auto loaded = in.load();
      const auto lr = load_table(fit_records, fit_format, loaded.spec);
      dataset::Cohort cohort{fit_age_min, fit_age_max, std::nullopt};
      if (!fit_gender.empty()) cohort.gender = fit_gender;
      const auto rs = dataset::filter_cohort(lr.records, cohort);
      if (rs.empty()) throw ValidationError("cohort " + cohort.describe() + " is empty");
      const auto t = tree::fit_greedy(rs, fit_opts, cohort);
      emit(fit_out, tree::serialize(t));
      const std::string row =
          study::format_tree_row({Scenario::kLocalEasy, cohort, rs.size(), t.leaf_count(), t.depth(), t.training_accuracy()},
                                 fit_type) + "\n";
      (fit_out == "-" ? std::cerr : std::cout) << "Age | Gender | Leaf count | Accuracy | Explanation Type\n" << row;
    } else if (*explain_cmd) {
      const auto loaded = in.load();
      const auto t = tree::load_tree(ex_tree);
      const auto lr = load_table(ex_records, ex_format, loaded.spec);
      const auto& r = lr.records.find(ex_patient);
      explain::ExplanationIR ir;
      if (ex_kind == "local") {
        ir = explain::build_local_ir(t, r, *loaded.spec, loaded.expectations);
      } else if (ex_kind == "global") {
        ir = explain::build_global_ir(t, r, *loaded.spec, loaded.expectations);
      } else {
        const auto background = dataset::filter_cohort(lr.records, t.cohort());
        ir = explain::build_shap_ir(attribution::shapley(t, r, background), r, *loaded.spec);
      }
      emit(ex_out, ex_ir ? explain::ir_to_json_text(ir) : narrate::realize(ir, loaded.scale));
    } else if (*attribute) {
      const auto loaded = in.load();
      const auto t = tree::load_tree(at_tree);
      const auto lr = load_table(at_records, at_format, loaded.spec);
      const auto background = dataset::filter_cohort(lr.records, t.cohort());
      const auto& r = lr.records.find(at_patient);
      const auto a = at_kernel ? attribution::kernel_shapley(t, r, background) : attribution::shapley(t, r, background);
      emit(at_out, attribution_json(a).dump(2) + "\n");
    } else if (*build) {
      const auto s = study::build_study(study::StudyConfig::load(bs_config));
      emit(bs_out, study::study_to_json_text(s));
      std::cerr << study::format_tree_table(s);
      for (const auto& w : s.warnings) std::cerr << "warning: " << w << "\n";
    } else if (*analyze) {
      const auto s = study::build_study(study::StudyConfig::load(an_config));
      const auto ex = load_export(an_responses);
      if (ex.displayed_features != s.displayed_features) {
        throw ValidationError("response export lists different displayed features than the study");
      }
      an_opts.exclude_low_effort = !an_keep_all;
      const auto rep = analytics::analyze(ex.responses, s.correct_map(), s.displayed_features, an_opts);
      emit(an_out, analytics::report_to_json_text(rep));
      if (!an_table.empty()) emit(an_table, analytics::report_to_markdown(rep));
    } else if (*serve) {
      const auto cfg = study::StudyConfig::load(sv_config);
      survey::ServiceOptions opts;
      opts.seed = sv_seeded ? sv_seed : cfg.seed;
      opts.randomize_order = sv_random || cfg.randomize_order;
      survey::SurveyService service(study::build_study(cfg), sv_log, opts);
      for (const auto& line : service.replay_report()) std::cerr << "replay: " << line << "\n";
      survey::HttpServer server(service, {sv_token, sv_static});
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << sv_host << ":" << sv_port << "\n";
      if (!server.listen(sv_host, sv_port)) throw IoError("cannot listen on " + sv_host + ":" + std::to_string(sv_port));
      g_server = nullptr;
    } else if (*export_cmd) {
      const std::string sessions = xp_sessions.empty() ? xp_log + ".sessions" : xp_sessions;
      if (!std::ifstream(xp_log) && !std::ifstream(sessions)) throw IoError("no log at " + xp_log);
      const auto ex = survey::export_from_logs(survey::read_log(sessions), survey::read_log(xp_log));
      emit(xp_out, export_to_json_text(ex));
      for (const auto& line : ex.skipped_lines) std::cerr << "skipped: " << line << "\n";
    }
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const survey::ServiceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
