#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dtnarrate/study.hpp"

namespace dtnarrate::study {

using nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

std::string resolve(const std::string& base_dir, const std::string& p) {
  const fs::path path(p);
  if (path.is_absolute() || base_dir.empty()) return p;
  return (fs::path(base_dir) / path).lexically_normal().string();
}

void reject_unknown(const ordered_json& obj, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError("unknown field '" + key + "' in " + where);
    }
  }
}

ScenarioConfig scenario_from_json(const ordered_json& j, const std::string& base_dir) {
  reject_unknown(j, {"id", "cohort", "fit", "tree", "records", "patient"}, "scenario");
  ScenarioConfig s;
  s.scenario = parse_scenario(j.at("id").get<std::string>());
  if (j.contains("cohort")) {
    const auto& c = j.at("cohort");
    reject_unknown(c, {"age_min", "age_max", "gender"}, "cohort");
    s.cohort.age_min = c.value("age_min", s.cohort.age_min);
    s.cohort.age_max = c.value("age_max", s.cohort.age_max);
    if (c.contains("gender") && !c.at("gender").is_null()) s.cohort.gender = c.at("gender").get<std::string>();
    if (s.cohort.age_min > s.cohort.age_max) throw ValidationError("cohort age_min exceeds age_max");
  }
  if (j.contains("fit")) {
    const auto& f = j.at("fit");
    reject_unknown(f, {"max_depth", "min_leaf_support", "min_gain"}, "fit");
    s.fit.max_depth = f.value("max_depth", s.fit.max_depth);
    s.fit.min_leaf_support = f.value("min_leaf_support", s.fit.min_leaf_support);
    s.fit.min_gain = f.value("min_gain", s.fit.min_gain);
  }
  if (j.contains("tree")) s.tree_path = resolve(base_dir, j.at("tree").get<std::string>());
  if (j.contains("records")) s.records_path = resolve(base_dir, j.at("records").get<std::string>());
  if (j.contains("patient")) s.patient_id = j.at("patient").get<std::string>();
  return s;
}

// local-SHAP without its own tree explains the local-easy tree.
bool inherits_tree(const ScenarioConfig& sc) {
  return sc.scenario == Scenario::kLocalShap && !sc.tree_path && !sc.records_path &&
         sc.cohort == dataset::Cohort{};
}

}  // namespace

StudyConfig StudyConfig::from_json_text(const std::string& text, const std::string& base_dir) {
  StudyConfig c;
  try {
    const auto doc = ordered_json::parse(text);
    reject_unknown(doc,
                   {"category_spec", "expectation_map", "verbal_scale", "records", "records_format", "seed",
                    "displayed_features", "randomize_order", "scenarios"},
                   "study config");
    if (doc.contains("category_spec")) c.category_spec_path = resolve(base_dir, doc.at("category_spec").get<std::string>());
    if (doc.contains("expectation_map")) {
      c.expectation_map_path = resolve(base_dir, doc.at("expectation_map").get<std::string>());
    }
    if (doc.contains("verbal_scale")) c.verbal_scale_path = resolve(base_dir, doc.at("verbal_scale").get<std::string>());
    if (doc.contains("records")) c.records_path = resolve(base_dir, doc.at("records").get<std::string>());
    const std::string format = doc.value("records_format", std::string("raw"));
    if (format != "raw" && format != "categorized") {
      throw ValidationError("records_format must be \"raw\" or \"categorized\"");
    }
    c.records_categorized = format == "categorized";
    c.seed = doc.value("seed", std::uint64_t{0});
    if (doc.contains("displayed_features")) {
      c.displayed_features = doc.at("displayed_features").get<std::vector<std::string>>();
    }
    c.randomize_order = doc.value("randomize_order", false);
    for (const auto& js : doc.at("scenarios")) c.scenarios.push_back(scenario_from_json(js, base_dir));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed study config: ") + e.what());
  }
  if (c.scenarios.size() != kAllScenarios.size()) {
    throw ValidationError("study config needs exactly 5 scenarios, got " + std::to_string(c.scenarios.size()));
  }
  std::set<Scenario> seen;
  for (const auto& s : c.scenarios) {
    if (!seen.insert(s.scenario).second) {
      throw ValidationError("scenario " + std::string(scenario_id(s.scenario)) + " is defined twice");
    }
  }
  for (const auto& s : c.scenarios) {
    if (s.records_path || s.tree_path || inherits_tree(s)) continue;
    if (c.records_path.empty()) {
      throw ValidationError("scenario " + std::string(scenario_id(s.scenario)) + " has no records to fit on");
    }
  }
  return c;
}

StudyConfig StudyConfig::load(const std::string& path) {
  const std::string dir = fs::path(path).parent_path().string();
  StudyConfig c = from_json_text(read_file(path), dir.empty() ? "." : dir);
  const auto check = [](const std::optional<std::string>& p) {
    if (p && !fs::exists(*p)) throw IoError("referenced file does not exist: " + *p);
  };
  check(c.category_spec_path);
  check(c.expectation_map_path);
  check(c.verbal_scale_path);
  if (!c.records_path.empty() && !fs::exists(c.records_path)) {
    throw IoError("referenced file does not exist: " + c.records_path);
  }
  for (const auto& s : c.scenarios) {
    check(s.tree_path);
    check(s.records_path);
  }
  return c;
}

const ScenarioConfig& StudyConfig::scenario(Scenario s) const {
  for (const auto& sc : scenarios) {
    if (sc.scenario == s) return sc;
  }
  throw ValidationError("study config lacks scenario " + std::string(scenario_id(s)));
}

const ScenarioBundle& Study::bundle(Scenario s) const {
  for (const auto& b : bundles) {
    if (b.scenario == s) return b;
  }
  throw ValidationError("study lacks scenario " + std::string(scenario_id(s)));
}

analytics::CorrectMap Study::correct_map() const {
  analytics::CorrectMap out;
  for (const auto& b : bundles) out.emplace(b.scenario, b.correct);
  return out;
}

LoadedInputs load_inputs(const StudyConfig& config) {
  LoadedInputs in;
  in.spec = std::make_shared<const dataset::CategorySpec>(
      config.category_spec_path ? dataset::CategorySpec::load(*config.category_spec_path)
                                : dataset::CategorySpec::default_chd());
  in.expectations = config.expectation_map_path ? explain::ExpectationMap::load(*config.expectation_map_path)
                                                : explain::ExpectationMap::default_chd();
  in.scale = config.verbal_scale_path ? narrate::VerbalScale::load(*config.verbal_scale_path)
                                      : narrate::VerbalScale::default_scale();
  return in;
}

namespace {

struct FittedScenario {
  tree::DecisionTree tree;
  dataset::RecordSet background;
};

class Builder {
 public:
  Builder(const StudyConfig& config, LoadedInputs inputs) : config_(config), in_(std::move(inputs)) {}

  Study run() {
    Study study;
    study.displayed_features = config_.displayed_features.empty() ? in_.spec->feature_names()
                                                                  : config_.displayed_features;
    for (const auto& f : study.displayed_features) in_.spec->feature(f);

    std::map<Scenario, FittedScenario> fitted;
    for (Scenario s : kAllScenarios) {
      const ScenarioConfig& sc = config_.scenario(s);
      if (inherits_tree(sc)) continue;
      fitted.emplace(s, fit(sc, study.warnings));
    }
    if (!fitted.count(Scenario::kLocalShap)) fitted.emplace(Scenario::kLocalShap, fitted.at(Scenario::kLocalEasy));

    std::set<std::string> used_patients;
    for (std::size_t i = 0; i < kAllScenarios.size(); ++i) {
      const Scenario s = kAllScenarios[i];
      const FittedScenario& f = fitted.at(s);
      if (!inherits_tree(config_.scenario(s))) {
        study.trees.push_back({s, f.tree.cohort(), f.background.size(), f.tree.leaf_count(), f.tree.depth(),
                               f.tree.training_accuracy()});
      }
      ScenarioBundle b = make_bundle(s, f, study.displayed_features, used_patients, study.warnings);
      b.order = i;
      used_patients.insert(b.patient_id);
      study.bundles.push_back(std::move(b));
    }
    return study;
  }

 private:
  const dataset::RecordSet& records(const std::string& path) {
    auto it = cache_.find(path);
    if (it != cache_.end()) return it->second;
    dataset::LoadResult lr = config_.records_categorized ? dataset::load_categorized(path, in_.spec)
                                                         : dataset::load_records(path, in_.spec);
    return cache_.emplace(path, std::move(lr.records)).first->second;
  }

  FittedScenario fit(const ScenarioConfig& sc, std::vector<std::string>& warnings) {
    const std::string id(scenario_id(sc.scenario));
    const dataset::RecordSet& all = records(sc.records_path ? *sc.records_path : config_.records_path);
    if (sc.tree_path) {
      tree::DecisionTree t = tree::load_tree(*sc.tree_path);
      dataset::RecordSet bg = dataset::filter_cohort(all, t.cohort());
      if (bg.empty()) throw ValidationError("cohort of imported tree for " + id + " is empty");
      return {std::move(t), std::move(bg)};
    }
    dataset::RecordSet cohort = dataset::filter_cohort(all, sc.cohort);
    if (cohort.empty()) throw ValidationError("cohort " + sc.cohort.describe() + " for " + id + " is empty");
    tree::DecisionTree t = tree::fit_greedy(cohort, sc.fit, sc.cohort);
    if (t.leaf_count() < 2) warnings.push_back("tree for " + id + " has a single leaf");
    return {std::move(t), std::move(cohort)};
  }

  explain::ExplanationIR tree_ir(Scenario s, const FittedScenario& f, const dataset::PatientRecord& r) const {
    const bool local = s == Scenario::kLocalEasy || s == Scenario::kLocalHard;
    return local ? explain::build_local_ir(f.tree, r, *in_.spec, in_.expectations)
                 : explain::build_global_ir(f.tree, r, *in_.spec, in_.expectations);
  }

  const dataset::PatientRecord& choose(Scenario s, const FittedScenario& f, const std::set<std::string>& used,
                                       std::vector<std::string>& warnings) const {
    const ScenarioConfig& sc = config_.scenario(s);
    const std::string id(scenario_id(s));
    if (sc.patient_id) return f.background.find(*sc.patient_id);

    const bool hard = s == Scenario::kLocalHard || s == Scenario::kGlobalHard;
    const dataset::PatientRecord* any_high = nullptr;
    for (const auto& r : f.background.records) {
      if (used.count(r.id)) continue;
      if (tree::predict(f.tree, r).label != RiskLabel::kHighRisk) continue;
      if (!any_high) any_high = &r;
      if (s == Scenario::kLocalShap) return r;
      const explain::ExplanationIR ir = tree_ir(s, f, r);
      const Rule& rule = ir.kind == explain::ExplanationKind::kLocalTree ? ir.rules.front() : ir.rules.at(*ir.triggered);
      if (rule.has_contradiction() == hard) return r;
    }
    if (any_high) {
      warnings.push_back("no " + std::string(hard ? "contradictory" : "contradiction-free") +
                         " high-risk path for " + id + "; using patient " + any_high->id);
      return *any_high;
    }
    warnings.push_back("no high-risk patient in the cohort for " + id + "; using the first record");
    return f.background.records.front();
  }

  ScenarioBundle make_bundle(Scenario s, const FittedScenario& f, const std::vector<std::string>& displayed,
                             const std::set<std::string>& used, std::vector<std::string>& warnings) const {
    const dataset::PatientRecord& r = choose(s, f, used, warnings);
    ScenarioBundle b;
    b.scenario = s;
    b.patient_id = r.id;
    for (const auto& name : displayed) b.card.emplace_back(name, dataset::value_text(r.features.at(name)));
    if (s == Scenario::kLocalShap) {
      const attribution::AttributionVector a = attribution::shapley(f.tree, r, f.background);
      b.ir = explain::build_shap_ir(a, r, *in_.spec);
      b.correct = explain::correct_importance(b.ir, f.tree, a, displayed);
    } else {
      b.ir = tree_ir(s, f, r);
      b.correct = explain::correct_importance(b.ir, f.tree, std::nullopt, displayed);
    }
    b.prediction = tree::predict(f.tree, r).label;
    b.explanation = narrate::realize(b.ir, in_.scale);
    return b;
  }

  const StudyConfig& config_;
  LoadedInputs in_;
  std::map<std::string, dataset::RecordSet> cache_;
};

}  // namespace

Study build_study(const StudyConfig& config) { return Builder(config, load_inputs(config)).run(); }

std::string format_tree_row(const TreeSummary& t, std::string_view type) {
  std::ostringstream os;
  os << t.cohort.age_min << " - " << t.cohort.age_max << " | " << (t.cohort.gender ? *t.cohort.gender : "All")
     << " | " << t.leaves << " | " << std::fixed << std::setprecision(1) << t.accuracy * 100.0 << " | " << type;
  return os.str();
}

std::string format_tree_table(const Study& study) {
  std::string out = "Age | Gender | Leaf count | Accuracy | Explanation Type\n";
  for (const auto& t : study.trees) out += format_tree_row(t, scenario_title(t.scenario)) + "\n";
  return out;
}

std::string study_to_json_text(const Study& study) {
  ordered_json doc;
  doc["displayed_features"] = study.displayed_features;
  doc["trees"] = ordered_json::array();
  for (const auto& t : study.trees) {
    doc["trees"].push_back({{"scenario", scenario_id(t.scenario)},
                            {"cohort", t.cohort.describe()},
                            {"records", t.records},
                            {"leaves", t.leaves},
                            {"depth", t.depth},
                            {"accuracy", t.accuracy}});
  }
  doc["bundles"] = ordered_json::array();
  for (const auto& b : study.bundles) {
    ordered_json card = ordered_json::array();
    for (const auto& [f, v] : b.card) card.push_back({{"feature", f}, {"value", v}});
    doc["bundles"].push_back({{"scenario", scenario_id(b.scenario)},
                              {"order", b.order},
                              {"patient_id", b.patient_id},
                              {"card", card},
                              {"prediction", to_string(b.prediction)},
                              {"explanation", b.explanation},
                              {"correct", b.correct.bits()},
                              {"ir", ordered_json::parse(explain::ir_to_json_text(b.ir))}});
  }
  doc["warnings"] = study.warnings;
  return doc.dump(2) + "\n";
}

}  // namespace dtnarrate::study
