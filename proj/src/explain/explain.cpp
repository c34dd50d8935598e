#include <algorithm>
#include <set>

#include <json.hpp>

#include "dtnarrate/explain.hpp"

namespace dtnarrate::explain {

using nlohmann::ordered_json;

namespace {

Direction parse_direction(const std::string& s) {
  if (s == "high") return Direction::kExpectedInHighRisk;
  if (s == "low") return Direction::kExpectedInLowRisk;
  if (s == "neutral") return Direction::kNeutral;
  throw ValidationError("direction must be \"high\", \"low\" or \"neutral\", got '" + s + "'");
}

std::string_view direction_name(Direction d) {
  switch (d) {
    case Direction::kExpectedInHighRisk: return "high";
    case Direction::kExpectedInLowRisk: return "low";
    case Direction::kNeutral: return "neutral";
  }
  return "neutral";
}

}  // namespace

void ExpectationMap::set(const std::string& feature, const std::string& value, Direction direction) {
  entries_[{feature, value}] = direction;
}

Direction ExpectationMap::direction(const std::string& feature, const std::string& value) const {
  auto it = entries_.find({feature, value});
  return it == entries_.end() ? Direction::kNeutral : it->second;
}

ExpectationMap ExpectationMap::from_json_text(const std::string& text) {
  ExpectationMap map;
  try {
    const auto doc = ordered_json::parse(text);
    if (!doc.is_object() || doc.size() != 1 || !doc.contains("entries")) {
      throw ValidationError("expectation map must be an object with a single 'entries' array");
    }
    for (const auto& e : doc.at("entries")) {
      if (!e.is_object() || e.size() != 3) {
        throw ValidationError("expectation entry must have exactly feature, value, direction");
      }
      const auto feature = e.at("feature").get<std::string>();
      const auto value = e.at("value").get<std::string>();
      if (map.entries_.count({feature, value})) {
        throw ValidationError("duplicate expectation for " + feature + " = " + value);
      }
      map.set(feature, value, parse_direction(e.at("direction").get<std::string>()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed expectation map: ") + e.what());
  }
  return map;
}

ExpectationMap ExpectationMap::load(const std::string& path) { return from_json_text(read_file(path)); }

std::string ExpectationMap::to_json_text() const {
  ordered_json doc;
  doc["entries"] = ordered_json::array();
  for (const auto& [key, d] : entries_) {
    doc["entries"].push_back({{"feature", key.first}, {"value", key.second}, {"direction", direction_name(d)}});
  }
  return doc.dump(2) + "\n";
}

ExpectationMap ExpectationMap::default_chd() {
  constexpr auto high = Direction::kExpectedInHighRisk;
  constexpr auto low = Direction::kExpectedInLowRisk;
  ExpectationMap m;
  m.set("BMI", "Healthy", low);
  m.set("BMI", "Overweight", high);
  m.set("BMI", "Obese", high);
  m.set("Diabetes", "Yes", high);
  m.set("Cholesterol", "Normal", low);
  m.set("Cholesterol", "High", high);
  m.set("HDL", "High", low);
  m.set("Triglycerides", "FastingNormal", low);
  m.set("Triglycerides", "High", high);
  m.set("CholesterolHDLRatio", "Normal", low);
  m.set("CholesterolHDLRatio", "High", high);
  m.set("SystolicBP", "Normal", low);
  m.set("SystolicBP", "Elevated", high);
  m.set("SystolicBP", "High", high);
  m.set("Smoking", "NonSmoker", low);
  m.set("Smoking", "Moderate", high);
  m.set("Smoking", "Heavy", high);
  return m;
}

Rule detect_contradictions(Rule rule, const ExpectationMap& expectations) {
  const Direction opposing = rule.outcome == RiskLabel::kHighRisk ? Direction::kExpectedInLowRisk
                                                                  : Direction::kExpectedInHighRisk;
  for (auto& c : rule.conditions) {
    c.contradictory = expectations.direction(c.feature, c.value) == opposing;
  }
  return rule;
}

Header header_for(const dataset::PatientRecord& r, const dataset::CategorySpec& spec) {
  Header h;
  if (const auto* age = spec.find(spec.age_feature); age && age->kind == dataset::FeatureKind::kNumeric) {
    h.age = r.number(spec.age_feature);
  }
  if (const auto* gender = spec.find(spec.gender_feature); gender && gender->is_categorical()) {
    h.gender = r.category(spec.gender_feature);
  }
  return h;
}

std::size_t count_chunks(const ExplanationIR& ir) {
  std::set<std::string> names;
  for (const auto& rule : ir.rules) {
    for (const auto& c : rule.conditions) names.insert(c.feature);
  }
  for (const auto& [feature, _] : ir.attributions) names.insert(feature);
  return names.size();
}

ExplanationIR build_local_ir(const tree::DecisionTree& t, const dataset::PatientRecord& r,
                             const dataset::CategorySpec& spec, const ExpectationMap& expectations) {
  ExplanationIR ir;
  ir.kind = ExplanationKind::kLocalTree;
  ir.header = header_for(r, spec);
  Rule rule = detect_contradictions(tree::decision_path(t, r), expectations);
  ir.prediction = rule.outcome;
  ir.rules.push_back(std::move(rule));
  ir.chunk_count = count_chunks(ir);
  return ir;
}

ExplanationIR build_global_ir(const tree::DecisionTree& t, const dataset::PatientRecord& r,
                              const dataset::CategorySpec& spec, const ExpectationMap& expectations) {
  std::vector<Rule> rules = tree::extract_rules(t, RiskLabel::kHighRisk);
  if (rules.empty()) {
    throw ValidationError("tree has no high-risk leaves; a global explanation needs at least one");
  }
  std::stable_sort(rules.begin(), rules.end(), [](const Rule& a, const Rule& b) {
    if (a.confidence != b.confidence) return a.confidence > b.confidence;
    if (a.probability != b.probability) return a.probability > b.probability;
    if (a.conditions.size() != b.conditions.size()) return a.conditions.size() < b.conditions.size();
    return a.leaf < b.leaf;
  });

  ExplanationIR ir;
  ir.kind = ExplanationKind::kGlobalTree;
  ir.header = header_for(r, spec);
  const tree::Prediction p = tree::predict(t, r);
  ir.prediction = p.label;
  for (auto& rule : rules) ir.rules.push_back(detect_contradictions(std::move(rule), expectations));
  if (p.label == RiskLabel::kHighRisk) {
    for (std::size_t i = 0; i < ir.rules.size(); ++i) {
      if (ir.rules[i].leaf == p.leaf) ir.triggered = i;
    }
  }
  ir.chunk_count = count_chunks(ir);
  return ir;
}

ExplanationIR build_shap_ir(const attribution::AttributionVector& a, const dataset::PatientRecord& r,
                            const dataset::CategorySpec& spec) {
  ExplanationIR ir;
  ir.kind = ExplanationKind::kShapList;
  ir.header = header_for(r, spec);
  ir.prediction = a.prediction >= 0.5 ? RiskLabel::kHighRisk : RiskLabel::kLowRisk;
  ir.attributions = attribution::filter_positive_sorted(a);
  ir.chunk_count = count_chunks(ir);
  return ir;
}

FeatureSelection correct_importance(const ExplanationIR& ir, const tree::DecisionTree& t,
                                    const std::optional<attribution::AttributionVector>& a,
                                    const std::vector<std::string>& displayed) {
  std::vector<std::string> selected;
  switch (ir.kind) {
    case ExplanationKind::kShapList:
      if (!a) throw ValidationError("a SHAP explanation needs its attribution vector");
      for (std::size_t i = 0; i < a->features.size(); ++i) {
        if (a->scores[i] > 0.0) selected.push_back(a->features[i]);
      }
      break;
    case ExplanationKind::kLocalTree:
      if (ir.rules.size() != 1) throw ValidationError("a local explanation has exactly one rule");
      selected = ir.rules.front().features();
      break;
    case ExplanationKind::kGlobalTree:
      selected = t.features();
      break;
  }
  return FeatureSelection::from_features(displayed, selected);
}

std::string_view kind_name(ExplanationKind kind) {
  switch (kind) {
    case ExplanationKind::kLocalTree: return "local";
    case ExplanationKind::kGlobalTree: return "global";
    case ExplanationKind::kShapList: return "shap";
  }
  return "local";
}

std::string ir_to_json_text(const ExplanationIR& ir) {
  ordered_json doc;
  doc["kind"] = kind_name(ir.kind);
  doc["header"] = {{"age", ir.header.age ? ordered_json(*ir.header.age) : ordered_json(nullptr)},
                   {"gender", ir.header.gender}};
  doc["prediction"] = to_string(ir.prediction);
  doc["rules"] = ordered_json::array();
  for (const auto& rule : ir.rules) {
    ordered_json jr;
    jr["leaf"] = rule.leaf ? ordered_json(*rule.leaf) : ordered_json(nullptr);
    jr["outcome"] = to_string(rule.outcome);
    jr["probability"] = rule.probability;
    jr["confidence"] = rule.confidence;
    jr["conditions"] = ordered_json::array();
    for (const auto& c : rule.conditions) {
      jr["conditions"].push_back({{"feature", c.feature}, {"value", c.value}, {"contradictory", c.contradictory}});
    }
    doc["rules"].push_back(std::move(jr));
  }
  doc["triggered"] = ir.triggered ? ordered_json(*ir.triggered) : ordered_json(nullptr);
  doc["attributions"] = ordered_json::array();
  for (const auto& [feature, score] : ir.attributions) {
    doc["attributions"].push_back({{"feature", feature}, {"score", score}});
  }
  doc["chunk_count"] = ir.chunk_count;
  return doc.dump(2) + "\n";
}

}  // namespace dtnarrate::explain
