#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dtnarrate/narrate.hpp"

namespace dtnarrate::narrate {

using nlohmann::ordered_json;

namespace {

constexpr const char* kShapIntro = "Features contributing to this prediction, most important first:";
constexpr const char* kShapEmpty = "There are no contributing features for this prediction.";
constexpr const char* kGlobalIntro = "The model predicts high risk of CHD when one of these rules applies:";

bool in_unit(double x) { return std::isfinite(x) && x >= 0.0 && x <= 1.0; }

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

std::string risk_word(RiskLabel label) { return label == RiskLabel::kHighRisk ? "high" : "low"; }

std::string condition_text(const Condition& c) { return c.feature + " is " + c.value; }

bool word_char(char ch) { return std::isalnum(static_cast<unsigned char>(ch)) || ch == '_'; }

}  // namespace

void VerbalScale::validate() const {
  if (bands.empty()) throw ValidationError("verbal scale has no bands");
  std::set<std::string> phrases;
  for (std::size_t i = 0; i < bands.size(); ++i) {
    const Band& b = bands[i];
    if (!in_unit(b.threshold)) throw ValidationError("band threshold must lie in [0, 1]");
    if (i > 0 && !(b.threshold < bands[i - 1].threshold)) {
      throw ValidationError("band thresholds must be strictly decreasing");
    }
    if (b.phrase.empty()) throw ValidationError("band phrase is empty");
    if (!phrases.insert(b.phrase).second) throw ValidationError("duplicate band phrase '" + b.phrase + "'");
  }
  if (bands.back().threshold != 0.0) throw ValidationError("lowest band threshold must be 0");
  if (low_confidence_phrase.empty()) throw ValidationError("low-confidence phrase is empty");
  if (phrases.count(low_confidence_phrase)) {
    throw ValidationError("low-confidence phrase duplicates a band phrase");
  }
  if (!in_unit(confidence_threshold)) throw ValidationError("confidence_threshold must lie in [0, 1]");
  if (!in_unit(low_confidence_min_probability)) {
    throw ValidationError("low_confidence_min_probability must lie in [0, 1]");
  }
}

VerbalScale VerbalScale::default_scale() {
  VerbalScale s;
  s.bands = {{0.99, "almost certainly"}, {0.90, "very likely"},        {0.66, "likely"},
             {0.50, "more likely than not"}, {0.33, "less likely than not"}, {0.0, "unlikely"}};
  return s;
}

VerbalScale VerbalScale::from_json_text(const std::string& text) {
  VerbalScale s;
  try {
    const auto doc = ordered_json::parse(text);
    if (!doc.is_object()) throw ValidationError("verbal scale must be a JSON object");
    for (const auto& [key, _] : doc.items()) {
      if (key != "bands" && key != "low_confidence_phrase" && key != "confidence_threshold" &&
          key != "low_confidence_min_probability") {
        throw ValidationError("unknown field '" + key + "' in verbal scale");
      }
    }
    for (const auto& jb : doc.at("bands")) {
      s.bands.push_back({jb.at("threshold").get<double>(), jb.at("phrase").get<std::string>()});
    }
    if (doc.contains("low_confidence_phrase")) {
      s.low_confidence_phrase = doc.at("low_confidence_phrase").get<std::string>();
    }
    if (doc.contains("confidence_threshold")) {
      s.confidence_threshold = doc.at("confidence_threshold").get<double>();
    }
    if (doc.contains("low_confidence_min_probability")) {
      s.low_confidence_min_probability = doc.at("low_confidence_min_probability").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed verbal scale: ") + e.what());
  }
  s.validate();
  return s;
}

VerbalScale VerbalScale::load(const std::string& path) { return from_json_text(read_file(path)); }

std::string VerbalScale::to_json_text() const {
  ordered_json doc;
  doc["bands"] = ordered_json::array();
  for (const auto& b : bands) doc["bands"].push_back({{"threshold", b.threshold}, {"phrase", b.phrase}});
  doc["low_confidence_phrase"] = low_confidence_phrase;
  doc["confidence_threshold"] = confidence_threshold;
  doc["low_confidence_min_probability"] = low_confidence_min_probability;
  return doc.dump(2) + "\n";
}

std::string verbalize_probability(double p, double confidence, const VerbalScale& scale) {
  if (!in_unit(p) || !in_unit(confidence)) {
    throw ValidationError("probability and confidence must lie in [0, 1]");
  }
  if (confidence < scale.confidence_threshold && p >= scale.low_confidence_min_probability) {
    return scale.low_confidence_phrase;
  }
  for (const auto& b : scale.bands) {
    if (p >= b.threshold) return b.phrase;
  }
  return scale.bands.back().phrase;
}

std::string realize_header(const explain::Header& h) {
  std::string who;
  if (h.age) who = format_number(*h.age) + "-year-old";
  if (!h.gender.empty()) {
    if (!who.empty()) who += ' ';
    who += lower(h.gender);
  }
  return who.empty() ? "Patient." : "Patient: " + who + ".";
}

std::string realize_rule(const Rule& rule, const VerbalScale& scale) {
  std::vector<const Condition*> plain, contra;
  for (const auto& c : rule.conditions) (c.contradictory ? contra : plain).push_back(&c);

  std::string s;
  for (std::size_t i = 0; i < plain.size(); ++i) {
    s += (i == 0 ? "If " : " and ") + condition_text(*plain[i]);
  }
  for (const Condition* c : contra) {
    s += (s.empty() ? "Even if " : ", even if ") + condition_text(*c);
  }
  if (s.empty()) s = "Regardless of the patient's features";
  s += ", the patient is " + verbalize_probability(rule.probability, rule.confidence, scale) + " at " +
       risk_word(rule.outcome) + " risk of CHD.";
  return s;
}

std::string realize_shap(const std::vector<std::pair<std::string, double>>& list,
                         const explain::Header& header) {
  std::string out = realize_header(header) + "\n";
  if (list.empty()) return out + kShapEmpty + "\n";
  out += std::string(kShapIntro) + "\n";
  for (const auto& [feature, _] : list) out += "- " + feature + "\n";
  return out;
}

std::string realize(const explain::ExplanationIR& ir, const VerbalScale& scale) {
  using explain::ExplanationKind;
  switch (ir.kind) {
    case ExplanationKind::kShapList:
      return realize_shap(ir.attributions, ir.header);
    case ExplanationKind::kLocalTree: {
      std::string out = realize_header(ir.header) + "\n";
      for (const auto& rule : ir.rules) out += realize_rule(rule, scale) + "\n";
      return out;
    }
    case ExplanationKind::kGlobalTree: {
      std::string out = realize_header(ir.header) + "\n" + kGlobalIntro + "\n";
      for (std::size_t i = 0; i < ir.rules.size(); ++i) {
        out += std::to_string(i + 1) + ". " + realize_rule(ir.rules[i], scale) + "\n";
      }
      if (ir.triggered) {
        out += "This patient's case matches rule " + std::to_string(*ir.triggered + 1) + ".\n";
      } else {
        out += "This patient's case matches none of these rules, so the prediction is " +
               risk_word(ir.prediction) + " risk of CHD.\n";
      }
      return out;
    }
  }
  return {};
}

std::vector<std::string> parse_shap_bullets(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("- ", 0) == 0) out.push_back(line.substr(2));
  }
  return out;
}

std::set<std::string> mentioned_features(const std::string& text, const std::vector<std::string>& features) {
  const std::set<std::string> wanted(features.begin(), features.end());
  std::set<std::string> found;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!word_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && word_char(text[j])) ++j;
    std::string token = text.substr(i, j - i);
    if (wanted.count(token)) found.insert(std::move(token));
    i = j;
  }
  return found;
}

}  // namespace dtnarrate::narrate
