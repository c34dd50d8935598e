#pragma once

#include <set>
#include <string>
#include <utility>
#include <vector>

#include "dtnarrate/explain.hpp"
#include "dtnarrate/rule.hpp"

namespace dtnarrate::narrate {

struct Band {
  double threshold = 0.0;
  std::string phrase;
  bool operator==(const Band&) const = default;
};

struct VerbalScale {
  std::vector<Band> bands;  // strictly decreasing thresholds, last one 0
  std::string low_confidence_phrase = "possibly";
  double confidence_threshold = 0.95;
  // "possibly" replaces the band phrase only for p at or above this.
  double low_confidence_min_probability = 0.90;

  void validate() const;
  static VerbalScale default_scale();
  static VerbalScale from_json_text(const std::string& text);
  static VerbalScale load(const std::string& path);
  std::string to_json_text() const;

  bool operator==(const VerbalScale&) const = default;
};

std::string verbalize_probability(double p, double confidence, const VerbalScale& scale);

std::string realize_header(const explain::Header& h);
std::string realize_rule(const Rule& rule, const VerbalScale& scale);
std::string realize(const explain::ExplanationIR& ir, const VerbalScale& scale);
std::string realize_shap(const std::vector<std::pair<std::string, double>>& list,
                         const explain::Header& header);

// Recovers the bullet order written by realize_shap.
std::vector<std::string> parse_shap_bullets(const std::string& text);

// Whole-word occurrences of any of `features` in `text`.
std::set<std::string> mentioned_features(const std::string& text, const std::vector<std::string>& features);

}  // namespace dtnarrate::narrate
