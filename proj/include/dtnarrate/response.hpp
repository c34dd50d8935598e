#pragma once

#include <string>
#include <vector>

#include "dtnarrate/scenario.hpp"
#include "dtnarrate/selection.hpp"

namespace dtnarrate {

struct SurveyResponse {
  std::string participant;
  Scenario scenario = Scenario::kLocalShap;
  FeatureSelection before;  // U
  FeatureSelection after;   // V
  int cr = 3, ur = 3, vr = 3;  // raw Likert 1..5
  std::string free_text;
  double dwell_page1 = 0.0;  // seconds
  double dwell_page2 = 0.0;

  void validate() const;
  bool operator==(const SurveyResponse&) const = default;
};

struct ExcludedScenario {
  std::string participant;
  Scenario scenario = Scenario::kLocalShap;
  std::string reason;
  bool operator==(const ExcludedScenario&) const = default;
};

// Shape of `export` output and `analyze --responses` input.
struct ResponseExport {
  std::vector<std::string> displayed_features;
  std::vector<SurveyResponse> responses;
  std::vector<ExcludedScenario> incomplete;
  std::vector<std::string> skipped_lines;

  bool operator==(const ResponseExport&) const = default;
};

std::string export_to_json_text(const ResponseExport& e);
ResponseExport export_from_json_text(const std::string& text);
ResponseExport load_export(const std::string& path);

}  // namespace dtnarrate
