#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dtnarrate/analytics.hpp"
#include "dtnarrate/attribution.hpp"
#include "dtnarrate/dataset.hpp"
#include "dtnarrate/explain.hpp"
#include "dtnarrate/narrate.hpp"
#include "dtnarrate/scenario.hpp"
#include "dtnarrate/tree.hpp"

namespace dtnarrate::study {

struct ScenarioConfig {
  Scenario scenario = Scenario::kLocalShap;
  dataset::Cohort cohort;
  tree::FitOptions fit;
  std::optional<std::string> tree_path;  // import instead of fitting
  std::optional<std::string> records_path;  // overrides the study-wide table
  std::optional<std::string> patient_id;  // chosen automatically when absent
};

// Relative paths are resolved against the config file's directory.
struct StudyConfig {
  std::optional<std::string> category_spec_path;
  std::optional<std::string> expectation_map_path;
  std::optional<std::string> verbal_scale_path;
  std::string records_path;
  bool records_categorized = false;
  std::uint64_t seed = 0;
  std::vector<std::string> displayed_features;  // empty: every spec feature
  bool randomize_order = false;
  std::vector<ScenarioConfig> scenarios;  // exactly one per Scenario

  static StudyConfig from_json_text(const std::string& text, const std::string& base_dir = ".");
  static StudyConfig load(const std::string& path);
  const ScenarioConfig& scenario(Scenario s) const;
};

struct ScenarioBundle {
  Scenario scenario = Scenario::kLocalShap;
  std::size_t order = 0;
  std::string patient_id;
  std::vector<std::pair<std::string, std::string>> card;  // displayed feature -> value
  RiskLabel prediction = RiskLabel::kLowRisk;
  std::string explanation;
  FeatureSelection correct;  // server-side only
  explain::ExplanationIR ir;
  bool operator==(const ScenarioBundle&) const = default;
};

struct TreeSummary {
  Scenario scenario = Scenario::kLocalShap;
  dataset::Cohort cohort;
  std::size_t records = 0;
  std::size_t leaves = 0;
  std::size_t depth = 0;
  double accuracy = 0.0;
};

struct Study {
  std::vector<std::string> displayed_features;
  std::vector<ScenarioBundle> bundles;  // default presentation order
  std::vector<TreeSummary> trees;
  std::vector<std::string> warnings;

  const ScenarioBundle& bundle(Scenario s) const;
  analytics::CorrectMap correct_map() const;
};

struct LoadedInputs {
  std::shared_ptr<const dataset::CategorySpec> spec;
  explain::ExpectationMap expectations;
  narrate::VerbalScale scale;
};

LoadedInputs load_inputs(const StudyConfig& config);

Study build_study(const StudyConfig& config);

// "70 - 79 | Female | 6 | 78.4 | Local Easy": cohort, leaf count,
// accuracy in percent, explanation type.
std::string format_tree_row(const TreeSummary& t, std::string_view type);
std::string format_tree_table(const Study& study);

// Operator artifact; contains every C vector.
std::string study_to_json_text(const Study& study);

}  // namespace dtnarrate::study
