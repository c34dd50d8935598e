#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dtnarrate/attribution.hpp"
#include "dtnarrate/dataset.hpp"
#include "dtnarrate/rule.hpp"
#include "dtnarrate/selection.hpp"
#include "dtnarrate/tree.hpp"

namespace dtnarrate::explain {

enum class Direction { kExpectedInHighRisk, kExpectedInLowRisk, kNeutral };

// Common-sense expectation for a (feature, value) pair, e.g. BMI = Healthy is
// expected in low-risk rules. Used to find semifactual ("even if") conditions.
class ExpectationMap {
 public:
  void set(const std::string& feature, const std::string& value, Direction direction);
  // kNeutral when absent.
  Direction direction(const std::string& feature, const std::string& value) const;
  std::size_t size() const { return entries_.size(); }

  static ExpectationMap from_json_text(const std::string& text);
  static ExpectationMap load(const std::string& path);
  static ExpectationMap default_chd();
  std::string to_json_text() const;

 private:
  std::map<std::pair<std::string, std::string>, Direction> entries_;
};

Rule detect_contradictions(Rule rule, const ExpectationMap& expectations);

enum class ExplanationKind { kLocalTree, kGlobalTree, kShapList };

struct Header {
  std::optional<double> age;
  std::string gender;
  bool operator==(const Header&) const = default;
};

Header header_for(const dataset::PatientRecord& r, const dataset::CategorySpec& spec);

// Language-independent explanation content; realized to text by narrate.
struct ExplanationIR {
  ExplanationKind kind = ExplanationKind::kLocalTree;
  Header header;
  RiskLabel prediction = RiskLabel::kLowRisk;
  std::vector<Rule> rules;
  std::optional<std::size_t> triggered;  // index into rules
  std::vector<std::pair<std::string, double>> attributions;
  std::size_t chunk_count = 0;

  bool operator==(const ExplanationIR&) const = default;
};

// Number of distinct features named by the IR's rules and attributions.
std::size_t count_chunks(const ExplanationIR& ir);

ExplanationIR build_local_ir(const tree::DecisionTree& t, const dataset::PatientRecord& r,
                             const dataset::CategorySpec& spec, const ExpectationMap& expectations);

// High-risk rules only, by descending confidence, then descending
// probability, then fewer conditions, then leaf id.
ExplanationIR build_global_ir(const tree::DecisionTree& t, const dataset::PatientRecord& r,
                              const dataset::CategorySpec& spec, const ExpectationMap& expectations);

ExplanationIR build_shap_ir(const attribution::AttributionVector& a, const dataset::PatientRecord& r,
                            const dataset::CategorySpec& spec);

// The selection an ideal reader of `ir` would make over `displayed`:
// ShapList -> {score > 0}; LocalTree -> path features; GlobalTree -> every
// feature the tree tests.
FeatureSelection correct_importance(const ExplanationIR& ir, const tree::DecisionTree& t,
                                    const std::optional<attribution::AttributionVector>& a,
                                    const std::vector<std::string>& displayed);

std::string_view kind_name(ExplanationKind kind);
std::string ir_to_json_text(const ExplanationIR& ir);

}  // namespace dtnarrate::explain
