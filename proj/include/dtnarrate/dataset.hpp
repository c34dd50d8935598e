#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dtnarrate/core.hpp"
#include "dtnarrate/rule.hpp"

namespace dtnarrate::dataset {

struct Bin {
  std::string label;
  double lower = 0.0;
  double upper = 0.0;
};

// Which end of each bin interval is closed. kLower gives [lower, upper),
// kUpper gives (lower, upper]. The outermost bin at the open end of the
// range is closed on both sides, so the declared range is covered exactly.
enum class ClosedSide { kLower, kUpper };

enum class FeatureKind {
  kBinned,       // numeric input mapped onto labelled bins
  kCategorical,  // categorical input kept as-is, validated against `values`
  kNumeric,      // numeric input kept as-is (e.g. Age, alcohol amount)
};

struct FeatureDef {
  std::string name;
  FeatureKind kind = FeatureKind::kCategorical;
  std::vector<Bin> bins;
  ClosedSide closed = ClosedSide::kLower;
  std::vector<std::string> values;
  double min = 0.0;
  double max = 0.0;
  bool integer = false;

  bool is_categorical() const { return kind != FeatureKind::kNumeric; }
  // Declared category labels, in declaration order. Empty for kNumeric.
  std::vector<std::string> labels() const;
  bool has_label(const std::string& label) const;
};

// Declarative preprocessing config: which columns exist and how raw values
// become categories. See docs/formats.md for the file schema.
class CategorySpec {
 public:
  CategorySpec() = default;
  explicit CategorySpec(std::vector<FeatureDef> features);

  static CategorySpec from_json_text(const std::string& text);
  static CategorySpec load(const std::string& path);
  // The eleven CHD features with clinical bins.
  static CategorySpec default_chd();
  std::string to_json_text() const;

  const std::vector<FeatureDef>& features() const { return features_; }
  const FeatureDef& feature(const std::string& name) const;
  const FeatureDef* find(const std::string& name) const;
  std::vector<std::string> feature_names() const;
  std::vector<std::string> categorical_feature_names() const;

  std::string id_column = "id";
  std::string label_column = "CHD";
  std::string age_feature = "Age";
  std::string gender_feature = "Gender";

 private:
  void validate() const;
  std::vector<FeatureDef> features_;
};

// Maps a raw numeric value onto its bin label.
std::string categorize(double value, const std::string& feature, const CategorySpec& spec);

using FeatureValue = std::variant<std::string, double>;

struct PatientRecord {
  std::string id;
  std::map<std::string, FeatureValue> features;
  std::optional<RiskLabel> label;

  const std::string& category(const std::string& feature) const;
  double number(const std::string& feature) const;
  bool operator==(const PatientRecord&) const = default;
};

// Display text for a value: the label, or the shortest round-trip number.
std::string value_text(const FeatureValue& value);

bool matches(const Rule& rule, const PatientRecord& record);

struct RecordSet {
  std::vector<PatientRecord> records;
  std::shared_ptr<const CategorySpec> spec;
  std::vector<std::string> warnings;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  const PatientRecord& find(const std::string& id) const;
};

// Throws ValidationError unless the record carries exactly the spec's
// features with in-domain values.
void validate_record(const PatientRecord& record, const CategorySpec& spec);

struct DroppedRow {
  std::size_t line = 0;  // 1-based line number in the input, header is line 1
  std::string feature;   // first missing feature
};

struct DropReport {
  std::size_t dropped = 0;
  std::vector<DroppedRow> rows;
};

struct LoadResult {
  RecordSet records;
  DropReport drops;
};

// Raw table: binned columns hold numbers and are categorized on the way in.
LoadResult read_records(std::istream& in, std::shared_ptr<const CategorySpec> spec);
LoadResult load_records(const std::string& path, std::shared_ptr<const CategorySpec> spec);

// Categorized table, as written by write_categorized.
LoadResult read_categorized(std::istream& in, std::shared_ptr<const CategorySpec> spec);
LoadResult load_categorized(const std::string& path, std::shared_ptr<const CategorySpec> spec);

void write_categorized(std::ostream& out, const RecordSet& rs);
std::string serialize_records(const RecordSet& rs);

std::string format_drop_report(const DropReport& report);

struct Cohort {
  int age_min = 0;
  int age_max = 200;
  std::optional<std::string> gender;

  std::string describe() const;
  bool operator==(const Cohort&) const = default;
};

RecordSet filter_cohort(const RecordSet& rs, const Cohort& cohort);

struct SyntheticOptions {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  double label_noise = 0.0;
  RiskLabel default_label = RiskLabel::kLowRisk;
};

// Uniform feature draws, labels from the first matching ground-truth rule
// (default_label if none), then each label flipped with probability
// label_noise. Feature draws do not depend on label_noise.
RecordSet generate_synthetic(const SyntheticOptions& options,
                             std::shared_ptr<const CategorySpec> spec,
                             const std::vector<Rule>& ground_truth);

// {"default_label": "LowRisk", "rules": [{"outcome": "HighRisk",
//   "conditions": [{"feature": "Smoking", "value": "Heavy"}]}]}
struct GroundTruth {
  RiskLabel default_label = RiskLabel::kLowRisk;
  std::vector<Rule> rules;
};

GroundTruth ground_truth_from_json_text(const std::string& text);
GroundTruth load_ground_truth(const std::string& path);

// Writes a raw table for `rs`: each binned value is replaced by a number
// drawn inside its bin. `incomplete_rows` extra rows are appended with one
// required cell blanked, so a later load drops exactly that many.
void write_raw(std::ostream& out, const RecordSet& rs, std::uint64_t seed,
               std::size_t incomplete_rows = 0);

}  // namespace dtnarrate::dataset
