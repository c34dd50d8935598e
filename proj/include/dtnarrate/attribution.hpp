#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "dtnarrate/dataset.hpp"
#include "dtnarrate/tree.hpp"

namespace dtnarrate::attribution {

// Exact enumeration is 2^N tree evaluations per background record.
inline constexpr std::size_t kMaxExactFeatures = 15;

struct AttributionVector {
  std::vector<std::string> features;
  std::vector<double> scores;
  double baseline = 0.0;    // v(empty set): mean prediction over the background
  double prediction = 0.0;  // 1.0 for HighRisk, 0.0 for LowRisk

  double score(const std::string& feature) const;
};

// Interventional value function: v(S) is the mean, over background records
// b, of 1[predict(t, r on S, b elsewhere) == HighRisk].
class CoalitionValue {
 public:
  CoalitionValue(const tree::DecisionTree& t, const dataset::PatientRecord& r,
                 const dataset::RecordSet& background, std::vector<std::string> players);

  const std::vector<std::string>& players() const { return players_; }
  // Bit i of `mask` set means players()[i] takes the explained record's value.
  double operator()(std::size_t mask) const;

 private:
  const tree::DecisionTree& tree_;
  const dataset::PatientRecord& record_;
  const dataset::RecordSet& background_;
  std::vector<std::string> players_;
};

// Players default to every feature of background.spec, in spec order.
// Features the tree never tests receive exactly 0.
AttributionVector shapley(const tree::DecisionTree& t, const dataset::PatientRecord& r,
                          const dataset::RecordSet& background,
                          std::vector<std::string> players = {});

// Kernel-weighted least squares over all coalitions with the efficiency
// constraint imposed. Agrees with shapley() up to solver round-off.
AttributionVector kernel_shapley(const tree::DecisionTree& t, const dataset::PatientRecord& r,
                                 const dataset::RecordSet& background,
                                 std::vector<std::string> players = {});

// Strictly positive scores, descending; ties by feature name.
std::vector<std::pair<std::string, double>> filter_positive_sorted(const AttributionVector& a);

}  // namespace dtnarrate::attribution
