#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dtnarrate/core.hpp"

namespace dtnarrate {

// One test on a root-to-leaf path, e.g. Smoking = Heavy.
struct Condition {
  std::string feature;
  std::string value;
  bool contradictory = false;

  bool operator==(const Condition&) const = default;
};

// A decision rule: the conjunction of conditions along one path and the
// leaf it ends in. Also used for ground-truth rules of synthetic data.
struct Rule {
  std::vector<Condition> conditions;
  RiskLabel outcome = RiskLabel::kLowRisk;
  double probability = 1.0;
  double confidence = 1.0;
  std::optional<std::size_t> leaf;

  bool operator==(const Rule&) const = default;

  bool has_contradiction() const;
  std::vector<std::string> features() const;
};

}  // namespace dtnarrate
