#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dtnarrate/core.hpp"
#include "dtnarrate/dataset.hpp"
#include "dtnarrate/rule.hpp"

namespace dtnarrate::tree {

using NodeId = std::size_t;

struct Branch {
  std::string value;
  NodeId child = 0;
  bool operator==(const Branch&) const = default;
};

// Multiway split: one branch per declared category of `feature`.
struct Split {
  std::string feature;
  std::vector<Branch> branches;
  bool operator==(const Split&) const = default;
};

struct Leaf {
  RiskLabel label = RiskLabel::kLowRisk;
  double probability = 0.0;  // support / parent_support
  double confidence = 0.0;   // 1 - one-sided binomial p-value
  std::size_t parent_support = 0;
  bool unsupported = false;  // parent_support was 0 at annotation time
  bool operator==(const Leaf&) const = default;
};

struct Node {
  NodeId id = 0;
  std::optional<NodeId> parent;
  std::size_t depth = 0;
  // Training records routed here, split by observed label.
  std::size_t support = 0;
  std::size_t high_count = 0;
  std::size_t low_count = 0;
  std::variant<Split, Leaf> content;

  bool is_leaf() const { return std::holds_alternative<Leaf>(content); }
  const Leaf& leaf() const { return std::get<Leaf>(content); }
  const Split& split() const { return std::get<Split>(content); }
  bool operator==(const Node&) const = default;
};

// Immutable after construction. Nodes are stored in preorder; the root is
// node 0 and every id equals its index.
class DecisionTree {
 public:
  // Checks structural invariants: exhaustive branches over `categories`,
  // no feature repeated on a path, depth within max_depth.
  DecisionTree(std::vector<Node> nodes, std::map<std::string, std::vector<std::string>> categories,
               dataset::Cohort cohort, std::size_t max_depth, double training_accuracy);

  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  const Node& root() const { return nodes_.front(); }
  // Declared categories of every feature the tree tests.
  const std::map<std::string, std::vector<std::string>>& categories() const { return categories_; }
  const dataset::Cohort& cohort() const { return cohort_; }
  std::size_t max_depth() const { return max_depth_; }
  double training_accuracy() const { return training_accuracy_; }

  std::size_t depth() const;
  std::size_t leaf_count() const;
  std::vector<NodeId> leaves() const;
  // Distinct tested feature names, sorted.
  std::vector<std::string> features() const;
  // Tests from the root down to `id`, in order.
  std::vector<Condition> path_to(NodeId id) const;

  DecisionTree with_nodes(std::vector<Node> nodes) const;
  DecisionTree with_training_accuracy(double accuracy) const;

  bool operator==(const DecisionTree&) const = default;

 private:
  void validate() const;

  std::vector<Node> nodes_;
  std::map<std::string, std::vector<std::string>> categories_;
  dataset::Cohort cohort_;
  std::size_t max_depth_ = 0;
  double training_accuracy_ = 0.0;
};

struct FitOptions {
  std::size_t max_depth = 4;
  std::size_t min_leaf_support = 5;
  // Impure nodes split on the best feature unless its gain (bits) is below
  // this. Zero keeps splitting even at zero gain, which XOR-like targets need.
  double min_gain = 0.0;
};

// Greedy top-down induction with entropy information gain over the
// categorical features of rs.spec. Ties go to the lexicographically
// smallest feature name; features constant over a node are not candidates.
// Leaves are labelled and annotated on rs.
DecisionTree fit_greedy(const dataset::RecordSet& rs, const FitOptions& options,
                        const dataset::Cohort& cohort = {});

// Information gain (bits) of splitting `records` on `feature`.
double information_gain(const std::vector<const dataset::PatientRecord*>& records,
                        const std::string& feature, const std::vector<std::string>& categories);

// Recounts every node on rs and recomputes leaf probability and confidence.
DecisionTree annotate_leaves(const DecisionTree& t, const dataset::RecordSet& rs);

// P(X >= k) for X ~ Binomial(n, p).
double binomial_upper_tail(std::size_t k, std::size_t n, double p);

struct Prediction {
  RiskLabel label = RiskLabel::kLowRisk;
  NodeId leaf = 0;
};

using FeatureLookup = std::function<const std::string&(const std::string& feature)>;

Prediction predict(const DecisionTree& t, const dataset::PatientRecord& r);
// Dispatches on values supplied by `lookup` instead of a record.
Prediction predict_with(const DecisionTree& t, const FeatureLookup& lookup);

Rule decision_path(const DecisionTree& t, const dataset::PatientRecord& r);
Rule rule_for_leaf(const DecisionTree& t, NodeId leaf);

// One rule per leaf carrying `label`, in preorder.
std::vector<Rule> extract_rules(const DecisionTree& t, RiskLabel label);

double accuracy(const DecisionTree& t, const dataset::RecordSet& rs);

inline constexpr int kTreeSchemaVersion = 1;

// Tree document I/O. Key order is fixed; see docs/formats.md.
std::string serialize(const DecisionTree& t);
DecisionTree deserialize(std::string_view text);
DecisionTree load_tree(const std::string& path);

}  // namespace dtnarrate::tree
