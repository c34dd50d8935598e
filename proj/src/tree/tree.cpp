#include <algorithm>
#include <cmath>
#include <set>

#include "dtnarrate/tree.hpp"

namespace dtnarrate::tree {

DecisionTree::DecisionTree(std::vector<Node> nodes,
                           std::map<std::string, std::vector<std::string>> categories,
                           dataset::Cohort cohort, std::size_t max_depth, double training_accuracy)
    : nodes_(std::move(nodes)),
      categories_(std::move(categories)),
      cohort_(std::move(cohort)),
      max_depth_(max_depth),
      training_accuracy_(training_accuracy) {
  validate();
}

void DecisionTree::validate() const {
  if (nodes_.empty()) throw ValidationError("tree has no nodes");
  if (nodes_.front().parent) throw ValidationError("root node must not have a parent");
  if (nodes_.front().depth != 0) throw ValidationError("root node must have depth 0");
  if (!(training_accuracy_ >= 0.0 && training_accuracy_ <= 1.0)) {
    throw ValidationError("training accuracy must lie in [0, 1]");
  }

  std::vector<int> referenced(nodes_.size(), 0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.id != i) throw ValidationError("node ids must equal their preorder index");
    if (n.high_count + n.low_count > n.support) {
      throw ValidationError("node " + std::to_string(i) + " has more labelled than routed records");
    }
    if (n.depth > max_depth_) {
      throw ValidationError("node " + std::to_string(i) + " exceeds the maximum depth");
    }
    if (n.is_leaf()) {
      const Leaf& l = n.leaf();
      if (!(l.probability >= 0.0 && l.probability <= 1.0) ||
          !(l.confidence >= 0.0 && l.confidence <= 1.0)) {
        throw ValidationError("leaf " + std::to_string(i) + " has probability/confidence outside [0, 1]");
      }
      continue;
    }
    const Split& s = n.split();
    auto cat = categories_.find(s.feature);
    if (cat == categories_.end()) {
      throw ValidationError("node " + std::to_string(i) + " tests undeclared feature '" + s.feature + "'");
    }
    if (s.branches.size() != cat->second.size()) {
      throw ValidationError("node " + std::to_string(i) + " does not branch on every category of '" +
                            s.feature + "'");
    }
    for (std::size_t b = 0; b < s.branches.size(); ++b) {
      const Branch& br = s.branches[b];
      if (br.value != cat->second[b]) {
        throw ValidationError("node " + std::to_string(i) + " branch order differs from the declared categories");
      }
      if (br.child <= i || br.child >= nodes_.size()) {
        throw ValidationError("node " + std::to_string(i) + " has an invalid child id");
      }
      const Node& child = nodes_[br.child];
      if (child.parent != i || child.depth != n.depth + 1) {
        throw ValidationError("node " + std::to_string(br.child) + " has inconsistent parent/depth");
      }
      ++referenced[br.child];
    }
  }
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (referenced[i] != 1) {
      throw ValidationError("node " + std::to_string(i) + " is not referenced exactly once");
    }
  }
  for (NodeId leaf : leaves()) {
    std::set<std::string> seen;
    for (const auto& c : path_to(leaf)) {
      if (!seen.insert(c.feature).second) {
        throw ValidationError("feature '" + c.feature + "' repeats on the path to leaf " +
                              std::to_string(leaf));
      }
    }
  }
}

std::size_t DecisionTree::depth() const {
  std::size_t d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

std::size_t DecisionTree::leaf_count() const { return leaves().size(); }

std::vector<NodeId> DecisionTree::leaves() const {
  std::vector<NodeId> out;
  for (const auto& n : nodes_) {
    if (n.is_leaf()) out.push_back(n.id);
  }
  return out;
}

std::vector<std::string> DecisionTree::features() const {
  std::set<std::string> names;
  for (const auto& n : nodes_) {
    if (!n.is_leaf()) names.insert(n.split().feature);
  }
  return {names.begin(), names.end()};
}

std::vector<Condition> DecisionTree::path_to(NodeId id) const {
  std::vector<Condition> path;
  const Node* cur = &nodes_.at(id);
  while (cur->parent) {
    const Node& parent = nodes_.at(*cur->parent);
    const Split& s = parent.split();
    for (const auto& b : s.branches) {
      if (b.child == cur->id) {
        path.push_back({s.feature, b.value, false});
        break;
      }
    }
    cur = &parent;
  }
  std::reverse(path.begin(), path.end());
  return path;
}

DecisionTree DecisionTree::with_nodes(std::vector<Node> nodes) const {
  return DecisionTree(std::move(nodes), categories_, cohort_, max_depth_, training_accuracy_);
}

DecisionTree DecisionTree::with_training_accuracy(double accuracy) const {
  return DecisionTree(nodes_, categories_, cohort_, max_depth_, accuracy);
}

Prediction predict_with(const DecisionTree& t, const FeatureLookup& lookup) {
  const Node* cur = &t.root();
  while (!cur->is_leaf()) {
    const Split& s = cur->split();
    const std::string& value = lookup(s.feature);
    auto it = std::find_if(s.branches.begin(), s.branches.end(),
                           [&](const Branch& b) { return b.value == value; });
    if (it == s.branches.end()) {
      throw ValidationError("value '" + value + "' of '" + s.feature +
                            "' is not in the tree's branch map");
    }
    cur = &t.node(it->child);
  }
  return {cur->leaf().label, cur->id};
}

Prediction predict(const DecisionTree& t, const dataset::PatientRecord& r) {
  return predict_with(t, [&](const std::string& feature) -> const std::string& {
    return r.category(feature);
  });
}

Rule rule_for_leaf(const DecisionTree& t, NodeId leaf) {
  const Node& n = t.node(leaf);
  if (!n.is_leaf()) throw ValidationError("node " + std::to_string(leaf) + " is not a leaf");
  Rule rule;
  rule.conditions = t.path_to(leaf);
  rule.outcome = n.leaf().label;
  rule.probability = n.leaf().probability;
  rule.confidence = n.leaf().confidence;
  rule.leaf = leaf;
  return rule;
}

Rule decision_path(const DecisionTree& t, const dataset::PatientRecord& r) {
  return rule_for_leaf(t, predict(t, r).leaf);
}

std::vector<Rule> extract_rules(const DecisionTree& t, RiskLabel label) {
  std::vector<Rule> rules;
  for (NodeId id : t.leaves()) {
    if (t.node(id).leaf().label == label) rules.push_back(rule_for_leaf(t, id));
  }
  return rules;
}

double accuracy(const DecisionTree& t, const dataset::RecordSet& rs) {
  if (rs.empty()) throw ValidationError("accuracy of an empty record set is undefined");
  std::size_t correct = 0;
  for (const auto& r : rs.records) {
    if (!r.label) throw ValidationError("record '" + r.id + "' has no observed label");
    if (predict(t, r).label == *r.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(rs.size());
}

double binomial_upper_tail(std::size_t k, std::size_t n, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw ValidationError("binomial probability must lie in [0, 1]");
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  if (p == 0.0) return 0.0;
  if (p == 1.0) return 1.0;
  const double nn = static_cast<double>(n);
  const double log_p = std::log(p);
  const double log_q = std::log1p(-p);
  double tail = 0.0;
  // Largest index first so small terms accumulate before the big ones.
  for (std::size_t i = n + 1; i-- > k;) {
    const double ii = static_cast<double>(i);
    const double log_choose = std::lgamma(nn + 1) - std::lgamma(ii + 1) - std::lgamma(nn - ii + 1);
    tail += std::exp(log_choose + ii * log_p + (nn - ii) * log_q);
  }
  return std::min(tail, 1.0);
}

DecisionTree annotate_leaves(const DecisionTree& t, const dataset::RecordSet& rs) {
  std::vector<Node> nodes = t.nodes();
  for (auto& n : nodes) {
    n.support = 0;
    n.high_count = 0;
    n.low_count = 0;
  }
  for (const auto& r : rs.records) {
    const NodeId leaf = predict(t, r).leaf;
    std::optional<NodeId> cur = leaf;
    while (cur) {
      Node& n = nodes[*cur];
      ++n.support;
      if (r.label == RiskLabel::kHighRisk) ++n.high_count;
      if (r.label == RiskLabel::kLowRisk) ++n.low_count;
      cur = n.parent;
    }
  }
  for (auto& n : nodes) {
    if (!n.is_leaf()) continue;
    Leaf& leaf = std::get<Leaf>(n.content);
    const Node& parent = n.parent ? nodes[*n.parent] : n;
    leaf.parent_support = parent.support;
    if (parent.support == 0) {
      leaf.unsupported = true;
      leaf.probability = 0.0;
      leaf.confidence = 0.0;
      continue;
    }
    leaf.unsupported = false;
    leaf.probability = static_cast<double>(n.support) / static_cast<double>(parent.support);

    const bool high = leaf.label == RiskLabel::kHighRisk;
    const std::size_t hits = high ? n.high_count : n.low_count;
    const std::size_t labelled = n.high_count + n.low_count;
    double reference = 0.5;
    if (n.parent) {
      const std::size_t parent_labelled = parent.high_count + parent.low_count;
      if (parent_labelled > 0) {
        reference = static_cast<double>(high ? parent.high_count : parent.low_count) /
                    static_cast<double>(parent_labelled);
      }
    }
    leaf.confidence = 1.0 - binomial_upper_tail(hits, labelled, reference);
  }
  return t.with_nodes(std::move(nodes));
}

}  // namespace dtnarrate::tree
