#include <algorithm>
#include <cmath>
#include <set>

#include "dtnarrate/tree.hpp"

namespace dtnarrate::tree {

namespace {

using RecordPtrs = std::vector<const dataset::PatientRecord*>;

constexpr double kGainTolerance = 1e-12;

double entropy(std::size_t high, std::size_t low) {
  const std::size_t n = high + low;
  if (n == 0 || high == 0 || low == 0) return 0.0;
  const double ph = static_cast<double>(high) / static_cast<double>(n);
  const double pl = static_cast<double>(low) / static_cast<double>(n);
  return -(ph * std::log2(ph) + pl * std::log2(pl));
}

std::pair<std::size_t, std::size_t> label_counts(const RecordPtrs& records) {
  std::size_t high = 0, low = 0;
  for (const auto* r : records) (*r->label == RiskLabel::kHighRisk ? high : low)++;
  return {high, low};
}

// A feature constant over the node would only add empty branches.
bool separates(const RecordPtrs& records, const std::string& feature) {
  const std::string& first = records.front()->category(feature);
  for (const auto* r : records) {
    if (r->category(feature) != first) return true;
  }
  return false;
}

class GreedyBuilder {
 public:
  GreedyBuilder(const dataset::CategorySpec& spec, const FitOptions& options)
      : options_(options) {
    for (const auto& f : spec.features()) {
      if (f.is_categorical()) categories_.emplace(f.name, f.labels());
    }
  }

  NodeId build(const RecordPtrs& records, std::optional<NodeId> parent, std::size_t depth,
               RiskLabel fallback, std::set<std::string>& used) {
    const NodeId id = nodes_.size();
    auto [high, low] = label_counts(records);
    RiskLabel label = fallback;
    if (high > low) label = RiskLabel::kHighRisk;
    if (low > high) label = RiskLabel::kLowRisk;

    Node node;
    node.id = id;
    node.parent = parent;
    node.depth = depth;
    node.support = records.size();
    node.high_count = high;
    node.low_count = low;
    node.content = Leaf{label, 0.0, 0.0, 0, false};
    nodes_.push_back(node);

    const bool stop = depth >= options_.max_depth || high == 0 || low == 0 ||
                      records.size() < options_.min_leaf_support;
    if (stop) return id;

    std::string best_feature;
    double best_gain = 0.0;
    // std::map iterates names in lexicographic order, so a strict
    // improvement test keeps the smallest name among ties.
    for (const auto& [feature, cats] : categories_) {
      if (used.count(feature) || !separates(records, feature)) continue;
      const double gain = information_gain(records, feature, cats);
      if (best_feature.empty() || gain > best_gain + kGainTolerance) {
        best_gain = gain;
        best_feature = feature;
      }
    }
    if (best_feature.empty() || best_gain + kGainTolerance < options_.min_gain) return id;

    const auto& cats = categories_.at(best_feature);
    std::vector<RecordPtrs> parts(cats.size());
    for (const auto* r : records) {
      const std::string& v = r->category(best_feature);
      const auto pos = std::find(cats.begin(), cats.end(), v) - cats.begin();
      parts[static_cast<std::size_t>(pos)].push_back(r);
    }

    used.insert(best_feature);
    Split split{best_feature, {}};
    for (std::size_t i = 0; i < cats.size(); ++i) {
      const NodeId child = build(parts[i], id, depth + 1, label, used);
      split.branches.push_back({cats[i], child});
    }
    used.erase(best_feature);
    tested_.insert(best_feature);
    nodes_[id].content = std::move(split);
    return id;
  }

  std::vector<Node> take_nodes() { return std::move(nodes_); }

  std::map<std::string, std::vector<std::string>> tested_categories() const {
    std::map<std::string, std::vector<std::string>> out;
    for (const auto& f : tested_) out.emplace(f, categories_.at(f));
    return out;
  }

 private:
  FitOptions options_;
  std::map<std::string, std::vector<std::string>> categories_;
  std::set<std::string> tested_;
  std::vector<Node> nodes_;
};

}  // namespace

double information_gain(const RecordPtrs& records, const std::string& feature,
                        const std::vector<std::string>& categories) {
  if (records.empty()) return 0.0;
  auto [high, low] = label_counts(records);
  std::vector<std::pair<std::size_t, std::size_t>> counts(categories.size(), {0, 0});
  for (const auto* r : records) {
    const std::string& v = r->category(feature);
    const auto it = std::find(categories.begin(), categories.end(), v);
    if (it == categories.end()) {
      throw ValidationError("value '" + v + "' of '" + feature + "' is not a declared category");
    }
    auto& c = counts[static_cast<std::size_t>(it - categories.begin())];
    (*r->label == RiskLabel::kHighRisk ? c.first : c.second)++;
  }
  const double n = static_cast<double>(records.size());
  double remainder = 0.0;
  for (const auto& [h, l] : counts) {
    const std::size_t m = h + l;
    if (m > 0) remainder += static_cast<double>(m) / n * entropy(h, l);
  }
  return entropy(high, low) - remainder;
}

DecisionTree fit_greedy(const dataset::RecordSet& rs, const FitOptions& options,
                        const dataset::Cohort& cohort) {
  if (rs.empty()) throw ValidationError("cannot fit a tree on an empty record set");
  if (options.max_depth < 1) throw ValidationError("max depth must be at least 1");
  if (!rs.spec) throw ValidationError("record set has no spec");
  RecordPtrs records;
  records.reserve(rs.size());
  for (const auto& r : rs.records) {
    if (!r.label) throw ValidationError("record '" + r.id + "' has no observed label");
    records.push_back(&r);
  }

  GreedyBuilder builder(*rs.spec, options);
  std::set<std::string> used;
  builder.build(records, std::nullopt, 0, RiskLabel::kHighRisk, used);
  DecisionTree raw(builder.take_nodes(), builder.tested_categories(), cohort, options.max_depth, 0.0);
  DecisionTree annotated = annotate_leaves(raw, rs);
  return annotated.with_training_accuracy(accuracy(annotated, rs));
}

}  // namespace dtnarrate::tree
