#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <set>

#include <json.hpp>

#include "dtnarrate/explain.hpp"
#include "support.hpp"

using namespace dtnarrate;
using namespace dtnarrate::explain;
using testing_support::toy_record;

namespace {

constexpr auto H = RiskLabel::kHighRisk;
constexpr auto L = RiskLabel::kLowRisk;

Rule rule_of(RiskLabel outcome, std::vector<Condition> conds) {
  Rule r;
  r.outcome = outcome;
  r.conditions = std::move(conds);
  return r;
}

// Two high-risk leaves with hand-set confidences, preorder A (0.80) then B (0.99).
tree::DecisionTree two_high_leaves(double conf_a, double conf_b, double prob_a = 0.5, double prob_b = 0.5) {
  std::vector<tree::Node> nodes(5);
  nodes[0] = {0, std::nullopt, 0, 0, 0, 0, tree::Split{"F0", {{"v0", 1}, {"v1", 4}}}};
  nodes[1] = {1, 0, 1, 0, 0, 0, tree::Split{"F1", {{"v0", 2}, {"v1", 3}}}};
  nodes[2] = {2, 1, 2, 0, 0, 0, tree::Leaf{H, prob_a, conf_a}};
  nodes[3] = {3, 1, 2, 0, 0, 0, tree::Leaf{L, 0.5, 0.9}};
  nodes[4] = {4, 0, 1, 0, 0, 0, tree::Leaf{H, prob_b, conf_b}};
  return tree::DecisionTree(nodes, {{"F0", {"v0", "v1"}}, {"F1", {"v0", "v1"}}}, {}, 4, 1.0);
}

tree::DecisionTree leaf_tree() {
  std::vector<tree::Node> single(1);
  single[0] = {0, std::nullopt, 0, 0, 0, 0, tree::Leaf{L}};
  return tree::DecisionTree(single, {}, {}, 1, 0.0);
}

std::set<std::string> high_path_features(const tree::DecisionTree& t) {
  std::set<std::string> out;
  for (auto leaf : t.leaves()) {
    if (t.node(leaf).leaf().label != H) continue;
    for (const auto& c : t.path_to(leaf)) out.insert(c.feature);
  }
  return out;
}

}  // namespace

TEST(Contradictions, DirectionRule) {
  const ExpectationMap m = ExpectationMap::default_chd();
  const Rule flagged = detect_contradictions(rule_of(H, {{"Smoking", "Heavy"}, {"BMI", "Healthy"}}), m);
  EXPECT_FALSE(flagged.conditions[0].contradictory);
  EXPECT_TRUE(flagged.conditions[1].contradictory);
  EXPECT_TRUE(flagged.has_contradiction());

  const Rule low = detect_contradictions(rule_of(L, {{"Smoking", "Heavy"}, {"BMI", "Healthy"}}), m);
  EXPECT_TRUE(low.conditions[0].contradictory);
  EXPECT_FALSE(low.conditions[1].contradictory);

  const Rule none = detect_contradictions(rule_of(H, {{"BMI", "Healthy"}, {"Gender", "Male"}}), ExpectationMap{});
  EXPECT_FALSE(none.has_contradiction());
  // Neutral and absent entries never flag.
  ExpectationMap neutral;
  neutral.set("BMI", "Healthy", Direction::kNeutral);
  EXPECT_FALSE(detect_contradictions(rule_of(H, {{"BMI", "Healthy"}}), neutral).has_contradiction());
  EXPECT_FALSE(detect_contradictions(rule_of(L, {{"BMI", "Healthy"}}), neutral).has_contradiction());
  // Stale flags are cleared.
  Rule stale = rule_of(H, {{"Smoking", "Heavy", true}});
  EXPECT_FALSE(detect_contradictions(stale, m).has_contradiction());
}

TEST(ExpectationMapFile, RoundTripAndShippedConfig) {
  const ExpectationMap m = ExpectationMap::default_chd();
  EXPECT_EQ(ExpectationMap::from_json_text(m.to_json_text()).to_json_text(), m.to_json_text());
  const ExpectationMap shipped = ExpectationMap::load(testing_support::source_path("configs/expectation_map.json"));
  EXPECT_EQ(shipped.to_json_text(), m.to_json_text());
  EXPECT_EQ(m.direction("Gender", "Male"), Direction::kNeutral);
  EXPECT_EQ(m.direction("BMI", "Healthy"), Direction::kExpectedInLowRisk);

  EXPECT_THROW(ExpectationMap::from_json_text(R"({"entries":[
      {"feature":"BMI","value":"Healthy","direction":"low"},
      {"feature":"BMI","value":"Healthy","direction":"high"}]})"),
               ValidationError);
  EXPECT_THROW(ExpectationMap::from_json_text(R"({"entries":[{"feature":"BMI","value":"Healthy","direction":"up"}]})"),
               ValidationError);
  EXPECT_THROW(ExpectationMap::from_json_text(R"({"entries":[],"x":1})"), ValidationError);
  EXPECT_THROW(ExpectationMap::load("/nonexistent.json"), IoError);
}

TEST(LocalIr, DepthZeroTree) {
  auto spec = testing_support::toy_spec(2, 2);
  std::vector<tree::Node> single(1);
  single[0] = {0, std::nullopt, 0, 0, 0, 0, tree::Leaf{L, 1.0, 0.5}};
  const tree::DecisionTree t(single, {}, {}, 4, 0.0);
  const auto r = toy_record("p", {{"F0", "v0"}, {"F1", "v1"}}, std::nullopt, 72, "Female");
  const auto ir = build_local_ir(t, r, *spec, ExpectationMap{});
  ASSERT_EQ(ir.rules.size(), 1u);
  EXPECT_TRUE(ir.rules[0].conditions.empty());
  EXPECT_EQ(ir.chunk_count, 0u);
  EXPECT_EQ(ir.header.age, 72.0);
  EXPECT_EQ(ir.header.gender, "Female");
  EXPECT_EQ(ir.prediction, L);
  EXPECT_FALSE(ir.triggered);
}

TEST(LocalIr, MatchesPathOnRandomTrees) {
  std::mt19937_64 rng(77);
  auto spec = testing_support::toy_spec(5, 3);
  const auto features = testing_support::toy_features(*spec);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = testing_support::random_tree(rng, *spec, features, 4);
    const auto r = testing_support::random_record(rng, *spec, "p");
    const auto ir = build_local_ir(t, r, *spec, ExpectationMap{});
    ASSERT_EQ(ir.rules.size(), 1u);
    const auto leaf = tree::predict(t, r).leaf;
    EXPECT_EQ(ir.rules[0].conditions, t.path_to(leaf));
    const auto tf = t.features();
    std::set<std::string> names;
    for (const auto& c : ir.rules[0].conditions) {
      EXPECT_EQ(r.category(c.feature), c.value);
      EXPECT_TRUE(std::find(tf.begin(), tf.end(), c.feature) != tf.end());
      names.insert(c.feature);
    }
    EXPECT_EQ(ir.chunk_count, names.size());
  }
}

TEST(GlobalIr, OrderingByConfidence) {
  auto spec = testing_support::toy_spec(2, 2);
  const auto r = toy_record("p", {{"F0", "v0"}, {"F1", "v0"}}, std::nullopt);
  const auto ir = build_global_ir(two_high_leaves(0.80, 0.99), r, *spec, ExpectationMap{});
  ASSERT_EQ(ir.rules.size(), 2u);
  EXPECT_EQ(ir.rules[0].confidence, 0.99);
  EXPECT_EQ(ir.rules[1].confidence, 0.80);
  EXPECT_EQ(ir.triggered, 1u);
  EXPECT_EQ(*ir.rules[*ir.triggered].leaf, 2u);

  // Equal confidence: higher probability first, then the shorter rule.
  const auto by_prob = build_global_ir(two_high_leaves(0.9, 0.9, 0.7, 0.6), r, *spec, ExpectationMap{});
  EXPECT_EQ(*by_prob.rules[0].leaf, 2u);
  const auto by_len = build_global_ir(two_high_leaves(0.9, 0.9, 0.6, 0.6), r, *spec, ExpectationMap{});
  EXPECT_EQ(*by_len.rules[0].leaf, 4u);

  const auto low = toy_record("q", {{"F0", "v0"}, {"F1", "v1"}}, std::nullopt);
  const auto lir = build_global_ir(two_high_leaves(0.80, 0.99), low, *spec, ExpectationMap{});
  EXPECT_FALSE(lir.triggered);
  EXPECT_EQ(lir.prediction, L);
}

TEST(GlobalIr, NoHighRiskLeavesIsAnError) {
  auto spec = testing_support::toy_spec(2, 2);
  std::vector<tree::Node> single(1);
  single[0] = {0, std::nullopt, 0, 0, 0, 0, tree::Leaf{L}};
  const auto r = toy_record("p", {{"F0", "v0"}, {"F1", "v0"}}, std::nullopt);
  EXPECT_THROW(build_global_ir(tree::DecisionTree(single, {}, {}, 4, 0.0), r, *spec, ExpectationMap{}),
               ValidationError);
}

TEST(GlobalIr, PropertiesOnRandomTrees) {
  std::mt19937_64 rng(78);
  auto spec = testing_support::toy_spec(5, 3);
  const auto features = testing_support::toy_features(*spec);
  int checked = 0;
  while (checked < 50) {
    auto t = testing_support::random_tree(rng, *spec, features, 4);
    // Random confidences so the sort has work to do.
    auto nodes = t.nodes();
    std::uniform_real_distribution<double> u(0, 1);
    for (auto& n : nodes) {
      if (n.is_leaf()) {
        auto leaf = n.leaf();
        leaf.confidence = std::round(u(rng) * 4) / 4;
        leaf.probability = u(rng);
        n.content = leaf;
      }
    }
    t = t.with_nodes(nodes);
    if (tree::extract_rules(t, H).empty()) continue;
    ++checked;
    const auto r = testing_support::random_record(rng, *spec, "p");
    const auto ir = build_global_ir(t, r, *spec, ExpectationMap{});
    // A permutation of the high-risk rules, sorted by confidence.
    auto expected = tree::extract_rules(t, H);
    std::vector<std::size_t> a, b;
    for (const auto& x : expected) a.push_back(*x.leaf);
    for (const auto& x : ir.rules) b.push_back(*x.leaf);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
    for (std::size_t i = 1; i < ir.rules.size(); ++i) EXPECT_GE(ir.rules[i - 1].confidence, ir.rules[i].confidence);
    std::set<std::string> names;
    for (const auto& rule : ir.rules) {
      for (const auto& c : rule.conditions) names.insert(c.feature);
    }
    EXPECT_EQ(names, high_path_features(t));
    EXPECT_EQ(ir.chunk_count, names.size());
    const auto p = tree::predict(t, r);
    if (p.label == H) {
      ASSERT_TRUE(ir.triggered);
      EXPECT_EQ(*ir.rules[*ir.triggered].leaf, p.leaf);
    } else {
      EXPECT_FALSE(ir.triggered);
    }
    // Global C contains local C.
    const auto displayed = spec->feature_names();
    const auto cg = correct_importance(ir, t, std::nullopt, displayed);
    const auto cl = correct_importance(build_local_ir(t, r, *spec, ExpectationMap{}), t, std::nullopt, displayed);
    for (std::size_t i = 0; i < displayed.size(); ++i) {
      if (cl.test(i)) EXPECT_TRUE(cg.test(i));
    }
  }
}

TEST(ShapIr, PositiveListAndHeader) {
  auto spec = testing_support::toy_spec(3, 2);
  attribution::AttributionVector a;
  a.features = spec->feature_names();
  a.scores = {0.0, 0.0, 0.3, -0.2, 0.1};
  a.prediction = 1.0;
  a.baseline = 0.8;
  const auto r = toy_record("p", {{"F0", "v0"}, {"F1", "v0"}, {"F2", "v0"}}, std::nullopt, 61, "Male");
  const auto ir = build_shap_ir(a, r, *spec);
  EXPECT_EQ(ir.kind, ExplanationKind::kShapList);
  EXPECT_TRUE(ir.rules.empty());
  ASSERT_EQ(ir.attributions.size(), 2u);
  EXPECT_EQ(ir.attributions[0].first, "F0");
  EXPECT_EQ(ir.attributions[1].first, "F2");
  EXPECT_EQ(ir.chunk_count, 2u);
  EXPECT_EQ(ir.prediction, H);
  EXPECT_EQ(ir.header.gender, "Male");
  const auto c = correct_importance(ir, leaf_tree(), a, spec->feature_names());
  EXPECT_EQ(c.bits(), (std::vector<std::uint8_t>{0, 0, 1, 0, 1}));
  EXPECT_THROW(correct_importance(ir, leaf_tree(), std::nullopt,
                                  spec->feature_names()),
               ValidationError);
  a.scores = {0, 0, 0, 0, 0};
  const auto zero = correct_importance(build_shap_ir(a, r, *spec), leaf_tree(),
                                       a, spec->feature_names());
  EXPECT_EQ(zero.count(), 0u);
}

TEST(CorrectImportance, DocumentedExamples) {
  const std::vector<std::string> displayed = dataset::CategorySpec::default_chd().feature_names();
  ExplanationIR local;
  local.kind = ExplanationKind::kLocalTree;
  local.rules = {rule_of(H, {{"Smoking", "Heavy"}, {"Cholesterol", "High"}})};
  const auto c = correct_importance(local, leaf_tree(), std::nullopt, displayed);
  EXPECT_EQ(c.count(), 2u);
  EXPECT_TRUE(c.test(std::find(displayed.begin(), displayed.end(), "Smoking") - displayed.begin()));
  EXPECT_TRUE(c.test(std::find(displayed.begin(), displayed.end(), "Cholesterol") - displayed.begin()));
}

TEST(IrJson, Shape) {
  auto spec = testing_support::toy_spec(2, 2);
  const auto r = toy_record("p", {{"F0", "v0"}, {"F1", "v0"}}, std::nullopt, 70, "Female");
  const auto ir = build_global_ir(two_high_leaves(0.80, 0.99), r, *spec, ExpectationMap{});
  const auto j = nlohmann::ordered_json::parse(ir_to_json_text(ir));
  std::vector<std::string> keys;
  for (const auto& [k, _] : j.items()) keys.push_back(k);
  EXPECT_EQ(keys, (std::vector<std::string>{"kind", "header", "prediction", "rules", "triggered", "attributions",
                                            "chunk_count"}));
  EXPECT_EQ(j["kind"], "global");
  EXPECT_EQ(j["header"]["age"], 70.0);
  EXPECT_EQ(j["triggered"], 1);
  EXPECT_EQ(j["rules"][0]["conditions"][0]["feature"], "F0");
  EXPECT_EQ(ir_to_json_text(ir), ir_to_json_text(ir));
}
