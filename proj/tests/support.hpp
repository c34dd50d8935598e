#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dtnarrate/dataset.hpp"
#include "dtnarrate/tree.hpp"

namespace testing_support {

using namespace dtnarrate;

// Age (numeric), Gender, then F0..F{n-1} with `values` categories each.
inline std::shared_ptr<const dataset::CategorySpec> toy_spec(std::size_t n, std::size_t values = 2) {
  std::vector<dataset::FeatureDef> defs;
  dataset::FeatureDef age;
  age.name = "Age";
  age.kind = dataset::FeatureKind::kNumeric;
  age.min = 18;
  age.max = 100;
  age.integer = true;
  defs.push_back(age);
  dataset::FeatureDef gender;
  gender.name = "Gender";
  gender.values = {"Female", "Male"};
  defs.push_back(gender);
  for (std::size_t i = 0; i < n; ++i) {
    dataset::FeatureDef f;
    f.name = "F" + std::to_string(i);
    for (std::size_t v = 0; v < values; ++v) f.values.push_back("v" + std::to_string(v));
    defs.push_back(f);
  }
  return std::make_shared<const dataset::CategorySpec>(dataset::CategorySpec(defs));
}

inline std::vector<std::string> toy_features(const dataset::CategorySpec& spec) {
  std::vector<std::string> out;
  for (const auto& f : spec.features()) {
    if (f.name.size() > 1 && f.name[0] == 'F' && std::isdigit(static_cast<unsigned char>(f.name[1]))) {
      out.push_back(f.name);
    }
  }
  return out;
}

inline dataset::PatientRecord random_record(std::mt19937_64& rng, const dataset::CategorySpec& spec,
                                            const std::string& id) {
  dataset::PatientRecord r;
  r.id = id;
  for (const auto& f : spec.features()) {
    if (f.kind == dataset::FeatureKind::kNumeric) {
      std::uniform_int_distribution<int> d(static_cast<int>(f.min), static_cast<int>(f.max));
      r.features[f.name] = static_cast<double>(d(rng));
    } else {
      const auto labels = f.labels();
      std::uniform_int_distribution<std::size_t> d(0, labels.size() - 1);
      r.features[f.name] = labels[d(rng)];
    }
  }
  r.label = std::bernoulli_distribution(0.5)(rng) ? RiskLabel::kHighRisk : RiskLabel::kLowRisk;
  return r;
}

inline dataset::RecordSet random_records(std::mt19937_64& rng, std::shared_ptr<const dataset::CategorySpec> spec,
                                         std::size_t n) {
  dataset::RecordSet rs;
  rs.spec = spec;
  for (std::size_t i = 0; i < n; ++i) rs.records.push_back(random_record(rng, *spec, "r" + std::to_string(i)));
  return rs;
}

// Random tree over `features`; every internal node splits on a feature not
// yet used on its path. Leaves get random labels.
inline tree::DecisionTree random_tree(std::mt19937_64& rng, const dataset::CategorySpec& spec,
                                      const std::vector<std::string>& features, std::size_t max_depth,
                                      double split_probability = 0.7) {
  std::vector<tree::Node> nodes;
  std::map<std::string, std::vector<std::string>> categories;
  std::function<void(std::optional<tree::NodeId>, std::size_t, std::vector<std::string>)> grow =
      [&](std::optional<tree::NodeId> parent, std::size_t depth, std::vector<std::string> avail) {
        const tree::NodeId id = nodes.size();
        nodes.emplace_back();
        nodes[id].id = id;
        nodes[id].parent = parent;
        nodes[id].depth = depth;
        const bool split = depth < max_depth && !avail.empty() &&
                           (depth == 0 || std::bernoulli_distribution(split_probability)(rng));
        if (!split) {
          tree::Leaf leaf;
          leaf.label = std::bernoulli_distribution(0.5)(rng) ? RiskLabel::kHighRisk : RiskLabel::kLowRisk;
          leaf.probability = 1.0;
          leaf.confidence = 1.0;
          nodes[id].content = leaf;
          return;
        }
        std::uniform_int_distribution<std::size_t> pick(0, avail.size() - 1);
        const std::size_t k = pick(rng);
        const std::string feature = avail[k];
        avail.erase(avail.begin() + static_cast<std::ptrdiff_t>(k));
        const auto labels = spec.feature(feature).labels();
        categories[feature] = labels;
        tree::Split s;
        s.feature = feature;
        nodes[id].content = s;
        for (const auto& v : labels) {
          const tree::NodeId child = nodes.size();
          std::get<tree::Split>(nodes[id].content).branches.push_back({v, child});
          grow(id, depth + 1, avail);
        }
      };
  grow(std::nullopt, 0, features);
  return tree::DecisionTree(std::move(nodes), std::move(categories), {}, std::max<std::size_t>(max_depth, 1), 1.0);
}

inline dataset::PatientRecord toy_record(const std::string& id, const std::map<std::string, std::string>& values,
                                         std::optional<RiskLabel> label, double age = 60,
                                         const std::string& gender = "Female") {
  dataset::PatientRecord r;
  r.id = id;
  r.features["Age"] = age;
  r.features["Gender"] = gender;
  for (const auto& [k, v] : values) r.features[k] = v;
  r.label = label;
  return r;
}

struct AnnotationFixture {
  std::shared_ptr<const dataset::CategorySpec> spec;
  tree::DecisionTree tree;
  dataset::RecordSet records;
};

// F0 at the root; F0=v0 splits on F1 and F0=v1 splits on the two-valued F2.
// 40 records.
inline AnnotationFixture annotation_fixture() {
  auto spec = toy_spec(3, 3);
  auto leaf = [](RiskLabel l) {
    tree::Leaf x;
    x.label = l;
    return x;
  };
  std::vector<tree::Node> nodes(9);
  for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i].id = i;
  const auto H = RiskLabel::kHighRisk, L = RiskLabel::kLowRisk;
  nodes[0].content = tree::Split{"F0", {{"v0", 1}, {"v1", 5}, {"v2", 8}}};
  nodes[1] = {1, 0, 1, 0, 0, 0, tree::Split{"F1", {{"v0", 2}, {"v1", 3}, {"v2", 4}}}};
  nodes[2] = {2, 1, 2, 0, 0, 0, leaf(H)};
  nodes[3] = {3, 1, 2, 0, 0, 0, leaf(L)};
  nodes[4] = {4, 1, 2, 0, 0, 0, leaf(L)};
  nodes[5] = {5, 0, 1, 0, 0, 0, tree::Split{"F2", {{"v0", 6}, {"v1", 7}}}};
  nodes[6] = {6, 5, 2, 0, 0, 0, leaf(H)};
  nodes[7] = {7, 5, 2, 0, 0, 0, leaf(L)};
  nodes[8] = {8, 0, 1, 0, 0, 0, leaf(L)};
  std::map<std::string, std::vector<std::string>> cats = {
      {"F0", {"v0", "v1", "v2"}}, {"F1", {"v0", "v1", "v2"}}, {"F2", {"v0", "v1"}}};
  std::vector<dataset::FeatureDef> defs = spec->features();
  for (auto& d : defs) {
    if (d.name == "F2") d.values = {"v0", "v1"};
  }
  spec = std::make_shared<const dataset::CategorySpec>(dataset::CategorySpec(defs));
  tree::DecisionTree t(std::move(nodes), cats, {}, 4, 0.0);

  dataset::RecordSet rs;
  rs.spec = spec;
  std::size_t n = 0;
  auto add = [&](int count, const std::string& f0, const std::string& f1, const std::string& f2, int highs) {
    for (int i = 0; i < count; ++i, ++n) {
      rs.records.push_back(toy_record("r" + std::to_string(n), {{"F0", f0}, {"F1", f1}, {"F2", f2}},
                                      i < highs ? H : L, static_cast<double>(50 + n % 30),
                                      n % 2 ? "Male" : "Female"));
    }
  };
  add(9, "v0", "v0", "v0", 8);
  add(3, "v0", "v0", "v1", 2);
  add(6, "v0", "v1", "v0", 1);
  add(4, "v0", "v2", "v1", 0);
  add(5, "v1", "v0", "v0", 5);
  add(2, "v1", "v1", "v0", 1);
  add(7, "v1", "v2", "v1", 2);
  add(4, "v2", "v0", "v0", 1);
  // 40 records in total.
  return {spec, t, rs};
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("dtn-" + tag + "-" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline std::string source_path(const std::string& rel) { return std::string(DTN_SOURCE_DIR) + "/" + rel; }

}  // namespace testing_support
