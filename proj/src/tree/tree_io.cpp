#include <json.hpp>

#include "dtnarrate/tree.hpp"

namespace dtnarrate::tree {

using nlohmann::ordered_json;

namespace {

void require_keys(const ordered_json& obj, std::initializer_list<std::string_view> allowed,
                  const std::string& where) {
  if (!obj.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError("unknown field '" + key + "' in " + where);
    }
  }
  for (auto key : allowed) {
    if (!obj.contains(std::string(key))) {
      throw ValidationError("missing field '" + std::string(key) + "' in " + where);
    }
  }
}

ordered_json node_to_json(const Node& n) {
  ordered_json j;
  j["id"] = n.id;
  j["parent"] = n.parent ? ordered_json(*n.parent) : ordered_json(nullptr);
  j["depth"] = n.depth;
  j["support"] = n.support;
  j["high"] = n.high_count;
  j["low"] = n.low_count;
  if (n.is_leaf()) {
    const Leaf& l = n.leaf();
    j["kind"] = "leaf";
    j["label"] = to_string(l.label);
    j["probability"] = l.probability;
    j["confidence"] = l.confidence;
    j["parent_support"] = l.parent_support;
    j["unsupported"] = l.unsupported;
  } else {
    const Split& s = n.split();
    j["kind"] = "split";
    j["feature"] = s.feature;
    j["branches"] = ordered_json::array();
    for (const auto& b : s.branches) j["branches"].push_back({{"value", b.value}, {"child", b.child}});
  }
  return j;
}

Node node_from_json(const ordered_json& j) {
  if (!j.is_object() || !j.contains("kind")) throw ValidationError("node entry lacks 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  Node n;
  if (kind == "leaf") {
    require_keys(j, {"id", "parent", "depth", "support", "high", "low", "kind", "label", "probability",
                     "confidence", "parent_support", "unsupported"},
                 "leaf node");
    Leaf l;
    l.label = parse_risk_label(j.at("label").get<std::string>());
    l.probability = j.at("probability").get<double>();
    l.confidence = j.at("confidence").get<double>();
    l.parent_support = j.at("parent_support").get<std::size_t>();
    l.unsupported = j.at("unsupported").get<bool>();
    n.content = l;
  } else if (kind == "split") {
    require_keys(j, {"id", "parent", "depth", "support", "high", "low", "kind", "feature", "branches"},
                 "split node");
    Split s;
    s.feature = j.at("feature").get<std::string>();
    for (const auto& jb : j.at("branches")) {
      require_keys(jb, {"value", "child"}, "branch");
      s.branches.push_back({jb.at("value").get<std::string>(), jb.at("child").get<NodeId>()});
    }
    n.content = std::move(s);
  } else {
    throw ValidationError("unknown node kind '" + kind + "'");
  }
  n.id = j.at("id").get<NodeId>();
  if (!j.at("parent").is_null()) n.parent = j.at("parent").get<NodeId>();
  n.depth = j.at("depth").get<std::size_t>();
  n.support = j.at("support").get<std::size_t>();
  n.high_count = j.at("high").get<std::size_t>();
  n.low_count = j.at("low").get<std::size_t>();
  return n;
}

}  // namespace

std::string serialize(const DecisionTree& t) {
  ordered_json doc;
  doc["schema_version"] = kTreeSchemaVersion;
  const auto& c = t.cohort();
  doc["cohort"] = {{"age_min", c.age_min},
                   {"age_max", c.age_max},
                   {"gender", c.gender ? ordered_json(*c.gender) : ordered_json(nullptr)}};
  doc["depth"] = t.depth();
  doc["max_depth"] = t.max_depth();
  doc["training_accuracy"] = t.training_accuracy();
  doc["categories"] = ordered_json::object();
  for (const auto& [feature, values] : t.categories()) doc["categories"][feature] = values;
  doc["nodes"] = ordered_json::array();
  for (const auto& n : t.nodes()) doc["nodes"].push_back(node_to_json(n));
  return doc.dump(2) + "\n";
}

DecisionTree deserialize(std::string_view text) {
  if (text.find_first_not_of(" \t\r\n") == std::string_view::npos) {
    throw ValidationError("empty tree document");
  }
  ordered_json doc;
  try {
    doc = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed tree document: ") + e.what());
  }
  try {
    if (!doc.is_object() || !doc.contains("schema_version")) {
      throw ValidationError("tree document lacks schema_version");
    }
    const int version = doc.at("schema_version").get<int>();
    if (version != kTreeSchemaVersion) {
      throw ValidationError("unsupported tree schema_version " + std::to_string(version) +
                            " (expected " + std::to_string(kTreeSchemaVersion) + ")");
    }
    require_keys(doc, {"schema_version", "cohort", "depth", "max_depth", "training_accuracy",
                       "categories", "nodes"},
                 "tree document");
    const auto& jc = doc.at("cohort");
    require_keys(jc, {"age_min", "age_max", "gender"}, "cohort");
    dataset::Cohort cohort;
    cohort.age_min = jc.at("age_min").get<int>();
    cohort.age_max = jc.at("age_max").get<int>();
    if (!jc.at("gender").is_null()) cohort.gender = jc.at("gender").get<std::string>();

    std::map<std::string, std::vector<std::string>> categories;
    for (const auto& [feature, values] : doc.at("categories").items()) {
      categories.emplace(feature, values.get<std::vector<std::string>>());
    }
    std::vector<Node> nodes;
    for (const auto& jn : doc.at("nodes")) nodes.push_back(node_from_json(jn));

    DecisionTree t(std::move(nodes), std::move(categories), cohort,
                   doc.at("max_depth").get<std::size_t>(), doc.at("training_accuracy").get<double>());
    if (t.depth() != doc.at("depth").get<std::size_t>()) {
      throw ValidationError("declared depth does not match the node structure");
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed tree document: ") + e.what());
  }
}

DecisionTree load_tree(const std::string& path) { return deserialize(read_file(path)); }

}  // namespace dtnarrate::tree
