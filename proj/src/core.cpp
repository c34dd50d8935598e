#include "dtnarrate/core.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "dtnarrate/rule.hpp"
#include "dtnarrate/scenario.hpp"
#include "dtnarrate/selection.hpp"

namespace dtnarrate {

std::string_view to_string(RiskLabel label) {
  return label == RiskLabel::kHighRisk ? "HighRisk" : "LowRisk";
}

RiskLabel parse_risk_label(std::string_view text) {
  if (text == "HighRisk" || text == "high" || text == "1") return RiskLabel::kHighRisk;
  if (text == "LowRisk" || text == "low" || text == "0") return RiskLabel::kLowRisk;
  throw ValidationError("unknown risk label '" + std::string(text) + "'");
}

std::string format_number(double value) {
  if (!std::isfinite(value)) throw ValidationError("non-finite number cannot be written");
  if (value == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::optional<double> parse_number(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  if (!std::isfinite(value)) return std::nullopt;
  return value;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("read failed on '" + path + "'");
  return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw IoError("write failed on '" + path + "'");
}

bool Rule::has_contradiction() const {
  return std::any_of(conditions.begin(), conditions.end(),
                     [](const Condition& c) { return c.contradictory; });
}

std::vector<std::string> Rule::features() const {
  std::vector<std::string> out;
  out.reserve(conditions.size());
  for (const auto& c : conditions) out.push_back(c.feature);
  return out;
}

namespace {

struct ScenarioNames {
  Scenario scenario;
  std::string_view id;
  std::string_view title;
};

constexpr std::array<ScenarioNames, 5> kScenarioNames = {{
    {Scenario::kLocalShap, "local-SHAP", "Local SHAP"},
    {Scenario::kLocalEasy, "local-easy", "Local Easy"},
    {Scenario::kLocalHard, "local-hard", "Local Hard"},
    {Scenario::kGlobalEasy, "global-easy", "Global Easy"},
    {Scenario::kGlobalHard, "global-hard", "Global Hard"},
}};

}  // namespace

std::string_view scenario_id(Scenario s) {
  return kScenarioNames[static_cast<std::size_t>(s)].id;
}

std::string_view scenario_title(Scenario s) {
  return kScenarioNames[static_cast<std::size_t>(s)].title;
}

Scenario parse_scenario(std::string_view id) {
  for (const auto& n : kScenarioNames) {
    if (n.id == id) return n.scenario;
  }
  throw ValidationError("unknown scenario id '" + std::string(id) + "'");
}

FeatureSelection::FeatureSelection(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
  for (auto b : bits_) {
    if (b > 1) throw ValidationError("feature selection bits must be 0 or 1");
  }
}

FeatureSelection FeatureSelection::from_features(const std::vector<std::string>& displayed,
                                                 const std::vector<std::string>& selected) {
  FeatureSelection out(displayed.size());
  for (const auto& name : selected) {
    auto it = std::find(displayed.begin(), displayed.end(), name);
    if (it == displayed.end()) {
      throw ValidationError("feature '" + name + "' is not among the displayed features");
    }
    out.set(static_cast<std::size_t>(std::distance(displayed.begin(), it)));
  }
  return out;
}

std::size_t FeatureSelection::count() const {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

}  // namespace dtnarrate
