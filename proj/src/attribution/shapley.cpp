#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include <Eigen/Dense>

#include "dtnarrate/attribution.hpp"

namespace dtnarrate::attribution {

double AttributionVector::score(const std::string& feature) const {
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (features[i] == feature) return scores[i];
  }
  throw ValidationError("no attribution for feature '" + feature + "'");
}

CoalitionValue::CoalitionValue(const tree::DecisionTree& t, const dataset::PatientRecord& r,
                               const dataset::RecordSet& background,
                               std::vector<std::string> players)
    : tree_(t), record_(r), background_(background), players_(std::move(players)) {
  if (background_.empty()) throw ValidationError("background set is empty");
  if (players_.size() > kMaxExactFeatures) {
    throw ValidationError("exact Shapley enumeration supports at most " +
                          std::to_string(kMaxExactFeatures) + " features, got " +
                          std::to_string(players_.size()));
  }
  for (const auto& f : tree_.features()) {
    if (std::find(players_.begin(), players_.end(), f) == players_.end()) {
      throw ValidationError("tree tests '" + f + "', which is not an attribution feature");
    }
  }
}

double CoalitionValue::operator()(std::size_t mask) const {
  std::map<std::string, bool, std::less<>> from_record;
  for (std::size_t i = 0; i < players_.size(); ++i) from_record[players_[i]] = (mask >> i) & 1U;
  std::size_t high = 0;
  for (const auto& b : background_.records) {
    const auto lookup = [&](const std::string& feature) -> const std::string& {
      return from_record.at(feature) ? record_.category(feature) : b.category(feature);
    };
    if (tree::predict_with(tree_, lookup).label == RiskLabel::kHighRisk) ++high;
  }
  return static_cast<double>(high) / static_cast<double>(background_.size());
}

namespace {

std::vector<std::string> default_players(const dataset::RecordSet& background,
                                         std::vector<std::string> players) {
  if (!players.empty()) return players;
  if (!background.spec) throw ValidationError("background set has no spec");
  return background.spec->feature_names();
}

std::vector<double> all_coalition_values(const CoalitionValue& v) {
  const std::size_t n = v.players().size();
  std::vector<double> values(std::size_t{1} << n);
  for (std::size_t mask = 0; mask < values.size(); ++mask) values[mask] = v(mask);
  return values;
}

}  // namespace

AttributionVector shapley(const tree::DecisionTree& t, const dataset::PatientRecord& r,
                          const dataset::RecordSet& background, std::vector<std::string> players) {
  CoalitionValue v(t, r, background, default_players(background, std::move(players)));
  const std::size_t n = v.players().size();
  const std::vector<double> values = all_coalition_values(v);

  // weight[s] = s! (n - s - 1)! / n!
  std::vector<double> weight(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    weight[s] = std::exp(std::lgamma(static_cast<double>(s) + 1) +
                         std::lgamma(static_cast<double>(n - s)) -
                         std::lgamma(static_cast<double>(n) + 1));
  }

  AttributionVector out;
  out.features = v.players();
  out.scores.assign(n, 0.0);
  out.baseline = values.front();
  out.prediction = tree::predict(t, r).label == RiskLabel::kHighRisk ? 1.0 : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double phi = 0.0;
    for (std::size_t mask = 0; mask < values.size(); ++mask) {
      if (mask & bit) continue;
      const double delta = values[mask | bit] - values[mask];
      if (delta != 0.0) phi += weight[static_cast<std::size_t>(std::popcount(mask))] * delta;
    }
    out.scores[i] = phi;
  }
  return out;
}

AttributionVector kernel_shapley(const tree::DecisionTree& t, const dataset::PatientRecord& r,
                                 const dataset::RecordSet& background,
                                 std::vector<std::string> players) {
  CoalitionValue v(t, r, background, default_players(background, std::move(players)));
  const std::size_t n = v.players().size();
  const std::vector<double> values = all_coalition_values(v);

  AttributionVector out;
  out.features = v.players();
  out.scores.assign(n, 0.0);
  out.baseline = values.front();
  out.prediction = tree::predict(t, r).label == RiskLabel::kHighRisk ? 1.0 : 0.0;
  if (n == 0) return out;
  const double total = values.back() - values.front();
  if (n == 1) {
    out.scores[0] = total;
    return out;
  }

  // The last player absorbs the efficiency constraint: phi_last = total - sum(others).
  const Eigen::Index k = static_cast<Eigen::Index>(n - 1);
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(k, k);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k);
  const std::size_t last_bit = std::size_t{1} << (n - 1);
  for (std::size_t mask = 1; mask + 1 < values.size(); ++mask) {
    const auto s = static_cast<double>(std::popcount(mask));
    const double nd = static_cast<double>(n);
    const double choose = std::exp(std::lgamma(nd + 1) - std::lgamma(s + 1) - std::lgamma(nd - s + 1));
    const double w = (nd - 1.0) / (choose * s * (nd - s));
    const double z_last = (mask & last_bit) ? 1.0 : 0.0;
    Eigen::VectorXd x(k);
    for (Eigen::Index i = 0; i < k; ++i) {
      x[i] = static_cast<double>((mask >> i) & 1U) - z_last;
    }
    const double y = values[mask] - values.front() - z_last * total;
    normal.noalias() += w * x * x.transpose();
    rhs.noalias() += w * y * x;
  }
  const Eigen::VectorXd phi = normal.ldlt().solve(rhs);
  double rest = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    out.scores[static_cast<std::size_t>(i)] = phi[i];
    rest += phi[i];
  }
  out.scores[n - 1] = total - rest;
  return out;
}

std::vector<std::pair<std::string, double>> filter_positive_sorted(const AttributionVector& a) {
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t i = 0; i < a.features.size(); ++i) {
    if (a.scores[i] > 0.0) out.emplace_back(a.features[i], a.scores[i]);
  }
  std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) {
    if (x.second != y.second) return x.second > y.second;
    return x.first < y.first;
  });
  return out;
}

}  // namespace dtnarrate::attribution
