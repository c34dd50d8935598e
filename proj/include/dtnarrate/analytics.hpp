#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dtnarrate/core.hpp"
#include "dtnarrate/response.hpp"
#include "dtnarrate/scenario.hpp"
#include "dtnarrate/selection.hpp"

namespace dtnarrate::analytics {

// 1..5 onto {0, 0.25, 0.5, 0.75, 1}.
double normalize_likert(int raw);

std::size_t hamming(const FeatureSelection& a, const FeatureSelection& b);
// D_m = d(U, V) / N
double change_in_mental_model(const FeatureSelection& u, const FeatureSelection& v);
// D_c = d(V, C) / N
double error_in_understanding(const FeatureSelection& v, const FeatureSelection& c);

inline constexpr std::size_t kMaxExactWilcoxon = 25;

struct WilcoxonResult {
  double w_plus = 0.0;
  double w_minus = 0.0;
  double statistic = 0.0;  // min(W+, W-)
  double p_value = 1.0;    // two-sided
  std::size_t n_used = 0;  // pairs left after dropping zero differences
  bool exact = false;
  bool degenerate = false;  // every difference was zero
};

WilcoxonResult wilcoxon_signed_rank(const std::vector<double>& x, const std::vector<double>& y);

struct Adjusted {
  double p = 1.0;
  bool significant = false;
};

Adjusted bonferroni(double p, std::size_t m, double alpha);

using Point = std::vector<double>;

struct KMeansResult {
  std::vector<std::size_t> assignments;
  std::vector<Point> centroids;
  double wcss = 0.0;
  std::vector<double> wcss_history;  // of the winning restart, one entry per Lloyd iteration
  std::size_t iterations = 0;
};

struct KMeansOptions {
  std::size_t k = 3;
  std::uint64_t seed = 0;
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
};

// Cluster labels are renumbered by first appearance in `points`.
KMeansResult kmeans(const std::vector<Point>& points, const KMeansOptions& options);
// Mean silhouette; singleton clusters contribute 0.
double silhouette(const std::vector<Point>& points, const std::vector<std::size_t>& assignments);

struct ScoredResponse {
  std::string participant;
  Scenario scenario = Scenario::kLocalShap;
  double cr = 0.0, ur = 0.0, vr = 0.0, cmm = 0.0, eu = 0.0;
  double dwell_seconds = 0.0;
};

inline constexpr std::array<const char*, 5> kMeasures = {"CR", "UR", "VR", "CMM", "EU"};
double measure(const ScoredResponse& s, std::size_t index);

using CorrectMap = std::map<Scenario, FeatureSelection>;

std::vector<ScoredResponse> score_responses(const std::vector<SurveyResponse>& responses, const CorrectMap& correct);

struct MeasureMeans {
  std::array<double, 5> values{};  // indexed like kMeasures
  std::size_t count = 0;
};

std::map<Scenario, MeasureMeans> scenario_means(const std::vector<ScoredResponse>& scored,
                                                std::vector<std::string>* warnings = nullptr);

struct ErrorCounts {
  std::vector<std::size_t> type1;  // V = 1, C = 0
  std::vector<std::size_t> type2;  // V = 0, C = 1
};

std::map<Scenario, ErrorCounts> error_breakdown(const std::vector<SurveyResponse>& responses,
                                                const CorrectMap& correct);

struct Group {
  std::string name;
  std::vector<Scenario> members;  // per-participant values are averaged over these
};

struct Comparison {
  Group a, b;
  std::string name() const { return a.name + " vs " + b.name; }
};

// Local vs Global (difficulty levels averaged, SHAP excluded), then the
// eight single-scenario pairs.
std::vector<Comparison> default_comparisons();

struct ComparisonCell {
  WilcoxonResult test;
  Adjusted adjusted;
  bool strict = false;  // adjusted p at or below the stricter threshold
};

struct ComparisonRow {
  std::string name;
  std::size_t pairs = 0;
  std::array<ComparisonCell, 5> cells{};
};

struct AnalysisOptions {
  std::uint64_t seed = 0;
  std::size_t k = 3;
  std::size_t restarts = 10;
  double alpha = 0.01;
  double strict_alpha = 0.001;
  std::size_t bonferroni_m = 0;  // 0 means the number of comparisons
  bool exclude_low_effort = true;
  double min_dwell_seconds = 60.0;
  std::size_t max_short_scenarios = 1;  // exclusion once exceeded
};

struct AnalysisReport {
  std::vector<std::string> displayed_features;
  std::vector<std::string> participants;
  std::vector<std::string> excluded_participants;
  std::map<Scenario, MeasureMeans> means;
  std::vector<ComparisonRow> comparisons;
  std::size_t bonferroni_m = 0;
  double alpha = 0.01;
  double strict_alpha = 0.001;
  std::map<std::string, std::size_t> clusters;  // participant -> group
  std::vector<Point> centroids;
  std::map<std::size_t, double> silhouettes;  // k -> mean silhouette
  std::map<Scenario, ErrorCounts> errors;
  std::vector<std::string> warnings;
};

// Participants with more than max_short_scenarios scenarios whose total
// dwell is under min_dwell_seconds.
std::vector<std::string> low_effort_participants(const std::vector<SurveyResponse>& responses,
                                                 const AnalysisOptions& options);

AnalysisReport analyze(const std::vector<SurveyResponse>& responses, const CorrectMap& correct,
                       const std::vector<std::string>& displayed, const AnalysisOptions& options = {});

std::string report_to_json_text(const AnalysisReport& report);
std::string report_to_markdown(const AnalysisReport& report);

}  // namespace dtnarrate::analytics
