#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "dtnarrate/analytics.hpp"

using namespace dtnarrate;
using namespace dtnarrate::analytics;

namespace {

FeatureSelection bits(std::vector<std::uint8_t> b) { return FeatureSelection(std::move(b)); }

FeatureSelection random_bits(std::mt19937_64& rng, std::size_t n) {
  FeatureSelection s(n);
  for (std::size_t i = 0; i < n; ++i) s.set(i, std::bernoulli_distribution(0.5)(rng));
  return s;
}

// Brute force over all 2^m sign flips with midranks counted directly.
double brute_wilcoxon_p(const std::vector<double>& x, const std::vector<double>& y, double* w_plus = nullptr) {
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != y[i]) d.push_back(x[i] - y[i]);
  }
  const std::size_t m = d.size();
  if (m == 0) return 1.0;
  std::vector<double> rank(m);
  for (std::size_t i = 0; i < m; ++i) {
    double less = 0, equal = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (std::abs(d[j]) < std::abs(d[i])) ++less;
      if (std::abs(d[j]) == std::abs(d[i])) ++equal;
    }
    rank[i] = less + (equal + 1) / 2;
  }
  const double total = m * (m + 1) / 2.0;
  double observed = 0;
  for (std::size_t i = 0; i < m; ++i) {
    if (d[i] > 0) observed += rank[i];
  }
  if (w_plus) *w_plus = observed;
  std::size_t extreme = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
    double w = 0;
    for (std::size_t i = 0; i < m; ++i) {
      if (mask >> i & 1) w += rank[i];
    }
    if (std::abs(w - total / 2) >= std::abs(observed - total / 2) - 1e-9) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(std::size_t{1} << m);
}

SurveyResponse response(const std::string& p, Scenario s, FeatureSelection u, FeatureSelection v, int cr, int ur,
                        int vr, double dwell = 120) {
  SurveyResponse r;
  r.participant = p;
  r.scenario = s;
  r.before = std::move(u);
  r.after = std::move(v);
  r.cr = cr;
  r.ur = ur;
  r.vr = vr;
  r.dwell_page1 = dwell / 2;
  r.dwell_page2 = dwell / 2;
  return r;
}

}  // namespace

TEST(Likert, Normalization) {
  EXPECT_EQ(normalize_likert(1), 0.0);
  EXPECT_EQ(normalize_likert(2), 0.25);
  EXPECT_EQ(normalize_likert(3), 0.5);
  EXPECT_EQ(normalize_likert(4), 0.75);
  EXPECT_EQ(normalize_likert(5), 1.0);
  EXPECT_THROW(normalize_likert(0), ValidationError);
  EXPECT_THROW(normalize_likert(6), ValidationError);
  EXPECT_THROW(normalize_likert(7), ValidationError);
}

TEST(MentalModel, Examples) {
  EXPECT_DOUBLE_EQ(change_in_mental_model(bits({1, 0, 0}), bits({0, 0, 1})), 2.0 / 3.0);
  EXPECT_EQ(change_in_mental_model(bits({1, 0, 1, 0}), bits({1, 0, 1, 0})), 0.0);
  EXPECT_EQ(error_in_understanding(bits({1, 0, 1, 0}), bits({0, 1, 0, 1})), 1.0);
  EXPECT_DOUBLE_EQ(error_in_understanding(bits({1, 1, 0, 0, 0}), bits({1, 0, 0, 0, 1})), 0.4);
  EXPECT_THROW(hamming(bits({1, 0}), bits({1, 0, 0})), ValidationError);
  EXPECT_THROW(change_in_mental_model(FeatureSelection{}, FeatureSelection{}), ValidationError);
}

TEST(MentalModel, PositionalOracleAndMetricAxioms) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 14)(rng);
    const auto u = random_bits(rng, n), v = random_bits(rng, n), w = random_bits(rng, n);
    std::size_t d = 0;
    for (std::size_t i = 0; i < n; ++i) d += u.test(i) != v.test(i);
    EXPECT_EQ(hamming(u, v), d);
    EXPECT_DOUBLE_EQ(change_in_mental_model(u, v), static_cast<double>(d) / n);
    EXPECT_DOUBLE_EQ(error_in_understanding(u, v), static_cast<double>(d) / n);
    EXPECT_EQ(hamming(u, v), hamming(v, u));
    EXPECT_LE(hamming(u, w), hamming(u, v) + hamming(v, w));
    EXPECT_EQ(hamming(u, u), 0u);
    const double dm = change_in_mental_model(u, v);
    EXPECT_GE(dm, 0.0);
    EXPECT_LE(dm, 1.0);
    FeatureSelection comp(n);
    for (std::size_t i = 0; i < n; ++i) comp.set(i, !u.test(i));
    EXPECT_EQ(error_in_understanding(u, comp), 1.0);
  }
}

TEST(Wilcoxon, SmallExactExample) {
  const std::vector<double> x = {1, 2, 3, 4, 5, 6}, y(6, 0.0);
  const auto w = wilcoxon_signed_rank(x, y);
  EXPECT_EQ(w.w_plus, 21.0);
  EXPECT_EQ(w.w_minus, 0.0);
  EXPECT_EQ(w.statistic, 0.0);
  EXPECT_DOUBLE_EQ(w.p_value, 2.0 / 64.0);
  EXPECT_TRUE(w.exact);
  EXPECT_EQ(w.n_used, 6u);
}

TEST(Wilcoxon, MatchesEnumerationUpToTen) {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t n = std::uniform_int_distribution<std::size_t>(1, 10)(rng);
    std::vector<double> x(n), y(n);
    // Likert-like steps so ties and zeros are common.
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = std::uniform_int_distribution<int>(0, 4)(rng) / 4.0;
      y[i] = std::uniform_int_distribution<int>(0, 4)(rng) / 4.0;
    }
    const auto w = wilcoxon_signed_rank(x, y);
    double wp = 0;
    const double oracle = brute_wilcoxon_p(x, y, &wp);
    EXPECT_NEAR(w.p_value, oracle, 1e-12);
    if (!w.degenerate) EXPECT_DOUBLE_EQ(w.w_plus, wp);
    EXPECT_GE(w.p_value, 0.0);
    EXPECT_LE(w.p_value, 1.0);

    // Invariant to pair order; swapping the samples swaps W+ and W-.
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<double> px(n), py(n);
    for (std::size_t i = 0; i < n; ++i) {
      px[i] = x[perm[i]];
      py[i] = y[perm[i]];
    }
    const auto wr = wilcoxon_signed_rank(px, py);
    EXPECT_EQ(wr.p_value, w.p_value);
    const auto ws = wilcoxon_signed_rank(y, x);
    EXPECT_EQ(ws.w_plus, w.w_minus);
    EXPECT_NEAR(ws.p_value, w.p_value, 1e-15);
  }
}

TEST(Wilcoxon, DegenerateAndErrors) {
  const auto w = wilcoxon_signed_rank({0.5, 0.25, 1.0}, {0.5, 0.25, 1.0});
  EXPECT_TRUE(w.degenerate);
  EXPECT_EQ(w.p_value, 1.0);
  EXPECT_EQ(w.n_used, 0u);
  EXPECT_THROW(wilcoxon_signed_rank({1, 2}, {1}), ValidationError);
  EXPECT_THROW(wilcoxon_signed_rank({}, {}), ValidationError);
  EXPECT_THROW(wilcoxon_signed_rank({NAN}, {1}), ValidationError);
}

TEST(Wilcoxon, NormalApproximationBeyondExactRange) {
  std::vector<double> x, y(30, 0.0);
  for (int i = 1; i <= 30; ++i) x.push_back(i % 4 == 0 ? -i : i);
  const auto w = wilcoxon_signed_rank(x, y);
  EXPECT_FALSE(w.exact);
  double wp = 0;
  for (int i = 1; i <= 30; ++i) {
    if (i % 4 != 0) wp += i;
  }
  EXPECT_EQ(w.w_plus, wp);
  const double mean = 30 * 31 / 4.0, sd = std::sqrt(30 * 31 * 61 / 24.0);
  const double z = (std::abs(wp - mean) - 0.5) / sd;
  EXPECT_NEAR(w.p_value, std::erfc(z / std::sqrt(2.0)), 1e-12);

  // Exact and approximate agree loosely at the boundary.
  std::mt19937_64 rng(8);
  std::vector<double> a(25), b(25);
  for (int i = 0; i < 25; ++i) {
    a[i] = std::normal_distribution<double>(0.3, 1)(rng);
    b[i] = 0;
  }
  const auto exact = wilcoxon_signed_rank(a, b);
  EXPECT_TRUE(exact.exact);
  const double mu = 25 * 26 / 4.0, s = std::sqrt(25 * 26 * 51 / 24.0);
  const double zz = (std::abs(exact.w_plus - mu) - 0.5) / s;
  EXPECT_NEAR(exact.p_value, std::erfc(zz / std::sqrt(2.0)), 0.01);
}

TEST(Bonferroni, ExamplesAndMonotone) {
  auto a = bonferroni(0.001, 9, 0.01);
  EXPECT_DOUBLE_EQ(a.p, 0.009);
  EXPECT_TRUE(a.significant);
  a = bonferroni(0.002, 9, 0.01);
  EXPECT_DOUBLE_EQ(a.p, 0.018);
  EXPECT_FALSE(a.significant);
  EXPECT_EQ(bonferroni(0.5, 9, 0.01).p, 1.0);
  EXPECT_THROW(bonferroni(0.5, 0, 0.01), ValidationError);
  EXPECT_THROW(bonferroni(1.5, 3, 0.01), ValidationError);
  double prev = 0;
  for (int i = 0; i <= 100; ++i) {
    const auto r = bonferroni(i / 100.0, 9, 0.01);
    EXPECT_GE(r.p, prev);
    EXPECT_GE(r.p, i / 100.0);
    prev = r.p;
  }
}

TEST(KMeans, RecoversSeparatedBlobs) {
  std::mt19937_64 rng(3);
  std::vector<Point> pts;
  std::vector<std::size_t> truth;
  const std::vector<Point> centers = {{0, 0}, {10, 0}, {0, 10}};
  for (int i = 0; i < 60; ++i) {
    const std::size_t c = i % 3;
    pts.push_back({centers[c][0] + std::normal_distribution<double>(0, 0.5)(rng),
                   centers[c][1] + std::normal_distribution<double>(0, 0.5)(rng)});
    truth.push_back(c);
  }
  const auto r = kmeans(pts, {3, 1, 10, 300});
  // Labels are renumbered by first appearance, and truth is 0,1,2,0,1,2,...
  EXPECT_EQ(r.assignments, truth);
  for (std::size_t i = 1; i < r.wcss_history.size(); ++i) EXPECT_LE(r.wcss_history[i], r.wcss_history[i - 1] + 1e-9);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = 1e300;
    std::size_t arg = 0;
    for (std::size_t c = 0; c < r.centroids.size(); ++c) {
      const double d = std::pow(pts[i][0] - r.centroids[c][0], 2) + std::pow(pts[i][1] - r.centroids[c][1], 2);
      if (d < best) {
        best = d;
        arg = c;
      }
    }
    EXPECT_EQ(arg, r.assignments[i]);
  }
  const auto again = kmeans(pts, {3, 1, 10, 300});
  EXPECT_EQ(again.assignments, r.assignments);
  EXPECT_EQ(again.wcss, r.wcss);
  EXPECT_GT(silhouette(pts, r.assignments), 0.8);
}

TEST(KMeans, EdgeCases) {
  const std::vector<Point> same(5, Point{0.5, 0.5});
  const auto r = kmeans(same, {3, 0, 3, 100});
  EXPECT_EQ(r.wcss, 0.0);
  EXPECT_EQ(r.assignments.size(), 5u);
  EXPECT_THROW(kmeans({}, {1, 0, 1, 10}), ValidationError);
  EXPECT_THROW(kmeans(same, {6, 0, 1, 10}), ValidationError);
  EXPECT_THROW(kmeans({{1, 2}, {1}}, {1, 0, 1, 10}), ValidationError);
  EXPECT_EQ(silhouette(same, {0, 0, 0, 0, 0}), 0.0);
}

TEST(Scoring, ScenarioMeansHandFixture) {
  const CorrectMap correct = {{Scenario::kLocalEasy, bits({1, 0, 0, 0})}, {Scenario::kGlobalEasy, bits({1, 1, 0, 0})}};
  std::vector<SurveyResponse> rs = {
      response("a", Scenario::kLocalEasy, bits({0, 0, 0, 0}), bits({1, 0, 0, 0}), 5, 4, 1),
      response("b", Scenario::kLocalEasy, bits({1, 1, 0, 0}), bits({1, 1, 1, 1}), 3, 2, 5),
      response("a", Scenario::kGlobalEasy, bits({1, 1, 0, 0}), bits({1, 1, 0, 0}), 1, 1, 3),
  };
  std::vector<std::string> warnings;
  auto means = scenario_means(score_responses(rs, correct), &warnings);
  const auto& le = means.at(Scenario::kLocalEasy);
  EXPECT_EQ(le.count, 2u);
  EXPECT_DOUBLE_EQ(le.values[0], (1.0 + 0.5) / 2);
  EXPECT_DOUBLE_EQ(le.values[1], (0.75 + 0.25) / 2);
  EXPECT_DOUBLE_EQ(le.values[2], (0.0 + 1.0) / 2);
  EXPECT_DOUBLE_EQ(le.values[3], (0.25 + 0.5) / 2);
  EXPECT_DOUBLE_EQ(le.values[4], (0.0 + 0.75) / 2);
  EXPECT_DOUBLE_EQ(means.at(Scenario::kGlobalEasy).values[4], 0.0);
  EXPECT_EQ(warnings.size(), 3u);

  std::reverse(rs.begin(), rs.end());
  auto reversed = scenario_means(score_responses(rs, correct));
  for (std::size_t i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(reversed.at(Scenario::kLocalEasy).values[i], le.values[i]);

  rs.push_back(response("c", Scenario::kLocalHard, bits({0, 0, 0, 0}), bits({0, 0, 0, 0}), 3, 3, 3));
  EXPECT_THROW(score_responses(rs, correct), ValidationError);
}

TEST(Scoring, ErrorBreakdownTotalsEqualHamming) {
  std::mt19937_64 rng(12);
  const std::size_t n = 11;
  CorrectMap correct;
  for (auto s : kAllScenarios) correct[s] = random_bits(rng, n);
  std::vector<SurveyResponse> rs;
  std::map<Scenario, std::size_t> expected;
  for (int p = 0; p < 30; ++p) {
    for (auto s : kAllScenarios) {
      auto v = random_bits(rng, n);
      expected[s] += hamming(v, correct[s]);
      rs.push_back(response("p" + std::to_string(p), s, random_bits(rng, n), v, 3, 3, 3));
    }
  }
  const auto eb = error_breakdown(rs, correct);
  for (auto s : kAllScenarios) {
    const auto& e = eb.at(s);
    std::size_t total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      total += e.type1[i] + e.type2[i];
      if (correct[s].test(i)) EXPECT_EQ(e.type1[i], 0u);
      else EXPECT_EQ(e.type2[i], 0u);
    }
    EXPECT_EQ(total, expected[s]);
  }
}

TEST(Comparisons, NineRows) {
  const auto c = default_comparisons();
  ASSERT_EQ(c.size(), 9u);
  EXPECT_EQ(c[0].name(), "Local vs Global");
  EXPECT_EQ(c[1].name(), "Local Easy vs Global Easy");
  EXPECT_EQ(c[8].name(), "Local SHAP vs Global Easy");
  for (const auto& cmp : c) {
    for (auto s : cmp.a.members) EXPECT_TRUE(cmp.a.members.size() == 1 || s != Scenario::kLocalShap);
  }
}

TEST(Analyze, IdenticalAnswersAreDegenerate) {
  const std::size_t n = 4;
  CorrectMap correct;
  for (auto s : kAllScenarios) correct[s] = bits({1, 0, 0, 0});
  std::vector<SurveyResponse> rs;
  for (int p = 0; p < 6; ++p) {
    for (auto s : kAllScenarios) rs.push_back(response("p" + std::to_string(p), s, FeatureSelection(n), bits({1, 0, 0, 0}), 4, 4, 2));
  }
  const auto rep = analyze(rs, correct, {"A", "B", "C", "D"});
  ASSERT_EQ(rep.comparisons.size(), 9u);
  EXPECT_EQ(rep.bonferroni_m, 9u);
  for (const auto& row : rep.comparisons) {
    EXPECT_EQ(row.pairs, 6u);
    for (const auto& cell : row.cells) {
      EXPECT_TRUE(cell.test.degenerate);
      EXPECT_EQ(cell.adjusted.p, 1.0);
      EXPECT_FALSE(cell.adjusted.significant);
    }
  }
  EXPECT_EQ(rep.clusters.size(), 6u);
  const auto j = nlohmann::json::parse(report_to_json_text(rep));
  EXPECT_EQ(j["comparisons"].size(), 9u);
  const auto md = report_to_markdown(rep);
  EXPECT_NE(md.find("Local vs Global"), std::string::npos);
  EXPECT_NE(md.find("CMM"), std::string::npos);
}

TEST(Analyze, TooFewParticipantsSkipsStatistics) {
  CorrectMap correct;
  for (auto s : kAllScenarios) correct[s] = bits({1, 0});
  std::vector<SurveyResponse> rs;
  for (auto s : kAllScenarios) rs.push_back(response("solo", s, bits({0, 0}), bits({1, 0}), 3, 3, 3));
  const auto rep = analyze(rs, correct, {"A", "B"});
  EXPECT_TRUE(rep.comparisons.empty());
  EXPECT_TRUE(rep.clusters.empty());
  EXPECT_EQ(rep.means.at(Scenario::kLocalEasy).count, 1u);
  EXPECT_FALSE(rep.warnings.empty());
  EXPECT_THROW(analyze(rs, correct, {"A", "B", "C"}), ValidationError);
}

TEST(Analyze, LowEffortExclusion) {
  CorrectMap correct;
  for (auto s : kAllScenarios) correct[s] = bits({1, 0});
  std::vector<SurveyResponse> rs;
  for (auto s : kAllScenarios) {
    rs.push_back(response("careful", s, bits({0, 0}), bits({1, 0}), 3, 3, 3, 200));
    // One short scenario is tolerated.
    rs.push_back(response("onequick", s, bits({0, 0}), bits({1, 0}), 3, 3, 3, s == Scenario::kLocalEasy ? 10 : 200));
    rs.push_back(response("rushed", s, bits({0, 0}), bits({0, 1}), 1, 1, 1, s == Scenario::kLocalEasy ? 10 : 30));
  }
  EXPECT_EQ(low_effort_participants(rs, {}), (std::vector<std::string>{"rushed"}));
  const auto rep = analyze(rs, correct, {"A", "B"});
  EXPECT_EQ(rep.excluded_participants, (std::vector<std::string>{"rushed"}));
  EXPECT_EQ(rep.participants.size(), 2u);
  AnalysisOptions keep;
  keep.exclude_low_effort = false;
  EXPECT_EQ(analyze(rs, correct, {"A", "B"}, keep).participants.size(), 3u);
}

TEST(Analyze, SignificantDifferenceIsDetected) {
  // Every participant rates local higher than global on CR.
  CorrectMap correct;
  for (auto s : kAllScenarios) correct[s] = bits({1, 0, 1});
  std::vector<SurveyResponse> rs;
  std::mt19937_64 rng(2);
  for (int p = 0; p < 20; ++p) {
    const std::string id = "p" + std::to_string(p);
    for (auto s : kAllScenarios) {
      const bool local = s == Scenario::kLocalEasy || s == Scenario::kLocalHard;
      const int cr = local ? 5 : std::uniform_int_distribution<int>(1, 2)(rng);
      rs.push_back(response(id, s, bits({0, 0, 0}), bits({1, 0, 1}), cr, 3, 3));
    }
  }
  const auto rep = analyze(rs, correct, {"A", "B", "C"});
  const auto& row = rep.comparisons[0];
  EXPECT_EQ(row.name, "Local vs Global");
  EXPECT_TRUE(row.cells[0].adjusted.significant);
  EXPECT_LT(row.cells[0].test.p_value, 1e-4);
  EXPECT_TRUE(row.cells[1].test.degenerate);
}
