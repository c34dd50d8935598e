#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dtnarrate/analytics.hpp"

namespace dtnarrate::analytics {

using nlohmann::ordered_json;

std::vector<Comparison> default_comparisons() {
  using S = Scenario;
  const auto one = [](S s) { return Group{std::string(scenario_title(s)), {s}}; };
  return {
      {Group{"Local", {S::kLocalEasy, S::kLocalHard}}, Group{"Global", {S::kGlobalEasy, S::kGlobalHard}}},
      {one(S::kLocalEasy), one(S::kGlobalEasy)},
      {one(S::kLocalHard), one(S::kGlobalHard)},
      {one(S::kLocalEasy), one(S::kLocalHard)},
      {one(S::kGlobalEasy), one(S::kGlobalHard)},
      {one(S::kLocalShap), one(S::kLocalHard)},
      {one(S::kLocalShap), one(S::kLocalEasy)},
      {one(S::kLocalShap), one(S::kGlobalHard)},
      {one(S::kLocalShap), one(S::kGlobalEasy)},
  };
}

std::vector<std::string> low_effort_participants(const std::vector<SurveyResponse>& responses,
                                                 const AnalysisOptions& options) {
  std::map<std::string, std::size_t> short_count;
  for (const auto& r : responses) {
    if (r.dwell_page1 + r.dwell_page2 < options.min_dwell_seconds) ++short_count[r.participant];
  }
  std::vector<std::string> out;
  for (const auto& [p, n] : short_count) {
    if (n > options.max_short_scenarios) out.push_back(p);
  }
  return out;
}

namespace {

using ByScenario = std::map<Scenario, const ScoredResponse*>;

std::optional<double> group_value(const ByScenario& row, const Group& g, std::size_t m) {
  double sum = 0.0;
  for (Scenario s : g.members) {
    auto it = row.find(s);
    if (it == row.end()) return std::nullopt;
    sum += measure(*it->second, m);
  }
  return sum / static_cast<double>(g.members.size());
}

}  // namespace

AnalysisReport analyze(const std::vector<SurveyResponse>& responses, const CorrectMap& correct,
                       const std::vector<std::string>& displayed, const AnalysisOptions& options) {
  AnalysisReport rep;
  rep.displayed_features = displayed;
  rep.alpha = options.alpha;
  rep.strict_alpha = options.strict_alpha;
  for (const auto& [s, c] : correct) {
    if (c.size() != displayed.size()) {
      throw ValidationError("correct selection for " + std::string(scenario_id(s)) + " has " +
                            std::to_string(c.size()) + " bits, expected " + std::to_string(displayed.size()));
    }
  }

  std::set<std::string> excluded;
  if (options.exclude_low_effort) {
    for (auto& p : low_effort_participants(responses, options)) excluded.insert(p);
  }
  rep.excluded_participants.assign(excluded.begin(), excluded.end());
  std::vector<SurveyResponse> kept;
  for (const auto& r : responses) {
    if (!excluded.count(r.participant)) kept.push_back(r);
  }

  const std::vector<ScoredResponse> scored = score_responses(kept, correct);
  rep.means = scenario_means(scored, &rep.warnings);
  rep.errors = error_breakdown(kept, correct);

  std::map<std::string, ByScenario> table;
  for (const auto& s : scored) {
    if (!table[s.participant].emplace(s.scenario, &s).second) {
      throw ValidationError("participant " + s.participant + " has two responses for " +
                            std::string(scenario_id(s.scenario)));
    }
  }
  for (const auto& [p, _] : table) rep.participants.push_back(p);

  const std::vector<Comparison> comparisons = default_comparisons();
  rep.bonferroni_m = options.bonferroni_m ? options.bonferroni_m : comparisons.size();
  if (rep.participants.size() < 2) {
    rep.warnings.push_back("fewer than 2 participants; significance tests and clustering skipped");
    return rep;
  }

  for (const auto& cmp : comparisons) {
    ComparisonRow row;
    row.name = cmp.name();
    for (std::size_t m = 0; m < kMeasures.size(); ++m) {
      std::vector<double> x, y;
      for (const auto& [p, by] : table) {
        auto a = group_value(by, cmp.a, m);
        auto b = group_value(by, cmp.b, m);
        if (a && b) {
          x.push_back(*a);
          y.push_back(*b);
        }
      }
      row.pairs = x.size();
      if (x.empty()) continue;
      ComparisonCell& cell = row.cells[m];
      cell.test = wilcoxon_signed_rank(x, y);
      cell.adjusted = bonferroni(cell.test.p_value, rep.bonferroni_m, options.alpha);
      cell.strict = cell.adjusted.p <= options.strict_alpha;
    }
    if (row.pairs == 0) rep.warnings.push_back("comparison " + row.name + " has no paired participants");
    rep.comparisons.push_back(std::move(row));
  }

  std::vector<std::string> complete;
  std::vector<Point> points;
  for (const auto& [p, by] : table) {
    if (by.size() != kAllScenarios.size()) continue;
    Point v;
    for (Scenario s : kAllScenarios) {
      for (std::size_t m = 0; m < kMeasures.size(); ++m) v.push_back(measure(*by.at(s), m));
    }
    complete.push_back(p);
    points.push_back(std::move(v));
  }
  if (points.size() < options.k) {
    rep.warnings.push_back("only " + std::to_string(points.size()) +
                           " participants completed every scenario; clustering skipped");
    return rep;
  }
  const KMeansResult km = kmeans(points, {options.k, options.seed, options.restarts, 300});
  for (std::size_t i = 0; i < complete.size(); ++i) rep.clusters[complete[i]] = km.assignments[i];
  rep.centroids = km.centroids;
  for (std::size_t k = 2; k + 1 <= points.size() && k <= 6; ++k) {
    const KMeansResult alt = kmeans(points, {k, options.seed, options.restarts, 300});
    rep.silhouettes[k] = silhouette(points, alt.assignments);
  }
  return rep;
}

namespace {

ordered_json cell_json(const ComparisonCell& c) {
  return {{"w_plus", c.test.w_plus},         {"w_minus", c.test.w_minus},
          {"statistic", c.test.statistic},   {"n_used", c.test.n_used},
          {"p", c.test.p_value},             {"adjusted_p", c.adjusted.p},
          {"significant", c.adjusted.significant}, {"strict", c.strict},
          {"exact", c.test.exact},           {"degenerate", c.test.degenerate}};
}

std::string fixed2(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << v;
  return os.str();
}

}  // namespace

std::string report_to_json_text(const AnalysisReport& rep) {
  ordered_json doc;
  doc["displayed_features"] = rep.displayed_features;
  doc["participants"] = rep.participants;
  doc["excluded_participants"] = rep.excluded_participants;
  doc["means"] = ordered_json::object();
  for (const auto& [s, m] : rep.means) {
    ordered_json j;
    for (std::size_t i = 0; i < kMeasures.size(); ++i) j[kMeasures[i]] = m.values[i];
    j["n"] = m.count;
    doc["means"][std::string(scenario_id(s))] = std::move(j);
  }
  doc["bonferroni"] = {{"m", rep.bonferroni_m}, {"alpha", rep.alpha}, {"strict_alpha", rep.strict_alpha}};
  doc["comparisons"] = ordered_json::array();
  for (const auto& row : rep.comparisons) {
    ordered_json j;
    j["name"] = row.name;
    j["pairs"] = row.pairs;
    for (std::size_t i = 0; i < kMeasures.size(); ++i) j[kMeasures[i]] = cell_json(row.cells[i]);
    doc["comparisons"].push_back(std::move(j));
  }
  doc["clusters"] = ordered_json::object();
  for (const auto& [p, g] : rep.clusters) doc["clusters"][p] = g;
  doc["centroids"] = rep.centroids;
  doc["silhouettes"] = ordered_json::object();
  for (const auto& [k, v] : rep.silhouettes) doc["silhouettes"][std::to_string(k)] = v;
  doc["errors"] = ordered_json::object();
  for (const auto& [s, e] : rep.errors) {
    ordered_json t1 = ordered_json::object(), t2 = ordered_json::object();
    for (std::size_t i = 0; i < rep.displayed_features.size() && i < e.type1.size(); ++i) {
      t1[rep.displayed_features[i]] = e.type1[i];
      t2[rep.displayed_features[i]] = e.type2[i];
    }
    doc["errors"][std::string(scenario_id(s))] = {{"type1", t1}, {"type2", t2}};
  }
  doc["warnings"] = rep.warnings;
  return doc.dump(2) + "\n";
}

std::string report_to_markdown(const AnalysisReport& rep) {
  std::ostringstream md;
  md << "# Survey analysis\n\n";
  md << "Participants analysed: " << rep.participants.size();
  if (!rep.excluded_participants.empty()) md << " (excluded as low effort: " << rep.excluded_participants.size() << ")";
  md << "\n\n## Means\n\n|";
  for (Scenario s : kAllScenarios) md << " | " << scenario_title(s);
  md << " |\n|---|---|---|---|---|---|\n";
  for (std::size_t i = 0; i < kMeasures.size(); ++i) {
    md << "| " << kMeasures[i];
    for (Scenario s : kAllScenarios) {
      auto it = rep.means.find(s);
      md << " | " << (it == rep.means.end() ? std::string("-") : fixed2(it->second.values[i]));
    }
    md << " |\n";
  }

  if (!rep.comparisons.empty()) {
    md << "\n## Wilcoxon signed-rank tests\n\nBonferroni-adjusted p-values (m = " << rep.bonferroni_m
       << "). Bold: adjusted p <= " << format_number(rep.alpha) << "; *: adjusted p <= "
       << format_number(rep.strict_alpha) << ".\n\n|";
    for (const char* m : kMeasures) md << " | " << m;
    md << " | pairs |\n|---|---|---|---|---|---|---|\n";
    for (const auto& row : rep.comparisons) {
      md << "| " << row.name;
      for (const auto& c : row.cells) {
        std::string v = fixed2(c.adjusted.p);
        if (c.adjusted.significant) v = "**" + v + "**";
        if (c.strict) v += "*";
        md << " | " << v;
      }
      md << " | " << row.pairs << " |\n";
    }
  }

  if (!rep.clusters.empty()) {
    std::map<std::size_t, std::size_t> sizes;
    for (const auto& [_, g] : rep.clusters) ++sizes[g];
    md << "\n## Participant groups\n\n| Group | Size";
    for (const char* m : kMeasures) md << " | " << m;
    md << " |\n|---|---|---|---|---|---|---|\n";
    for (std::size_t g = 0; g < rep.centroids.size(); ++g) {
      md << "| " << g + 1 << " | " << sizes[g];
      for (std::size_t m = 0; m < kMeasures.size(); ++m) {
        double sum = 0.0;
        for (std::size_t s = 0; s < kAllScenarios.size(); ++s) sum += rep.centroids[g][s * kMeasures.size() + m];
        md << " | " << fixed2(sum / static_cast<double>(kAllScenarios.size()));
      }
      md << " |\n";
    }
    if (!rep.silhouettes.empty()) {
      md << "\nMean silhouette by k:";
      for (const auto& [k, v] : rep.silhouettes) md << " k=" << k << ": " << fixed2(v) << ";";
      md << "\n";
    }
  }

  const auto error_table = [&](const char* title, bool type1) {
    md << "\n## " << title << "\n\n| Feature";
    for (Scenario s : kAllScenarios) md << " | " << scenario_title(s);
    md << " |\n|---|---|---|---|---|---|\n";
    for (std::size_t i = 0; i < rep.displayed_features.size(); ++i) {
      md << "| " << rep.displayed_features[i];
      for (Scenario s : kAllScenarios) {
        auto it = rep.errors.find(s);
        std::size_t n = 0;
        if (it != rep.errors.end()) n = (type1 ? it->second.type1 : it->second.type2).at(i);
        md << " | " << (n ? std::to_string(n) : std::string());
      }
      md << " |\n";
    }
  };
  error_table("Type I errors (selected, not used by the model)", true);
  error_table("Type II errors (used by the model, not selected)", false);

  if (!rep.warnings.empty()) {
    md << "\n## Warnings\n\n";
    for (const auto& w : rep.warnings) md << "- " << w << "\n";
  }
  return md.str();
}

}  // namespace dtnarrate::analytics
