#include <cmath>
#include <set>

#include <json.hpp>

#include "dtnarrate/analytics.hpp"

namespace dtnarrate {

using nlohmann::ordered_json;

void SurveyResponse::validate() const {
  if (participant.empty()) throw ValidationError("response has an empty participant id");
  if (before.size() != after.size()) {
    throw ValidationError("before and after selections differ in length (" + std::to_string(before.size()) +
                          " vs " + std::to_string(after.size()) + ")");
  }
  for (int r : {cr, ur, vr}) {
    if (r < 1 || r > 5) throw ValidationError("rating " + std::to_string(r) + " outside 1..5");
  }
  for (double d : {dwell_page1, dwell_page2}) {
    if (!std::isfinite(d) || d < 0.0) throw ValidationError("dwell time must be a non-negative number");
  }
}

namespace {

ordered_json response_to_json(const SurveyResponse& r) {
  return {{"participant", r.participant},
          {"scenario", scenario_id(r.scenario)},
          {"before", r.before.bits()},
          {"after", r.after.bits()},
          {"ratings", {{"CR", r.cr}, {"UR", r.ur}, {"VR", r.vr}}},
          {"free_text", r.free_text},
          {"dwell_seconds", {{"page1", r.dwell_page1}, {"page2", r.dwell_page2}}}};
}

SurveyResponse response_from_json(const ordered_json& j) {
  SurveyResponse r;
  r.participant = j.at("participant").get<std::string>();
  r.scenario = parse_scenario(j.at("scenario").get<std::string>());
  r.before = FeatureSelection(j.at("before").get<std::vector<std::uint8_t>>());
  r.after = FeatureSelection(j.at("after").get<std::vector<std::uint8_t>>());
  const auto& ratings = j.at("ratings");
  r.cr = ratings.at("CR").get<int>();
  r.ur = ratings.at("UR").get<int>();
  r.vr = ratings.at("VR").get<int>();
  r.free_text = j.value("free_text", std::string());
  const auto& dwell = j.at("dwell_seconds");
  r.dwell_page1 = dwell.at("page1").get<double>();
  r.dwell_page2 = dwell.at("page2").get<double>();
  r.validate();
  return r;
}

}  // namespace

std::string export_to_json_text(const ResponseExport& e) {
  ordered_json doc;
  doc["displayed_features"] = e.displayed_features;
  doc["responses"] = ordered_json::array();
  for (const auto& r : e.responses) doc["responses"].push_back(response_to_json(r));
  doc["incomplete"] = ordered_json::array();
  for (const auto& x : e.incomplete) {
    doc["incomplete"].push_back(
        {{"participant", x.participant}, {"scenario", scenario_id(x.scenario)}, {"reason", x.reason}});
  }
  doc["skipped_lines"] = e.skipped_lines;
  return doc.dump(2) + "\n";
}

ResponseExport export_from_json_text(const std::string& text) {
  ResponseExport e;
  try {
    const auto doc = ordered_json::parse(text);
    e.displayed_features = doc.at("displayed_features").get<std::vector<std::string>>();
    for (const auto& j : doc.at("responses")) {
      SurveyResponse r = response_from_json(j);
      if (r.after.size() != e.displayed_features.size()) {
        throw ValidationError("response for " + r.participant + " has " + std::to_string(r.after.size()) +
                              " selection bits, expected " + std::to_string(e.displayed_features.size()));
      }
      e.responses.push_back(std::move(r));
    }
    if (doc.contains("incomplete")) {
      for (const auto& j : doc.at("incomplete")) {
        e.incomplete.push_back({j.at("participant").get<std::string>(),
                                parse_scenario(j.at("scenario").get<std::string>()),
                                j.at("reason").get<std::string>()});
      }
    }
    if (doc.contains("skipped_lines")) e.skipped_lines = doc.at("skipped_lines").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& ex) {
    throw ValidationError(std::string("malformed response export: ") + ex.what());
  }
  return e;
}

ResponseExport load_export(const std::string& path) { return export_from_json_text(read_file(path)); }

}  // namespace dtnarrate

namespace dtnarrate::analytics {

double normalize_likert(int raw) {
  if (raw < 1 || raw > 5) throw ValidationError("Likert rating " + std::to_string(raw) + " outside 1..5");
  return (raw - 1) / 4.0;
}

std::size_t hamming(const FeatureSelection& a, const FeatureSelection& b) {
  if (a.size() != b.size()) {
    throw ValidationError("selection lengths differ (" + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()) + ")");
  }
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a.test(i) != b.test(i);
  return d;
}

namespace {

double normalized_distance(const FeatureSelection& a, const FeatureSelection& b) {
  const std::size_t d = hamming(a, b);
  if (a.size() == 0) throw ValidationError("selections are empty");
  return static_cast<double>(d) / static_cast<double>(a.size());
}

}  // namespace

double change_in_mental_model(const FeatureSelection& u, const FeatureSelection& v) {
  return normalized_distance(u, v);
}

double error_in_understanding(const FeatureSelection& v, const FeatureSelection& c) {
  return normalized_distance(v, c);
}

double measure(const ScoredResponse& s, std::size_t index) {
  switch (index) {
    case 0: return s.cr;
    case 1: return s.ur;
    case 2: return s.vr;
    case 3: return s.cmm;
    case 4: return s.eu;
  }
  throw ValidationError("measure index out of range");
}

namespace {

const FeatureSelection& correct_for(const CorrectMap& correct, Scenario s) {
  auto it = correct.find(s);
  if (it == correct.end()) {
    throw ValidationError("no correct selection registered for scenario " + std::string(scenario_id(s)));
  }
  return it->second;
}

}  // namespace

std::vector<ScoredResponse> score_responses(const std::vector<SurveyResponse>& responses,
                                            const CorrectMap& correct) {
  std::vector<ScoredResponse> out;
  out.reserve(responses.size());
  for (const auto& r : responses) {
    r.validate();
    ScoredResponse s;
    s.participant = r.participant;
    s.scenario = r.scenario;
    s.cr = normalize_likert(r.cr);
    s.ur = normalize_likert(r.ur);
    s.vr = normalize_likert(r.vr);
    s.cmm = change_in_mental_model(r.before, r.after);
    s.eu = error_in_understanding(r.after, correct_for(correct, r.scenario));
    s.dwell_seconds = r.dwell_page1 + r.dwell_page2;
    out.push_back(std::move(s));
  }
  return out;
}

std::map<Scenario, MeasureMeans> scenario_means(const std::vector<ScoredResponse>& scored,
                                                std::vector<std::string>* warnings) {
  std::map<Scenario, MeasureMeans> out;
  for (const auto& s : scored) {
    MeasureMeans& m = out[s.scenario];
    for (std::size_t i = 0; i < kMeasures.size(); ++i) m.values[i] += measure(s, i);
    ++m.count;
  }
  for (auto& [_, m] : out) {
    for (auto& v : m.values) v /= static_cast<double>(m.count);
  }
  if (warnings) {
    for (Scenario s : kAllScenarios) {
      if (!out.count(s)) warnings->push_back("scenario " + std::string(scenario_id(s)) + " has no responses");
    }
  }
  return out;
}

std::map<Scenario, ErrorCounts> error_breakdown(const std::vector<SurveyResponse>& responses,
                                                const CorrectMap& correct) {
  std::map<Scenario, ErrorCounts> out;
  for (const auto& [s, c] : correct) out[s] = {std::vector<std::size_t>(c.size()), std::vector<std::size_t>(c.size())};
  for (const auto& r : responses) {
    const FeatureSelection& c = correct_for(correct, r.scenario);
    if (r.after.size() != c.size()) {
      throw ValidationError("selection length " + std::to_string(r.after.size()) + " does not match " +
                            std::to_string(c.size()) + " displayed features");
    }
    ErrorCounts& e = out[r.scenario];
    for (std::size_t i = 0; i < c.size(); ++i) {
      if (r.after.test(i) && !c.test(i)) ++e.type1[i];
      if (!r.after.test(i) && c.test(i)) ++e.type2[i];
    }
  }
  return out;
}

}  // namespace dtnarrate::analytics
