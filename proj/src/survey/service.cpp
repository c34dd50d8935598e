#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "dtnarrate/survey.hpp"

namespace dtnarrate::survey {

namespace {

constexpr const char* kBeforePrompt =
    "Select every patient feature you think is important for predicting this patient's risk of CHD.";
constexpr const char* kAfterPrompt =
    "Now that you have read the explanation, select every patient feature the AI system used for this prediction.";
constexpr const char* kFreeTextPrompt = "Any other comments about this explanation? (optional)";

const std::vector<std::string>& likert_scale() {
  static const std::vector<std::string> scale = {"Strongly Disagree", "Disagree", "Neutral", "Agree",
                                                 "Strongly Agree"};
  return scale;
}

ServiceError invalid(const std::string& message) { return {ErrorCode::kValidationFailed, message}; }

void allow_only(const Json& obj, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw invalid("unknown field '" + key + "'");
    }
  }
}

std::vector<std::uint8_t> parse_bits(const Json& j, std::size_t n) {
  if (!j.is_array()) throw invalid("selection must be an array of 0/1 values");
  if (j.size() != n) {
    throw invalid("selection has " + std::to_string(j.size()) + " entries, expected " + std::to_string(n));
  }
  std::vector<std::uint8_t> bits;
  for (const auto& b : j) {
    if (!b.is_number_integer() || (b.get<int>() != 0 && b.get<int>() != 1)) {
      throw invalid("selection entries must be 0 or 1");
    }
    bits.push_back(static_cast<std::uint8_t>(b.get<int>()));
  }
  return bits;
}

int parse_rating(const Json& ratings, const char* key) {
  if (!ratings.contains(key)) throw invalid(std::string("missing rating ") + key);
  const Json& v = ratings.at(key);
  if (!v.is_number_integer()) throw invalid(std::string("rating ") + key + " must be an integer");
  const int r = v.get<int>();
  if (r < 1 || r > 5) throw invalid(std::string("rating ") + key + " = " + std::to_string(r) + " outside 1..5");
  return r;
}

std::string page_type(std::size_t cursor) { return cursor % kPagesPerScenario == 0 ? "page1" : "page2"; }

}  // namespace

SurveyService::SurveyService(study::Study study, std::string log_path, ServiceOptions options)
    : study_(std::move(study)),
      options_(std::move(options)),
      log_path_(std::move(log_path)),
      rng_(options_.seed) {
  if (study_.bundles.size() != kAllScenarios.size()) throw ValidationError("study must have exactly 5 bundles");
  sessions_path_ = options_.sessions_path.empty() ? log_path_ + ".sessions" : options_.sessions_path;
  replay();
  responses_ = std::make_unique<AppendLog>(log_path_);
  session_log_ = std::make_unique<AppendLog>(sessions_path_);
}

double SurveyService::now() const {
  if (options_.clock) return options_.clock();
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch()).count();
}

Json SurveyService::session_json(const Session& s) {
  Json order = Json::array();
  for (Scenario sc : s.order) order.push_back(scenario_id(sc));
  return {{"participant", s.participant},
          {"issued", s.issued},
          {"cursor", s.cursor},
          {"pages", s.page_count()},
          {"completed", s.completed},
          {"order", order}};
}

void SurveyService::apply_session(const Json& rec) {
  Session s;
  s.participant = rec.at("participant").get<std::string>();
  s.issued = rec.at("issued").get<std::int64_t>();
  for (const auto& id : rec.at("order")) s.order.push_back(parse_scenario(id.get<std::string>()));
  if (s.order.size() != kAllScenarios.size()) throw ValidationError("session order must list 5 scenarios");
  if (!sessions_.emplace(s.participant, s).second) throw ValidationError("duplicate session " + s.participant);
}

void SurveyService::apply_page(const Json& rec) {
  const std::string id = rec.at("participant").get<std::string>();
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ValidationError("page for unknown session " + id);
  Session& s = it->second;
  const std::size_t cursor = rec.at("cursor").get<std::size_t>();
  if (s.completed || cursor != s.cursor) throw ValidationError("out-of-order page for " + id);
  if (rec.at("type").get<std::string>() != page_type(cursor) ||
      parse_scenario(rec.at("scenario").get<std::string>()) != s.order[cursor / kPagesPerScenario]) {
    throw ValidationError("page record does not match the session flow for " + id);
  }
  ++s.cursor;
  s.completed = s.cursor == s.page_count();
}

void SurveyService::replay() {
  const LogContents sessions = read_log(sessions_path_);
  for (const auto& line : sessions.skipped) replay_report_.push_back(sessions_path_ + " " + line);
  for (const auto& rec : sessions.records) {
    try {
      apply_session(rec);
    } catch (const std::exception& e) {
      replay_report_.push_back(sessions_path_ + ": " + e.what());
    }
  }
  const LogContents pages = read_log(log_path_);
  for (const auto& line : pages.skipped) replay_report_.push_back(log_path_ + " " + line);
  for (const auto& rec : pages.records) {
    try {
      apply_page(rec);
    } catch (const std::exception& e) {
      replay_report_.push_back(log_path_ + ": " + e.what());
    }
  }
}

std::string SurveyService::fresh_id() {
  for (;;) {
    std::ostringstream os;
    os << 'p' << std::hex << std::setw(16) << std::setfill('0') << rng_();
    if (!sessions_.count(os.str())) return os.str();
  }
}

Session SurveyService::create_session() {
  std::lock_guard<std::mutex> lock(mu_);
  Session s;
  s.participant = fresh_id();
  s.issued = static_cast<std::int64_t>(std::floor(now()));
  for (const auto& b : study_.bundles) s.order.push_back(b.scenario);
  if (options_.randomize_order) std::shuffle(s.order.begin(), s.order.end(), rng_);

  Json rec = {{"type", "session"}, {"participant", s.participant}, {"issued", s.issued}};
  rec["order"] = Json::array();
  for (Scenario sc : s.order) rec["order"].push_back(scenario_id(sc));
  rec["features"] = study_.displayed_features;
  try {
    session_log_->append(rec);
  } catch (const IoError& e) {
    throw ServiceError(ErrorCode::kPersistenceUnavailable, e.what());
  }
  sessions_.emplace(s.participant, s);
  return s;
}

const study::ScenarioBundle& SurveyService::bundle_at(const Session& s, std::size_t cursor) const {
  return study_.bundle(s.order.at(cursor / kPagesPerScenario));
}

Json SurveyService::page_json(const Session& s, std::size_t cursor) const {
  const study::ScenarioBundle& b = bundle_at(s, cursor);
  const bool second = cursor % kPagesPerScenario == 1;
  Json page;
  page["participant"] = s.participant;
  page["cursor"] = cursor;
  page["scenario"] = scenario_id(b.scenario);
  page["position"] = cursor / kPagesPerScenario + 1;
  page["scenario_count"] = s.order.size();
  page["page"] = second ? 2 : 1;
  page["features"] = study_.displayed_features;
  page["patient"] = Json::array();
  for (const auto& [f, v] : b.card) page["patient"].push_back({{"feature", f}, {"value", v}});
  page["selection_prompt"] = second ? kAfterPrompt : kBeforePrompt;
  if (second) {
    page["prediction"] = to_string(b.prediction);
    page["prediction_text"] =
        std::string(b.prediction == RiskLabel::kHighRisk ? "High" : "Low") + " risk of CHD";
    page["explanation"] = b.explanation;
    page["ratings"] = Json::array({
        {{"id", "CR"}, {"prompt", kCompletenessPrompt}, {"scale", likert_scale()}},
        {{"id", "UR"}, {"prompt", kUnderstandabilityPrompt}, {"scale", likert_scale()}},
        {{"id", "VR"}, {"prompt", kVerbosenessPrompt}, {"scale", likert_scale()}},
    });
    page["free_text_prompt"] = kFreeTextPrompt;
  }
  return page;
}

Json SurveyService::get_page(const std::string& participant, std::size_t cursor) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = sessions_.find(participant);
  if (it == sessions_.end()) throw ServiceError(ErrorCode::kUnknownSession, "no session " + participant);
  const Session& s = it->second;
  if (s.completed) throw ServiceError(ErrorCode::kSessionCompleted, "session " + participant + " is complete");
  if (cursor >= s.page_count()) {
    throw ServiceError(ErrorCode::kOutOfRange, "page " + std::to_string(cursor) + " does not exist");
  }
  if (cursor > s.cursor) {
    throw ServiceError(ErrorCode::kOutOfRange,
                       "page " + std::to_string(cursor) + " is ahead of the session cursor " + std::to_string(s.cursor));
  }
  served_at_.try_emplace({participant, cursor}, now());
  return page_json(s, cursor);
}

Json SurveyService::submit(const std::string& participant, const Json& payload) {
  if (!payload.is_object()) throw invalid("payload must be a JSON object");
  if (!payload.contains("cursor") || !payload.at("cursor").is_number_integer() ||
      payload.at("cursor").get<std::int64_t>() < 0) {
    throw invalid("payload needs a non-negative integer 'cursor'");
  }
  const std::size_t cursor = payload.at("cursor").get<std::size_t>();

  std::lock_guard<std::mutex> lock(mu_);
  auto it = sessions_.find(participant);
  if (it == sessions_.end()) throw ServiceError(ErrorCode::kUnknownSession, "no session " + participant);
  Session& s = it->second;
  if (s.completed) throw ServiceError(ErrorCode::kSessionCompleted, "session " + participant + " is complete");
  if (cursor < s.cursor) {
    throw ServiceError(ErrorCode::kDuplicateSubmission, "page " + std::to_string(cursor) + " was already submitted");
  }
  if (cursor > s.cursor || cursor >= s.page_count()) {
    throw ServiceError(ErrorCode::kOutOfRange, "expected a submission for page " + std::to_string(s.cursor));
  }

  const study::ScenarioBundle& b = bundle_at(s, cursor);
  const bool second = cursor % kPagesPerScenario == 1;
  if (second) {
    allow_only(payload, {"cursor", "scenario", "selection", "ratings", "free_text", "dwell_seconds"});
  } else {
    allow_only(payload, {"cursor", "scenario", "selection", "dwell_seconds"});
  }
  if (!payload.contains("scenario") || !payload.at("scenario").is_string() ||
      payload.at("scenario").get<std::string>() != scenario_id(b.scenario)) {
    throw invalid("page " + std::to_string(cursor) + " belongs to scenario " + std::string(scenario_id(b.scenario)));
  }
  if (!payload.contains("selection")) throw invalid("missing 'selection'");
  const auto bits = parse_bits(payload.at("selection"), study_.displayed_features.size());

  const double t = now();
  double dwell = 0.0;
  if (payload.contains("dwell_seconds")) {
    const Json& d = payload.at("dwell_seconds");
    if (!d.is_number() || !std::isfinite(d.get<double>()) || d.get<double>() < 0.0) {
      throw invalid("dwell_seconds must be a non-negative number");
    }
    dwell = d.get<double>();
  } else if (auto served = served_at_.find({participant, cursor}); served != served_at_.end()) {
    dwell = std::max(0.0, t - served->second);
  }

  Json rec = {{"type", page_type(cursor)},
              {"participant", participant},
              {"scenario", scenario_id(b.scenario)},
              {"cursor", cursor},
              {"selection", bits},
              {"dwell_seconds", dwell},
              {"submitted", t}};
  if (second) {
    if (!payload.contains("ratings") || !payload.at("ratings").is_object()) throw invalid("missing 'ratings'");
    const Json& ratings = payload.at("ratings");
    for (const auto& [key, _] : ratings.items()) {
      if (key != "CR" && key != "UR" && key != "VR") throw invalid("unknown rating '" + key + "'");
    }
    rec["ratings"] = {{"CR", parse_rating(ratings, "CR")},
                      {"UR", parse_rating(ratings, "UR")},
                      {"VR", parse_rating(ratings, "VR")}};
    std::string text;
    if (payload.contains("free_text")) {
      if (!payload.at("free_text").is_string()) throw invalid("free_text must be a string");
      text = payload.at("free_text").get<std::string>();
    }
    rec["free_text"] = text;
  }

  try {
    responses_->append(rec);
  } catch (const IoError& e) {
    throw ServiceError(ErrorCode::kPersistenceUnavailable, e.what());
  }
  served_at_.erase({participant, cursor});
  ++s.cursor;
  s.completed = s.cursor == s.page_count();
  return {{"accepted", true}, {"participant", participant}, {"cursor", s.cursor}, {"completed", s.completed}};
}

ResponseExport SurveyService::export_responses() const {
  std::lock_guard<std::mutex> lock(mu_);
  return export_from_logs(read_log(sessions_path_), read_log(log_path_));
}

std::optional<Session> SurveyService::session(const std::string& participant) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = sessions_.find(participant);
  if (it == sessions_.end()) return std::nullopt;
  return it->second;
}

std::vector<Session> SurveyService::sessions() const {
  std::lock_guard<std::mutex> lock(mu_);
  std::vector<Session> out;
  for (const auto& [_, s] : sessions_) out.push_back(s);
  return out;
}

ResponseExport export_from_logs(const LogContents& sessions, const LogContents& responses) {
  ResponseExport out;
  bool have_features = false;
  for (const auto& s : sessions.skipped) out.skipped_lines.push_back("sessions " + s);
  for (const auto& s : responses.skipped) out.skipped_lines.push_back("responses " + s);

  std::vector<std::pair<std::string, std::vector<Scenario>>> order;
  std::set<std::string> known;
  for (const auto& rec : sessions.records) {
    try {
      if (rec.at("type").get<std::string>() != "session") continue;
      const std::string id = rec.at("participant").get<std::string>();
      std::vector<Scenario> scenarios;
      for (const auto& sid : rec.at("order")) scenarios.push_back(parse_scenario(sid.get<std::string>()));
      auto features = rec.at("features").get<std::vector<std::string>>();
      if (!have_features) {
        out.displayed_features = std::move(features);
        have_features = true;
      } else if (features != out.displayed_features) {
        throw ValidationError("session " + id + " lists different displayed features");
      }
      if (known.insert(id).second) order.emplace_back(id, std::move(scenarios));
    } catch (const std::exception& e) {
      out.skipped_lines.push_back(std::string("sessions record: ") + e.what());
    }
  }

  std::map<std::pair<std::string, Scenario>, const Json*> page1, page2;
  for (const auto& rec : responses.records) {
    try {
      const std::string type = rec.at("type").get<std::string>();
      const std::string id = rec.at("participant").get<std::string>();
      const Scenario sc = parse_scenario(rec.at("scenario").get<std::string>());
      if (!known.count(id)) {
        out.skipped_lines.push_back("responses record for unknown participant " + id);
        continue;
      }
      if (type == "page1") page1.try_emplace({id, sc}, &rec);
      else if (type == "page2") page2.try_emplace({id, sc}, &rec);
      else out.skipped_lines.push_back("responses record of unknown type " + type);
    } catch (const std::exception& e) {
      out.skipped_lines.push_back(std::string("responses record: ") + e.what());
    }
  }

  for (const auto& [id, scenarios] : order) {
    for (Scenario sc : scenarios) {
      auto p1 = page1.find({id, sc});
      auto p2 = page2.find({id, sc});
      if (p1 == page1.end() || p2 == page2.end()) {
        const char* reason = p1 == page1.end() ? (p2 == page2.end() ? "not started" : "missing page 1")
                                               : "missing page 2";
        out.incomplete.push_back({id, sc, reason});
        continue;
      }
      try {
        SurveyResponse r;
        r.participant = id;
        r.scenario = sc;
        r.before = FeatureSelection(p1->second->at("selection").get<std::vector<std::uint8_t>>());
        r.after = FeatureSelection(p2->second->at("selection").get<std::vector<std::uint8_t>>());
        const Json& ratings = p2->second->at("ratings");
        r.cr = ratings.at("CR").get<int>();
        r.ur = ratings.at("UR").get<int>();
        r.vr = ratings.at("VR").get<int>();
        r.free_text = p2->second->value("free_text", std::string());
        r.dwell_page1 = p1->second->at("dwell_seconds").get<double>();
        r.dwell_page2 = p2->second->at("dwell_seconds").get<double>();
        r.validate();
        if (r.after.size() != out.displayed_features.size()) throw ValidationError("selection length mismatch");
        out.responses.push_back(std::move(r));
      } catch (const std::exception& e) {
        out.incomplete.push_back({id, sc, std::string("invalid record: ") + e.what()});
      }
    }
  }
  return out;
}

}  // namespace dtnarrate::survey
