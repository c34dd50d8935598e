#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtnarrate/response.hpp"
#include "dtnarrate/study.hpp"

namespace dtnarrate::survey {

using Json = nlohmann::ordered_json;

// Each line is "<crc32 as 8 hex digits>\t<compact json>\n".
std::string encode_line(const Json& record);

struct LogContents {
  std::vector<Json> records;
  std::vector<std::string> skipped;  // "line N: reason"
};

LogContents parse_log(const std::string& text);
// Missing file reads as empty.
LogContents read_log(const std::string& path);

// Append-only, checksummed, fsync'd line log. One writer per file.
class AppendLog {
 public:
  explicit AppendLog(std::string path);
  ~AppendLog();
  AppendLog(const AppendLog&) = delete;
  AppendLog& operator=(const AppendLog&) = delete;

  const std::string& path() const { return path_; }
  // Throws IoError when the record cannot be made durable.
  void append(const Json& record);

 private:
  std::string path_;
  int fd_ = -1;
  std::mutex mu_;
};

enum class ErrorCode {
  kUnknownSession,
  kValidationFailed,
  kDuplicateSubmission,
  kOutOfRange,
  kSessionCompleted,
  kPersistenceUnavailable,
};

std::string_view error_code_name(ErrorCode code);
int http_status(ErrorCode code);

class ServiceError : public std::runtime_error {
 public:
  ServiceError(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }
  Json to_json() const;

 private:
  ErrorCode code_;
};

inline constexpr const char* kCompletenessPrompt =
    "This explanation helps me completely understand why the AI system made the prediction";
inline constexpr const char* kUnderstandabilityPrompt =
    "Based on the explanation I understand how the model would behave for another patient";
inline constexpr const char* kVerbosenessPrompt =
    "This explanation is long and uses more words than required";

inline constexpr std::size_t kPagesPerScenario = 2;

struct Session {
  std::string participant;
  std::int64_t issued = 0;  // unix seconds
  std::vector<Scenario> order;
  std::size_t cursor = 0;  // scenario position * 2 + page index
  bool completed = false;

  std::size_t page_count() const { return order.size() * kPagesPerScenario; }
  bool operator==(const Session&) const = default;
};

struct ServiceOptions {
  std::uint64_t seed = 0;
  bool randomize_order = false;
  // Seconds since the epoch; injectable for tests.
  std::function<double()> clock;
  std::string sessions_path;  // default: response log path + ".sessions"
};

// Serves the five-scenario flow of a built study and records responses.
// Thread-safe.
class SurveyService {
 public:
  SurveyService(study::Study study, std::string log_path, ServiceOptions options = {});

  Session create_session();
  Json get_page(const std::string& participant, std::size_t cursor);
  Json submit(const std::string& participant, const Json& payload);
  ResponseExport export_responses() const;

  std::optional<Session> session(const std::string& participant) const;
  std::vector<Session> sessions() const;
  const study::Study& study() const { return study_; }
  // Lines the replay on startup could not use.
  const std::vector<std::string>& replay_report() const { return replay_report_; }

  static Json session_json(const Session& s);

 private:
  double now() const;
  void replay();
  void apply_session(const Json& rec);
  void apply_page(const Json& rec);
  std::string fresh_id();
  const study::ScenarioBundle& bundle_at(const Session& s, std::size_t cursor) const;
  Json page_json(const Session& s, std::size_t cursor) const;

  study::Study study_;
  ServiceOptions options_;
  std::string log_path_;
  std::string sessions_path_;
  std::unique_ptr<AppendLog> responses_;
  std::unique_ptr<AppendLog> session_log_;

  mutable std::mutex mu_;
  std::mt19937_64 rng_;
  std::map<std::string, Session> sessions_;
  std::map<std::pair<std::string, std::size_t>, double> served_at_;
  std::vector<std::string> replay_report_;
};

// Joins page-1 and page-2 records into responses. Pure function of the logs;
// displayed features come from the session records.
ResponseExport export_from_logs(const LogContents& sessions, const LogContents& responses);

struct HttpOptions {
  std::string operator_token;  // empty disables /api/export
  std::string static_dir;      // optional static file mount at "/"
};

// REST front for SurveyService; see docs/formats.md for the schema.
class HttpServer {
 public:
  HttpServer(SurveyService& service, HttpOptions options);
  ~HttpServer();

  // Blocking. Returns false if the socket could not be bound.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port and serves on a background thread.
  int start_background(const std::string& host = "127.0.0.1");
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace dtnarrate::survey
