#include <fcntl.h>
#include <sys/stat.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <zlib.h>

#include "dtnarrate/survey.hpp"

namespace dtnarrate::survey {

namespace {

std::string hex8(std::uint32_t v) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", v);
  return buf;
}

std::uint32_t checksum(std::string_view s) {
  return static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(s.data()), static_cast<uInt>(s.size())));
}

std::string errno_text() { return std::strerror(errno); }

}  // namespace

std::string encode_line(const Json& record) {
  const std::string body = record.dump();
  return hex8(checksum(body)) + "\t" + body + "\n";
}

LogContents parse_log(const std::string& text) {
  LogContents out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    ++line_no;
    const std::size_t nl = text.find('\n', pos);
    const std::string where = "line " + std::to_string(line_no) + ": ";
    if (nl == std::string::npos) {
      out.skipped.push_back(where + "truncated record");
      break;
    }
    const std::string_view line(text.data() + pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    if (line.size() < 10 || line[8] != '\t') {
      out.skipped.push_back(where + "missing checksum");
      continue;
    }
    const std::string_view body = line.substr(9);
    if (hex8(checksum(body)) != line.substr(0, 8)) {
      out.skipped.push_back(where + "checksum mismatch");
      continue;
    }
    try {
      Json j = Json::parse(body);
      if (!j.is_object()) throw ValidationError("not an object");
      out.records.push_back(std::move(j));
    } catch (const std::exception&) {
      out.skipped.push_back(where + "unparseable record");
    }
  }
  return out;
}

LogContents read_log(const std::string& path) {
  if (!std::filesystem::exists(path)) return {};
  return parse_log(read_file(path));
}

AppendLog::AppendLog(std::string path) : path_(std::move(path)) {
  const bool existed = std::filesystem::exists(path_);
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (fd_ < 0) throw IoError("cannot open log " + path_ + ": " + errno_text());

  // Isolate a torn tail so the next record starts on its own line.
  struct stat st {};
  if (::fstat(fd_, &st) == 0 && st.st_size > 0) {
    const int rd = ::open(path_.c_str(), O_RDONLY | O_CLOEXEC);
    char last = '\n';
    if (rd >= 0) {
      if (::pread(rd, &last, 1, st.st_size - 1) != 1) last = '\n';
      ::close(rd);
    }
    if (last != '\n' && (::write(fd_, "\n", 1) != 1 || ::fsync(fd_) != 0)) {
      throw IoError("cannot repair log tail of " + path_ + ": " + errno_text());
    }
  }
  if (!existed) {
    const auto dir = std::filesystem::absolute(path_).parent_path();
    const int dfd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
    if (dfd >= 0) {
      ::fsync(dfd);
      ::close(dfd);
    }
  }
}

AppendLog::~AppendLog() {
  if (fd_ >= 0) ::close(fd_);
}

void AppendLog::append(const Json& record) {
  const std::string line = encode_line(record);
  std::lock_guard<std::mutex> lock(mu_);
  std::size_t done = 0;
  while (done < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + done, line.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw IoError("append to " + path_ + " failed: " + errno_text());
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) throw IoError("fsync of " + path_ + " failed: " + errno_text());
}

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSession: return "unknown_session";
    case ErrorCode::kValidationFailed: return "validation_failed";
    case ErrorCode::kDuplicateSubmission: return "duplicate_submission";
    case ErrorCode::kOutOfRange: return "out_of_range";
    case ErrorCode::kSessionCompleted: return "session_completed";
    case ErrorCode::kPersistenceUnavailable: return "persistence_unavailable";
  }
  return "validation_failed";
}

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSession: return 404;
    case ErrorCode::kValidationFailed: return 400;
    case ErrorCode::kDuplicateSubmission: return 409;
    case ErrorCode::kOutOfRange: return 400;
    case ErrorCode::kSessionCompleted: return 410;
    case ErrorCode::kPersistenceUnavailable: return 503;
  }
  return 500;
}

Json ServiceError::to_json() const {
  return {{"error", {{"code", error_code_name(code_)}, {"message", what()}}}};
}

}  // namespace dtnarrate::survey
