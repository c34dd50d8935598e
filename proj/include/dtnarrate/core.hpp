#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dtnarrate {

// Input that violates a documented contract (range, schema, length).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File or persistence failure.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class RiskLabel { kLowRisk, kHighRisk };

std::string_view to_string(RiskLabel label);

// Accepts "HighRisk"/"LowRisk", "high"/"low" and "1"/"0".
RiskLabel parse_risk_label(std::string_view text);

inline RiskLabel opposite(RiskLabel label) {
  return label == RiskLabel::kHighRisk ? RiskLabel::kLowRisk : RiskLabel::kHighRisk;
}

// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

// Strict full-string parse; nullopt on any trailing garbage.
std::optional<double> parse_number(std::string_view text);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace dtnarrate
