#include <cmath>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "dtnarrate/csv.hpp"
#include "dtnarrate/dataset.hpp"

namespace dtnarrate::dataset {

namespace {

constexpr std::uint64_t kNoiseStream = 0x9E3779B97F4A7C15ULL;
constexpr std::uint64_t kRawStream = 0xD1B54A32D192ED03ULL;

void check_ground_truth(const std::vector<Rule>& rules, const CategorySpec& spec) {
  for (const auto& rule : rules) {
    for (const auto& c : rule.conditions) {
      const FeatureDef& f = spec.feature(c.feature);
      if (!f.is_categorical() || !f.has_label(c.value)) {
        throw ValidationError("ground-truth rule tests undeclared value '" + c.value + "' of '" +
                              c.feature + "'");
      }
    }
  }
  // Two rules can fire on one record unless some shared feature pins
  // different values; such a pair must agree on the outcome.
  for (std::size_t i = 0; i < rules.size(); ++i) {
    for (std::size_t j = i + 1; j < rules.size(); ++j) {
      if (rules[i].outcome == rules[j].outcome) continue;
      bool exclusive = false;
      for (const auto& a : rules[i].conditions) {
        for (const auto& b : rules[j].conditions) {
          if (a.feature == b.feature && a.value != b.value) exclusive = true;
        }
      }
      if (!exclusive) {
        throw ValidationError("ground-truth rules " + std::to_string(i) + " and " +
                              std::to_string(j) + " can match one record with different labels");
      }
    }
  }
}

std::string padded_id(char prefix, std::size_t i, std::size_t width) {
  std::ostringstream ss;
  ss << prefix << std::setw(static_cast<int>(width)) << std::setfill('0') << i;
  return ss.str();
}

double round_to(double v, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(v * scale) / scale;
}

std::string raw_value(const FeatureDef& f, const FeatureValue& v, std::mt19937_64& rng,
                      const CategorySpec& spec) {
  if (f.kind != FeatureKind::kBinned) return value_text(v);
  const std::string& label = std::get<std::string>(v);
  for (const auto& b : f.bins) {
    if (b.label != label) continue;
    std::uniform_real_distribution<double> u(b.lower, b.upper);
    for (int attempt = 0; attempt < 16; ++attempt) {
      const double x = round_to(u(rng), 2);
      if (categorize(x, f.name, spec) == label) return format_number(x);
    }
    return format_number((b.lower + b.upper) / 2.0);
  }
  throw ValidationError("undeclared bin label '" + label + "'");
}

}  // namespace

RecordSet generate_synthetic(const SyntheticOptions& options,
                             std::shared_ptr<const CategorySpec> spec,
                             const std::vector<Rule>& ground_truth) {
  if (!spec) throw ValidationError("no category spec supplied");
  if (options.label_noise < 0.0 || options.label_noise > 1.0) {
    throw ValidationError("label noise must lie in [0, 1]");
  }
  check_ground_truth(ground_truth, *spec);

  std::mt19937_64 feature_rng(options.seed);
  std::mt19937_64 noise_rng(options.seed ^ kNoiseStream);
  std::bernoulli_distribution flip(options.label_noise);
  const std::size_t width = std::to_string(options.n).size();

  RecordSet rs;
  rs.spec = spec;
  rs.records.reserve(options.n);
  for (std::size_t i = 0; i < options.n; ++i) {
    PatientRecord rec;
    rec.id = padded_id('p', i + 1, width);
    for (const auto& f : spec->features()) {
      if (f.is_categorical()) {
        const auto labels = f.labels();
        std::uniform_int_distribution<std::size_t> pick(0, labels.size() - 1);
        rec.features.emplace(f.name, labels[pick(feature_rng)]);
      } else if (f.integer) {
        std::uniform_int_distribution<long long> pick(static_cast<long long>(std::ceil(f.min)),
                                                      static_cast<long long>(std::floor(f.max)));
        rec.features.emplace(f.name, static_cast<double>(pick(feature_rng)));
      } else {
        std::uniform_real_distribution<double> pick(f.min, f.max);
        rec.features.emplace(f.name, std::clamp(round_to(pick(feature_rng), 1), f.min, f.max));
      }
    }
    RiskLabel label = options.default_label;
    for (const auto& rule : ground_truth) {
      if (matches(rule, rec)) {
        label = rule.outcome;
        break;
      }
    }
    if (flip(noise_rng)) label = opposite(label);
    rec.label = label;
    rs.records.push_back(std::move(rec));
  }
  return rs;
}

void write_raw(std::ostream& out, const RecordSet& rs, std::uint64_t seed,
               std::size_t incomplete_rows) {
  if (!rs.spec) throw ValidationError("record set has no spec");
  const CategorySpec& spec = *rs.spec;
  std::mt19937_64 rng(seed ^ kRawStream);

  std::vector<std::string> header{spec.id_column};
  for (const auto& f : spec.features()) header.push_back(f.name);
  header.push_back(spec.label_column);

  auto row_for = [&](const PatientRecord& r, const std::string& id) {
    std::vector<std::string> row{id};
    for (const auto& f : spec.features()) row.push_back(raw_value(f, r.features.at(f.name), rng, spec));
    row.emplace_back(r.label ? (*r.label == RiskLabel::kHighRisk ? "1" : "0") : "");
    return row;
  };

  std::vector<std::vector<std::string>> rows;
  rows.reserve(rs.size() + incomplete_rows);
  for (const auto& r : rs.records) rows.push_back(row_for(r, r.id));

  if (incomplete_rows > 0) {
    if (rs.empty()) throw ValidationError("cannot derive incomplete rows from an empty set");
    const std::size_t width = std::to_string(incomplete_rows).size();
    std::uniform_int_distribution<std::size_t> pick_record(0, rs.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_feature(1, spec.features().size());
    for (std::size_t k = 0; k < incomplete_rows; ++k) {
      auto row = row_for(rs.records[pick_record(rng)], padded_id('x', k + 1, width));
      row[pick_feature(rng)].clear();
      std::uniform_int_distribution<std::size_t> pos(0, rows.size());
      rows.insert(rows.begin() + static_cast<std::ptrdiff_t>(pos(rng)), std::move(row));
    }
  }

  out << csv::join(header) << '\n';
  for (const auto& row : rows) out << csv::join(row) << '\n';
}

GroundTruth ground_truth_from_json_text(const std::string& text) {
  GroundTruth g;
  try {
    const auto doc = nlohmann::json::parse(text);
    for (const auto& [key, _] : doc.items()) {
      if (key != "default_label" && key != "rules") throw ValidationError("unknown field '" + key + "' in rules file");
    }
    if (doc.contains("default_label")) g.default_label = parse_risk_label(doc.at("default_label").get<std::string>());
    for (const auto& jr : doc.at("rules")) {
      Rule r;
      r.outcome = parse_risk_label(jr.at("outcome").get<std::string>());
      for (const auto& jc : jr.at("conditions")) {
        r.conditions.push_back({jc.at("feature").get<std::string>(), jc.at("value").get<std::string>(), false});
      }
      g.rules.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed rules file: ") + e.what());
  }
  return g;
}

GroundTruth load_ground_truth(const std::string& path) { return ground_truth_from_json_text(read_file(path)); }

}  // namespace dtnarrate::dataset
