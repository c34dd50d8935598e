#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "dtnarrate/csv.hpp"
#include "dtnarrate/dataset.hpp"

namespace dtnarrate::dataset {

const std::string& PatientRecord::category(const std::string& feature) const {
  auto it = features.find(feature);
  if (it == features.end()) {
    throw ValidationError("record '" + id + "' has no feature '" + feature + "'");
  }
  if (const auto* s = std::get_if<std::string>(&it->second)) return *s;
  throw ValidationError("feature '" + feature + "' of record '" + id + "' is numeric");
}

double PatientRecord::number(const std::string& feature) const {
  auto it = features.find(feature);
  if (it == features.end()) {
    throw ValidationError("record '" + id + "' has no feature '" + feature + "'");
  }
  if (const auto* d = std::get_if<double>(&it->second)) return *d;
  throw ValidationError("feature '" + feature + "' of record '" + id + "' is categorical");
}

std::string value_text(const FeatureValue& value) {
  if (const auto* s = std::get_if<std::string>(&value)) return *s;
  return format_number(std::get<double>(value));
}

bool matches(const Rule& rule, const PatientRecord& record) {
  for (const auto& c : rule.conditions) {
    auto it = record.features.find(c.feature);
    if (it == record.features.end()) return false;
    const auto* s = std::get_if<std::string>(&it->second);
    if (!s || *s != c.value) return false;
  }
  return true;
}

const PatientRecord& RecordSet::find(const std::string& id) const {
  for (const auto& r : records) {
    if (r.id == id) return r;
  }
  throw ValidationError("no record with id '" + id + "'");
}

void validate_record(const PatientRecord& record, const CategorySpec& spec) {
  if (record.features.size() != spec.features().size()) {
    throw ValidationError("record '" + record.id + "' does not match the feature schema");
  }
  for (const auto& f : spec.features()) {
    auto it = record.features.find(f.name);
    if (it == record.features.end()) {
      throw ValidationError("record '" + record.id + "' lacks feature '" + f.name + "'");
    }
    if (f.is_categorical()) {
      const auto* s = std::get_if<std::string>(&it->second);
      if (!s || !f.has_label(*s)) {
        throw ValidationError("record '" + record.id + "' has an undeclared value for '" +
                              f.name + "'");
      }
    } else {
      const auto* d = std::get_if<double>(&it->second);
      if (!d || *d < f.min || *d > f.max) {
        throw ValidationError("record '" + record.id + "' has an out-of-range value for '" +
                              f.name + "'");
      }
    }
  }
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN" || cell == "?";
}

std::string where(std::size_t line, const std::string& column) {
  return " (line " + std::to_string(line) + ", column '" + column + "')";
}

LoadResult read_table(std::istream& in, std::shared_ptr<const CategorySpec> spec, bool raw) {
  if (!spec) throw ValidationError("no category spec supplied");
  LoadResult result;
  result.records.spec = spec;

  std::string line;
  std::size_t line_no = 0;
  // Skip leading blank lines; the first non-blank line is the header.
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (trim(line).empty()) {
    if (in.bad()) throw IoError("read failure");
    throw ValidationError("table has no header row");
  }

  std::vector<std::string> header = csv::split_line(line);
  for (auto& h : header) h = trim(h);
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!column.emplace(header[i], i).second) {
      throw ValidationError("duplicate column '" + header[i] + "' in header");
    }
  }
  for (const auto& f : spec->features()) {
    if (!column.count(f.name)) throw ValidationError("header is missing feature '" + f.name + "'");
  }
  const auto id_col = column.find(spec->id_column);
  const auto label_col = column.find(spec->label_column);

  std::set<std::string> seen_ids;
  std::size_t row_index = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    ++row_index;
    std::vector<std::string> cells = csv::split_line(line);
    if (cells.size() != header.size()) {
      throw ValidationError("line " + std::to_string(line_no) + " has " +
                            std::to_string(cells.size()) + " fields, header has " +
                            std::to_string(header.size()));
    }
    for (auto& c : cells) c = trim(c);

    PatientRecord rec;
    if (id_col != column.end()) {
      rec.id = cells[id_col->second];
      if (rec.id.empty()) {
        throw ValidationError("empty id" + where(line_no, spec->id_column));
      }
    } else {
      rec.id = std::to_string(row_index);
    }

    std::optional<std::string> missing;
    for (const auto& f : spec->features()) {
      const std::string& cell = cells[column.at(f.name)];
      if (is_missing(cell)) {
        missing = f.name;
        break;
      }
      const bool numeric_input = f.kind == FeatureKind::kNumeric || (raw && f.kind == FeatureKind::kBinned);
      if (numeric_input) {
        const auto value = parse_number(cell);
        if (!value) {
          const bool is_label = f.kind == FeatureKind::kBinned && f.has_label(cell);
          throw ValidationError("non-numeric value '" + cell + "' in numeric column" + where(line_no, f.name) +
                                (is_label ? "; the input already looks categorized" : ""));
        }
        if (f.kind == FeatureKind::kBinned) {
          try {
            rec.features.emplace(f.name, categorize(*value, f.name, *spec));
          } catch (const ValidationError& e) {
            throw ValidationError(e.what() + where(line_no, f.name));
          }
        } else {
          if (*value < f.min || *value > f.max) {
            throw ValidationError("value " + cell + " outside [" + format_number(f.min) + ", " +
                                  format_number(f.max) + "]" + where(line_no, f.name));
          }
          if (f.integer && std::floor(*value) != *value) {
            throw ValidationError("non-integer value '" + cell + "'" + where(line_no, f.name));
          }
          rec.features.emplace(f.name, *value);
        }
      } else {
        if (!f.has_label(cell)) {
          throw ValidationError("undeclared category '" + cell + "'" + where(line_no, f.name));
        }
        rec.features.emplace(f.name, cell);
      }
    }
    if (missing) {
      ++result.drops.dropped;
      result.drops.rows.push_back({line_no, *missing});
      continue;
    }
    if (label_col != column.end() && !is_missing(cells[label_col->second])) {
      try {
        rec.label = parse_risk_label(cells[label_col->second]);
      } catch (const ValidationError& e) {
        throw ValidationError(e.what() + where(line_no, spec->label_column));
      }
    }
    if (!seen_ids.insert(rec.id).second) {
      throw ValidationError("duplicate id '" + rec.id + "'" + where(line_no, spec->id_column));
    }
    result.records.records.push_back(std::move(rec));
  }
  if (in.bad()) throw IoError("read failure");
  return result;
}

std::ifstream open_input(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

}  // namespace

LoadResult read_records(std::istream& in, std::shared_ptr<const CategorySpec> spec) {
  return read_table(in, std::move(spec), true);
}

LoadResult load_records(const std::string& path, std::shared_ptr<const CategorySpec> spec) {
  auto in = open_input(path);
  return read_records(in, std::move(spec));
}

LoadResult read_categorized(std::istream& in, std::shared_ptr<const CategorySpec> spec) {
  return read_table(in, std::move(spec), false);
}

LoadResult load_categorized(const std::string& path, std::shared_ptr<const CategorySpec> spec) {
  auto in = open_input(path);
  return read_categorized(in, std::move(spec));
}

void write_categorized(std::ostream& out, const RecordSet& rs) {
  if (!rs.spec) throw ValidationError("record set has no spec");
  std::vector<std::string> header{rs.spec->id_column};
  for (const auto& f : rs.spec->features()) header.push_back(f.name);
  header.push_back(rs.spec->label_column);
  out << csv::join(header) << '\n';
  for (const auto& r : rs.records) {
    std::vector<std::string> row{r.id};
    for (const auto& f : rs.spec->features()) row.push_back(value_text(r.features.at(f.name)));
    row.emplace_back(r.label ? std::string(to_string(*r.label)) : std::string());
    out << csv::join(row) << '\n';
  }
}

std::string serialize_records(const RecordSet& rs) {
  std::ostringstream ss;
  write_categorized(ss, rs);
  return ss.str();
}

std::string format_drop_report(const DropReport& report) {
  std::ostringstream ss;
  ss << "dropped " << report.dropped << " row(s) with missing values\n";
  for (const auto& row : report.rows) {
    ss << "  line " << row.line << ": missing " << row.feature << '\n';
  }
  return ss.str();
}

std::string Cohort::describe() const {
  return std::to_string(age_min) + " - " + std::to_string(age_max) + ", " +
         (gender ? *gender : std::string("All"));
}

RecordSet filter_cohort(const RecordSet& rs, const Cohort& cohort) {
  if (!rs.spec) throw ValidationError("record set has no spec");
  const FeatureDef& age = rs.spec->feature(rs.spec->age_feature);
  if (age.kind != FeatureKind::kNumeric) throw ValidationError("age feature must be numeric");
  if (cohort.gender) {
    const FeatureDef& gender = rs.spec->feature(rs.spec->gender_feature);
    if (!gender.has_label(*cohort.gender)) {
      throw ValidationError("unknown gender category '" + *cohort.gender + "'");
    }
  }
  RecordSet out;
  out.spec = rs.spec;
  out.warnings = rs.warnings;
  for (const auto& r : rs.records) {
    const double a = r.number(rs.spec->age_feature);
    if (a < cohort.age_min || a > cohort.age_max) continue;
    if (cohort.gender && r.category(rs.spec->gender_feature) != *cohort.gender) continue;
    out.records.push_back(r);
  }
  const std::string warning = "cohort " + cohort.describe() + " is empty";
  if (out.empty() && std::find(out.warnings.begin(), out.warnings.end(), warning) == out.warnings.end()) {
    out.warnings.push_back(warning);
  }
  return out;
}

}  // namespace dtnarrate::dataset
