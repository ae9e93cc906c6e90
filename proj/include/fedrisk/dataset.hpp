#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fedrisk/csv.hpp"
#include "fedrisk/error.hpp"
#include "fedrisk/matrix.hpp"
#include "fedrisk/random.hpp"

namespace fedrisk {

// One student's registration on one module presentation. Ordering is by
// module, then presentation, then student, which is also the row order of
// every assembled dataset.
struct RegistrationKey {
  std::string code_module;
  std::string code_presentation;
  std::int64_t id_student = 0;

  auto operator<=>(const RegistrationKey&) const = default;
  bool operator==(const RegistrationKey&) const = default;
};

// Rows created by oversampling carry this student id and presentation.
inline constexpr std::int64_t kSyntheticStudentId = -1;
inline constexpr std::string_view kSyntheticPresentation = "SYNTHETIC";

inline bool is_synthetic(const RegistrationKey& key) {
  return key.id_student == kSyntheticStudentId && key.code_presentation == kSyntheticPresentation;
}

inline constexpr std::array<std::string_view, 8> kDemographicColumns = {
    "gender",   "region",    "highest_education",    "imd_band",
    "age_band", "num_of_prev_attempts", "studied_credits", "disability"};

// Demographic columns that are numeric rather than categorical.
inline bool is_numeric_demographic(std::string_view column) {
  return column == "num_of_prev_attempts" || column == "studied_credits";
}

struct StudentInfoRow {
  RegistrationKey key;
  std::string final_result;
  std::array<std::string, kDemographicColumns.size()> demographics;  // "" when missing
};

struct StudentVleRow {
  RegistrationKey key;
  std::int64_t id_site = 0;
  int date = 0;
  std::int64_t sum_click = 0;
};

struct VleMetaRow {
  std::int64_t id_site = 0;
  std::string code_module;
  std::string code_presentation;
  std::string activity_type;
};

struct AssessmentMetaRow {
  std::int64_t id_assessment = 0;
  std::string code_module;
  std::string code_presentation;
  std::string assessment_type;
  std::optional<int> date;  // deadline, days from module start
  double weight = 0.0;
};

struct StudentAssessmentRow {
  std::int64_t id_assessment = 0;
  std::int64_t id_student = 0;
  std::optional<int> date_submitted;
  int is_banked = 0;
  std::optional<double> score;
};

// Per-table counts of rows that were dropped, keyed by reason, plus free
// text warnings from later stages.
struct Diagnostics {
  std::map<std::string, std::map<std::string, std::size_t>> skipped;
  std::vector<std::string> warnings;

  void skip(const std::string& table, const std::string& reason) { ++skipped[table][reason]; }
  void warn(std::string message) { warnings.push_back(std::move(message)); }

  std::size_t skipped_count(const std::string& table) const {
    std::size_t n = 0;
    if (auto it = skipped.find(table); it != skipped.end()) {
      for (const auto& [reason, count] : it->second) n += count;
    }
    return n;
  }

  std::size_t total_skipped() const {
    std::size_t n = 0;
    for (const auto& [table, reasons] : skipped) n += skipped_count(table);
    return n;
  }
};

struct RawTables {
  std::vector<StudentInfoRow> student_info;
  std::vector<StudentVleRow> student_vle;
  std::vector<VleMetaRow> vle_meta;
  std::vector<AssessmentMetaRow> assessments_meta;
  std::vector<StudentAssessmentRow> student_assessment;
  Diagnostics diagnostics;
};

struct LabeledDataset {
  std::vector<std::string> feature_names;
  Matrix X;
  std::vector<int> y;
  std::vector<RegistrationKey> keys;

  std::size_t size() const noexcept { return y.size(); }
  std::size_t feature_count() const noexcept { return feature_names.size(); }
  bool empty() const noexcept { return y.empty(); }

  std::size_t positives() const {
    return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
  }

  double positive_fraction() const {
    return empty() ? 0.0 : static_cast<double>(positives()) / static_cast<double>(size());
  }

  // Empty dataset sharing this one's feature names.
  LabeledDataset empty_like() const {
    LabeledDataset out;
    out.feature_names = feature_names;
    out.X = Matrix(0, feature_count());
    return out;
  }

  void push_back(std::span<const double> x, int label, RegistrationKey key) {
    X.append_row(x);
    y.push_back(label);
    keys.push_back(std::move(key));
  }

  LabeledDataset subset(std::span<const std::size_t> rows) const {
    LabeledDataset out = empty_like();
    out.X.reserve_rows(rows.size());
    for (auto r : rows) out.push_back(X.row(r), y[r], keys[r]);
    return out;
  }

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

// ---------------------------------------------------------------------------
// Ingestion

namespace detail {

inline std::vector<std::string> oulad_header(std::string_view table) {
  if (table == "studentInfo") {
    return {"code_module", "code_presentation", "id_student", "gender", "region",
            "highest_education", "imd_band", "age_band", "num_of_prev_attempts",
            "studied_credits", "disability", "final_result"};
  }
  if (table == "studentVle") {
    return {"code_module", "code_presentation", "id_student", "id_site", "date", "sum_click"};
  }
  if (table == "vle") {
    return {"id_site", "code_module", "code_presentation", "activity_type", "week_from", "week_to"};
  }
  if (table == "assessments") {
    return {"code_module", "code_presentation", "id_assessment", "assessment_type", "date",
            "weight"};
  }
  if (table == "studentAssessment") {
    return {"id_assessment", "id_student", "date_submitted", "is_banked", "score"};
  }
  throw std::invalid_argument("unknown OULAD table " + std::string(table));
}

// Columns the loader actually reads. week_from/week_to are optional.
inline std::vector<std::string> required_columns(std::string_view table) {
  auto cols = oulad_header(table);
  if (table == "vle") cols.resize(4);
  return cols;
}

inline csv::Reader open_table(const std::filesystem::path& dir, std::string_view table) {
  const auto path = dir / (std::string(table) + ".csv");
  if (!std::filesystem::exists(path)) {
    throw DataError("missing OULAD file: " + path.filename().string() + " (looked in " +
                    dir.string() + ")");
  }
  return csv::Reader(path, std::string(table));
}

inline std::vector<std::size_t> column_indices(const csv::Reader& reader) {
  std::vector<std::size_t> idx;
  for (const auto& col : required_columns(reader.table())) idx.push_back(reader.column(col));
  return idx;
}

inline std::string field_or_empty(std::string_view f) {
  return csv::is_missing(f) ? std::string{} : std::string(csv::trim(f));
}

}  // namespace detail

/// Reads the five OULAD tables from `dir`. Unparseable or inconsistent rows
/// are skipped and counted in the returned diagnostics; a missing file, a
/// missing header column or a duplicated registration is fatal.
inline RawTables load_oulad(const std::filesystem::path& dir) {
  RawTables raw;
  auto& diag = raw.diagnostics;
  std::vector<std::string> f;

  {
    auto reader = detail::open_table(dir, "vle");
    const auto c = detail::column_indices(reader);
    while (reader.next(f)) {
      auto id = csv::parse_number<std::int64_t>(f[c[0]]);
      if (!id) {
        diag.skip("vle", "unparseable id_site");
        continue;
      }
      raw.vle_meta.push_back({*id, std::string(csv::trim(f[c[1]])),
                              std::string(csv::trim(f[c[2]])), std::string(csv::trim(f[c[3]]))});
    }
  }
  std::set<std::int64_t> site_ids;
  for (const auto& v : raw.vle_meta) site_ids.insert(v.id_site);

  {
    auto reader = detail::open_table(dir, "assessments");
    const auto c = detail::column_indices(reader);
    while (reader.next(f)) {
      auto id = csv::parse_number<std::int64_t>(f[c[2]]);
      if (!id) {
        diag.skip("assessments", "unparseable id_assessment");
        continue;
      }
      AssessmentMetaRow row;
      row.id_assessment = *id;
      row.code_module = std::string(csv::trim(f[c[0]]));
      row.code_presentation = std::string(csv::trim(f[c[1]]));
      row.assessment_type = std::string(csv::trim(f[c[3]]));
      if (!csv::is_missing(f[c[4]])) {
        row.date = csv::parse_number<int>(f[c[4]]);
        if (!row.date) {
          diag.skip("assessments", "unparseable date");
          continue;
        }
      }
      row.weight = csv::parse_number<double>(f[c[5]]).value_or(0.0);
      raw.assessments_meta.push_back(std::move(row));
    }
  }
  std::set<std::int64_t> assessment_ids;
  for (const auto& a : raw.assessments_meta) assessment_ids.insert(a.id_assessment);

  {
    auto reader = detail::open_table(dir, "studentInfo");
    const auto c = detail::column_indices(reader);
    std::set<RegistrationKey> seen;
    while (reader.next(f)) {
      auto id = csv::parse_number<std::int64_t>(f[c[2]]);
      if (!id) {
        diag.skip("studentInfo", "unparseable id_student");
        continue;
      }
      StudentInfoRow row;
      row.key = {std::string(csv::trim(f[c[0]])), std::string(csv::trim(f[c[1]])), *id};
      for (std::size_t d = 0; d < kDemographicColumns.size(); ++d) {
        row.demographics[d] = detail::field_or_empty(f[c[3 + d]]);
      }
      row.final_result = std::string(csv::trim(f[c[11]]));
      if (!seen.insert(row.key).second) {
        throw DataError("table studentInfo: duplicate registration (" + row.key.code_module + ", " +
                        row.key.code_presentation + ", " + std::to_string(row.key.id_student) +
                        ") at line " + std::to_string(reader.line_number()));
      }
      raw.student_info.push_back(std::move(row));
    }
  }

  {
    auto reader = detail::open_table(dir, "studentVle");
    const auto c = detail::column_indices(reader);
    while (reader.next(f)) {
      auto id = csv::parse_number<std::int64_t>(f[c[2]]);
      auto site = csv::parse_number<std::int64_t>(f[c[3]]);
      auto date = csv::parse_number<int>(f[c[4]]);
      auto clicks = csv::parse_number<std::int64_t>(f[c[5]]);
      if (!id || !site || !date || !clicks) {
        diag.skip("studentVle", "unparseable field");
        continue;
      }
      if (*clicks < 0) {
        diag.skip("studentVle", "negative sum_click");
        continue;
      }
      if (!site_ids.contains(*site)) {
        diag.skip("studentVle", "unknown id_site");
        continue;
      }
      raw.student_vle.push_back(
          {{std::string(csv::trim(f[c[0]])), std::string(csv::trim(f[c[1]])), *id}, *site, *date,
           *clicks});
    }
  }

  {
    auto reader = detail::open_table(dir, "studentAssessment");
    const auto c = detail::column_indices(reader);
    while (reader.next(f)) {
      auto aid = csv::parse_number<std::int64_t>(f[c[0]]);
      auto sid = csv::parse_number<std::int64_t>(f[c[1]]);
      if (!aid || !sid) {
        diag.skip("studentAssessment", "unparseable id");
        continue;
      }
      if (!assessment_ids.contains(*aid)) {
        diag.skip("studentAssessment", "unknown id_assessment");
        continue;
      }
      StudentAssessmentRow row;
      row.id_assessment = *aid;
      row.id_student = *sid;
      if (!csv::is_missing(f[c[2]])) {
        row.date_submitted = csv::parse_number<int>(f[c[2]]);
        if (!row.date_submitted) {
          diag.skip("studentAssessment", "unparseable date_submitted");
          continue;
        }
      }
      row.is_banked = csv::parse_number<int>(f[c[3]]).value_or(0);
      if (!csv::is_missing(f[c[4]])) {
        row.score = csv::parse_number<double>(f[c[4]]);
        if (!row.score) {
          diag.skip("studentAssessment", "unparseable score");
          continue;
        }
        if (*row.score < 0.0 || *row.score > 100.0) {
          diag.skip("studentAssessment", "score out of range");
          continue;
        }
      }
      raw.student_assessment.push_back(row);
    }
  }
  return raw;
}

/// Writes `raw` as the five OULAD CSV files in `dir` (created if needed).
inline void write_oulad(const RawTables& raw, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());

  auto opt = [](const auto& o) { return o ? std::to_string(*o) : std::string("?"); };

  {
    csv::Writer w(dir / "studentInfo.csv");
    w.row(detail::oulad_header("studentInfo"));
    for (const auto& r : raw.student_info) {
      std::vector<std::string> fields{r.key.code_module, r.key.code_presentation,
                                      std::to_string(r.key.id_student)};
      for (const auto& d : r.demographics) fields.push_back(d.empty() ? "?" : d);
      fields.push_back(r.final_result);
      w.row(fields);
    }
  }
  {
    csv::Writer w(dir / "studentVle.csv");
    w.row(detail::oulad_header("studentVle"));
    for (const auto& r : raw.student_vle) {
      w.row(r.key.code_module, r.key.code_presentation, r.key.id_student, r.id_site, r.date,
            r.sum_click);
    }
  }
  {
    csv::Writer w(dir / "vle.csv");
    w.row(detail::oulad_header("vle"));
    for (const auto& r : raw.vle_meta) {
      w.row(r.id_site, r.code_module, r.code_presentation, r.activity_type, "?", "?");
    }
  }
  {
    csv::Writer w(dir / "assessments.csv");
    w.row(detail::oulad_header("assessments"));
    for (const auto& r : raw.assessments_meta) {
      w.row(r.code_module, r.code_presentation, r.id_assessment, r.assessment_type, opt(r.date),
            r.weight);
    }
  }
  {
    csv::Writer w(dir / "studentAssessment.csv");
    w.row(detail::oulad_header("studentAssessment"));
    for (const auto& r : raw.student_assessment) {
      w.row(r.id_assessment, r.id_student, opt(r.date_submitted), r.is_banked,
            r.score ? csv::format_double(*r.score) : std::string("?"));
    }
  }
}

// ---------------------------------------------------------------------------
// Target and feature families

/// Fail -> 1, Pass/Distinction -> 0, Withdrawn -> dropped.
inline std::map<RegistrationKey, int> label_students(std::span<const StudentInfoRow> student_info) {
  std::map<RegistrationKey, int> labels;
  for (const auto& row : student_info) {
    const auto result = csv::trim(row.final_result);
    if (result == "Fail") {
      labels[row.key] = 1;
    } else if (result == "Pass" || result == "Distinction") {
      labels[row.key] = 0;
    } else if (result != "Withdrawn") {
      throw DataError("unknown final_result '" + std::string(result) + "' for student " +
                      std::to_string(row.key.id_student));
    }
  }
  return labels;
}

struct EarlyPerformance {
  double average_score = 0.0;
  std::int64_t count = 0;

  bool operator==(const EarlyPerformance&) const = default;
};

inline constexpr int kDefaultEarlyWindowDays = 90;

/// Early academic performance per registration. A submission counts when
/// its date (date_submitted, else the assessment deadline) is <= window_days.
/// The count includes unscored submissions; the mean is over scored ones.
inline std::map<RegistrationKey, EarlyPerformance> early_performance_features(
    std::span<const AssessmentMetaRow> assessments_meta,
    std::span<const StudentAssessmentRow> student_assessment,
    int window_days = kDefaultEarlyWindowDays, Diagnostics* diag = nullptr) {
  if (window_days <= 0) throw ConfigError("window_days must be positive");

  std::map<std::int64_t, const AssessmentMetaRow*> by_id;
  for (const auto& a : assessments_meta) by_id[a.id_assessment] = &a;

  struct Acc {
    double score_sum = 0.0;
    std::int64_t scored = 0;
    std::int64_t count = 0;
  };
  std::map<RegistrationKey, Acc> acc;
  for (const auto& s : student_assessment) {
    auto it = by_id.find(s.id_assessment);
    if (it == by_id.end()) {
      if (diag) diag->skip("studentAssessment", "unknown id_assessment");
      continue;
    }
    const auto& meta = *it->second;
    const auto day = s.date_submitted ? s.date_submitted : meta.date;
    if (!day) {
      if (diag) diag->skip("studentAssessment", "no submission or deadline date");
      continue;
    }
    if (*day > window_days) continue;
    auto& a = acc[{meta.code_module, meta.code_presentation, s.id_student}];
    ++a.count;
    if (s.score) {
      a.score_sum += *s.score;
      ++a.scored;
    }
  }

  std::map<RegistrationKey, EarlyPerformance> out;
  for (const auto& [key, a] : acc) {
    out[key] = {a.scored > 0 ? a.score_sum / static_cast<double>(a.scored) : 0.0, a.count};
  }
  return out;
}

struct EngagementVolume {
  std::int64_t total_clicks = 0;
  std::int64_t distinct_days_active = 0;

  bool operator==(const EngagementVolume&) const = default;
};

/// Total clicks and number of distinct active days. `max_day` restricts the
/// clickstream to date <= max_day; by default the whole presentation counts.
inline std::map<RegistrationKey, EngagementVolume> engagement_volume_features(
    std::span<const StudentVleRow> student_vle, std::optional<int> max_day = std::nullopt) {
  std::map<RegistrationKey, std::pair<std::int64_t, std::set<int>>> acc;
  for (const auto& r : student_vle) {
    if (max_day && r.date > *max_day) continue;
    auto& [clicks, days] = acc[r.key];
    clicks += r.sum_click;
    days.insert(r.date);
  }
  std::map<RegistrationKey, EngagementVolume> out;
  for (const auto& [key, a] : acc) {
    out[key] = {a.first, static_cast<std::int64_t>(a.second.size())};
  }
  return out;
}

inline constexpr std::string_view kUnknownActivity = "unknown";

/// Clicks per activity type. Sites missing from vle_meta are counted under
/// "unknown".
inline std::map<RegistrationKey, std::map<std::string, std::int64_t>> engagement_quality_features(
    std::span<const StudentVleRow> student_vle, std::span<const VleMetaRow> vle_meta,
    std::optional<int> max_day = std::nullopt) {
  std::map<std::int64_t, std::string_view> activity;
  for (const auto& v : vle_meta) activity.emplace(v.id_site, v.activity_type);

  std::map<RegistrationKey, std::map<std::string, std::int64_t>> out;
  for (const auto& r : student_vle) {
    if (max_day && r.date > *max_day) continue;
    auto it = activity.find(r.id_site);
    const std::string type(it == activity.end() ? kUnknownActivity : it->second);
    out[r.key][type] += r.sum_click;
  }
  return out;
}

inline const std::vector<std::string>& base_feature_names() {
  static const std::vector<std::string> names{"average_early_score", "early_assessments_count",
                                              "total_clicks", "distinct_days_active"};
  return names;
}

inline std::string activity_column(std::string_view activity_type) {
  return "clicks_on_" + std::string(activity_type);
}

/// Joins the label map with the three feature families. Missing entries are
/// zero. Activity columns are the union of types observed in `quality` and
/// `known_activity_types`, in lexicographic order.
inline LabeledDataset assemble_dataset(
    const std::map<RegistrationKey, int>& labels,
    const std::map<RegistrationKey, EarlyPerformance>& early,
    const std::map<RegistrationKey, EngagementVolume>& volume,
    const std::map<RegistrationKey, std::map<std::string, std::int64_t>>& quality,
    const std::set<std::string>& known_activity_types = {}) {
  if (labels.empty()) throw DataError("assemble_dataset: no labeled registrations");

  std::set<std::string> types = known_activity_types;
  for (const auto& [key, by_type] : quality) {
    for (const auto& [type, clicks] : by_type) types.insert(type);
  }

  LabeledDataset ds;
  ds.feature_names = base_feature_names();
  std::map<std::string, std::size_t> type_column;
  for (const auto& t : types) {
    type_column[t] = ds.feature_names.size();
    ds.feature_names.push_back(activity_column(t));
  }
  ds.X = Matrix(0, ds.feature_names.size());
  ds.X.reserve_rows(labels.size());

  std::vector<double> row(ds.feature_names.size());
  for (const auto& [key, label] : labels) {
    std::fill(row.begin(), row.end(), 0.0);
    if (auto it = early.find(key); it != early.end()) {
      row[0] = it->second.average_score;
      row[1] = static_cast<double>(it->second.count);
    }
    if (auto it = volume.find(key); it != volume.end()) {
      row[2] = static_cast<double>(it->second.total_clicks);
      row[3] = static_cast<double>(it->second.distinct_days_active);
    }
    if (auto it = quality.find(key); it != quality.end()) {
      for (const auto& [type, clicks] : it->second) {
        row[type_column.at(type)] = static_cast<double>(clicks);
      }
    }
    ds.push_back(row, label, key);
  }
  return ds;
}

/// Appends demographic columns: one-hot "demo_<column>=<category>" for the
/// categorical ones, the raw value for numeric ones. Missing values are 0.
inline void append_demographics(LabeledDataset& ds, std::span<const StudentInfoRow> student_info) {
  std::map<RegistrationKey, const StudentInfoRow*> by_key;
  for (const auto& r : student_info) by_key[r.key] = &r;

  std::vector<std::string> names;
  std::vector<std::pair<std::size_t, std::optional<std::string>>> spec;  // column, category
  for (std::size_t c = 0; c < kDemographicColumns.size(); ++c) {
    const std::string col(kDemographicColumns[c]);
    if (is_numeric_demographic(col)) {
      names.push_back("demo_" + col);
      spec.emplace_back(c, std::nullopt);
      continue;
    }
    std::set<std::string> categories;
    for (const auto& key : ds.keys) {
      auto it = by_key.find(key);
      if (it != by_key.end() && !it->second->demographics[c].empty()) {
        categories.insert(it->second->demographics[c]);
      }
    }
    for (const auto& cat : categories) {
      names.push_back("demo_" + col + "=" + cat);
      spec.emplace_back(c, cat);
    }
  }

  Matrix widened(0, ds.feature_count() + names.size());
  widened.reserve_rows(ds.size());
  std::vector<double> row(widened.cols());
  for (std::size_t r = 0; r < ds.size(); ++r) {
    std::fill(row.begin(), row.end(), 0.0);
    std::copy(ds.X.row(r).begin(), ds.X.row(r).end(), row.begin());
    auto it = by_key.find(ds.keys[r]);
    if (it != by_key.end()) {
      for (std::size_t j = 0; j < spec.size(); ++j) {
        const auto& value = it->second->demographics[spec[j].first];
        double& cell = row[ds.feature_count() + j];
        if (spec[j].second) {
          cell = value == *spec[j].second ? 1.0 : 0.0;
        } else {
          cell = csv::parse_number<double>(value).value_or(0.0);
        }
      }
    }
    widened.append_row(row);
  }
  ds.X = std::move(widened);
  ds.feature_names.insert(ds.feature_names.end(), names.begin(), names.end());
}

struct FeatureOptions {
  int early_window_days = kDefaultEarlyWindowDays;
  bool early_clicks_only = false;  // restrict clickstream features to the early window
  bool include_demographics = false;
};

/// Full pipeline: label, engineer the three feature families, assemble.
inline LabeledDataset build_dataset(RawTables& raw, const FeatureOptions& opts = {}) {
  const auto labels = label_students(raw.student_info);
  const auto early = early_performance_features(raw.assessments_meta, raw.student_assessment,
                                                opts.early_window_days, &raw.diagnostics);
  const std::optional<int> max_day =
      opts.early_clicks_only ? std::optional<int>(opts.early_window_days) : std::nullopt;
  const auto volume = engagement_volume_features(raw.student_vle, max_day);
  const auto quality = engagement_quality_features(raw.student_vle, raw.vle_meta, max_day);
  std::set<std::string> types;
  for (const auto& v : raw.vle_meta) types.insert(v.activity_type);
  auto ds = assemble_dataset(labels, early, volume, quality, types);
  if (opts.include_demographics) append_demographics(ds, raw.student_info);
  return ds;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SyntheticCorpusConfig {
  int n_modules = 7;
  int students_per_module = 300;
  double fail_rate = 0.3;
  double signal_strength = 1.5;
  std::uint64_t seed = 1;

  void validate() const {
    if (n_modules < 1) throw ConfigError("synthetic corpus: n_modules must be >= 1");
    if (students_per_module < 10) {
      throw ConfigError("synthetic corpus: students_per_module must be >= 10");
    }
    if (!(fail_rate > 0.0 && fail_rate < 1.0)) {
      throw ConfigError("synthetic corpus: fail_rate must be in (0, 1)");
    }
    if (!(signal_strength >= 0.0)) {
      throw ConfigError("synthetic corpus: signal_strength must be non-negative");
    }
  }
};

inline std::string synthetic_module_code(int index) {
  if (index < 26) return std::string(3, static_cast<char>('A' + index));
  return "M" + std::to_string(index);
}

/// OULAD-shaped corpus with a planted signal. At-risk students have their
/// latent ability and log-engagement shifted down by `signal_strength`
/// standard deviations. Roughly 10% of students are Withdrawn; among the
/// rest the Fail rate is `fail_rate`.
inline RawTables generate_synthetic_corpus(const SyntheticCorpusConfig& cfg) {
  cfg.validate();
  RawTables raw;
  Rng rng(derive_seed(cfg.seed, "synthetic-corpus"));

  static constexpr std::array<std::string_view, 7> kActivities = {
      "forum", "homepage", "oucontent", "quiz", "resource", "subpage", "url"};
  static constexpr std::array<double, 7> kActivityShare = {0.15, 0.20, 0.30, 0.12,
                                                           0.10, 0.08, 0.05};
  static constexpr std::array<int, 5> kTmaDeadlines = {19, 54, 89, 124, 159};
  static constexpr int kExamDay = 241;
  static constexpr int kFirstDay = -10;
  static constexpr int kLastDay = 240;
  static constexpr std::array<std::string_view, 4> kRegions = {
      "East Anglian Region", "London Region", "Scotland", "Wales"};
  static constexpr std::array<std::string_view, 3> kEducation = {
      "A Level or Equivalent", "HE Qualification", "Lower Than A Level"};
  static constexpr std::array<std::string_view, 4> kImd = {"0-10%", "10-20", "50-60%", "90-100%"};
  static constexpr std::array<std::string_view, 3> kAge = {"0-35", "35-55", "55<="};
  const std::string presentation = "2014J";

  std::int64_t next_site = 500000;
  std::int64_t next_assessment = 1000;
  for (int m = 0; m < cfg.n_modules; ++m) {
    const auto module = synthetic_module_code(m);

    std::vector<std::int64_t> sites;  // two sites per activity type
    for (const auto& type : kActivities) {
      for (int s = 0; s < 2; ++s) {
        raw.vle_meta.push_back({next_site, module, presentation, std::string(type)});
        sites.push_back(next_site++);
      }
    }
    std::vector<std::int64_t> tma_ids;
    for (int deadline : kTmaDeadlines) {
      raw.assessments_meta.push_back({next_assessment, module, presentation, "TMA", deadline, 20.0});
      tma_ids.push_back(next_assessment++);
    }
    const std::int64_t exam_id = next_assessment++;
    raw.assessments_meta.push_back({exam_id, module, presentation, "Exam", std::nullopt, 100.0});

    for (int i = 0; i < cfg.students_per_module; ++i) {
      const std::int64_t id = 10000 + static_cast<std::int64_t>(m) * cfg.students_per_module + i;
      const RegistrationKey key{module, presentation, id};

      const bool withdrawn = rng.uniform() < 0.1;
      const bool at_risk = !withdrawn && rng.uniform() < cfg.fail_rate;
      const double distinction_draw = rng.uniform();
      StudentInfoRow info;
      info.key = key;
      info.final_result = withdrawn ? "Withdrawn"
                          : at_risk ? "Fail"
                          : distinction_draw < 0.25 ? "Distinction"
                                                    : "Pass";
      info.demographics = {rng.uniform() < 0.5 ? "M" : "F",
                           std::string(kRegions[rng.below(kRegions.size())]),
                           std::string(kEducation[rng.below(kEducation.size())]),
                           rng.uniform() < 0.05 ? "" : std::string(kImd[rng.below(kImd.size())]),
                           std::string(kAge[rng.below(kAge.size())]),
                           std::to_string(rng.below(3)),
                           rng.uniform() < 0.5 ? "60" : "120",
                           rng.uniform() < 0.1 ? "Y" : "N"};
      raw.student_info.push_back(std::move(info));

      const double shift = at_risk ? cfg.signal_strength : 0.0;
      const double ability = rng.normal() - shift;
      const double mean_score = 65.0 + 15.0 * ability;
      const double log_engagement = 0.5 * (rng.normal() - shift);
      const double active_prob = std::clamp(0.12 * std::exp(log_engagement), 0.005, 0.9);
      const int last_day = withdrawn ? 120 : kLastDay;

      auto draw_score = [&] {
        return std::clamp(std::round(mean_score + 8.0 * rng.normal()), 0.0, 100.0);
      };
      for (std::size_t a = 0; a < tma_ids.size(); ++a) {
        const bool submits = rng.uniform() < 0.9 && kTmaDeadlines[a] <= last_day;
        const int submitted = kTmaDeadlines[a] - static_cast<int>(rng.below(6));
        const double score = draw_score();
        if (submits) raw.student_assessment.push_back({tma_ids[a], id, submitted, 0, score});
      }
      if (!withdrawn) {
        const double score = draw_score();
        raw.student_assessment.push_back({exam_id, id, kExamDay, 0, score});
      }

      for (int day = kFirstDay; day <= last_day; ++day) {
        if (rng.uniform() >= active_prob) continue;
        const auto sessions = 1 + rng.below(2);
        for (std::uint64_t s = 0; s < sessions; ++s) {
          double pick = rng.uniform();
          std::size_t type = 0;
          while (type + 1 < kActivityShare.size() && pick >= kActivityShare[type]) {
            pick -= kActivityShare[type];
            ++type;
          }
          const auto site = sites[2 * type + rng.below(2)];
          std::int64_t clicks = 1;
          while (clicks < 50 && rng.uniform() < 0.6) ++clicks;
          raw.student_vle.push_back({key, site, day, clicks});
        }
      }
    }
  }
  return raw;
}

// ---------------------------------------------------------------------------
// Reporting

struct DemographicCount {
  std::string column;
  std::string category;
  std::size_t count = 0;
  double percentage = 0.0;
};

inline constexpr std::string_view kMissingCategory = "<missing>";

/// Category counts per demographic column, columns in their canonical
/// order, categories lexicographic. Missing values form their own category
/// so each column totals the row count.
inline std::vector<DemographicCount> summarize_demographics(
    std::span<const StudentInfoRow> student_info) {
  std::vector<DemographicCount> out;
  if (student_info.empty()) return out;
  const double total = static_cast<double>(student_info.size());
  for (std::size_t c = 0; c < kDemographicColumns.size(); ++c) {
    std::map<std::string, std::size_t> counts;
    for (const auto& r : student_info) {
      ++counts[r.demographics[c].empty() ? std::string(kMissingCategory) : r.demographics[c]];
    }
    for (const auto& [cat, n] : counts) {
      out.push_back({std::string(kDemographicColumns[c]), cat, n,
                     100.0 * static_cast<double>(n) / total});
    }
  }
  return out;
}

}  // namespace fedrisk
