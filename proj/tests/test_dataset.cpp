#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "fedrisk/dataset.hpp"
#include "test_support.hpp"

using namespace fedrisk;
using fedrisk::test_support::info_row;
using fedrisk::test_support::scratch_dir;
using fedrisk::test_support::write_oulad_dir;

namespace {

RegistrationKey key(std::int64_t id, std::string module = "AAA") {
  return {std::move(module), "2013J", id};
}

AssessmentMetaRow assessment(std::int64_t id, std::optional<int> deadline,
                             std::string module = "AAA") {
  return {id, std::move(module), "2013J", "TMA", deadline, 10.0};
}

}  // namespace

// ---------------------------------------------------------------------------
// load_oulad

TEST(LoadOulad, HeaderOnlyTablesLoadEmpty) {
  const auto dir = scratch_dir();
  write_oulad_dir(dir);
  const auto raw = load_oulad(dir);
  EXPECT_TRUE(raw.student_info.empty());
  EXPECT_TRUE(raw.student_vle.empty());
  EXPECT_TRUE(raw.vle_meta.empty());
  EXPECT_TRUE(raw.assessments_meta.empty());
  EXPECT_TRUE(raw.student_assessment.empty());
  EXPECT_EQ(raw.diagnostics.total_skipped(), 0u);
}

TEST(LoadOulad, MissingFileNamesTheFile) {
  const auto dir = scratch_dir();
  write_oulad_dir(dir);
  std::filesystem::remove(dir / "studentVle.csv");
  try {
    load_oulad(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("studentVle.csv"), std::string::npos) << e.what();
  }
}

TEST(LoadOulad, HeaderMismatchNamesTableAndColumn) {
  const auto dir = scratch_dir();
  write_oulad_dir(dir);
  test_support::write_file(dir / "assessments.csv",
                      "code_module,code_presentation,id_assessment,assessment_type,deadline,weight\n");
  try {
    load_oulad(dir);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("assessments"), std::string::npos) << what;
    EXPECT_NE(what.find("'date'"), std::string::npos) << what;
  }
}

TEST(LoadOulad, NegativeClicksAreSkippedAndCounted) {
  const auto dir = scratch_dir();
  write_oulad_dir(dir, "AAA,2013J,1,M,R,E,?,0-35,0,60,N,Pass\n",
                  "AAA,2013J,1,10,5,4\nAAA,2013J,1,10,6,-3\n", "10,AAA,2013J,quiz,?,?\n");
  const auto raw = load_oulad(dir);
  ASSERT_EQ(raw.student_vle.size(), 1u);
  EXPECT_EQ(raw.student_vle[0].sum_click, 4);
  EXPECT_EQ(raw.diagnostics.skipped.at("studentVle").at("negative sum_click"), 1u);
  EXPECT_EQ(raw.diagnostics.total_skipped(), 1u);
}

TEST(LoadOulad, UnresolvedForeignKeysAreSkipped) {
  const auto dir = scratch_dir();
  write_oulad_dir(dir, "AAA,2013J,1,M,R,E,?,0-35,0,60,N,Pass\n",
                  "AAA,2013J,1,99,5,4\n", "10,AAA,2013J,quiz,?,?\n",
                  "AAA,2013J,7,TMA,30,10\n", "8,1,20,0,50\n7,1,20,0,150\n7,1,?,0,?\n");
  const auto raw = load_oulad(dir);
  EXPECT_TRUE(raw.student_vle.empty());
  EXPECT_EQ(raw.diagnostics.skipped_count("studentVle"), 1u);
  EXPECT_EQ(raw.diagnostics.skipped.at("studentAssessment").at("unknown id_assessment"), 1u);
  EXPECT_EQ(raw.diagnostics.skipped.at("studentAssessment").at("score out of range"), 1u);
  ASSERT_EQ(raw.student_assessment.size(), 1u);
  EXPECT_FALSE(raw.student_assessment[0].date_submitted);
  EXPECT_FALSE(raw.student_assessment[0].score);
}

TEST(LoadOulad, DuplicateRegistrationIsFatal) {
  const auto dir = scratch_dir();
  write_oulad_dir(dir, "AAA,2013J,1,M,R,E,?,0-35,0,60,N,Pass\nAAA,2013J,1,F,R,E,?,0-35,0,60,N,Fail\n");
  EXPECT_THROW(load_oulad(dir), DataError);
}

TEST(LoadOulad, QuotedOuladStyleRows) {
  const auto dir = scratch_dir();
  write_oulad_dir(dir,
                  "\"AAA\",\"2013J\",11391,\"M\",\"East Anglian Region\",\"HE Qualification\","
                  "\"90-100%\",\"55<=\",0,240,\"N\",\"Pass\"\r\n");
  const auto raw = load_oulad(dir);
  ASSERT_EQ(raw.student_info.size(), 1u);
  EXPECT_EQ(raw.student_info[0].key, key(11391));
  EXPECT_EQ(raw.student_info[0].final_result, "Pass");
  EXPECT_EQ(raw.student_info[0].demographics[1], "East Anglian Region");
}

TEST(LoadOulad, WrittenSyntheticCorpusReadsBackIdentically) {
  const auto dir = scratch_dir();
  SyntheticCorpusConfig cfg;
  cfg.n_modules = 2;
  cfg.students_per_module = 40;
  auto generated = generate_synthetic_corpus(cfg);
  write_oulad(generated, dir);
  auto loaded = load_oulad(dir);
  EXPECT_EQ(loaded.diagnostics.total_skipped(), 0u);
  EXPECT_EQ(loaded.student_info.size(), generated.student_info.size());
  EXPECT_EQ(build_dataset(loaded), build_dataset(generated));
}

// ---------------------------------------------------------------------------
// label_students

TEST(LabelStudents, MapsOutcomes) {
  std::vector<StudentInfoRow> rows{info_row("AAA", 1, "Fail"), info_row("AAA", 2, "Distinction"),
                                   info_row("AAA", 3, "Withdrawn"), info_row("AAA", 4, " Pass ")};
  const auto labels = label_students(rows);
  EXPECT_EQ(labels.size(), 3u);
  EXPECT_EQ(labels.at(key(1)), 1);
  EXPECT_EQ(labels.at(key(2)), 0);
  EXPECT_FALSE(labels.contains(key(3)));
  EXPECT_EQ(labels.at(key(4)), 0);
}

TEST(LabelStudents, AllWithdrawnGivesEmptyMap) {
  std::vector<StudentInfoRow> rows{info_row("AAA", 1, "Withdrawn"), info_row("BBB", 2, "Withdrawn")};
  EXPECT_TRUE(label_students(rows).empty());
}

TEST(LabelStudents, UnknownResultQuotesValue) {
  std::vector<StudentInfoRow> rows{info_row("AAA", 1, "fail")};
  try {
    label_students(rows);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("'fail'"), std::string::npos) << e.what();
  }
}

// ---------------------------------------------------------------------------
// early_performance_features

TEST(EarlyPerformance, MeanAndCountWithinWindow) {
  std::vector<AssessmentMetaRow> meta{assessment(1, 10), assessment(2, 45), assessment(3, 89)};
  std::vector<StudentAssessmentRow> subs{{1, 7, 10, 0, 80.0}, {2, 7, 45, 0, 60.0}, {3, 7, 89, 0, 70.0}};
  const auto early = early_performance_features(meta, subs);
  ASSERT_TRUE(early.contains(key(7)));
  EXPECT_DOUBLE_EQ(early.at(key(7)).average_score, 70.0);
  EXPECT_EQ(early.at(key(7)).count, 3);
}

TEST(EarlyPerformance, DayNinetyOneIsOutside) {
  std::vector<AssessmentMetaRow> meta{assessment(1, 100)};
  std::vector<StudentAssessmentRow> subs{{1, 7, 91, 0, 90.0}};
  EXPECT_TRUE(early_performance_features(meta, subs).empty());
}

TEST(EarlyPerformance, DayNinetyIsInside) {
  std::vector<AssessmentMetaRow> meta{assessment(1, 100)};
  std::vector<StudentAssessmentRow> subs{{1, 7, 90, 0, 55.0}};
  const auto early = early_performance_features(meta, subs);
  EXPECT_EQ(early.at(key(7)), (EarlyPerformance{55.0, 1}));
}

TEST(EarlyPerformance, MissingSubmissionDateFallsBackToDeadline) {
  std::vector<AssessmentMetaRow> meta{assessment(1, 30), assessment(2, std::nullopt),
                                      assessment(3, 120)};
  std::vector<StudentAssessmentRow> subs{
      {1, 7, std::nullopt, 0, 40.0}, {2, 7, std::nullopt, 0, 99.0}, {3, 7, std::nullopt, 0, 10.0}};
  Diagnostics diag;
  const auto early = early_performance_features(meta, subs, 90, &diag);
  EXPECT_EQ(early.at(key(7)), (EarlyPerformance{40.0, 1}));
  EXPECT_EQ(diag.skipped_count("studentAssessment"), 1u);
}

TEST(EarlyPerformance, UnscoredSubmissionCountsButDoesNotAverage) {
  std::vector<AssessmentMetaRow> meta{assessment(1, 30), assessment(2, 40)};
  std::vector<StudentAssessmentRow> subs{{1, 7, 20, 0, 64.0}, {2, 7, 35, 0, std::nullopt}};
  EXPECT_EQ(early_performance_features(meta, subs).at(key(7)), (EarlyPerformance{64.0, 2}));
}

TEST(EarlyPerformance, KeyedByAssessmentModule) {
  std::vector<AssessmentMetaRow> meta{assessment(1, 30, "AAA"), assessment(2, 30, "BBB")};
  std::vector<StudentAssessmentRow> subs{{1, 7, 20, 0, 50.0}, {2, 7, 20, 0, 90.0}};
  const auto early = early_performance_features(meta, subs);
  EXPECT_EQ(early.at(key(7, "AAA")).average_score, 50.0);
  EXPECT_EQ(early.at(key(7, "BBB")).average_score, 90.0);
}

TEST(EarlyPerformance, RejectsNonPositiveWindow) {
  EXPECT_THROW(early_performance_features({}, {}, 0), ConfigError);
}

TEST(EarlyPerformance, WiderWindowNeverCountsFewer) {
  SyntheticCorpusConfig cfg;
  cfg.n_modules = 2;
  cfg.students_per_module = 50;
  const auto raw = generate_synthetic_corpus(cfg);
  const auto narrow = early_performance_features(raw.assessments_meta, raw.student_assessment, 90);
  const auto wide = early_performance_features(raw.assessments_meta, raw.student_assessment, 180);
  ASSERT_FALSE(narrow.empty());
  for (const auto& [k, v] : narrow) {
    ASSERT_TRUE(wide.contains(k));
    EXPECT_LE(v.count, wide.at(k).count);
  }
}

// ---------------------------------------------------------------------------
// engagement features

TEST(EngagementVolume, SumsClicksAndCountsDays) {
  std::vector<StudentVleRow> rows{{key(1), 10, 1, 5}, {key(1), 11, 1, 3}, {key(1), 10, 2, 2},
                                  {key(2), 10, 0, 1}};
  const auto vol = engagement_volume_features(rows);
  EXPECT_EQ(vol.at(key(1)), (EngagementVolume{10, 2}));
  EXPECT_EQ(vol.at(key(2)), (EngagementVolume{1, 1}));
  EXPECT_FALSE(vol.contains(key(3)));
}

TEST(EngagementVolume, OptionalDayCutoff) {
  std::vector<StudentVleRow> rows{{key(1), 10, 90, 5}, {key(1), 10, 91, 3}};
  EXPECT_EQ(engagement_volume_features(rows, 90).at(key(1)), (EngagementVolume{5, 1}));
}

TEST(EngagementQuality, GroupsByActivityType) {
  std::vector<VleMetaRow> meta{{100, "AAA", "2013J", "quiz"}, {200, "AAA", "2013J", "forum"}};
  std::vector<StudentVleRow> rows{{key(1), 100, 1, 4}, {key(1), 200, 2, 6}};
  const auto q = engagement_quality_features(rows, meta);
  const std::map<std::string, std::int64_t> expected{{"forum", 6}, {"quiz", 4}};
  EXPECT_EQ(q.at(key(1)), expected);
}

TEST(EngagementQuality, UnmappedSiteGoesToUnknown) {
  std::vector<StudentVleRow> rows{{key(1), 999, 1, 7}};
  const auto q = engagement_quality_features(rows, {});
  EXPECT_EQ(q.at(key(1)).at("unknown"), 7);
}

// ---------------------------------------------------------------------------
// assemble_dataset

TEST(AssembleDataset, UnobservedRegistrationIsAllZero) {
  std::map<RegistrationKey, int> labels{{key(1), 1}};
  const auto ds = assemble_dataset(labels, {}, {}, {}, {"quiz"});
  ASSERT_EQ(ds.size(), 1u);
  for (double v : ds.X.row(0)) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(ds.y[0], 1);
}

TEST(AssembleDataset, ColumnOrderIsFixed) {
  std::map<RegistrationKey, int> labels{{key(1), 0}, {key(2), 1}};
  std::map<RegistrationKey, std::map<std::string, std::int64_t>> quality{
      {key(2), {{"quiz", 1}, {"forum", 2}}}, {key(1), {{"oucontent", 3}}}};
  const auto ds = assemble_dataset(labels, {}, {}, quality, {"url"});
  const std::vector<std::string> expected{"average_early_score", "early_assessments_count",
                                          "total_clicks",        "distinct_days_active",
                                          "clicks_on_forum",     "clicks_on_oucontent",
                                          "clicks_on_quiz",      "clicks_on_url"};
  EXPECT_EQ(ds.feature_names, expected);
  EXPECT_EQ(ds.X(1, 4), 2.0);
  EXPECT_EQ(ds.X(0, 5), 3.0);
}

TEST(AssembleDataset, RejectsEmptyLabels) {
  EXPECT_THROW(assemble_dataset({}, {}, {}, {}), DataError);
}

TEST(AssembleDataset, PipelineInvariantsOnSyntheticCorpus) {
  SyntheticCorpusConfig cfg;
  cfg.n_modules = 3;
  cfg.students_per_module = 80;
  auto raw = generate_synthetic_corpus(cfg);
  std::set<RegistrationKey> withdrawn;
  for (const auto& r : raw.student_info) {
    if (r.final_result == "Withdrawn") withdrawn.insert(r.key);
  }
  ASSERT_FALSE(withdrawn.empty());

  const auto ds = build_dataset(raw);
  const auto again = build_dataset(raw);
  EXPECT_EQ(ds, again);

  const auto total = std::find(ds.feature_names.begin(), ds.feature_names.end(), "total_clicks") -
                     ds.feature_names.begin();
  for (std::size_t r = 0; r < ds.size(); ++r) {
    EXPECT_FALSE(withdrawn.contains(ds.keys[r]));
    double by_activity = 0.0;
    for (std::size_t c = 4; c < ds.feature_count(); ++c) {
      EXPECT_TRUE(std::isfinite(ds.X(r, c)));
      by_activity += ds.X(r, c);
    }
    EXPECT_EQ(by_activity, ds.X(r, total));
  }
  EXPECT_TRUE(std::is_sorted(ds.keys.begin(), ds.keys.end()));
}

TEST(AssembleDataset, DemographicColumnsAreOptIn) {
  SyntheticCorpusConfig cfg;
  cfg.n_modules = 1;
  cfg.students_per_module = 30;
  auto raw = generate_synthetic_corpus(cfg);
  const auto plain = build_dataset(raw);
  FeatureOptions opts;
  opts.include_demographics = true;
  const auto wide = build_dataset(raw, opts);
  EXPECT_GT(wide.feature_count(), plain.feature_count());
  EXPECT_EQ(std::vector<std::string>(wide.feature_names.begin(),
                                     wide.feature_names.begin() + plain.feature_count()),
            plain.feature_names);
  const auto gender_m = std::find(wide.feature_names.begin(), wide.feature_names.end(),
                                  "demo_gender=M");
  EXPECT_NE(gender_m, wide.feature_names.end());
}

// ---------------------------------------------------------------------------
// synthetic corpus

TEST(SyntheticCorpus, ShapeMatchesConfig) {
  SyntheticCorpusConfig cfg;
  cfg.n_modules = 7;
  cfg.students_per_module = 100;
  cfg.fail_rate = 0.3;
  const auto raw = generate_synthetic_corpus(cfg);
  EXPECT_EQ(raw.student_info.size(), 700u);
  std::set<std::string> modules;
  for (const auto& r : raw.student_info) modules.insert(r.key.code_module);
  EXPECT_EQ(modules, (std::set<std::string>{"AAA", "BBB", "CCC", "DDD", "EEE", "FFF", "GGG"}));
}

TEST(SyntheticCorpus, SameConfigGivesIdenticalBytes) {
  const auto dir = scratch_dir();
  SyntheticCorpusConfig cfg;
  cfg.n_modules = 2;
  cfg.students_per_module = 30;
  write_oulad(generate_synthetic_corpus(cfg), dir / "a");
  write_oulad(generate_synthetic_corpus(cfg), dir / "b");
  for (const char* f : {"studentInfo.csv", "studentVle.csv", "vle.csv", "assessments.csv",
                        "studentAssessment.csv"}) {
    EXPECT_EQ(test_support::read_file(dir / "a" / f), test_support::read_file(dir / "b" / f)) << f;
  }
}

TEST(SyntheticCorpus, RejectsInvalidConfig) {
  SyntheticCorpusConfig cfg;
  cfg.students_per_module = 9;
  EXPECT_THROW(generate_synthetic_corpus(cfg), ConfigError);
  cfg = {};
  cfg.n_modules = 0;
  EXPECT_THROW(generate_synthetic_corpus(cfg), ConfigError);
}

TEST(SyntheticCorpus, PositiveFractionTracksFailRate) {
  for (double rate : {0.2, 0.3, 0.5}) {
    SyntheticCorpusConfig cfg;
    cfg.fail_rate = rate;
    cfg.signal_strength = 0.0;
    cfg.seed = 11;
    auto raw = generate_synthetic_corpus(cfg);
    const auto ds = build_dataset(raw);
    const double n = static_cast<double>(ds.size());
    EXPECT_NEAR(ds.positive_fraction(), rate, 3.0 * std::sqrt(rate * (1 - rate) / n)) << rate;
  }
}

TEST(SyntheticCorpus, NoSignalMeansNoClassShift) {
  SyntheticCorpusConfig cfg;
  cfg.signal_strength = 0.0;
  cfg.seed = 5;
  auto raw = generate_synthetic_corpus(cfg);
  const auto ds = build_dataset(raw);
  // Two-sample z statistic on average_early_score and total_clicks.
  for (std::size_t col : {0u, 2u}) {
    double s[2] = {0, 0}, ss[2] = {0, 0}, n[2] = {0, 0};
    for (std::size_t r = 0; r < ds.size(); ++r) {
      const int c = ds.y[r];
      s[c] += ds.X(r, col);
      ss[c] += ds.X(r, col) * ds.X(r, col);
      n[c] += 1;
    }
    double mean[2], var[2];
    for (int c = 0; c < 2; ++c) {
      mean[c] = s[c] / n[c];
      var[c] = ss[c] / n[c] - mean[c] * mean[c];
    }
    const double z = (mean[0] - mean[1]) / std::sqrt(var[0] / n[0] + var[1] / n[1]);
    EXPECT_LT(std::abs(z), 4.0) << ds.feature_names[col];
  }
}

TEST(SyntheticCorpus, SignalLowersAtRiskScores) {
  SyntheticCorpusConfig cfg;
  cfg.signal_strength = 1.5;
  auto raw = generate_synthetic_corpus(cfg);
  const auto ds = build_dataset(raw);
  double s[2] = {0, 0}, n[2] = {0, 0};
  for (std::size_t r = 0; r < ds.size(); ++r) {
    s[ds.y[r]] += ds.X(r, 0);
    n[ds.y[r]] += 1;
  }
  EXPECT_LT(s[1] / n[1], s[0] / n[0] - 10.0);
}

// ---------------------------------------------------------------------------
// summarize_demographics

TEST(Demographics, CountsAndPercentages) {
  std::vector<StudentInfoRow> rows{info_row("AAA", 1, "Pass", "M"), info_row("AAA", 2, "Fail", "F")};
  const auto summary = summarize_demographics(rows);
  std::vector<DemographicCount> gender;
  for (const auto& d : summary) {
    if (d.column == "gender") gender.push_back(d);
  }
  ASSERT_EQ(gender.size(), 2u);
  EXPECT_EQ(gender[0].category, "F");
  EXPECT_EQ(gender[0].count, 1u);
  EXPECT_DOUBLE_EQ(gender[0].percentage, 50.0);
  EXPECT_EQ(gender[1].category, "M");
  EXPECT_DOUBLE_EQ(gender[1].percentage, 50.0);
}

TEST(Demographics, EmptyTableGivesEmptySummary) {
  EXPECT_TRUE(summarize_demographics({}).empty());
}

TEST(Demographics, EveryColumnTotalsRowCount) {
  SyntheticCorpusConfig cfg;
  cfg.n_modules = 2;
  cfg.students_per_module = 77;
  const auto raw = generate_synthetic_corpus(cfg);
  const auto summary = summarize_demographics(raw.student_info);
  std::map<std::string, std::pair<std::size_t, double>> totals;
  for (const auto& d : summary) {
    totals[d.column].first += d.count;
    totals[d.column].second += d.percentage;
  }
  EXPECT_EQ(totals.size(), kDemographicColumns.size());
  for (const auto& [col, t] : totals) {
    EXPECT_EQ(t.first, raw.student_info.size()) << col;
    EXPECT_NEAR(t.second, 100.0, 0.01) << col;
  }
}
