// Copyright 2026 The temed Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "temed/evalkit.hpp"
#include "temed/text_util.hpp"
#include "test_paths.hpp"

using namespace temed;

namespace {

struct MetricsFixture : ::testing::Test {
  std::filesystem::path dir = temed_test::fixture_dir() / "metrics";
  ExtractionSchema schema = load_schema(temed_test::fixture_dir() / "vorc" / "schema.json");
  TabularDataset truth = load_csv(dir / "truth.csv", schema);
  TabularDataset extracted = load_csv(dir / "extracted.csv", schema);
  std::vector<Provenance> provenance = parse_provenance_jsonl(read_file(dir / "provenance.jsonl"));
  Json expected = Json::parse(read_file(dir / "expected.json"));
};

}  // namespace

TEST_F(MetricsFixture, HandComputedValues) {
  const auto r = extraction_metrics(extracted, truth, provenance);
  EXPECT_EQ(r.record_accuracy, expected["record_accuracy"].get<double>());
  EXPECT_EQ(r.cell_accuracy, expected["cell_accuracy"].get<double>());
  EXPECT_EQ(*r.missing_precision, expected["missing_precision"].get<double>());
  EXPECT_EQ(*r.missing_recall, expected["missing_recall"].get<double>());
  EXPECT_EQ(*r.vorc_call_rate, expected["vorc_call_rate"].get<double>());
  EXPECT_EQ(r.n_evaluated, expected["n_evaluated"].get<std::size_t>());
  EXPECT_EQ(r.n_failed, expected["n_failed"].get<std::size_t>());
}

TEST_F(MetricsFixture, SelfComparison) {
  const auto r = extraction_metrics(truth, truth);
  EXPECT_EQ(r.record_accuracy, 1.0);
  EXPECT_EQ(r.cell_accuracy, 1.0);
  EXPECT_EQ(r.missing_precision, 1.0);
  EXPECT_EQ(r.missing_recall, 1.0);
  EXPECT_FALSE(r.vorc_call_rate);
  EXPECT_LE(r.record_accuracy, r.cell_accuracy);
}

TEST_F(MetricsFixture, NoMissingCellsGiveNullMetrics) {
  const auto full = select_ids(truth, {"p1", "p5"});
  const auto r = extraction_metrics(full, full);
  EXPECT_FALSE(r.missing_precision);
  EXPECT_FALSE(r.missing_recall);
}

TEST_F(MetricsFixture, HallucinationLowersRecall) {
  auto hallucinated = truth;
  hallucinated.rows[1][3] = CellValue(30.0);  // truth has Missing here
  const auto r = extraction_metrics(hallucinated, truth);
  EXPECT_DOUBLE_EQ(*r.missing_recall, 2.0 / 3.0);
  EXPECT_EQ(*r.missing_precision, 1.0);
}

TEST_F(MetricsFixture, ThreeRowsTwoMatches) {
  const auto t = select_ids(truth, {"p1", "p2", "p3"});
  const auto e = select_ids(extracted, {"p1", "p2", "p3"});
  EXPECT_DOUBLE_EQ(extraction_metrics(e, t).record_accuracy, 2.0 / 3.0);
}

TEST_F(MetricsFixture, UnknownIdRejected) {
  auto e = extracted;
  e.ids[0] = "nope";
  EXPECT_THROW(extraction_metrics(e, truth), EvalError);
}

TEST(CellsMatch, Rules) {
  EXPECT_TRUE(cells_match(Missing{}, Missing{}));
  EXPECT_FALSE(cells_match(Missing{}, CellValue(std::int64_t{0})));
  EXPECT_FALSE(cells_match(CellValue(std::string("")), Missing{}));
  EXPECT_TRUE(cells_match(CellValue(1.0), CellValue(1.0 + 1e-12)));
  EXPECT_FALSE(cells_match(CellValue(1.0), CellValue(1.0 + 1e-6)));
  EXPECT_TRUE(cells_match(CellValue(0.0), CellValue(0.0)));
  EXPECT_FALSE(cells_match(CellValue(std::int64_t{3}), CellValue(std::int64_t{4})));
}

TEST(Auc, Examples) {
  const std::vector<int> a{1, 1, 0, 0}, b{1, 0, 1, 0};
  const std::vector<double> s{.9, .8, .3, .2};
  EXPECT_EQ(*roc_auc(a, s), 1.0);
  EXPECT_EQ(*roc_auc(b, s), 0.75);
  EXPECT_FALSE(roc_auc(std::vector<int>{1, 1}, std::vector<double>{.2, .3}));
  EXPECT_EQ(*roc_auc(std::vector<int>{1, 0}, std::vector<double>{.5, .5}), 0.5);
}

TEST(AucProperty, MatchesPairwiseBruteForce) {
  std::mt19937_64 rng(59);
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 50);
    std::vector<int> y(static_cast<std::size_t>(n));
    std::vector<double> s(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      y[static_cast<std::size_t>(i)] = static_cast<int>(rng() % 2);
      s[static_cast<std::size_t>(i)] = static_cast<double>(rng() % 7) / 7.0;  // heavy ties
    }
    const auto got = roc_auc(y, s);
    const auto want = oracle::pairwise_auc(y, s);
    ASSERT_EQ(got.has_value(), want.has_value());
    if (got) {
      EXPECT_LT(std::abs(*got - *want), 1e-12) << trial;
    }
  }
}

TEST(AucProperty, InvariantUnderIncreasingTransform) {
  std::mt19937_64 rng(61);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> y(30);
    std::vector<double> s(30), t(30);
    for (std::size_t i = 0; i < 30; ++i) {
      y[i] = static_cast<int>(rng() % 2);
      s[i] = std::round(g(rng) * 4) / 4;
      t[i] = std::exp(2 * s[i]) + 5;
    }
    y[0] = 0;
    y[1] = 1;
    EXPECT_EQ(*roc_auc(y, s), *roc_auc(y, t));
  }
}

TEST(Classification, ThresholdAndDegenerateCases) {
  const std::vector<int> y{1, 0, 1, 0, 0};
  const auto all_pos = classification_metrics(y, std::vector<double>{.9, .9, .9, .9, .9});
  EXPECT_EQ(all_pos.recall, 1.0);
  EXPECT_EQ(all_pos.precision, 0.4);
  const auto none = classification_metrics(y, std::vector<double>{0, 0, 0, 0, 0});
  EXPECT_EQ(none.precision, 0.0);
  EXPECT_EQ(none.f1, 0.0);
  const auto at = classification_metrics(std::vector<int>{1}, std::vector<double>{0.5});
  EXPECT_EQ(at.accuracy, 1.0);
  EXPECT_FALSE(at.auc);
  EXPECT_FALSE(at.auc_note.empty());
}

TEST(Classification, F1IsHarmonicMean) {
  std::mt19937_64 rng(67);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int> y(20);
    std::vector<double> s(20);
    for (std::size_t i = 0; i < 20; ++i) {
      y[i] = static_cast<int>(rng() % 2);
      s[i] = static_cast<double>(rng() % 100) / 100.0;
    }
    const auto r = classification_metrics(y, s);
    if (r.precision + r.recall > 0) {
      EXPECT_NEAR(r.f1, 2 * r.precision * r.recall / (r.precision + r.recall), 1e-15);
    }
  }
}

TEST(Classification, LabelMetricsHaveNoAuc) {
  const auto r = label_metrics(std::vector<int>{1, 0, 1}, std::vector<int>{1, 0, 0});
  EXPECT_FALSE(r.auc);
  EXPECT_DOUBLE_EQ(r.accuracy, 2.0 / 3.0);
}

TEST(ImportanceR2, SelfAndConstant) {
  const std::vector<double> v{0.1, 0.5, 0.4};
  EXPECT_EQ(*importance_r2(v, v), 1.0);
  EXPECT_FALSE(importance_r2(std::vector<double>{0.25, 0.25, 0.25, 0.25}, std::vector<double>{1, 2, 3, 4}));
  EXPECT_DOUBLE_EQ(*importance_r2(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 4}), 1.0 - 1.0 / 2.0);
}

TEST(ImportanceR2, SelfProperty) {
  std::mt19937_64 rng(71);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> v(1 + rng() % 20);
    for (auto& x : v) x = g(rng);
    if (v.size() > 1) {
      EXPECT_EQ(*importance_r2(v, v), 1.0);
    }
  }
}

TEST(Fidelity, IdenticalModels) {
  Eigen::MatrixXd X(8, 2);
  X << 0, 1, 1, 0, 2, 1, 3, 0, 4, 1, 5, 0, 6, 1, 7, 0;
  const std::vector<int> y{0, 0, 0, 1, 0, 1, 1, 1};
  EncodedMatrix m{{"a", "b"}, X};
  const auto model = train_candidate(ModelFamily::logreg, Json{{"C", 1.0}}, m, y);
  const auto f = fidelity(model, model, X, X, y);
  EXPECT_EQ(f.acc_d, 0.0);
  EXPECT_EQ(f.auc_d, 0.0);
  EXPECT_EQ(f.r2, 1.0);
  EXPECT_EQ(f.acc_d, std::abs(f.acc_gt - f.acc_ext));
}

TEST(Fidelity, ColumnMismatch) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(6, 2);
  const std::vector<int> y{0, 1, 0, 1, 0, 1};
  const auto a = train_candidate(ModelFamily::logreg, Json{{"C", 1.0}}, EncodedMatrix{{"a", "b"}, X}, y);
  const auto b = train_candidate(ModelFamily::logreg, Json{{"C", 1.0}}, EncodedMatrix{{"a", "c"}, X}, y);
  EXPECT_THROW(fidelity(a, b, X, X, y), EvalError);
}

TEST(Render, EmptyCsvIsHeaderOnly) {
  EXPECT_EQ(render_report({}, ReportFormat::csv), "report,metric,value\n");
}

TEST(Render, DeterministicAndComplete) {
  ExtractionReport e;
  e.record_accuracy = 0.6;
  e.cell_accuracy = 0.85;
  e.n_evaluated = 5;
  const std::vector<NamedReport> reports{{"extraction", e},
                                         {"test", classification_metrics(std::vector<int>{1, 0},
                                                                          std::vector<double>{0.7, 0.2})}};
  for (auto fmt : {ReportFormat::text, ReportFormat::json, ReportFormat::csv}) {
    EXPECT_EQ(render_report(reports, fmt), render_report(reports, fmt));
  }
  const auto j = Json::parse(render_report(reports, ReportFormat::json));
  EXPECT_EQ(j["schema_version"], kReportSchemaVersion);
  const auto& m = j["reports"][0]["metrics"];
  for (const char* key : {"record_accuracy", "cell_accuracy", "missing_precision", "missing_recall",
                          "vorc_call_rate", "n_evaluated", "n_failed"}) {
    EXPECT_TRUE(m.contains(key)) << key;
  }
  EXPECT_TRUE(m["missing_precision"].is_null());
  EXPECT_EQ(m["n_evaluated"], 5);
  const auto csv = render_report(reports, ReportFormat::csv);
  EXPECT_NE(csv.find("extraction,missing_precision,\n"), std::string::npos) << csv;
  EXPECT_NE(csv.find("test,auc,1\n"), std::string::npos) << csv;
}
