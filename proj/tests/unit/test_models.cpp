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
#include "temed/models.hpp"

using namespace temed;

namespace {

Eigen::MatrixXd random_matrix(std::mt19937_64& rng, int n, int d) {
  std::normal_distribution<double> g;
  Eigen::MatrixXd X(n, d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) X(i, j) = g(rng);
  return X;
}

std::vector<int> random_labels(std::mt19937_64& rng, int n) {
  std::bernoulli_distribution b(0.5);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (auto& v : y) v = b(rng);
  y[0] = 0;
  y[1] = 1;
  return y;
}

// Column 0 separates the classes, column 1 is noise.
void separable(Eigen::MatrixXd& X, std::vector<int>& y, int n = 60) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  X.resize(n, 2);
  y.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    y[static_cast<std::size_t>(i)] = i % 2;
    X(i, 0) = (i % 2 ? 2.0 : -2.0) + 0.5 * g(rng);
    X(i, 1) = g(rng);
  }
}

EncodedMatrix encoded(const Eigen::MatrixXd& X) {
  EncodedMatrix m;
  for (Eigen::Index c = 0; c < X.cols(); ++c) m.column_names.push_back("c" + std::to_string(c));
  m.values = X;
  return m;
}

double accuracy(const Eigen::VectorXd& p, const std::vector<int>& y) {
  double hits = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) hits += (p(i) >= 0.5) == (y[static_cast<std::size_t>(i)] == 1);
  return hits / static_cast<double>(p.size());
}

}  // namespace

// ---- logistic regression ----

TEST(LogReg, ZeroWeightsGiveOneHalf) {
  LogRegModel m;
  m.weights = Eigen::VectorXd::Zero(3);
  const auto p = predict_proba(ModelBody{m}, Eigen::MatrixXd::Random(5, 3));
  for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_EQ(p(i), 0.5);
}

TEST(LogReg, OneDimensionalSeparable) {
  Eigen::MatrixXd X(2, 1);
  X << -1, 1;
  const std::vector<int> y{0, 1};
  const auto m = train_logreg(X, y, 100.0);
  EXPECT_GT(m.weights(0), 0.0);
  EXPECT_EQ(accuracy(predict_proba(ModelBody{m}, X), y), 1.0);
}

TEST(LogReg, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  const std::vector<double> grid{0.001, 0.01, 0.1, 1, 10, 100};
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 49), d = 1 + static_cast<int>(rng() % 10);
    const auto X = random_matrix(rng, n, d);
    const auto y = random_labels(rng, n);
    const double C = grid[rng() % grid.size()];
    std::normal_distribution<double> g;
    Eigen::VectorXd wb(d + 1);
    for (auto& v : wb) v = g(rng);
    const auto obj = logreg_objective(X, y, wb.head(d), wb(d), C);
    const auto fd = oracle::central_difference(X, y, wb, C);
    const double rel = (obj.gradient - fd).norm() / std::max(obj.gradient.norm(), fd.norm());
    EXPECT_LT(rel, 1e-5) << "trial " << trial;
    EXPECT_NEAR(obj.value, oracle::logreg_value(X, y, wb, C), 1e-10 * std::max(1.0, std::abs(obj.value)));
  }
}

TEST(LogReg, ConvergesToTolerance) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 49), d = 1 + static_cast<int>(rng() % 10);
    const auto X = random_matrix(rng, n, d);
    const auto y = random_labels(rng, n);
    for (double C : {0.001, 1.0, 100.0}) {
      const auto m = train_logreg(X, y, C);
      EXPECT_LE(m.gradient_norm, kLogRegTolerance) << trial << " C=" << C;
      EXPECT_LE(m.iterations, kLogRegMaxIterations);
      EXPECT_LE(logreg_objective(X, y, m.weights, m.bias, C).gradient.norm(), kLogRegTolerance);
    }
  }
}

// At each optimum, a larger C never leaves a larger penalized objective.
TEST(LogReg, RegularizationMonotone) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 20; ++trial) {
    const auto X = random_matrix(rng, 40, 5);
    const auto y = random_labels(rng, 40);
    double previous = std::numeric_limits<double>::infinity();
    for (double C : {0.001, 0.01, 0.1, 1.0, 10.0, 100.0}) {
      const auto m = train_logreg(X, y, C);
      const auto obj = logreg_objective(X, y, m.weights, m.bias, C);
      EXPECT_LE(obj.value, previous + 1e-12);
      previous = obj.value;
    }
  }
}

TEST(LogReg, MonotoneInPositiveFeature) {
  Eigen::MatrixXd X;
  std::vector<int> y;
  separable(X, y);
  const auto m = train_logreg(X, y, 1.0);
  ASSERT_GT(m.weights(0), 0);
  Eigen::MatrixXd probe(2, 2);
  probe << 0.0, 0.3, 0.5, 0.3;
  const auto p = predict_proba(ModelBody{m}, probe);
  EXPECT_LT(p(0), p(1));
}

TEST(LogReg, RejectsBadInput) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(2, 1);
  EXPECT_THROW(train_logreg(X, std::vector<int>{0, 1}, 0.0), TrainingError);
  EXPECT_THROW(train_logreg(X, std::vector<int>{0}, 1.0), TrainingError);
  Eigen::MatrixXd bad = X;
  bad(0, 0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(train_logreg(bad, std::vector<int>{0, 1}, 1.0), TrainingError);
}

// ---- CART ----

TEST(Cart, GiniValues) {
  EXPECT_DOUBLE_EQ(gini(5, 5), 0.5);
  EXPECT_EQ(gini(4, 0), 0.0);
}

TEST(Cart, PureNodeIsLeaf) {
  Eigen::MatrixXd X(4, 1);
  X << 1, 2, 3, 4;
  const auto t = train_dtree(X, std::vector<int>{1, 1, 1, 1}, 3, 2);
  ASSERT_EQ(t.nodes.size(), 1u);
  EXPECT_TRUE(t.nodes[0].is_leaf());
}

TEST(Cart, EightRowToyMatchesOracle) {
  Eigen::MatrixXd X(8, 3);
  X << 1, 5, 0.5,  //
      2, 3, 0.1,   //
      3, 3, 0.9,   //
      4, 1, 0.4,   //
      5, 2, 0.3,   //
      6, 4, 0.8,   //
      7, 1, 0.2,   //
      8, 5, 0.7;
  const std::vector<int> y{0, 0, 1, 0, 1, 1, 1, 0};
  const auto oracle_split = oracle::brute_force_root_split(X, y);
  const auto rows = std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7};
  const auto got = best_gini_split(X, y, rows);
  ASSERT_TRUE(oracle_split);
  ASSERT_TRUE(got);
  EXPECT_EQ(got->column, oracle_split->column);
  EXPECT_EQ(got->threshold, oracle_split->threshold);
}

TEST(CartProperty, RootSplitMatchesBruteForce) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 500; ++trial) {
    Eigen::MatrixXd X;
    std::vector<int> y;
    oracle::random_table(rng, X, y);
    std::vector<std::size_t> rows(static_cast<std::size_t>(X.rows()));
    std::iota(rows.begin(), rows.end(), 0);
    const auto expected = oracle::brute_force_root_split(X, y);
    const auto got = best_gini_split(X, y, rows);
    ASSERT_EQ(got.has_value(), expected.has_value()) << trial;
    if (got) {
      EXPECT_EQ(got->column, expected->column) << trial;
      EXPECT_EQ(got->threshold, expected->threshold) << trial;
    }
  }
}

TEST(CartProperty, StructuralInvariants) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 100; ++trial) {
    Eigen::MatrixXd X;
    std::vector<int> y;
    oracle::random_table(rng, X, y, 60, 4);
    const int depth = 1 + static_cast<int>(rng() % 5);
    const int min_split = 2 + static_cast<int>(rng() % 9);
    const auto t = train_dtree(X, y, depth, min_split);
    EXPECT_LE(t.depth(), depth);
    for (const auto& n : t.nodes) {
      if (n.is_leaf()) continue;
      EXPECT_GT(n.gain, 0.0);
      EXPECT_GE(n.samples, static_cast<std::size_t>(min_split));
      EXPECT_EQ(t.nodes[n.left].samples + t.nodes[n.right].samples, n.samples);
    }
  }
}

// Threshold semantics make predictions invariant to monotone transforms of a column.
TEST(CartProperty, MonotoneTransformInvariance) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd X;
    std::vector<int> y;
    oracle::random_table(rng, X, y, 40, 3);
    const int col = static_cast<int>(rng() % static_cast<unsigned>(X.cols()));
    Eigen::MatrixXd Xt = X;
    for (Eigen::Index i = 0; i < X.rows(); ++i) Xt(i, col) = std::exp(X(i, col)) * 3.0 + 7.0;
    const auto a = train_dtree(X, y, 4, 2);
    const auto b = train_dtree(Xt, y, 4, 2);
    const auto pa = predict_proba(ModelBody{a}, X);
    const auto pb = predict_proba(ModelBody{b}, Xt);
    EXPECT_EQ(pa, pb) << trial;
  }
}

TEST(Cart, SingleLeafFraction) {
  TreeModel t;
  t.n_columns = 2;
  TreeNode leaf;
  leaf.samples = 4;
  leaf.counts = {3, 1};
  leaf.value = 0.25;
  t.nodes.push_back(leaf);
  const auto p = predict_proba(ModelBody{t}, Eigen::MatrixXd::Random(3, 2));
  for (Eigen::Index i = 0; i < 3; ++i) EXPECT_EQ(p(i), 0.25);
  EXPECT_THROW(predict_proba(ModelBody{t}, Eigen::MatrixXd::Random(3, 5)), std::exception);
}

TEST(Cart, StumpImportanceAndExport) {
  Eigen::MatrixXd X = Eigen::MatrixXd::Zero(6, 5);
  for (int i = 0; i < 6; ++i) X(i, 3) = i;
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  const auto t = train_dtree(X, y, 1, 2);
  const auto imp = feature_importances(ModelBody{t}, 5);
  EXPECT_EQ(imp, (std::vector<double>{0, 0, 0, 1, 0}));

  const std::vector<std::string> names{"a", "b", "c", "d", "e"};
  const auto text = export_tree(t, names);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
  EXPECT_NE(text.find("d <= 2.5"), std::string::npos) << text;
  EXPECT_EQ(export_tree(t, names), text);

  const auto dot = export_tree(t, names, TreeFormat::dot);
  EXPECT_TRUE(dot.starts_with("digraph"));
  EXPECT_EQ(std::count(dot.begin(), dot.end(), '{'), std::count(dot.begin(), dot.end(), '}'));
  std::size_t edges = 0;
  for (auto p = dot.find("->"); p != std::string::npos; p = dot.find("->", p + 2)) ++edges;
  EXPECT_EQ(edges, 2u);
}

TEST(Cart, ImportancesSumToOne) {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::MatrixXd X;
    std::vector<int> y;
    oracle::random_table(rng, X, y, 50, 5);
    const auto t = train_dtree(X, y, 5, 2);
    const auto imp = feature_importances(ModelBody{t}, static_cast<std::size_t>(X.cols()));
    double sum = 0;
    for (double v : imp) {
      EXPECT_GE(v, 0.0);
      sum += v;
    }
    if (t.nodes.size() > 1) {
      EXPECT_NEAR(sum, 1.0, 1e-12);
    }
  }
}

// ---- GBDT ----

TEST(Gbdt, ZeroRoundsGiveBaseRate) {
  Eigen::MatrixXd X(4, 1);
  X << 1, 2, 3, 4;
  const auto m = train_gbdt(X, std::vector<int>{0, 1, 1, 1}, 0, 0.1);
  const auto p = predict_proba(ModelBody{m}, X);
  for (Eigen::Index i = 0; i < 4; ++i) EXPECT_NEAR(p(i), 0.75, 1e-15);
}

TEST(Gbdt, ZeroLearningRateGivesBaseRate) {
  Eigen::MatrixXd X;
  std::vector<int> y;
  separable(X, y, 20);
  const auto m = train_gbdt(X, y, 10, 0.0);
  EXPECT_EQ(m.trees.size(), 10u);
  const auto p = predict_proba(ModelBody{m}, X);
  for (Eigen::Index i = 0; i < p.size(); ++i) EXPECT_NEAR(p(i), 0.5, 1e-15);
}

TEST(Gbdt, LossNonIncreasing) {
  std::mt19937_64 rng(47);
  for (int trial = 0; trial < 30; ++trial) {
    Eigen::MatrixXd X;
    std::vector<int> y;
    oracle::random_table(rng, X, y, 40, 4);
    y[0] = 0;
    y[1] = 1;
    for (double lr : {0.01, 0.1, 0.3}) {
      const auto curve = gbdt_loss_curve(train_gbdt(X, y, 20, lr), X, y);
      ASSERT_EQ(curve.size(), 21u);
      for (std::size_t k = 1; k < curve.size(); ++k) EXPECT_LE(curve[k], curve[k - 1] + 1e-12) << trial;
    }
  }
}

TEST(Gbdt, TwoRoundsMatchStraightLineOracle) {
  const std::vector<double> x{0.5, 1.5, 2.0, 3.5, 4.0, 6.0};
  const std::vector<int> y{0, 0, 1, 0, 1, 1};
  Eigen::MatrixXd X(6, 1);
  for (int i = 0; i < 6; ++i) X(i, 0) = x[static_cast<std::size_t>(i)];
  for (double lr : {0.1, 0.3, 1.0}) {
    const auto m = train_gbdt(X, y, 2, lr, 1);
    const auto p = predict_proba(ModelBody{m}, X);
    const auto expected = oracle::two_round_stump_boost(x, y, lr);
    for (int i = 0; i < 6; ++i) EXPECT_NEAR(p(i), expected[static_cast<std::size_t>(i)], 1e-9) << lr;
  }
}

TEST(Gbdt, SingleClassRejected) {
  EXPECT_THROW(train_gbdt(Eigen::MatrixXd::Zero(3, 1), std::vector<int>{1, 1, 1}, 5, 0.1), TrainingError);
}

TEST(Gbdt, DepthBoundedAndImportancesNormalized) {
  Eigen::MatrixXd X;
  std::vector<int> y;
  std::mt19937_64 rng(53);
  oracle::random_table(rng, X, y, 60, 5);
  y[0] = 0;
  y[1] = 1;
  const auto m = train_gbdt(X, y, 50, 0.3);
  for (const auto& t : m.trees) EXPECT_LE(t.depth(), kGbdtDefaultDepth);
  const auto imp = feature_importances(ModelBody{m}, static_cast<std::size_t>(X.cols()));
  EXPECT_NEAR(std::accumulate(imp.begin(), imp.end(), 0.0), 1.0, 1e-12);
}

// ---- grid search, determinism, persistence ----

TEST(Grid, CandidateCounts) {
  EXPECT_EQ(grid_candidates(ModelFamily::logreg).size(), 6u);
  EXPECT_EQ(grid_candidates(ModelFamily::dtree).size(), 18u);
  EXPECT_EQ(grid_candidates(ModelFamily::gbdt).size(), 9u);
  EXPECT_EQ(grid_candidates(ModelFamily::logreg).front()["C"], 0.001);
}

TEST(Grid, AllTiesPickMostRegularized) {
  Eigen::MatrixXd X;
  std::vector<int> y;
  separable(X, y, 40);
  const auto train = encoded(X.topRows(30));
  const auto val = encoded(X.bottomRows(10));
  const std::vector<int> ytr(y.begin(), y.begin() + 30), yva(y.begin() + 30, y.end());
  for (auto fam : {ModelFamily::logreg, ModelFamily::dtree, ModelFamily::gbdt}) {
    const auto r = grid_search(fam, train, ytr, val, yva);
    const auto& entries = r.report.entries;
    EXPECT_EQ(entries.size(), grid_candidates(fam).size());
    const bool all_equal = std::all_of(entries.begin(), entries.end(),
                                       [&](const GridEntry& e) { return e.val_accuracy == entries[0].val_accuracy; });
    if (all_equal) {
      EXPECT_EQ(r.report.best, 0u) << to_string(fam);
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
      EXPECT_LE(entries[i].val_accuracy, entries[r.report.best].val_accuracy);
      if (i < r.report.best) {
        EXPECT_LT(entries[i].val_accuracy, entries[r.report.best].val_accuracy);
      }
    }
  }
}

TEST(Grid, ReportJsonMarksSelection) {
  Eigen::MatrixXd X;
  std::vector<int> y;
  separable(X, y, 40);
  const std::vector<int> ytr(y.begin(), y.begin() + 30), yva(y.begin() + 30, y.end());
  const auto r = grid_search(ModelFamily::logreg, encoded(X.topRows(30)), ytr, encoded(X.bottomRows(10)), yva);
  const auto j = grid_report_to_json(r.report);
  ASSERT_EQ(j["candidates"].size(), 6u);
  int selected = 0;
  for (const auto& c : j["candidates"]) selected += c["selected"].get<bool>();
  EXPECT_EQ(selected, 1);
}

TEST(Persistence, DeterministicTrainingAndRoundTrip) {
  Eigen::MatrixXd X;
  std::vector<int> y;
  separable(X, y, 50);
  for (auto fam : {ModelFamily::logreg, ModelFamily::dtree, ModelFamily::gbdt}) {
    const auto params = grid_candidates(fam)[3];
    const auto a = train_candidate(fam, params, encoded(X), y);
    const auto b = train_candidate(fam, params, encoded(X), y);
    EXPECT_EQ(model_to_json(a).dump(), model_to_json(b).dump());
    const auto back = model_from_json(model_to_json(a));
    EXPECT_EQ(model_to_json(back).dump(), model_to_json(a).dump());
    EXPECT_EQ(predict_proba(back, X), predict_proba(a, X));
  }
  EXPECT_THROW(model_from_json(Json{{"format_version", 99}}), ModelFormatError);
}

TEST(Importances, LogRegSignedWeights) {
  Eigen::MatrixXd X;
  std::vector<int> y;
  separable(X, y);
  const auto m = train_candidate(ModelFamily::logreg, Json{{"C", 1.0}}, encoded(X), y);
  const auto imp = feature_importances(m);
  EXPECT_EQ(imp.column_names, (std::vector<std::string>{"c0", "c1"}));
  EXPECT_EQ(imp.values[0], std::get<LogRegModel>(m.body).weights(0));
}
