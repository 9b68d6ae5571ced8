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

#include "temed/models.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "temed/text_util.hpp"

namespace temed {

std::string_view to_string(ModelFamily family) {
  switch (family) {
    case ModelFamily::logreg: return "logreg";
    case ModelFamily::dtree: return "dtree";
    case ModelFamily::gbdt: return "gbdt";
  }
  return "?";
}

std::optional<ModelFamily> model_family_from_string(std::string_view text) {
  if (text == "logreg") return ModelFamily::logreg;
  if (text == "dtree") return ModelFamily::dtree;
  if (text == "gbdt") return ModelFamily::gbdt;
  return std::nullopt;
}

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

void check_shape(const Eigen::MatrixXd& X, std::span<const int> y) {
  if (static_cast<std::size_t>(X.rows()) != y.size()) {
    throw TrainingError("feature matrix has " + std::to_string(X.rows()) + " rows but " + std::to_string(y.size()) +
                        " labels were given");
  }
  if (y.empty()) throw TrainingError("cannot train on zero rows");
  for (int v : y) {
    if (v != 0 && v != 1) throw TrainingError("labels must be 0 or 1");
  }
}

double midpoint(double lo, double hi) {
  const double t = lo + (hi - lo) * 0.5;
  return t < hi ? t : lo;
}

std::vector<std::size_t> sorted_by_column(const Eigen::MatrixXd& X, std::span<const std::size_t> rows, int col) {
  std::vector<std::size_t> order(rows.begin(), rows.end());
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return X(static_cast<Eigen::Index>(a), col) <
                                                              X(static_cast<Eigen::Index>(b), col); });
  return order;
}

}  // namespace

// ---- logistic regression -----------------------------------------------------------------

LogRegObjective logreg_objective(const Eigen::MatrixXd& X, std::span<const int> y, const Eigen::VectorXd& weights,
                                 double bias, double C) {
  const auto n = static_cast<double>(X.rows());
  const Eigen::Index d = X.cols();
  const Eigen::VectorXd z = (X * weights).array() + bias;
  Eigen::VectorXd residual(X.rows());
  double loss = 0.0;
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    const double yi = y[static_cast<std::size_t>(i)];
    loss += softplus(z(i)) - yi * z(i);
    residual(i) = sigmoid(z(i)) - yi;
  }
  LogRegObjective out;
  out.loss = loss / n;
  out.penalty = weights.squaredNorm() / (2.0 * C * n);
  out.value = out.loss + out.penalty;
  out.gradient.resize(d + 1);
  out.gradient.head(d) = X.transpose() * residual / n + weights / (C * n);
  out.gradient(d) = residual.sum() / n;
  return out;
}

LogRegModel train_logreg(const Eigen::MatrixXd& X, std::span<const int> y, double C) {
  check_shape(X, y);
  if (!(C > 0.0) || !std::isfinite(C)) throw TrainingError("C must be a positive finite number");
  const Eigen::Index d = X.cols();
  const auto n = static_cast<double>(X.rows());

  LogRegModel m;
  m.C = C;
  m.weights = Eigen::VectorXd::Zero(d);
  LogRegObjective obj = logreg_objective(X, y, m.weights, m.bias, C);

  for (int it = 0; it < kLogRegMaxIterations; ++it) {
    if (!std::isfinite(obj.value)) throw TrainingError("logistic loss became non-finite");
    if (obj.gradient.norm() <= kLogRegTolerance) break;

    const Eigen::VectorXd z = (X * m.weights).array() + m.bias;
    Eigen::VectorXd h(X.rows());
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double p = sigmoid(z(i));
      h(i) = p * (1.0 - p);
    }
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d + 1, d + 1);
    H.topLeftCorner(d, d) = X.transpose() * h.asDiagonal() * X / n;
    H.topLeftCorner(d, d).diagonal().array() += 1.0 / (C * n);
    const Eigen::VectorXd xh = X.transpose() * h / n;
    H.block(0, d, d, 1) = xh;
    H.block(d, 0, 1, d) = xh.transpose();
    H(d, d) = h.sum() / n;

    Eigen::VectorXd step = H.ldlt().solve(-obj.gradient);
    if (!step.allFinite() || step.dot(obj.gradient) >= 0.0) step = -obj.gradient;

    const double slope = step.dot(obj.gradient);
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      const Eigen::VectorXd w_try = m.weights + t * step.head(d);
      const double b_try = m.bias + t * step(d);
      LogRegObjective trial = logreg_objective(X, y, w_try, b_try, C);
      if (!std::isfinite(trial.value)) continue;
      if (trial.value <= obj.value + 1e-4 * t * slope || trial.gradient.norm() < obj.gradient.norm()) {
        m.weights = w_try;
        m.bias = b_try;
        obj = std::move(trial);
        moved = true;
        break;
      }
    }
    m.iterations = it + 1;
    if (!moved) break;
  }
  if (!std::isfinite(obj.value)) throw TrainingError("logistic loss became non-finite");
  m.gradient_norm = obj.gradient.norm();
  return m;
}

// ---- classification trees --------------------------------------------------------------------

double gini(std::size_t negatives, std::size_t positives) {
  const double n = static_cast<double>(negatives + positives);
  if (n == 0) return 0.0;
  const double a = static_cast<double>(negatives) / n;
  const double b = static_cast<double>(positives) / n;
  return 1.0 - a * a - b * b;
}

namespace {

__extension__ typedef __int128 Wide;

// Weighted Gini of a split is (n - S) / n with S = sq(L) / nL + sq(R) / nR,
// so the best split maximizes S. S is kept as an exact fraction.
struct Purity {
  Wide num = 0;
  Wide den = 1;

  static Purity of(std::size_t l0, std::size_t l1, std::size_t r0, std::size_t r1) {
    const Wide nl = static_cast<Wide>(l0 + l1);
    const Wide nr = static_cast<Wide>(r0 + r1);
    const Wide sl = static_cast<Wide>(l0) * l0 + static_cast<Wide>(l1) * l1;
    const Wide sr = static_cast<Wide>(r0) * r0 + static_cast<Wide>(r1) * r1;
    return {sl * nr + sr * nl, nl * nr};
  }
  static Purity parent(std::size_t c0, std::size_t c1) {
    return {static_cast<Wide>(c0) * c0 + static_cast<Wide>(c1) * c1, static_cast<Wide>(c0 + c1)};
  }
  bool operator>(const Purity& o) const { return num * o.den > o.num * den; }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

struct GiniSplit {
  SplitChoice choice;
  Purity purity;
};

std::optional<GiniSplit> find_gini_split(const Eigen::MatrixXd& X, std::span<const int> y,
                                         std::span<const std::size_t> rows) {
  std::size_t c[2] = {0, 0};
  for (std::size_t r : rows) ++c[y[r]];
  const Purity parent = Purity::parent(c[0], c[1]);
  std::optional<GiniSplit> best;
  for (int col = 0; col < X.cols(); ++col) {
    const auto order = sorted_by_column(X, rows, col);
    std::size_t l[2] = {0, 0};
    for (std::size_t i = 0; i + 1 < order.size(); ++i) {
      ++l[y[order[i]]];
      const double lo = X(static_cast<Eigen::Index>(order[i]), col);
      const double hi = X(static_cast<Eigen::Index>(order[i + 1]), col);
      if (!(lo < hi)) continue;
      const Purity p = Purity::of(l[0], l[1], c[0] - l[0], c[1] - l[1]);
      if (!(p > parent)) continue;
      if (!best || p > best->purity) best = GiniSplit{{col, midpoint(lo, hi)}, p};
    }
  }
  return best;
}

struct DtreeBuilder {
  const Eigen::MatrixXd& X;
  std::span<const int> y;
  TreeModel& tree;

  int build(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    TreeNode node;
    node.samples = rows.size();
    for (std::size_t r : rows) ++node.counts[y[r]];
    node.value = static_cast<double>(node.counts[1]) / static_cast<double>(node.samples);

    const bool pure = node.counts[0] == 0 || node.counts[1] == 0;
    std::optional<GiniSplit> split;
    if (!pure && depth < tree.max_depth && static_cast<int>(rows.size()) >= tree.min_samples_split) {
      split = find_gini_split(X, y, rows);
    }
    if (!split) {
      tree.nodes[id] = node;
      return id;
    }
    node.column = split->choice.column;
    node.threshold = split->choice.threshold;
    node.gain = split->purity.value() - Purity::parent(node.counts[0], node.counts[1]).value();
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (X(static_cast<Eigen::Index>(r), node.column) <= node.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    node.left = build(std::move(left), depth + 1);
    node.right = build(std::move(right), depth + 1);
    tree.nodes[id] = node;
    return id;
  }
};

std::vector<std::size_t> all_rows(Eigen::Index n) {
  std::vector<std::size_t> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

}  // namespace

std::optional<SplitChoice> best_gini_split(const Eigen::MatrixXd& X, std::span<const int> y,
                                           std::span<const std::size_t> rows) {
  auto s = find_gini_split(X, y, rows);
  if (!s) return std::nullopt;
  return s->choice;
}

TreeModel train_dtree(const Eigen::MatrixXd& X, std::span<const int> y, int max_depth, int min_samples_split) {
  check_shape(X, y);
  if (max_depth < 1) throw TrainingError("max_depth must be at least 1");
  if (min_samples_split < 2) throw TrainingError("min_samples_split must be at least 2");
  TreeModel tree;
  tree.max_depth = max_depth;
  tree.min_samples_split = min_samples_split;
  tree.n_columns = static_cast<std::size_t>(X.cols());
  DtreeBuilder{X, y, tree}.build(all_rows(X.rows()), 0);
  return tree;
}

double TreeModel::predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  int id = 0;
  while (!nodes[id].is_leaf()) {
    id = row(nodes[id].column) <= nodes[id].threshold ? nodes[id].left : nodes[id].right;
  }
  return nodes[id].value;
}

int TreeModel::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int deepest = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    deepest = std::max(deepest, d[i]);
    if (!nodes[i].is_leaf()) {
      d[nodes[i].left] = d[i] + 1;
      d[nodes[i].right] = d[i] + 1;
    }
  }
  return deepest;
}

// ---- gradient boosting -----------------------------------------------------------------------

namespace {

struct RegressionBuilder {
  const Eigen::MatrixXd& X;
  const Eigen::VectorXd& residual;
  const Eigen::VectorXd& hessian;
  TreeModel& tree;

  int build(std::vector<std::size_t> rows, int depth) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    TreeNode node;
    node.samples = rows.size();
    double sum = 0.0, hsum = 0.0;
    for (std::size_t r : rows) {
      sum += residual(static_cast<Eigen::Index>(r));
      hsum += hessian(static_cast<Eigen::Index>(r));
    }
    node.value = std::abs(hsum) < 1e-150 ? 0.0 : sum / hsum;

    if (depth < tree.max_depth && rows.size() >= 2) {
      const double n = static_cast<double>(rows.size());
      const double base = sum * sum / n;
      double best_gain = 1e-12;
      for (int col = 0; col < X.cols(); ++col) {
        const auto order = sorted_by_column(X, rows, col);
        double left = 0.0;
        for (std::size_t i = 0; i + 1 < order.size(); ++i) {
          left += residual(static_cast<Eigen::Index>(order[i]));
          const double lo = X(static_cast<Eigen::Index>(order[i]), col);
          const double hi = X(static_cast<Eigen::Index>(order[i + 1]), col);
          if (!(lo < hi)) continue;
          const double nl = static_cast<double>(i + 1);
          const double right = sum - left;
          const double gain = left * left / nl + right * right / (n - nl) - base;
          if (gain > best_gain) {
            best_gain = gain;
            node.column = col;
            node.threshold = midpoint(lo, hi);
            node.gain = gain;
          }
        }
      }
    }
    if (node.is_leaf()) {
      tree.nodes[id] = node;
      return id;
    }
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) {
      (X(static_cast<Eigen::Index>(r), node.column) <= node.threshold ? left : right).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    node.left = build(std::move(left), depth + 1);
    node.right = build(std::move(right), depth + 1);
    tree.nodes[id] = node;
    return id;
  }
};

double mean_logloss(const Eigen::VectorXd& F, std::span<const int> y) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < F.size(); ++i) total += softplus(F(i)) - y[static_cast<std::size_t>(i)] * F(i);
  return total / static_cast<double>(F.size());
}

}  // namespace

GbdtModel train_gbdt(const Eigen::MatrixXd& X, std::span<const int> y, int n_estimators, double learning_rate,
                     int max_depth) {
  check_shape(X, y);
  if (n_estimators < 0) throw TrainingError("n_estimators must be non-negative");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw TrainingError("learning_rate must be >= 0");
  if (max_depth < 1) throw TrainingError("max_depth must be at least 1");
  const auto positives = static_cast<double>(std::count(y.begin(), y.end(), 1));
  const auto n = static_cast<double>(y.size());
  if (positives == 0.0 || positives == n) throw TrainingError("gradient boosting needs both classes in training data");

  GbdtModel m;
  m.learning_rate = learning_rate;
  m.n_estimators = n_estimators;
  m.max_depth = max_depth;
  m.initial_log_odds = std::log(positives / (n - positives));

  Eigen::VectorXd F = Eigen::VectorXd::Constant(X.rows(), m.initial_log_odds);
  Eigen::VectorXd residual(X.rows()), hessian(X.rows());
  for (int round = 0; round < n_estimators; ++round) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) {
      const double p = sigmoid(F(i));
      residual(i) = y[static_cast<std::size_t>(i)] - p;
      hessian(i) = p * (1.0 - p);
    }
    TreeModel tree;
    tree.max_depth = max_depth;
    tree.n_columns = static_cast<std::size_t>(X.cols());
    RegressionBuilder{X, residual, hessian, tree}.build(all_rows(X.rows()), 0);
    for (Eigen::Index i = 0; i < X.rows(); ++i) F(i) += learning_rate * tree.predict_one(X.row(i));
    m.trees.push_back(std::move(tree));
  }
  return m;
}

double GbdtModel::raw_score(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
  double f = initial_log_odds;
  for (const auto& t : trees) f += learning_rate * t.predict_one(row);
  return f;
}

std::vector<double> gbdt_loss_curve(const GbdtModel& model, const Eigen::MatrixXd& X, std::span<const int> y) {
  Eigen::VectorXd F = Eigen::VectorXd::Constant(X.rows(), model.initial_log_odds);
  std::vector<double> curve{mean_logloss(F, y)};
  for (const auto& t : model.trees) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) F(i) += model.learning_rate * t.predict_one(X.row(i));
    curve.push_back(mean_logloss(F, y));
  }
  return curve;
}

// ---- prediction and importances --------------------------------------------------------------

namespace {

std::size_t expected_columns(const ModelBody& model) {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LogRegModel>) {
          return static_cast<std::size_t>(m.weights.size());
        } else if constexpr (std::is_same_v<T, TreeModel>) {
          return m.n_columns;
        } else {
          return m.trees.empty() ? std::size_t{0} : m.trees.front().n_columns;
        }
      },
      model);
}

}  // namespace

Eigen::VectorXd predict_proba(const ModelBody& model, const Eigen::MatrixXd& X) {
  const std::size_t want = expected_columns(model);
  const bool empty_gbdt = std::holds_alternative<GbdtModel>(model) && std::get<GbdtModel>(model).trees.empty();
  if (!empty_gbdt && want != static_cast<std::size_t>(X.cols())) {
    throw TrainingError("model expects " + std::to_string(want) + " columns, matrix has " +
                        std::to_string(X.cols()));
  }
  Eigen::VectorXd out(X.rows());
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        for (Eigen::Index i = 0; i < X.rows(); ++i) {
          if constexpr (std::is_same_v<T, LogRegModel>) {
            out(i) = sigmoid(X.row(i).dot(m.weights) + m.bias);
          } else if constexpr (std::is_same_v<T, TreeModel>) {
            out(i) = m.predict_one(X.row(i));
          } else {
            out(i) = sigmoid(m.raw_score(X.row(i)));
          }
        }
      },
      model);
  return out;
}

Eigen::VectorXd predict_proba(const TrainedModel& model, const Eigen::MatrixXd& X) {
  if (static_cast<std::size_t>(X.cols()) != model.column_names.size()) {
    throw TrainingError("model expects " + std::to_string(model.column_names.size()) + " columns, matrix has " +
                        std::to_string(X.cols()));
  }
  return predict_proba(model.body, X);
}

namespace {

void accumulate_gain(const TreeModel& tree, std::vector<double>& acc) {
  for (const auto& node : tree.nodes) {
    if (!node.is_leaf()) acc.at(static_cast<std::size_t>(node.column)) += node.gain;
  }
}

void normalize(std::vector<double>& v) {
  double total = 0.0;
  for (double x : v) total += x;
  if (total > 0.0) {
    for (double& x : v) x /= total;
  }
}

}  // namespace

std::vector<double> feature_importances(const ModelBody& model, std::size_t n_columns) {
  std::vector<double> out(n_columns, 0.0);
  if (const auto* lr = std::get_if<LogRegModel>(&model)) {
    for (std::size_t j = 0; j < n_columns; ++j) out[j] = lr->weights(static_cast<Eigen::Index>(j));
  } else if (const auto* tree = std::get_if<TreeModel>(&model)) {
    accumulate_gain(*tree, out);
    normalize(out);
  } else {
    for (const auto& t : std::get<GbdtModel>(model).trees) accumulate_gain(t, out);
    normalize(out);
  }
  return out;
}

ImportanceVector feature_importances(const TrainedModel& model) {
  return {model.column_names, feature_importances(model.body, model.column_names.size())};
}

// ---- grid search ---------------------------------------------------------------------------

std::vector<Json> grid_candidates(ModelFamily family) {
  std::vector<Json> out;
  switch (family) {
    case ModelFamily::logreg:
      for (double C : {0.001, 0.01, 0.1, 1.0, 10.0, 100.0}) out.push_back({{"C", C}});
      break;
    case ModelFamily::dtree:
      for (int depth : {3, 4, 5}) {
        for (int split : {10, 7, 5, 4, 3, 2}) out.push_back({{"max_depth", depth}, {"min_samples_split", split}});
      }
      break;
    case ModelFamily::gbdt:
      for (int n : {50, 100, 200}) {
        for (double lr : {0.01, 0.1, 0.3}) out.push_back({{"n_estimators", n}, {"learning_rate", lr}});
      }
      break;
  }
  return out;
}

TrainedModel train_candidate(ModelFamily family, const Json& params, const EncodedMatrix& train,
                             std::span<const int> y_train) {
  TrainedModel m;
  m.family = family;
  m.column_names = train.column_names;
  m.hyperparameters = params;
  switch (family) {
    case ModelFamily::logreg:
      m.body = train_logreg(train.values, y_train, params.at("C").get<double>());
      break;
    case ModelFamily::dtree:
      m.body = train_dtree(train.values, y_train, params.at("max_depth").get<int>(),
                           params.at("min_samples_split").get<int>());
      break;
    case ModelFamily::gbdt:
      m.body = train_gbdt(train.values, y_train, params.at("n_estimators").get<int>(),
                          params.at("learning_rate").get<double>());
      break;
  }
  return m;
}

namespace {

double accuracy_at_half(const Eigen::VectorXd& p, std::span<const int> y) {
  std::size_t hit = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) hit += (p(i) >= 0.5 ? 1 : 0) == y[static_cast<std::size_t>(i)];
  return static_cast<double>(hit) / static_cast<double>(y.size());
}

}  // namespace

GridResult grid_search(ModelFamily family, const EncodedMatrix& train, std::span<const int> y_train,
                       const EncodedMatrix& val, std::span<const int> y_val) {
  if (val.column_names != train.column_names) throw TrainingError("validation columns differ from training columns");
  if (y_val.empty()) throw TrainingError("grid search needs a non-empty validation split");
  GridResult result;
  result.report.family = family;
  std::optional<TrainedModel> best;
  double best_acc = -1.0;
  for (const Json& params : grid_candidates(family)) {
    TrainedModel m = train_candidate(family, params, train, y_train);
    const double acc = accuracy_at_half(predict_proba(m, val.values), y_val);
    result.report.entries.push_back({params, acc});
    if (acc > best_acc) {
      best_acc = acc;
      best = std::move(m);
      result.report.best = result.report.entries.size() - 1;
    }
  }
  result.model = std::move(*best);
  return result;
}

Json grid_report_to_json(const GridReport& report) {
  Json entries = Json::array();
  for (std::size_t i = 0; i < report.entries.size(); ++i) {
    entries.push_back({{"params", report.entries[i].params},
                       {"val_accuracy", report.entries[i].val_accuracy},
                       {"selected", i == report.best}});
  }
  return {{"family", std::string(to_string(report.family))}, {"candidates", std::move(entries)}};
}

// ---- export ------------------------------------------------------------------------------

namespace {

std::string column_label(const std::vector<std::string>& names, int col) {
  if (col >= 0 && static_cast<std::size_t>(col) < names.size()) return names[static_cast<std::size_t>(col)];
  return "x" + std::to_string(col);
}

std::string counts_text(const TreeNode& n) {
  return "samples=" + std::to_string(n.samples) + ", counts=[" + std::to_string(n.counts[0]) + ", " +
         std::to_string(n.counts[1]) + "]";
}

void render_text(const TreeModel& t, const std::vector<std::string>& names, int id, int depth, std::string& out) {
  const TreeNode& n = t.nodes[id];
  out.append(static_cast<std::size_t>(depth) * 2, ' ');
  if (n.is_leaf()) {
    out += "leaf p=" + format_real(n.value) + " (" + counts_text(n) + ")\n";
    return;
  }
  out += column_label(names, n.column) + " <= " + format_real(n.threshold) + " (" + counts_text(n) + ")\n";
  render_text(t, names, n.left, depth + 1, out);
  render_text(t, names, n.right, depth + 1, out);
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string export_tree(const TreeModel& model, const std::vector<std::string>& column_names, TreeFormat format) {
  std::string out;
  if (model.nodes.empty()) return format == TreeFormat::dot ? "digraph tree {\n}\n" : out;
  if (format == TreeFormat::text) {
    render_text(model, column_names, 0, 0, out);
    return out;
  }
  out = "digraph tree {\n  node [shape=box];\n";
  for (std::size_t i = 0; i < model.nodes.size(); ++i) {
    const TreeNode& n = model.nodes[i];
    const std::string head = n.is_leaf() ? "leaf p=" + format_real(n.value)
                                         : column_label(column_names, n.column) + " <= " + format_real(n.threshold);
    out += "  n" + std::to_string(i) + " [label=\"" + dot_escape(head) + "\\nsamples=" + std::to_string(n.samples) +
           "\\ncounts=[" + std::to_string(n.counts[0]) + ", " + std::to_string(n.counts[1]) + "]\"];\n";
  }
  for (std::size_t i = 0; i < model.nodes.size(); ++i) {
    const TreeNode& n = model.nodes[i];
    if (n.is_leaf()) continue;
    out += "  n" + std::to_string(i) + " -> n" + std::to_string(n.left) + " [label=\"true\"];\n";
    out += "  n" + std::to_string(i) + " -> n" + std::to_string(n.right) + " [label=\"false\"];\n";
  }
  out += "}\n";
  return out;
}

// ---- persistence ------------------------------------------------------------------------------

namespace {

Json tree_to_json(const TreeModel& t) {
  Json nodes = Json::array();
  for (const auto& n : t.nodes) {
    nodes.push_back({{"column", n.column},
                     {"threshold", n.threshold},
                     {"left", n.left},
                     {"right", n.right},
                     {"samples", n.samples},
                     {"counts", {n.counts[0], n.counts[1]}},
                     {"value", n.value},
                     {"gain", n.gain}});
  }
  return {{"max_depth", t.max_depth},
          {"min_samples_split", t.min_samples_split},
          {"n_columns", t.n_columns},
          {"nodes", std::move(nodes)}};
}

TreeModel tree_from_json(const Json& j) {
  TreeModel t;
  t.max_depth = j.at("max_depth").get<int>();
  t.min_samples_split = j.at("min_samples_split").get<int>();
  t.n_columns = j.at("n_columns").get<std::size_t>();
  for (const auto& n : j.at("nodes")) {
    TreeNode node;
    node.column = n.at("column").get<int>();
    node.threshold = n.at("threshold").get<double>();
    node.left = n.at("left").get<int>();
    node.right = n.at("right").get<int>();
    node.samples = n.at("samples").get<std::size_t>();
    node.counts = {n.at("counts").at(0).get<std::size_t>(), n.at("counts").at(1).get<std::size_t>()};
    node.value = n.at("value").get<double>();
    node.gain = n.at("gain").get<double>();
    t.nodes.push_back(node);
  }
  const auto count = static_cast<int>(t.nodes.size());
  if (count == 0) throw ModelFormatError("tree has no nodes");
  for (int i = 0; i < count; ++i) {
    const auto& n = t.nodes[static_cast<std::size_t>(i)];
    if (n.is_leaf()) continue;
    if (n.left <= i || n.right <= i || n.left >= count || n.right >= count ||
        static_cast<std::size_t>(n.column) >= t.n_columns) {
      throw ModelFormatError("tree node " + std::to_string(i) + " has invalid links");
    }
  }
  return t;
}

}  // namespace

Json model_to_json(const TrainedModel& model) {
  Json body;
  if (const auto* lr = std::get_if<LogRegModel>(&model.body)) {
    body = {{"weights", std::vector<double>(lr->weights.data(), lr->weights.data() + lr->weights.size())},
            {"bias", lr->bias},
            {"C", lr->C},
            {"iterations", lr->iterations},
            {"gradient_norm", lr->gradient_norm}};
  } else if (const auto* tree = std::get_if<TreeModel>(&model.body)) {
    body = tree_to_json(*tree);
  } else {
    const auto& g = std::get<GbdtModel>(model.body);
    Json trees = Json::array();
    for (const auto& t : g.trees) trees.push_back(tree_to_json(t));
    body = {{"learning_rate", g.learning_rate},
            {"n_estimators", g.n_estimators},
            {"max_depth", g.max_depth},
            {"initial_log_odds", g.initial_log_odds},
            {"trees", std::move(trees)}};
  }
  Json doc = {{"format_version", kModelFormatVersion},
              {"family", std::string(to_string(model.family))},
              {"column_names", model.column_names},
              {"hyperparameters", model.hyperparameters},
              {"encoder", model.encoder ? encoder_to_json(*model.encoder) : Json(nullptr)},
              {"schema", model.schema ? *model.schema : Json(nullptr)},
              {"model", std::move(body)}};
  return doc;
}

TrainedModel model_from_json(const Json& doc) {
  try {
    if (doc.at("format_version").get<int>() != kModelFormatVersion) {
      throw ModelFormatError("unsupported model format_version " + doc.at("format_version").dump());
    }
    TrainedModel m;
    const auto family = model_family_from_string(doc.at("family").get<std::string>());
    if (!family) throw ModelFormatError("unknown model family " + doc.at("family").dump());
    m.family = *family;
    m.column_names = doc.at("column_names").get<std::vector<std::string>>();
    m.hyperparameters = doc.at("hyperparameters");
    if (!doc.at("encoder").is_null()) m.encoder = encoder_from_json(doc.at("encoder"));
    if (doc.contains("schema") && !doc.at("schema").is_null()) m.schema = doc.at("schema");
    const Json& b = doc.at("model");
    switch (m.family) {
      case ModelFamily::logreg: {
        LogRegModel lr;
        const auto w = b.at("weights").get<std::vector<double>>();
        lr.weights = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        lr.bias = b.at("bias").get<double>();
        lr.C = b.at("C").get<double>();
        lr.iterations = b.at("iterations").get<int>();
        lr.gradient_norm = b.at("gradient_norm").get<double>();
        m.body = std::move(lr);
        break;
      }
      case ModelFamily::dtree:
        m.body = tree_from_json(b);
        break;
      case ModelFamily::gbdt: {
        GbdtModel g;
        g.learning_rate = b.at("learning_rate").get<double>();
        g.n_estimators = b.at("n_estimators").get<int>();
        g.max_depth = b.at("max_depth").get<int>();
        g.initial_log_odds = b.at("initial_log_odds").get<double>();
        for (const auto& t : b.at("trees")) g.trees.push_back(tree_from_json(t));
        if (static_cast<int>(g.trees.size()) != g.n_estimators) throw ModelFormatError("tree count mismatch");
        m.body = std::move(g);
        break;
      }
    }
    if (expected_columns(m.body) != m.column_names.size() &&
        !(m.family == ModelFamily::gbdt && std::get<GbdtModel>(m.body).trees.empty())) {
      throw ModelFormatError("model body and column_names disagree on width");
    }
    return m;
  } catch (const Json::exception& e) {
    throw ModelFormatError(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const TrainedModel& model) {
  write_file(path, model_to_json(model).dump(2) + "\n");
}

TrainedModel load_model(const std::filesystem::path& path) {
  Json doc;
  try {
    doc = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ModelFormatError(path.string() + ": " + e.what());
  }
  return model_from_json(doc);
}

}  // namespace temed
