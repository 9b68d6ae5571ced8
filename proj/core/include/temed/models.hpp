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

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "temed/dataset.hpp"
#include "temed/schema.hpp"

namespace temed {

struct TrainingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ModelFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class ModelFamily { logreg, dtree, gbdt };
std::string_view to_string(ModelFamily family);
std::optional<ModelFamily> model_family_from_string(std::string_view text);

// ---- logistic regression ---------------------------------------------------------

struct LogRegModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  double C = 1.0;
  int iterations = 0;
  double gradient_norm = 0.0;
};

struct LogRegObjective {
  double loss = 0.0;     // mean log-loss
  double penalty = 0.0;  // ||w||^2 / (2 C n)
  double value = 0.0;    // loss + penalty
  Eigen::VectorXd gradient;  // d weights followed by the bias
};

LogRegObjective logreg_objective(const Eigen::MatrixXd& X, std::span<const int> y, const Eigen::VectorXd& weights,
                                 double bias, double C);

// Damped Newton from zero; stops at gradient norm <= 1e-6 or 100 iterations.
LogRegModel train_logreg(const Eigen::MatrixXd& X, std::span<const int> y, double C);

inline constexpr int kLogRegMaxIterations = 100;
inline constexpr double kLogRegTolerance = 1e-6;

// ---- trees ------------------------------------------------------------------------

struct TreeNode {
  int column = -1;  // -1 for leaves
  double threshold = 0.0;  // rows with x <= threshold go left
  int left = -1;
  int right = -1;
  std::size_t samples = 0;
  std::array<std::size_t, 2> counts{};  // classification trees only
  double value = 0.0;  // leaf: positive fraction (classification) or leaf step (regression)
  double gain = 0.0;   // internal: weighted impurity decrease, unnormalized

  bool is_leaf() const { return column < 0; }
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  int max_depth = 0;
  int min_samples_split = 2;
  std::size_t n_columns = 0;

  double predict_one(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
  int depth() const;
};

struct SplitChoice {
  int column = -1;
  double threshold = 0.0;
};

// Best Gini split of `rows`; ties go to the lower column, then the lower threshold.
// Returns nothing when no split strictly lowers the weighted Gini.
std::optional<SplitChoice> best_gini_split(const Eigen::MatrixXd& X, std::span<const int> y,
                                           std::span<const std::size_t> rows);

double gini(std::size_t negatives, std::size_t positives);

TreeModel train_dtree(const Eigen::MatrixXd& X, std::span<const int> y, int max_depth, int min_samples_split);

// ---- gradient boosting ----------------------------------------------------------------

struct GbdtModel {
  std::vector<TreeModel> trees;
  double learning_rate = 0.1;
  int n_estimators = 0;
  int max_depth = 6;
  double initial_log_odds = 0.0;

  double raw_score(const Eigen::Ref<const Eigen::RowVectorXd>& row) const;
};

inline constexpr int kGbdtDefaultDepth = 6;

GbdtModel train_gbdt(const Eigen::MatrixXd& X, std::span<const int> y, int n_estimators, double learning_rate,
                     int max_depth = kGbdtDefaultDepth);

// Mean log-loss of the training set after each round; entry 0 is the base model.
std::vector<double> gbdt_loss_curve(const GbdtModel& model, const Eigen::MatrixXd& X, std::span<const int> y);

// ---- trained model wrapper -------------------------------------------------------------

using ModelBody = std::variant<LogRegModel, TreeModel, GbdtModel>;

struct TrainedModel {
  ModelFamily family = ModelFamily::logreg;
  ModelBody body;
  std::vector<std::string> column_names;
  Json hyperparameters = Json::object();
  std::optional<EncoderState> encoder;
  std::optional<Json> schema;  // schema document the encoder was fitted against
};

struct ImportanceVector {
  std::vector<std::string> column_names;
  std::vector<double> values;
};

Eigen::VectorXd predict_proba(const ModelBody& model, const Eigen::MatrixXd& X);
Eigen::VectorXd predict_proba(const TrainedModel& model, const Eigen::MatrixXd& X);

ImportanceVector feature_importances(const TrainedModel& model);
std::vector<double> feature_importances(const ModelBody& model, std::size_t n_columns);

// ---- grid search -----------------------------------------------------------------------

struct GridEntry {
  Json params;
  double val_accuracy = 0.0;
};

struct GridReport {
  ModelFamily family = ModelFamily::logreg;
  std::vector<GridEntry> entries;  // evaluation order
  std::size_t best = 0;
};

struct GridResult {
  TrainedModel model;
  GridReport report;
};

// Candidates run from most to least regularized; a later one replaces the
// incumbent only with strictly higher validation accuracy.
GridResult grid_search(ModelFamily family, const EncodedMatrix& train, std::span<const int> y_train,
                       const EncodedMatrix& val, std::span<const int> y_val);

std::vector<Json> grid_candidates(ModelFamily family);
TrainedModel train_candidate(ModelFamily family, const Json& params, const EncodedMatrix& train,
                             std::span<const int> y_train);

Json grid_report_to_json(const GridReport& report);

// ---- export and persistence ------------------------------------------------------------

enum class TreeFormat { text, dot };

std::string export_tree(const TreeModel& model, const std::vector<std::string>& column_names,
                        TreeFormat format = TreeFormat::text);

inline constexpr int kModelFormatVersion = 1;

Json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const Json& doc);
void save_model(const std::filesystem::path& path, const TrainedModel& model);
TrainedModel load_model(const std::filesystem::path& path);

}  // namespace temed
