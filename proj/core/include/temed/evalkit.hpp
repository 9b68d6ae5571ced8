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

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "temed/dataset.hpp"
#include "temed/models.hpp"
#include "temed/vorc.hpp"

namespace temed {

struct EvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---- extraction quality -------------------------------------------------------------

struct ExtractionReport {
  double record_accuracy = 0.0;
  double cell_accuracy = 0.0;
  std::optional<double> missing_precision;  // null when nothing was extracted as Missing
  std::optional<double> missing_recall;     // null when no truth cell is Missing
  std::optional<double> vorc_call_rate;     // null without provenance
  std::size_t n_evaluated = 0;
  std::size_t n_failed = 0;  // provenance entries that produced no row
};

inline constexpr double kRealRelativeTolerance = 1e-9;

// Missing matches only Missing; reals compare with relative tolerance 1e-9.
bool cells_match(const CellValue& extracted, const CellValue& truth);

// Every extracted id must exist in `truth`; rows are paired by id.
ExtractionReport extraction_metrics(const TabularDataset& extracted, const TabularDataset& truth,
                                    std::span<const Provenance> provenance = {});

// ---- classification -----------------------------------------------------------------

struct ClassificationReport {
  double accuracy = 0.0;
  double precision = 0.0;  // 0 when nothing is predicted positive
  double recall = 0.0;     // 0 when there are no positives
  double f1 = 0.0;
  std::optional<double> auc;
  std::string auc_note;  // why auc is null, when it is
  std::size_t n = 0;
  std::size_t abstained = 0;  // few-shot rows without a usable answer
};

// Mann-Whitney statistic with average ranks; ties between classes count 0.5.
// Null when either class is absent.
std::optional<double> roc_auc(std::span<const int> y_true, std::span<const double> scores);

// A row is predicted positive when its score is >= threshold.
ClassificationReport classification_metrics(std::span<const int> y_true, std::span<const double> scores,
                                            double threshold = 0.5);
ClassificationReport classification_metrics(std::span<const int> y_true, const Eigen::VectorXd& scores,
                                            double threshold = 0.5);

// Hard predictions only; auc stays null.
ClassificationReport label_metrics(std::span<const int> y_true, std::span<const int> y_pred);

// ---- interpretability fidelity ------------------------------------------------------------

struct FidelityReport {
  double acc_gt = 0.0;
  double acc_ext = 0.0;
  std::optional<double> auc_gt;
  std::optional<double> auc_ext;
  double acc_d = 0.0;
  std::optional<double> auc_d;
  std::optional<double> r2;  // null when the reference importances are constant
};

// 1 - SS_res / SS_tot with `reference` as the observed vector.
std::optional<double> importance_r2(std::span<const double> reference, std::span<const double> other);

FidelityReport fidelity(const TrainedModel& model_gt, const TrainedModel& model_ext, const Eigen::MatrixXd& X_test_gt,
                        const Eigen::MatrixXd& X_test_ext, std::span<const int> y_test);

// ---- rendering --------------------------------------------------------------------------

using AnyReport = std::variant<ExtractionReport, ClassificationReport, FidelityReport>;

struct NamedReport {
  std::string name;
  AnyReport report;
};

enum class ReportFormat { text, json, csv };

inline constexpr int kReportSchemaVersion = 1;

std::string render_report(const std::vector<NamedReport>& reports, ReportFormat format);
OrderedJson report_to_json(const std::vector<NamedReport>& reports);

}  // namespace temed
