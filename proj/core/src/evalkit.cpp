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

#include "temed/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace temed {

bool cells_match(const CellValue& extracted, const CellValue& truth) {
  if (is_missing(extracted) || is_missing(truth)) return is_missing(extracted) && is_missing(truth);
  if (const auto* s = std::get_if<std::string>(&truth)) {
    const auto* e = std::get_if<std::string>(&extracted);
    return e != nullptr && *e == *s;
  }
  if (std::holds_alternative<std::string>(extracted)) return false;
  if (std::holds_alternative<std::int64_t>(truth) && std::holds_alternative<std::int64_t>(extracted)) {
    return std::get<std::int64_t>(truth) == std::get<std::int64_t>(extracted);
  }
  auto as_real = [](const CellValue& v) {
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    return std::get<double>(v);
  };
  const double a = as_real(extracted);
  const double b = as_real(truth);
  if (a == b) return true;
  return std::abs(a - b) <= kRealRelativeTolerance * std::max(std::abs(a), std::abs(b));
}

ExtractionReport extraction_metrics(const TabularDataset& extracted, const TabularDataset& truth,
                                    std::span<const Provenance> provenance) {
  const auto& fe = extracted.schema.features();
  const auto& ft = truth.schema.features();
  if (fe.size() != ft.size()) throw EvalError("extracted and truth tables have different feature counts");
  for (std::size_t f = 0; f < fe.size(); ++f) {
    if (fe[f].name != ft[f].name || fe[f].kind != ft[f].kind) {
      throw EvalError("feature '" + fe[f].name + "' does not line up with truth feature '" + ft[f].name + "'");
    }
  }
  if (extracted.size() == 0) throw EvalError("no extracted rows to evaluate");

  std::map<std::string_view, std::size_t> truth_index;
  for (std::size_t i = 0; i < truth.size(); ++i) truth_index.emplace(truth.ids[i], i);

  std::size_t exact_rows = 0, matching_cells = 0, both_missing = 0, extracted_missing = 0, truth_missing = 0;
  for (std::size_t r = 0; r < extracted.size(); ++r) {
    auto it = truth_index.find(extracted.ids[r]);
    if (it == truth_index.end()) throw EvalError("extracted id '" + extracted.ids[r] + "' is not in the truth table");
    const auto& er = extracted.rows[r];
    const auto& tr = truth.rows[it->second];
    bool all = true;
    for (std::size_t f = 0; f < fe.size(); ++f) {
      const bool m = cells_match(er[f], tr[f]);
      matching_cells += m;
      all = all && m;
      const bool em = is_missing(er[f]);
      const bool tm = is_missing(tr[f]);
      extracted_missing += em;
      truth_missing += tm;
      both_missing += em && tm;
    }
    exact_rows += all;
  }

  ExtractionReport rep;
  rep.n_evaluated = extracted.size();
  const auto rows = static_cast<double>(extracted.size());
  rep.record_accuracy = static_cast<double>(exact_rows) / rows;
  rep.cell_accuracy = fe.empty() ? 1.0 : static_cast<double>(matching_cells) / (rows * static_cast<double>(fe.size()));
  if (extracted_missing > 0) rep.missing_precision = static_cast<double>(both_missing) / extracted_missing;
  if (truth_missing > 0) rep.missing_recall = static_cast<double>(both_missing) / truth_missing;
  if (!provenance.empty()) {
    std::size_t called = 0;
    for (const auto& p : provenance) {
      called += p.vorc_iterations >= 1;
      rep.n_failed += p.status != RecordStatus::ok;
    }
    rep.vorc_call_rate = static_cast<double>(called) / static_cast<double>(provenance.size());
  }
  return rep;
}

// ---- classification -----------------------------------------------------------------

std::optional<double> roc_auc(std::span<const int> y_true, std::span<const double> scores) {
  if (y_true.size() != scores.size()) throw EvalError("labels and scores differ in length");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double pos_rank_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = static_cast<double>(i + 1 + j) / 2.0;  // mean of ranks i+1 .. j
    for (std::size_t k = i; k < j; ++k) {
      if (y_true[order[k]] == 1) {
        pos_rank_sum += avg_rank;
        ++positives;
      }
    }
    i = j;
  }
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const auto p = static_cast<double>(positives);
  const double u = pos_rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(negatives));
}

namespace {

ClassificationReport from_predictions(std::span<const int> y_true, const std::vector<int>& pred) {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (y_true[i] != 0 && y_true[i] != 1) throw EvalError("labels must be 0 or 1");
    if (pred[i] == 1) {
      (y_true[i] == 1 ? tp : fp)++;
    } else {
      (y_true[i] == 1 ? fn : tn)++;
    }
  }
  ClassificationReport r;
  r.n = pred.size();
  r.accuracy = static_cast<double>(tp + tn) / static_cast<double>(r.n);
  r.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  r.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  r.f1 = r.precision + r.recall == 0.0 ? 0.0 : 2.0 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

}  // namespace

ClassificationReport classification_metrics(std::span<const int> y_true, std::span<const double> scores,
                                            double threshold) {
  if (y_true.size() != scores.size()) throw EvalError("labels and scores differ in length");
  if (y_true.empty()) throw EvalError("classification metrics need at least one row");
  std::vector<int> pred(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) pred[i] = scores[i] >= threshold ? 1 : 0;
  ClassificationReport r = from_predictions(y_true, pred);
  r.auc = roc_auc(y_true, scores);
  if (!r.auc) r.auc_note = "AUC undefined: only one class present in y_true";
  return r;
}

ClassificationReport classification_metrics(std::span<const int> y_true, const Eigen::VectorXd& scores,
                                            double threshold) {
  return classification_metrics(y_true, std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                                threshold);
}

ClassificationReport label_metrics(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) throw EvalError("labels and predictions differ in length");
  if (y_true.empty()) throw EvalError("classification metrics need at least one row");
  ClassificationReport r = from_predictions(y_true, std::vector<int>(y_pred.begin(), y_pred.end()));
  r.auc_note = "AUC not computed for hard labels";
  return r;
}

// ---- fidelity ---------------------------------------------------------------------------

std::optional<double> importance_r2(std::span<const double> reference, std::span<const double> other) {
  if (reference.size() != other.size()) throw EvalError("importance vectors differ in length");
  if (reference.empty()) return std::nullopt;
  double mean = 0.0;
  for (double v : reference) mean += v;
  mean /= static_cast<double>(reference.size());
  double ss_tot = 0.0, ss_res = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    ss_tot += (reference[i] - mean) * (reference[i] - mean);
    ss_res += (reference[i] - other[i]) * (reference[i] - other[i]);
  }
  if (ss_tot == 0.0) return std::nullopt;
  return 1.0 - ss_res / ss_tot;
}

FidelityReport fidelity(const TrainedModel& model_gt, const TrainedModel& model_ext, const Eigen::MatrixXd& X_test_gt,
                        const Eigen::MatrixXd& X_test_ext, std::span<const int> y_test) {
  if (model_gt.family != model_ext.family) throw EvalError("fidelity compares models of one family");
  if (model_gt.column_names != model_ext.column_names) throw EvalError("models were trained on different columns");
  if (static_cast<std::size_t>(X_test_gt.rows()) != y_test.size() ||
      static_cast<std::size_t>(X_test_ext.rows()) != y_test.size()) {
    throw EvalError("test matrices and labels differ in row count");
  }
  const auto gt = classification_metrics(y_test, predict_proba(model_gt, X_test_gt));
  const auto ext = classification_metrics(y_test, predict_proba(model_ext, X_test_ext));
  FidelityReport f;
  f.acc_gt = gt.accuracy;
  f.acc_ext = ext.accuracy;
  f.auc_gt = gt.auc;
  f.auc_ext = ext.auc;
  f.acc_d = std::abs(gt.accuracy - ext.accuracy);
  if (gt.auc && ext.auc) f.auc_d = std::abs(*gt.auc - *ext.auc);
  const auto ig = feature_importances(model_gt);
  const auto ie = feature_importances(model_ext);
  f.r2 = importance_r2(ig.values, ie.values);
  return f;
}

// ---- rendering ------------------------------------------------------------------------

namespace {

using Metric = std::pair<std::string, std::optional<double>>;

struct Flattened {
  std::string kind;
  std::vector<Metric> metrics;
};

Flattened flatten(const AnyReport& report) {
  return std::visit(
      [](const auto& r) -> Flattened {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, ExtractionReport>) {
          return {"extraction",
                  {{"record_accuracy", r.record_accuracy},
                   {"cell_accuracy", r.cell_accuracy},
                   {"missing_precision", r.missing_precision},
                   {"missing_recall", r.missing_recall},
                   {"vorc_call_rate", r.vorc_call_rate},
                   {"n_evaluated", static_cast<double>(r.n_evaluated)},
                   {"n_failed", static_cast<double>(r.n_failed)}}};
        } else if constexpr (std::is_same_v<T, ClassificationReport>) {
          return {"classification",
                  {{"accuracy", r.accuracy},
                   {"precision", r.precision},
                   {"recall", r.recall},
                   {"f1", r.f1},
                   {"auc", r.auc},
                   {"n", static_cast<double>(r.n)},
                   {"abstained", static_cast<double>(r.abstained)}}};
        } else {
          return {"fidelity",
                  {{"acc_gt", r.acc_gt},
                   {"acc_ext", r.acc_ext},
                   {"auc_gt", r.auc_gt},
                   {"auc_ext", r.auc_ext},
                   {"acc_d", r.acc_d},
                   {"auc_d", r.auc_d},
                   {"r2", r.r2}}};
        }
      },
      report);
}

bool is_count(const std::string& metric) { return metric == "n" || metric.starts_with("n_") || metric == "abstained"; }

std::string value_text(const Metric& m) {
  if (!m.second) return "";
  if (is_count(m.first)) return std::to_string(static_cast<long long>(*m.second));
  return format_real(*m.second);
}

}  // namespace

OrderedJson report_to_json(const std::vector<NamedReport>& reports) {
  OrderedJson doc;
  doc["schema_version"] = kReportSchemaVersion;
  doc["reports"] = OrderedJson::array();
  for (const auto& nr : reports) {
    const Flattened f = flatten(nr.report);
    OrderedJson metrics = OrderedJson::object();
    for (const auto& m : f.metrics) {
      if (!m.second) {
        metrics[m.first] = nullptr;
      } else if (is_count(m.first)) {
        metrics[m.first] = static_cast<long long>(*m.second);
      } else {
        metrics[m.first] = *m.second;
      }
    }
    if (const auto* c = std::get_if<ClassificationReport>(&nr.report); c && !c->auc && !c->auc_note.empty()) {
      metrics["auc_note"] = c->auc_note;
    }
    doc["reports"].push_back(OrderedJson{{"name", nr.name}, {"kind", f.kind}, {"metrics", std::move(metrics)}});
  }
  return doc;
}

std::string render_report(const std::vector<NamedReport>& reports, ReportFormat format) {
  std::string out;
  switch (format) {
    case ReportFormat::csv:
      out = "report,metric,value\n";
      for (const auto& nr : reports) {
        for (const auto& m : flatten(nr.report).metrics) {
          out += csv_escape(nr.name) + "," + m.first + "," + value_text(m) + "\n";
        }
      }
      return out;
    case ReportFormat::json:
      return report_to_json(reports).dump(2) + "\n";
    case ReportFormat::text:
      for (const auto& nr : reports) {
        const Flattened f = flatten(nr.report);
        out += nr.name + " (" + f.kind + ")\n";
        for (const auto& m : f.metrics) {
          out += "  " + m.first + ": " + (m.second ? value_text(m) : std::string("null")) + "\n";
        }
      }
      return out;
  }
  return out;
}

}  // namespace temed
