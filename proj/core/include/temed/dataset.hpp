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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "temed/schema.hpp"

namespace temed {

struct ExtractionRecord;

struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TabularDataset {
  ExtractionSchema schema;
  std::vector<std::string> ids;
  std::vector<std::vector<CellValue>> rows;  // each aligned with schema.features()
  std::vector<int> labels;                   // 1 = positive label value
  bool labeled = false;                      // labels has one entry per row when set

  std::size_t size() const { return rows.size(); }
};

// ---- CSV -----------------------------------------------------------------------

// RFC-4180 records; quoted fields may hold commas, quotes ("") and newlines.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string csv_escape(std::string_view field);

// Header: optional "id", one column per feature (folded match), optional label column.
TabularDataset parse_dataset_csv(std::string_view text, const ExtractionSchema& schema);
TabularDataset load_csv(const std::filesystem::path& path, const ExtractionSchema& schema);
std::string to_csv(const TabularDataset& dataset);
void save_csv(const std::filesystem::path& path, const TabularDataset& dataset);

TabularDataset dataset_from_records(const ExtractionSchema& schema, const std::vector<ExtractionRecord>& records);

// Rows of `dataset` whose ids appear in `ids`, in the order of `ids`.
TabularDataset select_ids(const TabularDataset& dataset, const std::vector<std::string>& ids);

// ---- splitting ------------------------------------------------------------------

// 64-bit LCG (Knuth MMIX constants): state = state * 6364136223846793005
// + 1442695040888963407, output = state >> 32. Seeded with state = seed.
class Lcg64 {
 public:
  explicit Lcg64(std::uint64_t seed) : state_(seed) {}
  std::uint32_t next() {
    state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
    return static_cast<std::uint32_t>(state_ >> 32);
  }
  // Uniform-ish in [0, bound); modulo reduction.
  std::size_t below(std::size_t bound) { return bound == 0 ? 0 : next() % bound; }

 private:
  std::uint64_t state_;
};

struct SplitAssignment {
  std::uint64_t seed = 0;
  std::vector<std::size_t> train;  // row indices, ascending
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
};

// 70/10/20 by largest remainder over n; ties go to train, then val, then test.
SplitSizes split_sizes(std::size_t n);

// Stratified 70/10/20 split. Each class is shuffled (Fisher-Yates over Lcg64,
// class 0 first, one generator), its k-th member gets key (k + 0.5) / n_class,
// rows are merged by (key, class) and cut at split_sizes(n).
SplitAssignment split(const TabularDataset& dataset, std::uint64_t seed);

Json split_to_json(const SplitAssignment& s);
SplitAssignment split_from_json(const Json& j);

// ---- encoding -------------------------------------------------------------------

struct FeatureEncoding {
  std::string name;
  FeatureKind kind = FeatureKind::real;
  double mean = 0.0;   // numeric: train mean, also the imputation value
  double scale = 1.0;  // numeric: train stddev after imputation, 1 when zero
  std::vector<std::string> categories;  // categorical: allowed values, schema order
  std::size_t mode = 0;                 // categorical: imputed category index
};

struct EncoderState {
  std::vector<FeatureEncoding> features;  // text features are skipped
  std::vector<std::string> column_names;
};

struct EncodedMatrix {
  std::vector<std::string> column_names;
  Eigen::MatrixXd values;  // rows x columns
};

EncoderState fit_encoder(const TabularDataset& dataset, std::span<const std::size_t> train_ids);
EncodedMatrix transform(const TabularDataset& dataset, const EncoderState& state, std::span<const std::size_t> ids);
std::vector<int> labels_of(const TabularDataset& dataset, std::span<const std::size_t> ids);

Json encoder_to_json(const EncoderState& state);
EncoderState encoder_from_json(const Json& j);

}  // namespace temed
