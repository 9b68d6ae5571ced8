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

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace temed {

using Json = nlohmann::json;
using OrderedJson = nlohmann::ordered_json;

enum class FeatureKind { integer, real, text, categorical };

std::string_view to_string(FeatureKind kind);
std::optional<FeatureKind> feature_kind_from_string(std::string_view text);

struct NumericRange {
  double min = 0.0;
  double max = 0.0;
};

struct FeatureSpec {
  std::string name;
  std::string title;
  std::string description;
  FeatureKind kind = FeatureKind::text;
  std::vector<std::string> allowed_values;  // categorical only, canonical spelling
  std::optional<NumericRange> range;        // integer/real only, inclusive
  bool allow_missing = true;

  bool is_numeric() const { return kind == FeatureKind::integer || kind == FeatureKind::real; }
};

struct LabelSpec {
  std::string name;
  std::string positive_value;
  std::string negative_value;
};

// Immutable after construction; validated by the constructor.
class ExtractionSchema {
 public:
  ExtractionSchema(std::vector<FeatureSpec> features, std::optional<LabelSpec> label);

  const std::vector<FeatureSpec>& features() const { return features_; }
  const std::optional<LabelSpec>& label() const { return label_; }
  std::size_t size() const { return features_.size(); }

  // Index of the feature whose folded name equals fold_key(key).
  std::optional<std::size_t> find(std::string_view key) const;
  const FeatureSpec& feature(std::size_t i) const { return features_.at(i); }

 private:
  std::vector<FeatureSpec> features_;
  std::optional<LabelSpec> label_;
  std::vector<std::string> folded_;
};

struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

ExtractionSchema load_schema(const std::filesystem::path& path);
ExtractionSchema parse_schema(std::string_view text);
ExtractionSchema schema_from_json(const Json& doc);
Json schema_to_json(const ExtractionSchema& schema);

// Single-line {"properties": {...}} block in the style of Pydantic's schema dump.
std::string emit_json_schema_block(const ExtractionSchema& schema);

// Key folding shared by record validation and CSV headers: lowercase,
// with '_', ' ' and '-' removed.
std::string fold_key(std::string_view key);

// ---- typed values -------------------------------------------------------

struct Missing {
  friend bool operator==(Missing, Missing) { return true; }
};

using CellValue = std::variant<Missing, std::int64_t, double, std::string>;

inline bool is_missing(const CellValue& v) { return std::holds_alternative<Missing>(v); }

Json to_json(const CellValue& value);
std::string format_cell(const CellValue& value);  // "" for Missing
std::string format_real(double value);            // shortest round-trip form

enum class ViolationKind {
  missing_required_key,
  unknown_extra_key,
  type_mismatch,
  out_of_range,
  unknown_category,
  missing_not_allowed,
};

std::string_view to_string(ViolationKind kind);

struct CoercionError : std::runtime_error {
  CoercionError(ViolationKind k, std::string message)
      : std::runtime_error(std::move(message)), kind(k) {}
  ViolationKind kind;
};

// Coerces a JSON scalar to the feature's canonical typed value.
// Throws CoercionError.
CellValue canonicalize_value(const FeatureSpec& spec, const Json& raw);

// Same rules applied to raw CSV text; an empty cell is null.
CellValue canonicalize_text(const FeatureSpec& spec, std::string_view raw);

// Human-readable expectation, e.g. "an integer between 60 and 202".
std::string describe_expectation(const FeatureSpec& spec);

}  // namespace temed
