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
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "temed/llm_gateway.hpp"
#include "temed/rextract.hpp"
#include "temed/schema.hpp"

namespace temed {

// ---- response parsing and rule-based repair ---------------------------------

struct JsonParseError : std::runtime_error {
  enum class Kind { no_json_found, strict_parse_error };
  JsonParseError(Kind k, std::string message, std::size_t pos = 0)
      : std::runtime_error(std::move(message)), kind(k), position(pos) {}
  Kind kind;
  std::size_t position;  // byte offset into the raw response
};

// Strictly parses the last top-level {...} block of a model response.
Json parse_response(std::string_view raw);

// Declaration order is application order.
enum class RepairKind {
  strip_code_fence,
  single_to_double_quotes,
  remove_trailing_comma,
  quote_bare_key,
  pyliteral_to_json,
  nan_to_null,
  extract_json_substring,
};

std::string_view to_string(RepairKind kind);

struct RepairAction {
  RepairKind kind;
  std::size_t begin = 0;  // byte range touched, in the text as it stood at that step
  std::size_t end = 0;

  friend bool operator==(const RepairAction&, const RepairAction&) = default;
};

struct RepairResult {
  std::string text;
  std::vector<RepairAction> actions;
};

struct UnrepairableJson : JsonParseError {
  using JsonParseError::JsonParseError;
};

// Valid JSON objects come back unchanged with no actions. Throws UnrepairableJson.
RepairResult repair_json(std::string_view raw);

// ---- schema validation --------------------------------------------------------

struct ExtractionRecord {
  std::string source_id;
  std::vector<CellValue> values;  // aligned with schema.features()
  int vorc_iterations = 0;        // correction prompts sent to the model
  std::vector<RepairAction> repairs;
};

struct ValidationOutcome {
  std::vector<CellValue> values;  // filled only when ok()
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
};

// Keys fold case-insensitively with '_', ' ' and '-' ignored. Reports every violation.
ValidationOutcome validate_record(const Json& obj, const ExtractionSchema& schema);

// ---- correction loop -----------------------------------------------------------

struct VorcBudget {
  int max_correction_prompts = 3;
};

struct VorcOptions {
  int max_tokens = 1024;
  double temperature = 0.0;
  std::size_t max_prompt_chars = kDefaultMaxPromptChars;
};

enum class RecordStatus { ok, budget_exhausted, provider_error, invalid_input };
std::string_view to_string(RecordStatus status);

struct VorcOutcome {
  RecordStatus status = RecordStatus::ok;
  std::optional<ExtractionRecord> record;
  int vorc_iterations = 0;
  std::vector<RepairAction> repairs;
  std::vector<Violation> violations;  // final violations on failure
  std::string error;                  // final parse/provider error on failure
};

// complete -> parse -> (repair) -> validate, re-prompting on failure.
// Throws ProviderError when the provider fails.
VorcOutcome run_vorc(CompletionProvider& provider, const std::string& prompt, const ExtractionSchema& schema,
                     VorcBudget budget = {}, const VorcOptions& options = {});

// ---- corpus ---------------------------------------------------------------------

struct CorpusReport {
  std::string id;
  std::string text;
  std::optional<std::string> label;
};

std::vector<CorpusReport> load_corpus_jsonl(const std::filesystem::path& path);
std::vector<CorpusReport> parse_corpus_jsonl(std::string_view text);

struct Provenance {
  std::string id;
  int vorc_iterations = 0;
  std::vector<RepairAction> repairs;
  RecordStatus status = RecordStatus::ok;
  std::string error;
};

struct CorpusResult {
  std::vector<ExtractionRecord> records;  // successful rows, input order
  std::vector<Provenance> provenance;     // one per input report, input order
  std::size_t failures = 0;
  std::optional<double> vorc_call_rate;   // null for an empty corpus
};

// Runs run_vorc per report on `parallelism` workers. Per-record failures are
// collected; ids must be unique.
CorpusResult extract_corpus(CompletionProvider& provider, const std::vector<CorpusReport>& reports,
                            const ExtractionSchema& schema, const PromptTemplates& templates,
                            VorcBudget budget = {}, int parallelism = 1, const VorcOptions& options = {});

std::string provenance_to_jsonl(const std::vector<Provenance>& provenance);
std::vector<Provenance> parse_provenance_jsonl(std::string_view text);

}  // namespace temed
