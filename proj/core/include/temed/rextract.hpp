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
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "temed/schema.hpp"

namespace temed {

// One worked example shown to the model: a report, the per-feature reasoning
// over it, and the expected JSON output.
struct OneShotExample {
  std::string report_text;
  std::string reasoning_text;
  std::string output_json_text;
};

struct PromptError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kDefaultMaxPromptChars = 14000;

// JSON-instance formatting preamble with the foo/bar example.
extern const std::string_view kDefaultInstructions;

// Throws PromptError when the example output does not parse or violates the schema.
void check_example(const ExtractionSchema& schema, const OneShotExample& example);

// Single-pass {{NAME}} substitution. Inserted values are never rescanned;
// unknown placeholders are left verbatim.
std::string render_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values);

// Instructions, schema block, format section, worked example (with reasoning
// when guidelines or example reasoning are nonempty), separator, report.
std::string build_rextract_prompt(const ExtractionSchema& schema, const OneShotExample& example,
                                  std::string_view guidelines, std::string_view report,
                                  std::string_view instructions = kDefaultInstructions);

// Per-schema template directory:
//   instructions.txt example_report.txt example_reasoning.txt example_output.json guidelines.txt
struct PromptTemplates {
  std::string instructions;
  OneShotExample example;
  std::string guidelines;

  // Drops guidelines and example reasoning.
  PromptTemplates extract_only() const;
  std::string render(const ExtractionSchema& schema, std::string_view report) const {
    return build_rextract_prompt(schema, example, guidelines, report, instructions);
  }
};

PromptTemplates load_templates(const std::filesystem::path& dir, const ExtractionSchema& schema);

// Keeps head and tail of `text` around a marker so the result is at most
// `budget` bytes (never less than the marker itself).
std::string truncate_middle(std::string_view text, std::size_t budget);
extern const std::string_view kTruncationMarker;

std::string build_json_correction_prompt(std::string_view original_prompt, std::string_view response,
                                         std::string_view error,
                                         std::size_t max_prompt_chars = kDefaultMaxPromptChars);

struct Violation {
  std::string key;       // feature name, or the offending key for extras
  ViolationKind kind;
  Json received;         // null when absent
  std::string message;
};

std::string build_type_correction_prompt(std::string_view original_prompt, std::string_view response_json,
                                         const std::vector<Violation>& violations,
                                         const ExtractionSchema& schema);

struct LabeledReport {
  std::string report;
  std::string label;
};

inline constexpr std::size_t kMaxShots = 32;

std::string build_fewshot_classifier_prompt(const std::vector<LabeledReport>& shots, std::string_view report,
                                            const LabelSpec& label);

// Trimmed answer text compared exactly against the label values; 1 = positive.
// Only the first line counts. Nothing for anything else (an abstention).
std::optional<int> parse_fewshot_answer(std::string_view answer, const LabelSpec& label);

}  // namespace temed
