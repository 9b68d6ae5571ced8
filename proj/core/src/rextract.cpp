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

#include "temed/rextract.hpp"

#include "temed/text_util.hpp"
#include "temed/vorc.hpp"

namespace temed {

const std::string_view kDefaultInstructions =
    "The output JSON should be formatted as a JSON instance that conforms to the JSON schema from Pydantic.\n"
    "\n"
    "As an example, for the schema {\"properties\": {\"foo\": {\"title\": \"Foo\", \"description\": \"a list of "
    "strings\", \"type\": \"array\", \"items\": {\"type\": \"string\"}}}, \"required\": [\"foo\"]}}\n"
    "the object {\"foo\": [\"bar\", \"baz\"]} is a well-formatted instance of the schema. The object "
    "{\"properties\": {\"foo\": [\"bar\", \"baz\"]}} is not well-formatted.";

const std::string_view kTruncationMarker = "\n[... truncated ...]\n";

namespace {

constexpr std::string_view kRExtractSkeleton =
    "{{INSTRUCTIONS}}\n"
    "\n"
    "Here is the output JSON schema:\n"
    "```\n"
    "{{SCHEMA_BLOCK}}\n"
    "```\n"
    "\n"
    "When generating JSON instance follow this format:\n"
    "\n"
    "Medical report: the input medical report from which you should extract JSON instance.\n"
    "Reasoning: give me an explanation of how you assign value for a given key. Thinking step by step for "
    "each key before assigning a value to it.\n"
    "Output JSON: The final output JSON should be formatted as a JSON instance that conforms to the output "
    "JSON schema above.\n"
    "\n"
    "Here is an example of a process:\n"
    "Medical report:\n"
    "{{EXAMPLE_REPORT}}\n"
    "\n"
    "{{REASONING_SECTION}}"
    "Output JSON:\n"
    "{{EXAMPLE_OUTPUT}}\n"
    "--------------------------------------------------------------------------------\n"
    "Medical report: {{REPORT}}";

std::string reasoning_section(std::string_view guidelines, std::string_view reasoning) {
  guidelines = trim(guidelines);
  reasoning = trim(reasoning);
  if (guidelines.empty() && reasoning.empty()) return {};
  std::string out = "Reasoning:\n";
  if (!guidelines.empty()) {
    out += guidelines;
    out += '\n';
  }
  if (!reasoning.empty()) {
    out += reasoning;
    out += '\n';
  }
  out += '\n';
  return out;
}

}  // namespace

std::string render_template(std::string_view tmpl, const std::map<std::string, std::string, std::less<>>& values) {
  std::string out;
  out.reserve(tmpl.size());
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const std::size_t open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, open - pos));
    const std::size_t close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(open));
      break;
    }
    const std::string_view name = tmpl.substr(open + 2, close - open - 2);
    if (auto it = values.find(name); it != values.end()) {
      out.append(it->second);
    } else {
      out.append(tmpl.substr(open, close + 2 - open));
    }
    pos = close + 2;
  }
  return out;
}

void check_example(const ExtractionSchema& schema, const OneShotExample& example) {
  Json obj;
  try {
    obj = parse_response(example.output_json_text);
  } catch (const JsonParseError& e) {
    throw PromptError(std::string("example output is not valid JSON: ") + e.what());
  }
  auto outcome = validate_record(obj, schema);
  if (!outcome.ok()) {
    std::string msg = "example output does not match the schema:";
    for (const auto& v : outcome.violations) msg += " [" + v.key + ": " + v.message + "]";
    throw PromptError(msg);
  }
}

std::string build_rextract_prompt(const ExtractionSchema& schema, const OneShotExample& example,
                                  std::string_view guidelines, std::string_view report,
                                  std::string_view instructions) {
  if (trim(report).empty()) throw PromptError("report text is empty");
  check_example(schema, example);
  return render_template(kRExtractSkeleton,
                         {
                             {"INSTRUCTIONS", std::string(trim(instructions))},
                             {"SCHEMA_BLOCK", emit_json_schema_block(schema)},
                             {"EXAMPLE_REPORT", std::string(trim(example.report_text))},
                             {"REASONING_SECTION", reasoning_section(guidelines, example.reasoning_text)},
                             {"EXAMPLE_OUTPUT", std::string(trim(example.output_json_text))},
                             {"REPORT", std::string(report)},
                         });
}

PromptTemplates PromptTemplates::extract_only() const {
  PromptTemplates out = *this;
  out.guidelines.clear();
  out.example.reasoning_text.clear();
  return out;
}

PromptTemplates load_templates(const std::filesystem::path& dir, const ExtractionSchema& schema) {
  auto read = [&](const char* name) {
    const auto path = dir / name;
    if (!std::filesystem::exists(path)) throw PromptError("missing template file " + path.string());
    return read_file(path);
  };
  PromptTemplates t;
  t.instructions = read("instructions.txt");
  t.example.report_text = read("example_report.txt");
  t.example.reasoning_text = read("example_reasoning.txt");
  t.example.output_json_text = read("example_output.json");
  t.guidelines = read("guidelines.txt");
  check_example(schema, t.example);
  return t;
}

std::string truncate_middle(std::string_view text, std::size_t budget) {
  if (text.size() <= budget) return std::string(text);
  const std::size_t keep = budget > kTruncationMarker.size() ? budget - kTruncationMarker.size() : 0;
  std::size_t head = keep - keep / 2;
  std::size_t tail_start = text.size() - keep / 2;
  auto continuation = [&](std::size_t i) {
    return i < text.size() && (static_cast<unsigned char>(text[i]) & 0xC0) == 0x80;
  };
  while (head > 0 && continuation(head)) --head;
  while (tail_start < text.size() && continuation(tail_start)) ++tail_start;
  std::string out(text.substr(0, head));
  out.append(kTruncationMarker);
  out.append(text.substr(tail_start));
  return out;
}

namespace {

constexpr std::string_view kJsonCorrectionSkeleton =
    "Your previous response could not be parsed as a JSON instance.\n"
    "\n"
    "Original prompt:\n"
    "{{PROMPT}}\n"
    "\n"
    "Response:\n"
    "{{RESPONSE}}\n"
    "\n"
    "Error:\n"
    "{{ERROR}}\n"
    "\n"
    "Extract the JSON data once more. Respond with only the corrected JSON instance that conforms to the "
    "output JSON schema, without any other text.";

constexpr std::string_view kTypeCorrectionSkeleton =
    "The JSON instance you returned does not conform to the output JSON schema.\n"
    "\n"
    "Original prompt:\n"
    "{{PROMPT}}\n"
    "\n"
    "Response:\n"
    "{{RESPONSE}}\n"
    "\n"
    "Errors:\n"
    "{{ERRORS}}"
    "\n"
    "Correct the listed keys and respond with only the complete corrected JSON instance, without any other "
    "text.";

}  // namespace

std::string build_json_correction_prompt(std::string_view original_prompt, std::string_view response,
                                         std::string_view error, std::size_t max_prompt_chars) {
  std::map<std::string, std::string, std::less<>> values{
      {"PROMPT", std::string(original_prompt)}, {"RESPONSE", ""}, {"ERROR", std::string(error)}};
  const std::size_t overhead = render_template(kJsonCorrectionSkeleton, values).size();
  const std::size_t budget = max_prompt_chars > overhead ? max_prompt_chars - overhead : 0;
  values["RESPONSE"] = truncate_middle(response, budget);
  return render_template(kJsonCorrectionSkeleton, values);
}

std::string build_type_correction_prompt(std::string_view original_prompt, std::string_view response_json,
                                         const std::vector<Violation>& violations,
                                         const ExtractionSchema& schema) {
  std::string errors;
  for (const auto& v : violations) {
    errors += "- \"" + v.key + "\": ";
    if (v.kind == ViolationKind::missing_required_key) {
      errors += "missing";
    } else {
      errors += "received " + v.received.dump();
    }
    if (v.kind == ViolationKind::unknown_extra_key) {
      errors += "; this key is not part of the output JSON schema, remove it.\n";
      continue;
    }
    if (auto idx = schema.find(v.key)) {
      errors += "; expected " + describe_expectation(schema.feature(*idx)) + ".\n";
    } else {
      errors += "; " + v.message + ".\n";
    }
  }
  return render_template(kTypeCorrectionSkeleton, {{"PROMPT", std::string(original_prompt)},
                                                   {"RESPONSE", std::string(response_json)},
                                                   {"ERRORS", errors}});
}

std::string build_fewshot_classifier_prompt(const std::vector<LabeledReport>& shots, std::string_view report,
                                            const LabelSpec& label) {
  if (shots.empty() || shots.size() > kMaxShots) {
    throw PromptError("few-shot prompt needs between 1 and " + std::to_string(kMaxShots) + " shots, got " +
                      std::to_string(shots.size()));
  }
  std::string out = "Classify each medical report as \"" + label.positive_value + "\" or \"" +
                    label.negative_value + "\" (" + label.name +
                    "). Answer with exactly one of these two labels.\n\n";
  for (const auto& shot : shots) {
    if (shot.label != label.positive_value && shot.label != label.negative_value) {
      throw PromptError("shot label '" + shot.label + "' is not one of the label values");
    }
    out += "Medical report:\n";
    out += trim(shot.report);
    out += "\nAnswer: " + shot.label + "\n\n";
  }
  out += "Medical report:\n";
  out += trim(report);
  out += "\nAnswer:";
  return out;
}

std::optional<int> parse_fewshot_answer(std::string_view answer, const LabelSpec& label) {
  const std::string_view body = trim(answer);
  const std::string_view first = trim(body.substr(0, body.find('\n')));
  if (first == label.positive_value) return 1;
  if (first == label.negative_value) return 0;
  return std::nullopt;
}

}  // namespace temed
