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

#include "temed/vorc.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <set>
#include <thread>

#include "temed/text_util.hpp"

namespace temed {

std::string_view to_string(RepairKind kind) {
  switch (kind) {
    case RepairKind::strip_code_fence: return "strip_code_fence";
    case RepairKind::single_to_double_quotes: return "single_to_double_quotes";
    case RepairKind::remove_trailing_comma: return "remove_trailing_comma";
    case RepairKind::quote_bare_key: return "quote_bare_key";
    case RepairKind::pyliteral_to_json: return "pyliteral_to_json";
    case RepairKind::nan_to_null: return "nan_to_null";
    case RepairKind::extract_json_substring: return "extract_json_substring";
  }
  return "extract_json_substring";
}

namespace {

std::optional<RepairKind> repair_kind_from_string(std::string_view s) {
  for (int k = 0; k <= static_cast<int>(RepairKind::extract_json_substring); ++k) {
    if (to_string(static_cast<RepairKind>(k)) == s) return static_cast<RepairKind>(k);
  }
  return std::nullopt;
}

}  // namespace

std::string_view to_string(RecordStatus status) {
  switch (status) {
    case RecordStatus::ok: return "ok";
    case RecordStatus::budget_exhausted: return "budget_exhausted";
    case RecordStatus::provider_error: return "provider_error";
    case RecordStatus::invalid_input: return "invalid_input";
  }
  return "ok";
}

// ---- parsing -------------------------------------------------------------------

Json parse_response(std::string_view raw) {
  std::optional<std::pair<std::size_t, std::size_t>> last_block;
  std::optional<std::size_t> first_open;
  int depth = 0;
  bool in_string = false;
  std::size_t start = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const char c = raw[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"' && depth > 0) {
      in_string = true;
    } else if (c == '{') {
      if (!first_open) first_open = i;
      if (depth++ == 0) start = i;
    } else if (c == '}' && depth > 0) {
      if (--depth == 0) last_block = {start, i + 1};
    }
  }
  if (!last_block && !first_open) {
    throw JsonParseError(JsonParseError::Kind::no_json_found, "no JSON object found in the response");
  }
  const std::size_t begin = last_block ? last_block->first : *first_open;
  const std::size_t end = last_block ? last_block->second : raw.size();
  try {
    Json obj = Json::parse(raw.substr(begin, end - begin));
    if (!obj.is_object()) {
      throw JsonParseError(JsonParseError::Kind::strict_parse_error, "top-level JSON value is not an object",
                           begin);
    }
    return obj;
  } catch (const Json::parse_error& e) {
    const std::size_t pos = begin + (e.byte > 0 ? e.byte - 1 : 0);
    throw JsonParseError(JsonParseError::Kind::strict_parse_error,
                         "invalid JSON at byte " + std::to_string(pos) + ": " + e.what(), pos);
  }
}

// ---- repair ----------------------------------------------------------------------

namespace {

// Marks bytes that sit inside double-quoted strings (quotes included).
std::vector<bool> string_mask(std::string_view s) {
  std::vector<bool> mask(s.size(), false);
  bool in_string = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (in_string) {
      mask[i] = true;
      if (s[i] == '\\' && i + 1 < s.size()) {
        mask[++i] = true;
      } else if (s[i] == '"') {
        in_string = false;
      }
    } else if (s[i] == '"') {
      in_string = true;
      mask[i] = true;
    }
  }
  return mask;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

// Span tracker for a rewrite pass: first and last touched output offsets.
struct Touched {
  std::optional<std::size_t> begin;
  std::size_t end = 0;
  void mark(std::size_t b, std::size_t e) {
    if (!begin) begin = b;
    end = std::max(end, e);
  }
};

bool strip_code_fence(std::string& s, Touched& t) {
  const std::size_t open = s.find("```");
  if (open == std::string::npos) return false;
  std::size_t body = s.find('\n', open + 3);
  body = body == std::string::npos ? s.size() : body + 1;
  std::size_t close = s.find("```", body);
  const std::size_t close_end = close == std::string::npos ? s.size() : close + 3;
  if (close == std::string::npos) close = s.size();
  t.mark(open, close_end);
  s = s.substr(body, close - body);
  return true;
}

bool single_to_double_quotes(std::string& s, Touched& t) {
  auto closes_at = [&](std::size_t j) {
    std::size_t k = j + 1;
    while (k < s.size() && is_space(s[k])) ++k;
    return k == s.size() || s[k] == ',' || s[k] == ':' || s[k] == '}' || s[k] == ']';
  };
  std::string out;
  out.reserve(s.size() + 8);
  bool changed = false;
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (c == '"') {
      std::size_t j = i + 1;
      while (j < s.size() && s[j] != '"') j += (s[j] == '\\') ? 2 : 1;
      j = std::min(j + 1, s.size());
      out.append(s, i, j - i);
      i = j;
      continue;
    }
    if (c != '\'') {
      out.push_back(c);
      ++i;
      continue;
    }
    std::string content;
    std::size_t j = i + 1;
    bool closed = false;
    while (j < s.size()) {
      if (s[j] == '\\' && j + 1 < s.size()) {
        if (s[j + 1] == '\'') {
          content.push_back('\'');
        } else {
          content.append(s, j, 2);
        }
        j += 2;
        continue;
      }
      if (s[j] == '\'' && closes_at(j)) {
        closed = true;
        break;
      }
      if (s[j] == '"') {
        content += "\\\"";
      } else {
        content.push_back(s[j]);
      }
      ++j;
    }
    if (!closed) {
      out.append(s, i, std::string::npos);
      break;
    }
    const std::size_t at = out.size();
    out += '"';
    out += content;
    out += '"';
    t.mark(at, out.size());
    changed = true;
    i = j + 1;
  }
  if (changed) s = std::move(out);
  return changed;
}

bool remove_trailing_comma(std::string& s, Touched& t) {
  const auto mask = string_mask(s);
  std::string out;
  out.reserve(s.size());
  bool changed = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!mask[i] && s[i] == ',') {
      std::size_t k = i + 1;
      while (k < s.size() && is_space(s[k])) ++k;
      if (k < s.size() && (s[k] == '}' || s[k] == ']')) {
        t.mark(out.size(), out.size());
        changed = true;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  if (changed) s = std::move(out);
  return changed;
}

bool quote_bare_key(std::string& s, Touched& t) {
  const auto mask = string_mask(s);
  std::string out;
  out.reserve(s.size() + 8);
  bool changed = false;
  char prev_significant = '\0';
  std::size_t i = 0;
  while (i < s.size()) {
    const char c = s[i];
    if (!mask[i] && (prev_significant == '{' || prev_significant == ',') &&
        (std::isalpha(static_cast<unsigned char>(c)) || c == '_')) {
      std::size_t j = i;
      while (j < s.size() && is_word_char(s[j])) ++j;
      std::size_t k = j;
      while (k < s.size() && is_space(s[k])) ++k;
      if (k < s.size() && s[k] == ':') {
        const std::size_t at = out.size();
        out += '"';
        out.append(s, i, j - i);
        out += '"';
        t.mark(at, out.size());
        changed = true;
        prev_significant = 'k';
        i = j;
        continue;
      }
    }
    if (!is_space(c)) prev_significant = mask[i] ? '"' : c;
    out.push_back(c);
    ++i;
  }
  if (changed) s = std::move(out);
  return changed;
}

bool replace_bare_words(std::string& s, Touched& t,
                        const std::vector<std::pair<std::string_view, std::string_view>>& table) {
  const auto mask = string_mask(s);
  std::string out;
  out.reserve(s.size());
  bool changed = false;
  std::size_t i = 0;
  while (i < s.size()) {
    bool replaced = false;
    if (!mask[i] && (i == 0 || !is_word_char(s[i - 1]))) {
      for (const auto& [from, to] : table) {
        if (s.compare(i, from.size(), from) == 0) {
          const std::size_t after = i + from.size();
          if (after < s.size() && is_word_char(s[after])) continue;
          const std::size_t at = out.size();
          out.append(to);
          t.mark(at, out.size());
          i = after;
          replaced = changed = true;
          break;
        }
      }
    }
    if (!replaced) out.push_back(s[i++]);
  }
  if (changed) s = std::move(out);
  return changed;
}

// Byte range of the last balanced {...} block, matched backwards from the last '}'.
std::optional<std::pair<std::size_t, std::size_t>> json_region(std::string_view s) {
  const std::size_t close = s.rfind('}');
  if (close == std::string_view::npos) {
    const std::size_t open = s.find('{');
    if (open == std::string_view::npos) return std::nullopt;
    return std::pair{open, s.size()};
  }
  int depth = 0;
  for (std::size_t i = close + 1; i-- > 0;) {
    if (s[i] == '}') ++depth;
    if (s[i] == '{' && --depth == 0) return std::pair{i, close + 1};
  }
  const std::size_t open = s.find('{');
  if (open == std::string_view::npos) return std::nullopt;
  return std::pair{open, close + 1};
}

bool strict_object(std::string_view text) {
  try {
    return Json::parse(text).is_object();
  } catch (const Json::parse_error&) {
    return false;
  }
}

}  // namespace

RepairResult repair_json(std::string_view raw) {
  if (strict_object(raw)) return RepairResult{std::string(raw), {}};

  RepairResult result;
  std::string s(raw);
  auto apply = [&](RepairKind kind, auto&& rule) {
    Touched t;
    if (rule(s, t)) result.actions.push_back({kind, t.begin.value_or(0), t.end});
  };

  apply(RepairKind::strip_code_fence, strip_code_fence);

  const auto region = json_region(s);
  if (!region) {
    throw UnrepairableJson(JsonParseError::Kind::no_json_found, "no JSON object found in the response");
  }
  const std::string prefix = s.substr(0, region->first);
  const std::string suffix = s.substr(region->second);
  s = s.substr(region->first, region->second - region->first);

  apply(RepairKind::single_to_double_quotes, single_to_double_quotes);
  apply(RepairKind::remove_trailing_comma, remove_trailing_comma);
  apply(RepairKind::quote_bare_key, quote_bare_key);
  apply(RepairKind::pyliteral_to_json, [](std::string& text, Touched& t) {
    return replace_bare_words(text, t, {{"True", "true"}, {"False", "false"}, {"None", "null"}});
  });
  apply(RepairKind::nan_to_null, [](std::string& text, Touched& t) {
    return replace_bare_words(text, t,
                              {{"-Infinity", "null"}, {"Infinity", "null"}, {"-NaN", "null"}, {"NaN", "null"},
                               {"nan", "null"}});
  });
  if (!trim(prefix).empty() || !trim(suffix).empty()) {
    result.actions.push_back({RepairKind::extract_json_substring, prefix.size(), prefix.size() + s.size()});
  }

  try {
    if (!Json::parse(s).is_object()) {
      throw UnrepairableJson(JsonParseError::Kind::strict_parse_error, "repaired JSON is not an object");
    }
  } catch (const Json::parse_error& e) {
    throw UnrepairableJson(JsonParseError::Kind::strict_parse_error,
                           std::string("JSON could not be repaired: ") + e.what(), e.byte);
  }
  result.text = std::move(s);
  return result;
}

// ---- validation ---------------------------------------------------------------------

ValidationOutcome validate_record(const Json& obj, const ExtractionSchema& schema) {
  ValidationOutcome out;
  if (!obj.is_object()) {
    out.violations.push_back({"$", ViolationKind::type_mismatch, obj, "expected a JSON object"});
    return out;
  }
  std::vector<const Json*> found(schema.size(), nullptr);
  std::vector<Violation> extras;
  for (const auto& [key, value] : obj.items()) {
    auto idx = schema.find(key);
    if (!idx) {
      extras.push_back({key, ViolationKind::unknown_extra_key, value, "key is not in the schema"});
    } else if (found[*idx] != nullptr) {
      extras.push_back({key, ViolationKind::unknown_extra_key, value,
                        "duplicates key '" + schema.feature(*idx).name + "'"});
    } else {
      found[*idx] = &value;
    }
  }

  std::vector<CellValue> values;
  values.reserve(schema.size());
  for (std::size_t i = 0; i < schema.size(); ++i) {
    const FeatureSpec& spec = schema.feature(i);
    if (found[i] == nullptr) {
      if (spec.allow_missing) {
        values.emplace_back(Missing{});
      } else {
        out.violations.push_back({spec.name, ViolationKind::missing_required_key, nullptr, "required key is absent"});
      }
      continue;
    }
    try {
      values.push_back(canonicalize_value(spec, *found[i]));
    } catch (const CoercionError& e) {
      out.violations.push_back({spec.name, e.kind, *found[i], e.what()});
    }
  }
  out.violations.insert(out.violations.end(), extras.begin(), extras.end());
  if (out.ok()) out.values = std::move(values);
  return out;
}

// ---- loop -----------------------------------------------------------------------------

VorcOutcome run_vorc(CompletionProvider& provider, const std::string& prompt, const ExtractionSchema& schema,
                     VorcBudget budget, const VorcOptions& options) {
  auto ask = [&](const std::string& text) {
    CompletionRequest req;
    req.prompt = text;
    req.max_tokens = options.max_tokens;
    req.temperature = options.temperature;
    return provider.complete(req).text;
  };

  VorcOutcome out;
  std::string response = ask(prompt);
  while (true) {
    std::optional<Json> obj;
    std::vector<RepairAction> repairs;
    std::string parse_error;
    try {
      obj = parse_response(response);
    } catch (const JsonParseError& e) {
      parse_error = e.what();
      try {
        RepairResult repaired = repair_json(response);
        obj = Json::parse(repaired.text);
        repairs = std::move(repaired.actions);
      } catch (const UnrepairableJson&) {
      }
    }

    if (!obj) {
      if (out.vorc_iterations >= budget.max_correction_prompts) {
        out.status = RecordStatus::budget_exhausted;
        out.error = parse_error;
        return out;
      }
      ++out.vorc_iterations;
      response = ask(build_json_correction_prompt(prompt, response, parse_error, options.max_prompt_chars));
      continue;
    }

    ValidationOutcome v = validate_record(*obj, schema);
    if (v.ok()) {
      out.status = RecordStatus::ok;
      out.repairs = repairs;
      out.record = ExtractionRecord{{}, std::move(v.values), out.vorc_iterations, std::move(repairs)};
      return out;
    }
    if (out.vorc_iterations >= budget.max_correction_prompts) {
      out.status = RecordStatus::budget_exhausted;
      out.violations = std::move(v.violations);
      out.error = "schema violations remain after " + std::to_string(out.vorc_iterations) + " correction prompts";
      return out;
    }
    ++out.vorc_iterations;
    response = ask(build_type_correction_prompt(prompt, obj->dump(), v.violations, schema));
  }
}

// ---- corpus ----------------------------------------------------------------------------

std::vector<CorpusReport> parse_corpus_jsonl(std::string_view text) {
  std::vector<CorpusReport> out;
  std::set<std::string> ids;
  std::size_t line_no = 0;
  for (const auto& line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      const Json j = Json::parse(line);
      CorpusReport r{j.at("id").get<std::string>(), j.at("text").get<std::string>(), std::nullopt};
      if (auto l = j.find("label"); l != j.end() && !l->is_null()) r.label = l->get<std::string>();
      if (!ids.insert(r.id).second) throw std::runtime_error("duplicate report id '" + r.id + "'");
      out.push_back(std::move(r));
    } catch (const Json::exception& e) {
      throw std::runtime_error("corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<CorpusReport> load_corpus_jsonl(const std::filesystem::path& path) {
  return parse_corpus_jsonl(read_file(path));
}

CorpusResult extract_corpus(CompletionProvider& provider, const std::vector<CorpusReport>& reports,
                            const ExtractionSchema& schema, const PromptTemplates& templates, VorcBudget budget,
                            int parallelism, const VorcOptions& options) {
  {
    std::set<std::string_view> ids;
    for (const auto& r : reports) {
      if (!ids.insert(r.id).second) throw std::invalid_argument("duplicate report id '" + r.id + "'");
    }
  }
  std::vector<VorcOutcome> outcomes(reports.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < reports.size(); i = next++) {
      VorcOutcome& o = outcomes[i];
      try {
        const std::string prompt = templates.render(schema, reports[i].text);
        o = run_vorc(provider, prompt, schema, budget, options);
      } catch (const ProviderError& e) {
        o.status = RecordStatus::provider_error;
        o.error = std::string(to_string(e.kind)) + ": " + e.what();
      } catch (const PromptError& e) {
        o.status = RecordStatus::invalid_input;
        o.error = e.what();
      }
    }
  };
  const int workers = std::clamp<int>(parallelism, 1, std::max<int>(1, static_cast<int>(reports.size())));
  {
    std::vector<std::jthread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
  }

  CorpusResult result;
  std::size_t called = 0;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    VorcOutcome& o = outcomes[i];
    result.provenance.push_back({reports[i].id, o.vorc_iterations, o.repairs, o.status, o.error});
    if (o.vorc_iterations >= 1) ++called;
    if (o.status == RecordStatus::ok && o.record) {
      o.record->source_id = reports[i].id;
      result.records.push_back(std::move(*o.record));
    } else {
      ++result.failures;
    }
  }
  if (!reports.empty()) result.vorc_call_rate = static_cast<double>(called) / static_cast<double>(reports.size());
  return result;
}

std::string provenance_to_jsonl(const std::vector<Provenance>& provenance) {
  std::string out;
  for (const auto& p : provenance) {
    OrderedJson repairs = OrderedJson::array();
    for (const auto& a : p.repairs) {
      repairs.push_back(OrderedJson{{"kind", std::string(to_string(a.kind))}, {"begin", a.begin}, {"end", a.end}});
    }
    OrderedJson j{{"id", p.id},
                  {"vorc_iterations", p.vorc_iterations},
                  {"repairs", std::move(repairs)},
                  {"status", std::string(to_string(p.status))}};
    if (!p.error.empty()) j["error"] = p.error;
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::vector<Provenance> parse_provenance_jsonl(std::string_view text) {
  std::vector<Provenance> out;
  for (const auto& line : split_lines(text)) {
    if (trim(line).empty()) continue;
    const Json j = Json::parse(line);
    Provenance p;
    p.id = j.at("id").get<std::string>();
    p.vorc_iterations = j.at("vorc_iterations").get<int>();
    for (const auto& a : j.value("repairs", Json::array())) {
      auto kind = repair_kind_from_string(a.at("kind").get<std::string>());
      if (!kind) throw std::runtime_error("unknown repair kind in provenance");
      p.repairs.push_back({*kind, a.value("begin", std::size_t{0}), a.value("end", std::size_t{0})});
    }
    const std::string status = j.value("status", std::string("ok"));
    if (status == "ok") {
      p.status = RecordStatus::ok;
    } else if (status == "budget_exhausted") {
      p.status = RecordStatus::budget_exhausted;
    } else if (status == "provider_error") {
      p.status = RecordStatus::provider_error;
    } else {
      p.status = RecordStatus::invalid_input;
    }
    p.error = j.value("error", std::string());
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace temed
