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

#include "temed/schema.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "temed/text_util.hpp"

namespace temed {

std::string_view to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::integer: return "integer";
    case FeatureKind::real: return "real";
    case FeatureKind::text: return "text";
    case FeatureKind::categorical: return "categorical";
  }
  return "text";
}

std::optional<FeatureKind> feature_kind_from_string(std::string_view text) {
  if (text == "integer") return FeatureKind::integer;
  if (text == "real") return FeatureKind::real;
  if (text == "text") return FeatureKind::text;
  if (text == "categorical") return FeatureKind::categorical;
  return std::nullopt;
}

std::string_view to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::missing_required_key: return "missing-required-key";
    case ViolationKind::unknown_extra_key: return "unknown-extra-key";
    case ViolationKind::type_mismatch: return "type-mismatch";
    case ViolationKind::out_of_range: return "out-of-range";
    case ViolationKind::unknown_category: return "unknown-category";
    case ViolationKind::missing_not_allowed: return "missing-not-allowed";
  }
  return "type-mismatch";
}

std::string fold_key(std::string_view key) {
  std::string out;
  out.reserve(key.size());
  for (char c : key) {
    if (c == '_' || c == ' ' || c == '-') continue;
    out.push_back(ascii_lower(c));
  }
  return out;
}

ExtractionSchema::ExtractionSchema(std::vector<FeatureSpec> features, std::optional<LabelSpec> label)
    : features_(std::move(features)), label_(std::move(label)) {
  if (features_.empty()) throw SchemaError("schema must declare at least one feature");
  for (const auto& f : features_) {
    if (f.name.empty()) throw SchemaError("feature name must be nonempty");
    const std::string folded = fold_key(f.name);
    if (std::find(folded_.begin(), folded_.end(), folded) != folded_.end()) {
      throw SchemaError("duplicate feature name '" + f.name + "'");
    }
    folded_.push_back(folded);

    if (f.kind == FeatureKind::categorical) {
      if (f.allowed_values.empty()) {
        throw SchemaError("categorical feature '" + f.name + "' has empty allowed_values");
      }
      std::vector<std::string> seen;
      for (const auto& v : f.allowed_values) {
        std::string lowered = to_lower(trim(v));
        if (lowered.empty()) throw SchemaError("feature '" + f.name + "' has an empty allowed value");
        if (std::find(seen.begin(), seen.end(), lowered) != seen.end()) {
          throw SchemaError("feature '" + f.name + "' repeats allowed value '" + v + "'");
        }
        seen.push_back(std::move(lowered));
      }
    } else if (!f.allowed_values.empty()) {
      throw SchemaError("allowed_values given for non-categorical feature '" + f.name + "'");
    }

    if (f.range) {
      if (!f.is_numeric()) throw SchemaError("range given for non-numeric feature '" + f.name + "'");
      if (!(f.range->min <= f.range->max)) {
        throw SchemaError("feature '" + f.name + "' has range min > max");
      }
    }
  }
  if (label_) {
    if (label_->name.empty()) throw SchemaError("label name must be nonempty");
    if (label_->positive_value == label_->negative_value) {
      throw SchemaError("label positive and negative values must differ");
    }
    if (find(label_->name)) {
      throw SchemaError("label name '" + label_->name + "' collides with a feature name");
    }
  }
}

std::optional<std::size_t> ExtractionSchema::find(std::string_view key) const {
  const std::string folded = fold_key(key);
  for (std::size_t i = 0; i < folded_.size(); ++i) {
    if (folded_[i] == folded) return i;
  }
  return std::nullopt;
}

namespace {

std::string require_string(const Json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) {
    throw SchemaError(where + ": missing string field '" + key + "'");
  }
  return it->get<std::string>();
}

}  // namespace

ExtractionSchema schema_from_json(const Json& doc) {
  if (!doc.is_object()) throw SchemaError("schema document must be a JSON object");
  auto feats = doc.find("features");
  if (feats == doc.end() || !feats->is_array()) throw SchemaError("schema needs a 'features' array");

  std::vector<FeatureSpec> features;
  for (std::size_t i = 0; i < feats->size(); ++i) {
    const Json& f = (*feats)[i];
    const std::string where = "features[" + std::to_string(i) + "]";
    if (!f.is_object()) throw SchemaError(where + ": expected an object");
    FeatureSpec spec;
    spec.name = require_string(f, "name", where);
    spec.title = f.value("title", spec.name);
    spec.description = f.value("description", std::string{});
    const std::string kind = require_string(f, "kind", where);
    auto parsed_kind = feature_kind_from_string(kind);
    if (!parsed_kind) throw SchemaError(where + ": invalid kind '" + kind + "'");
    spec.kind = *parsed_kind;
    if (auto av = f.find("allowed_values"); av != f.end()) {
      if (!av->is_array()) throw SchemaError(where + ": allowed_values must be an array");
      for (const auto& v : *av) {
        if (v.is_string()) {
          spec.allowed_values.push_back(v.get<std::string>());
        } else if (v.is_number_integer()) {
          spec.allowed_values.push_back(v.dump());
        } else {
          throw SchemaError(where + ": allowed_values entries must be strings");
        }
      }
      if (spec.kind == FeatureKind::categorical && spec.allowed_values.empty()) {
        throw SchemaError(where + ": empty allowed_values for categorical feature '" + spec.name + "'");
      }
    }
    if (auto r = f.find("range"); r != f.end() && !r->is_null()) {
      if (!r->is_array() || r->size() != 2 || !(*r)[0].is_number() || !(*r)[1].is_number()) {
        throw SchemaError(where + ": range must be [min, max]");
      }
      spec.range = NumericRange{(*r)[0].get<double>(), (*r)[1].get<double>()};
    }
    if (auto am = f.find("allow_missing"); am != f.end()) {
      if (!am->is_boolean()) throw SchemaError(where + ": allow_missing must be a boolean");
      spec.allow_missing = am->get<bool>();
    }
    features.push_back(std::move(spec));
  }

  std::optional<LabelSpec> label;
  if (auto l = doc.find("label"); l != doc.end() && !l->is_null()) {
    if (!l->is_object()) throw SchemaError("label must be an object");
    label = LabelSpec{require_string(*l, "name", "label"), require_string(*l, "positive", "label"),
                      require_string(*l, "negative", "label")};
  }
  return ExtractionSchema(std::move(features), std::move(label));
}

ExtractionSchema parse_schema(std::string_view text) {
  Json doc;
  try {
    doc = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw SchemaError(std::string("schema parse error: ") + e.what());
  }
  return schema_from_json(doc);
}

ExtractionSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open schema file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return parse_schema(buf.str());
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

Json schema_to_json(const ExtractionSchema& schema) {
  Json doc;
  Json feats = Json::array();
  for (const auto& f : schema.features()) {
    Json j{{"name", f.name},
           {"title", f.title},
           {"description", f.description},
           {"kind", std::string(to_string(f.kind))},
           {"allow_missing", f.allow_missing}};
    if (!f.allowed_values.empty()) j["allowed_values"] = f.allowed_values;
    if (f.range) j["range"] = {f.range->min, f.range->max};
    feats.push_back(std::move(j));
  }
  doc["features"] = std::move(feats);
  if (const auto& l = schema.label()) {
    doc["label"] = {{"name", l->name}, {"positive", l->positive_value}, {"negative", l->negative_value}};
  }
  return doc;
}

std::string emit_json_schema_block(const ExtractionSchema& schema) {
  auto quoted = [](const std::string& s) { return Json(s).dump(); };
  std::string out = "{\"properties\": {";
  bool first = true;
  for (const auto& f : schema.features()) {
    if (!first) out += ", ";
    first = false;
    std::string_view type = "string";
    if (f.kind == FeatureKind::integer) type = "integer";
    if (f.kind == FeatureKind::real) type = "number";
    out += quoted(f.name);
    out += ": {\"title\": " + quoted(f.title) + ", \"description\": " + quoted(f.description) +
           ", \"type\": \"" + std::string(type) + "\"}";
  }
  out += "}}";
  return out;
}

// ---- values ---------------------------------------------------------------

std::string format_real(double value) {
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  if (ec != std::errc{}) return std::to_string(value);
  return std::string(buf.data(), ptr);
}

Json to_json(const CellValue& value) {
  return std::visit(
      [](const auto& v) -> Json {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Missing>) {
          return nullptr;
        } else {
          return v;
        }
      },
      value);
}

std::string format_cell(const CellValue& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Missing>) {
          return {};
        } else if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(v);
        } else if constexpr (std::is_same_v<T, double>) {
          return format_real(v);
        } else {
          return v;
        }
      },
      value);
}

namespace {

bool is_missing_sentinel(std::string_view s) {
  const std::string lowered = to_lower(trim(s));
  return lowered.empty() || lowered == "none" || lowered == "n/a" || lowered == "nan";
}

std::optional<double> parse_real(std::string_view text) {
  std::string s(trim(text));
  if (!s.empty() && s.front() == '+') s.erase(0, 1);
  if (s.find('.') == std::string::npos && std::count(s.begin(), s.end(), ',') == 1) {
    std::replace(s.begin(), s.end(), ',', '.');
  }
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<std::int64_t> integral_value(double v) {
  if (!std::isfinite(v) || std::trunc(v) != v) return std::nullopt;
  if (v < -9.0e18 || v > 9.0e18) return std::nullopt;
  return static_cast<std::int64_t>(v);
}

std::optional<std::int64_t> parse_integer(std::string_view text) {
  std::string s(trim(text));
  if (!s.empty() && s.front() == '+') s.erase(0, 1);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (!s.empty() && ec == std::errc{} && ptr == s.data() + s.size()) return v;
  if (auto r = parse_real(text)) return integral_value(*r);
  return std::nullopt;
}

std::string describe_raw(const Json& raw) { return raw.dump(); }

void check_range(const FeatureSpec& spec, double v, const Json& raw) {
  if (spec.range && (v < spec.range->min || v > spec.range->max)) {
    throw CoercionError(ViolationKind::out_of_range, "value " + describe_raw(raw) + " for '" + spec.name +
                                                         "' is outside [" + format_real(spec.range->min) +
                                                         ", " + format_real(spec.range->max) + "]");
  }
}

std::string scalar_to_string(const Json& raw) {
  if (raw.is_string()) return std::string(trim(raw.get_ref<const std::string&>()));
  if (raw.is_boolean()) return raw.get<bool>() ? "true" : "false";
  if (raw.is_number_integer()) return raw.dump();
  if (raw.is_number_float()) {
    const double d = raw.get<double>();
    if (auto i = integral_value(d)) return std::to_string(*i);
    return format_real(d);
  }
  return raw.dump();
}

[[noreturn]] void type_mismatch(const FeatureSpec& spec, const Json& raw) {
  throw CoercionError(ViolationKind::type_mismatch, "value " + describe_raw(raw) + " for '" + spec.name +
                                                        "' is not " + describe_expectation(spec));
}

}  // namespace

CellValue canonicalize_value(const FeatureSpec& spec, const Json& raw) {
  if (raw.is_null() || (raw.is_string() && is_missing_sentinel(raw.get_ref<const std::string&>()))) {
    if (spec.allow_missing) return Missing{};
    throw CoercionError(ViolationKind::missing_not_allowed, "feature '" + spec.name + "' may not be missing");
  }
  if (raw.is_array() || raw.is_object()) type_mismatch(spec, raw);

  switch (spec.kind) {
    case FeatureKind::integer: {
      std::optional<std::int64_t> v;
      if (raw.is_number_integer()) {
        v = raw.is_number_unsigned() && raw.get<std::uint64_t>() > std::uint64_t{INT64_MAX}
                ? std::nullopt
                : std::optional<std::int64_t>(raw.get<std::int64_t>());
      } else if (raw.is_number_float()) {
        v = integral_value(raw.get<double>());
      } else if (raw.is_string()) {
        v = parse_integer(raw.get_ref<const std::string&>());
      }
      if (!v) type_mismatch(spec, raw);
      check_range(spec, static_cast<double>(*v), raw);
      return *v;
    }
    case FeatureKind::real: {
      std::optional<double> v;
      if (raw.is_number()) {
        v = raw.get<double>();
      } else if (raw.is_string()) {
        v = parse_real(raw.get_ref<const std::string&>());
      }
      if (!v) type_mismatch(spec, raw);
      check_range(spec, *v, raw);
      return *v;
    }
    case FeatureKind::categorical: {
      const std::string s = to_lower(scalar_to_string(raw));
      for (const auto& allowed : spec.allowed_values) {
        if (to_lower(trim(allowed)) == s) return allowed;
      }
      throw CoercionError(ViolationKind::unknown_category, "value " + describe_raw(raw) + " for '" +
                                                               spec.name + "' is not " +
                                                               describe_expectation(spec));
    }
    case FeatureKind::text:
      return scalar_to_string(raw);
  }
  type_mismatch(spec, raw);
}

CellValue canonicalize_text(const FeatureSpec& spec, std::string_view raw) {
  if (trim(raw).empty()) return canonicalize_value(spec, nullptr);
  return canonicalize_value(spec, Json(std::string(raw)));
}

std::string describe_expectation(const FeatureSpec& spec) {
  std::string out;
  switch (spec.kind) {
    case FeatureKind::integer: out = "an integer"; break;
    case FeatureKind::real: out = "a number"; break;
    case FeatureKind::text: out = "a string"; break;
    case FeatureKind::categorical: {
      out = "one of [";
      for (std::size_t i = 0; i < spec.allowed_values.size(); ++i) {
        if (i) out += ", ";
        out += spec.allowed_values[i];
      }
      out += "]";
      break;
    }
  }
  if (spec.range) {
    out += " between " + format_real(spec.range->min) + " and " + format_real(spec.range->max);
  }
  if (spec.allow_missing) out += " (or null when not stated)";
  return out;
}

}  // namespace temed
