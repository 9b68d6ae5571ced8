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

#include "temed/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "temed/text_util.hpp"
#include "temed/vorc.hpp"

namespace temed {

// ---- CSV -----------------------------------------------------------------------

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
      continue;
    }
    if (c == '"' && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
  }
  if (in_quotes) throw DatasetError("CSV ends inside a quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos && trim(field).size() == field.size()) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

namespace {

int parse_label(const LabelSpec& label, std::string_view cell, std::size_t row) {
  const std::string v(trim(cell));
  if (v == label.positive_value) return 1;
  if (v == label.negative_value) return 0;
  throw DatasetError("row " + std::to_string(row) + ": label '" + v + "' is neither '" + label.positive_value +
                     "' nor '" + label.negative_value + "'");
}

}  // namespace

TabularDataset parse_dataset_csv(std::string_view text, const ExtractionSchema& schema) {
  auto records = parse_csv(text);
  if (records.empty()) throw DatasetError("CSV has no header row");
  const auto& header = records.front();

  std::optional<std::size_t> id_col;
  std::optional<std::size_t> label_col;
  std::vector<std::optional<std::size_t>> feature_col(schema.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string name(trim(header[c]));
    if (fold_key(name) == "id" && !schema.find("id")) {
      id_col = c;
    } else if (schema.label() && fold_key(name) == fold_key(schema.label()->name)) {
      label_col = c;
    } else if (auto idx = schema.find(name)) {
      if (feature_col[*idx]) throw DatasetError("header repeats column '" + name + "'");
      feature_col[*idx] = c;
    } else {
      throw DatasetError("header column '" + name + "' does not match any schema feature");
    }
  }
  for (std::size_t f = 0; f < schema.size(); ++f) {
    if (!feature_col[f]) throw DatasetError("header lacks feature column '" + schema.feature(f).name + "'");
  }

  TabularDataset ds{schema, {}, {}, {}, label_col.has_value()};
  std::set<std::string> seen_ids;
  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    if (rec.size() != header.size()) {
      throw DatasetError("row " + std::to_string(r) + " has " + std::to_string(rec.size()) + " fields, expected " +
                         std::to_string(header.size()));
    }
    std::string id = id_col ? std::string(trim(rec[*id_col])) : std::to_string(r - 1);
    if (!seen_ids.insert(id).second) throw DatasetError("row " + std::to_string(r) + ": duplicate id '" + id + "'");
    std::vector<CellValue> row;
    row.reserve(schema.size());
    for (std::size_t f = 0; f < schema.size(); ++f) {
      try {
        row.push_back(canonicalize_text(schema.feature(f), rec[*feature_col[f]]));
      } catch (const CoercionError& e) {
        throw DatasetError("row " + std::to_string(r) + ", column '" + header[*feature_col[f]] + "': " + e.what());
      }
    }
    ds.ids.push_back(std::move(id));
    ds.rows.push_back(std::move(row));
    if (label_col) ds.labels.push_back(parse_label(*schema.label(), rec[*label_col], r));
  }
  return ds;
}

TabularDataset load_csv(const std::filesystem::path& path, const ExtractionSchema& schema) {
  try {
    return parse_dataset_csv(read_file(path), schema);
  } catch (const DatasetError& e) {
    throw DatasetError(path.string() + ": " + e.what());
  }
}

std::string to_csv(const TabularDataset& ds) {
  std::string out = "id";
  for (const auto& f : ds.schema.features()) out += "," + csv_escape(f.name);
  const bool with_label = ds.labeled && ds.schema.label();
  if (with_label) out += "," + csv_escape(ds.schema.label()->name);
  out += "\n";
  for (std::size_t r = 0; r < ds.size(); ++r) {
    out += csv_escape(ds.ids[r]);
    for (const auto& v : ds.rows[r]) out += "," + csv_escape(format_cell(v));
    if (with_label) {
      const auto& l = *ds.schema.label();
      out += "," + csv_escape(ds.labels[r] ? l.positive_value : l.negative_value);
    }
    out += "\n";
  }
  return out;
}

void save_csv(const std::filesystem::path& path, const TabularDataset& dataset) {
  write_file(path, to_csv(dataset));
}

TabularDataset dataset_from_records(const ExtractionSchema& schema, const std::vector<ExtractionRecord>& records) {
  TabularDataset ds{schema, {}, {}, {}, false};
  for (const auto& r : records) {
    if (r.values.size() != schema.size()) throw DatasetError("record '" + r.source_id + "' has wrong arity");
    ds.ids.push_back(r.source_id);
    ds.rows.push_back(r.values);
  }
  return ds;
}

TabularDataset select_ids(const TabularDataset& dataset, const std::vector<std::string>& ids) {
  std::map<std::string_view, std::size_t> index;
  for (std::size_t i = 0; i < dataset.size(); ++i) index.emplace(dataset.ids[i], i);
  TabularDataset out{dataset.schema, {}, {}, {}, dataset.labeled};
  for (const auto& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw DatasetError("id '" + id + "' is not in the dataset");
    out.ids.push_back(id);
    out.rows.push_back(dataset.rows[it->second]);
    if (dataset.labeled) out.labels.push_back(dataset.labels[it->second]);
  }
  return out;
}

// ---- splitting ------------------------------------------------------------------

SplitSizes split_sizes(std::size_t n) {
  constexpr std::size_t parts[3] = {7, 1, 2};
  std::size_t size[3];
  std::size_t rem[3];
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    size[k] = n * parts[k] / 10;
    rem[k] = n * parts[k] % 10;
    assigned += size[k];
  }
  for (std::size_t left = n - assigned; left > 0; --left) {
    int best = 0;
    for (int k = 1; k < 3; ++k) {
      if (rem[k] > rem[best]) best = k;
    }
    ++size[best];
    rem[best] = 0;
  }
  return {size[0], size[1], size[2]};
}

SplitAssignment split(const TabularDataset& dataset, std::uint64_t seed) {
  if (!dataset.labeled) throw DatasetError("stratified split needs a labeled dataset");
  const std::size_t n = dataset.size();
  if (n < 10) throw DatasetError("split needs at least 10 rows, got " + std::to_string(n));

  std::vector<std::size_t> by_class[2];
  for (std::size_t i = 0; i < n; ++i) by_class[dataset.labels[i]].push_back(i);
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < 3) {
      throw DatasetError("class " + std::to_string(c) + " has " + std::to_string(by_class[c].size()) +
                         " members; cannot stratify");
    }
  }

  Lcg64 rng(seed);
  struct Keyed {
    double key;
    int cls;
    std::size_t row;
  };
  std::vector<Keyed> merged;
  merged.reserve(n);
  for (int c = 0; c < 2; ++c) {
    auto& members = by_class[c];
    for (std::size_t i = members.size(); i-- > 1;) std::swap(members[i], members[rng.below(i + 1)]);
    const double count = static_cast<double>(members.size());
    for (std::size_t k = 0; k < members.size(); ++k) {
      merged.push_back({(static_cast<double>(k) + 0.5) / count, c, members[k]});
    }
  }
  std::stable_sort(merged.begin(), merged.end(), [](const Keyed& a, const Keyed& b) {
    return a.key != b.key ? a.key < b.key : a.cls < b.cls;
  });

  const SplitSizes sizes = split_sizes(n);
  SplitAssignment out;
  out.seed = seed;
  for (std::size_t i = 0; i < n; ++i) {
    auto& bucket = i < sizes.train ? out.train : (i < sizes.train + sizes.val ? out.val : out.test);
    bucket.push_back(merged[i].row);
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

Json split_to_json(const SplitAssignment& s) {
  return Json{{"seed", s.seed}, {"train", s.train}, {"val", s.val}, {"test", s.test}};
}

SplitAssignment split_from_json(const Json& j) {
  SplitAssignment s;
  s.seed = j.at("seed").get<std::uint64_t>();
  s.train = j.at("train").get<std::vector<std::size_t>>();
  s.val = j.at("val").get<std::vector<std::size_t>>();
  s.test = j.at("test").get<std::vector<std::size_t>>();
  return s;
}

// ---- encoding -------------------------------------------------------------------

namespace {

double numeric_of(const CellValue& v) {
  if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  return std::get<double>(v);
}

}  // namespace

EncoderState fit_encoder(const TabularDataset& dataset, std::span<const std::size_t> train_ids) {
  if (train_ids.empty()) throw DatasetError("cannot fit an encoder on an empty training split");
  EncoderState state;
  for (std::size_t f = 0; f < dataset.schema.size(); ++f) {
    const FeatureSpec& spec = dataset.schema.feature(f);
    if (spec.kind == FeatureKind::text) continue;
    FeatureEncoding enc;
    enc.name = spec.name;
    enc.kind = spec.kind;
    if (spec.is_numeric()) {
      std::vector<double> present;
      for (std::size_t r : train_ids) {
        if (!is_missing(dataset.rows[r][f])) present.push_back(numeric_of(dataset.rows[r][f]));
      }
      const bool constant =
          !present.empty() && std::all_of(present.begin(), present.end(), [&](double x) { return x == present[0]; });
      if (present.empty()) {
        enc.mean = 0.0;
      } else if (constant) {
        enc.mean = present[0];
      } else {
        double sum = 0.0;
        for (double x : present) sum += x;
        enc.mean = sum / static_cast<double>(present.size());
      }
      double sq = 0.0;
      for (double x : present) sq += (x - enc.mean) * (x - enc.mean);
      const double sd = std::sqrt(sq / static_cast<double>(train_ids.size()));
      enc.scale = (constant || present.empty() || !(sd > 0.0)) ? 1.0 : sd;
      state.column_names.push_back(spec.name);
    } else {
      enc.categories = spec.allowed_values;
      std::vector<std::size_t> counts(enc.categories.size(), 0);
      for (std::size_t r : train_ids) {
        if (const auto* s = std::get_if<std::string>(&dataset.rows[r][f])) {
          auto it = std::find(enc.categories.begin(), enc.categories.end(), *s);
          if (it != enc.categories.end()) ++counts[static_cast<std::size_t>(it - enc.categories.begin())];
        }
      }
      enc.mode = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
      for (const auto& c : enc.categories) state.column_names.push_back(spec.name + "_" + c);
    }
    state.features.push_back(std::move(enc));
  }
  return state;
}

EncodedMatrix transform(const TabularDataset& dataset, const EncoderState& state, std::span<const std::size_t> ids) {
  std::vector<std::size_t> feature_index;
  for (const auto& enc : state.features) {
    auto idx = dataset.schema.find(enc.name);
    if (!idx || dataset.schema.feature(*idx).kind != enc.kind) {
      throw DatasetError("dataset schema does not provide encoded feature '" + enc.name + "'");
    }
    feature_index.push_back(*idx);
  }
  EncodedMatrix out;
  out.column_names = state.column_names;
  out.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(ids.size()),
                                     static_cast<Eigen::Index>(state.column_names.size()));
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& row = dataset.rows.at(ids[i]);
    Eigen::Index col = 0;
    for (std::size_t k = 0; k < state.features.size(); ++k) {
      const auto& enc = state.features[k];
      const CellValue& v = row[feature_index[k]];
      const auto r = static_cast<Eigen::Index>(i);
      if (enc.kind != FeatureKind::categorical) {
        const double x = is_missing(v) ? enc.mean : numeric_of(v);
        out.values(r, col++) = (x - enc.mean) / enc.scale;
        continue;
      }
      std::size_t which = enc.mode;
      if (const auto* s = std::get_if<std::string>(&v)) {
        auto it = std::find(enc.categories.begin(), enc.categories.end(), *s);
        if (it == enc.categories.end()) {
          throw DatasetError("category '" + *s + "' of '" + enc.name + "' was not seen by the encoder");
        }
        which = static_cast<std::size_t>(it - enc.categories.begin());
      }
      out.values(r, col + static_cast<Eigen::Index>(which)) = 1.0;
      col += static_cast<Eigen::Index>(enc.categories.size());
    }
  }
  return out;
}

std::vector<int> labels_of(const TabularDataset& dataset, std::span<const std::size_t> ids) {
  if (!dataset.labeled) throw DatasetError("dataset has no labels");
  std::vector<int> out;
  out.reserve(ids.size());
  for (std::size_t i : ids) out.push_back(dataset.labels.at(i));
  return out;
}

Json encoder_to_json(const EncoderState& state) {
  Json feats = Json::array();
  for (const auto& e : state.features) {
    Json j{{"name", e.name}, {"kind", std::string(to_string(e.kind))}};
    if (e.kind == FeatureKind::categorical) {
      j["categories"] = e.categories;
      j["mode"] = e.mode;
    } else {
      j["mean"] = e.mean;
      j["scale"] = e.scale;
    }
    feats.push_back(std::move(j));
  }
  return Json{{"features", std::move(feats)}, {"column_names", state.column_names}};
}

EncoderState encoder_from_json(const Json& j) {
  EncoderState state;
  for (const auto& f : j.at("features")) {
    FeatureEncoding e;
    e.name = f.at("name").get<std::string>();
    auto kind = feature_kind_from_string(f.at("kind").get<std::string>());
    if (!kind) throw DatasetError("bad encoder kind");
    e.kind = *kind;
    if (e.kind == FeatureKind::categorical) {
      e.categories = f.at("categories").get<std::vector<std::string>>();
      e.mode = f.at("mode").get<std::size_t>();
    } else {
      e.mean = f.at("mean").get<double>();
      e.scale = f.at("scale").get<double>();
    }
    state.features.push_back(std::move(e));
  }
  state.column_names = j.at("column_names").get<std::vector<std::string>>();
  return state;
}

}  // namespace temed
