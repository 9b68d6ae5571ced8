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

#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "temed/dataset.hpp"
#include "temed/evalkit.hpp"
#include "temed/llm_gateway.hpp"
#include "temed/models.hpp"
#include "temed/rextract.hpp"
#include "temed/schema.hpp"
#include "temed/text_util.hpp"
#include "temed/vorc.hpp"

namespace temed::cli {

namespace fs = std::filesystem;

namespace {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Values from --config, overridden by flags given on the command line.
struct RunConfig {
  fs::path base_dir = ".";
  std::optional<std::string> schema, templates, corpus, shots, dataset, model, split, truth, extracted, provenance;
  std::optional<std::string> family;
  std::optional<std::string> provider_kind;
  std::map<std::string, std::string> provider;
  std::optional<int> budget, parallelism, n_shots, max_tokens;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  bool no_reasoning = false;
};

std::string scalar_text(const Json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); }

RunConfig load_config(const fs::path& path) {
  RunConfig c;
  c.base_dir = path.parent_path().empty() ? fs::path(".") : path.parent_path();
  Json doc;
  try {
    doc = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError("config " + path.string() + ": " + e.what());
  }
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  auto str = [&](const char* key, std::optional<std::string>& slot) {
    if (auto it = doc.find(key); it != doc.end() && !it->is_null()) slot = scalar_text(*it);
  };
  auto num = [&](const char* key, std::optional<int>& slot) {
    if (auto it = doc.find(key); it != doc.end() && !it->is_null()) {
      if (!it->is_number_integer()) throw ConfigError(std::string("config key '") + key + "' must be an integer");
      slot = it->get<int>();
    }
  };
  str("schema", c.schema);
  str("templates", c.templates);
  str("corpus", c.corpus);
  str("shots", c.shots);
  str("dataset", c.dataset);
  str("model", c.model);
  str("split", c.split);
  str("truth", c.truth);
  str("extracted", c.extracted);
  str("provenance", c.provenance);
  str("family", c.family);
  str("output_dir", c.output_dir);
  num("budget", c.budget);
  num("parallelism", c.parallelism);
  num("n_shots", c.n_shots);
  num("max_tokens", c.max_tokens);
  if (auto it = doc.find("seed"); it != doc.end() && !it->is_null()) {
    if (!it->is_number_unsigned()) throw ConfigError("config key 'seed' must be a non-negative integer");
    c.seed = it->get<std::uint64_t>();
  }
  if (auto it = doc.find("no_reasoning"); it != doc.end()) c.no_reasoning = it->get<bool>();
  if (auto it = doc.find("provider"); it != doc.end() && !it->is_null()) {
    if (!it->is_object()) throw ConfigError("config key 'provider' must be an object");
    for (const auto& [k, v] : it->items()) {
      if (k == "kind") {
        c.provider_kind = scalar_text(v);
      } else {
        c.provider[k] = scalar_text(v);
      }
    }
    if (auto s = c.provider.find("script"); s != c.provider.end()) {
      s->second = (c.base_dir / s->second).lexically_normal().string();
    }
  }
  // Paths in a config file are relative to the file.
  for (auto* p : {&c.schema, &c.templates, &c.corpus, &c.shots, &c.dataset, &c.model, &c.split, &c.truth,
                  &c.extracted, &c.provenance, &c.output_dir}) {
    if (*p && fs::path(**p).is_relative()) *p = (c.base_dir / **p).lexically_normal().string();
  }
  return c;
}

// Flag values captured by CLI11 before merging into RunConfig.
struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
  bool json = false;
  std::string format;

  std::optional<std::string> schema, templates, corpus, shots, dataset, model, split, truth, extracted, provenance;
  std::optional<std::string> family, report, subset;
  std::optional<std::string> provider_kind, script, endpoint, model_name, credential_env, api_style;
  std::optional<int> budget, parallelism, n_shots, max_tokens;
  bool no_reasoning = false;
};

RunConfig merge(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
  auto over = [](auto& slot, const auto& flag) {
    if (flag) slot = flag;
  };
  over(c.schema, f.schema);
  over(c.templates, f.templates);
  over(c.corpus, f.corpus);
  over(c.shots, f.shots);
  over(c.dataset, f.dataset);
  over(c.model, f.model);
  over(c.split, f.split);
  over(c.truth, f.truth);
  over(c.extracted, f.extracted);
  over(c.provenance, f.provenance);
  over(c.family, f.family);
  over(c.output_dir, f.output_dir);
  over(c.budget, f.budget);
  over(c.parallelism, f.parallelism);
  over(c.n_shots, f.n_shots);
  over(c.max_tokens, f.max_tokens);
  over(c.seed, f.seed);
  over(c.provider_kind, f.provider_kind);
  if (f.script) c.provider["script"] = *f.script;
  if (f.endpoint) c.provider["endpoint"] = *f.endpoint;
  if (f.model_name) c.provider["model_name"] = *f.model_name;
  if (f.credential_env) c.provider["credential_env"] = *f.credential_env;
  if (f.api_style) c.provider["api_style"] = *f.api_style;
  if (f.script && !c.provider_kind) c.provider_kind = "replay";
  c.no_reasoning = c.no_reasoning || f.no_reasoning;
  return c;
}

template <typename T>
const T& need(const std::optional<T>& v, const char* what) {
  if (!v) throw ConfigError(std::string("missing required setting: ") + what);
  return *v;
}

fs::path need_file(const std::optional<std::string>& v, const char* what) {
  const fs::path p = need(v, what);
  if (!fs::exists(p)) throw ConfigError(std::string(what) + " '" + p.string() + "' does not exist");
  return p;
}

fs::path output_dir(const RunConfig& c) {
  fs::path dir = c.output_dir.value_or("out");
  fs::create_directories(dir);
  return dir;
}

std::uint64_t seed_of(const RunConfig& c) { return c.seed.value_or(42); }

std::shared_ptr<CompletionProvider> make_provider(const RunConfig& c) {
  const std::string kind = need(c.provider_kind, "provider kind (--provider or config provider.kind)");
  ProviderKind k;
  if (kind == "replay") {
    k = ProviderKind::replay;
  } else if (kind == "http") {
    k = ProviderKind::http;
  } else {
    throw ConfigError("unknown provider kind '" + kind + "' (expected http or replay)");
  }
  return configure_provider(k, c.provider);
}

ReportFormat report_format(const Flags& f) {
  if (f.json || f.format == "json") return ReportFormat::json;
  if (f.format == "csv") return ReportFormat::csv;
  if (f.format.empty() || f.format == "text") return ReportFormat::text;
  throw ConfigError("unknown --format '" + f.format + "'");
}

std::vector<ModelFamily> families_of(const RunConfig& c) {
  const std::string spec = c.family.value_or("logreg");
  if (spec == "all") return {ModelFamily::logreg, ModelFamily::dtree, ModelFamily::gbdt};
  auto f = model_family_from_string(spec);
  if (!f) throw ConfigError("unknown model family '" + spec + "' (expected logreg, dtree, gbdt or all)");
  return {*f};
}

std::string fmt_opt(const std::optional<double>& v) { return v ? format_real(*v) : "null"; }

// ---- commands ---------------------------------------------------------------

int cmd_prompt_preview(const RunConfig& c, const Flags& f, std::ostream& out) {
  const auto schema = load_schema(need_file(c.schema, "schema"));
  auto templates = load_templates(need_file(c.templates, "templates directory"), schema);
  if (c.no_reasoning) templates = templates.extract_only();
  const std::string report = read_file(need_file(f.report, "report file (--report)"));
  out << templates.render(schema, report) << "\n";
  return kExitOk;
}

int cmd_extract(const RunConfig& c, const Flags& f, std::ostream& out, std::ostream& err) {
  const auto schema = load_schema(need_file(c.schema, "schema"));
  auto templates = load_templates(need_file(c.templates, "templates directory"), schema);
  if (c.no_reasoning) templates = templates.extract_only();
  const auto reports = load_corpus_jsonl(need_file(c.corpus, "corpus"));
  const int budget = c.budget.value_or(3);
  const int parallelism = c.parallelism.value_or(1);
  if (budget < 0) throw ConfigError("budget must be >= 0");
  if (parallelism < 1) throw ConfigError("parallelism must be >= 1");
  auto provider = make_provider(c);

  VorcOptions options;
  if (c.max_tokens) options.max_tokens = *c.max_tokens;
  const CorpusResult result = extract_corpus(*provider, reports, schema, templates, VorcBudget{budget}, parallelism,
                                             options);

  TabularDataset table = dataset_from_records(schema, result.records);
  if (schema.label()) {
    std::map<std::string, const CorpusReport*> by_id;
    for (const auto& r : reports) by_id[r.id] = &r;
    bool all_labeled = !table.ids.empty();
    std::vector<int> labels;
    for (const auto& id : table.ids) {
      const auto& lbl = by_id.at(id)->label;
      if (!lbl) {
        all_labeled = false;
        break;
      }
      if (*lbl == schema.label()->positive_value) {
        labels.push_back(1);
      } else if (*lbl == schema.label()->negative_value) {
        labels.push_back(0);
      } else {
        throw ConfigError("report '" + id + "' has label '" + *lbl + "' outside the schema's label values");
      }
    }
    if (all_labeled) {
      table.labels = std::move(labels);
      table.labeled = true;
    }
  }

  const fs::path dir = output_dir(c);
  save_csv(dir / "extracted.csv", table);
  write_file(dir / "provenance.jsonl", provenance_to_jsonl(result.provenance));

  std::size_t provider_failures = 0;
  for (const auto& p : result.provenance) {
    if (p.status == RecordStatus::ok) continue;
    err << "record " << p.id << ": " << to_string(p.status) << (p.error.empty() ? "" : " (" + p.error + ")")
        << "\n";
    provider_failures += p.status == RecordStatus::provider_error;
  }
  OrderedJson summary;
  summary["reports"] = reports.size();
  summary["rows"] = result.records.size();
  summary["failures"] = result.failures;
  summary["vorc_call_rate"] = result.vorc_call_rate ? OrderedJson(*result.vorc_call_rate) : OrderedJson(nullptr);
  summary["provider"] = provider->model_id();
  write_file(dir / "extract_summary.json", summary.dump(2) + "\n");
  if (f.json) {
    out << summary.dump(2) << "\n";
  } else {
    out << "extracted " << result.records.size() << "/" << reports.size() << " records, " << result.failures
        << " failures, vorc_call_rate=" << fmt_opt(result.vorc_call_rate) << "\n";
  }
  return provider_failures > 0 ? kExitProvider : kExitOk;
}

struct Prepared {
  SplitAssignment split;
  EncoderState encoder;
  EncodedMatrix train, val, test;
  std::vector<int> y_train, y_val, y_test;
};

Prepared prepare(const TabularDataset& ds, const SplitAssignment& split) {
  Prepared p;
  p.split = split;
  p.encoder = fit_encoder(ds, split.train);
  p.train = transform(ds, p.encoder, split.train);
  p.val = transform(ds, p.encoder, split.val);
  p.test = transform(ds, p.encoder, split.test);
  p.y_train = labels_of(ds, split.train);
  p.y_val = labels_of(ds, split.val);
  p.y_test = labels_of(ds, split.test);
  return p;
}

TrainedModel fit_family(ModelFamily family, const Prepared& p, const ExtractionSchema& schema, GridReport* report) {
  GridResult g = grid_search(family, p.train, p.y_train, p.val, p.y_val);
  g.model.encoder = p.encoder;
  g.model.schema = schema_to_json(schema);
  if (report) *report = std::move(g.report);
  return std::move(g.model);
}

int cmd_train(const RunConfig& c, const Flags& f, std::ostream& out) {
  const auto schema = load_schema(need_file(c.schema, "schema"));
  if (!schema.label()) throw ConfigError("training needs a schema with a label");
  const auto ds = load_csv(need_file(c.dataset, "dataset"), schema);
  if (!ds.labeled) throw ConfigError("dataset has no label column '" + schema.label()->name + "'");
  const auto families = families_of(c);
  const Prepared p = prepare(ds, split(ds, seed_of(c)));
  const fs::path dir = output_dir(c);
  write_file(dir / "split.json", split_to_json(p.split).dump() + "\n");

  std::vector<NamedReport> reports;
  OrderedJson grids = OrderedJson::object();
  for (ModelFamily fam : families) {
    GridReport grid;
    const TrainedModel model = fit_family(fam, p, schema, &grid);
    const std::string name(to_string(fam));
    save_model(dir / ("model_" + name + ".json"), model);
    write_file(dir / ("grid_" + name + ".json"), grid_report_to_json(grid).dump(2) + "\n");
    grids[name] = OrderedJson::parse(grid_report_to_json(grid).dump());
    reports.push_back({name + "/test", classification_metrics(p.y_test, predict_proba(model, p.test.values))});
    if (!f.json) {
      out << name << ": " << grid.entries.size() << " candidates, selected "
          << grid.entries[grid.best].params.dump() << " (val_accuracy="
          << format_real(grid.entries[grid.best].val_accuracy) << ")\n";
    }
  }
  if (f.json) {
    OrderedJson doc;
    doc["grids"] = grids;
    doc["test"] = report_to_json(reports);
    out << doc.dump(2) << "\n";
  } else {
    out << render_report(reports, ReportFormat::text);
  }
  return kExitOk;
}

int cmd_evaluate(const RunConfig& c, const Flags& f, std::ostream& out) {
  const TrainedModel model = load_model(need_file(c.model, "model"));
  if (!model.encoder || !model.schema) throw ConfigError("model file lacks an embedded encoder and schema");
  const auto schema = schema_from_json(*model.schema);
  const auto ds = load_csv(need_file(c.dataset, "dataset"), schema);
  if (!ds.labeled) throw ConfigError("dataset has no label column");
  std::vector<std::size_t> rows;
  const std::string subset = f.subset.value_or("test");
  if (c.split) {
    Json sj;
    try {
      sj = Json::parse(read_file(need_file(c.split, "split")));
    } catch (const Json::exception& e) {
      throw ConfigError(std::string("split file: ") + e.what());
    }
    const SplitAssignment s = split_from_json(sj);
    if (subset == "train") {
      rows = s.train;
    } else if (subset == "val") {
      rows = s.val;
    } else if (subset == "test") {
      rows = s.test;
    } else if (subset != "all") {
      throw ConfigError("unknown --subset '" + subset + "'");
    }
    for (std::size_t r : rows) {
      if (r >= ds.size()) throw ConfigError("split refers to row " + std::to_string(r) + " beyond the dataset");
    }
  }
  if (rows.empty()) {
    rows.resize(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) rows[i] = i;
  }
  const EncodedMatrix X = transform(ds, *model.encoder, rows);
  if (X.column_names != model.column_names) throw ConfigError("dataset columns do not match the model");
  const auto report = classification_metrics(labels_of(ds, rows), predict_proba(model, X.values));
  out << render_report({{std::string(to_string(model.family)) + "/" + subset, report}}, report_format(f));
  return kExitOk;
}

int cmd_compare(const RunConfig& c, const Flags& f, std::ostream& out) {
  const auto schema = load_schema(need_file(c.schema, "schema"));
  if (!schema.label()) throw ConfigError("compare needs a schema with a label");
  const auto truth = load_csv(need_file(c.truth, "truth table"), schema);
  const auto extracted = load_csv(need_file(c.extracted, "extracted table"), schema);
  if (!truth.labeled) throw ConfigError("truth table has no label column");
  std::vector<Provenance> provenance;
  if (c.provenance) provenance = parse_provenance_jsonl(read_file(need_file(c.provenance, "provenance")));

  std::set<std::string> truth_ids(truth.ids.begin(), truth.ids.end());
  std::vector<std::string> common;
  for (const auto& id : extracted.ids) {
    if (truth_ids.count(id)) common.push_back(id);
  }
  if (common.empty()) throw ConfigError("extracted and truth tables share no row ids");
  if (common.size() != extracted.size()) {
    throw ConfigError("extracted table has " + std::to_string(extracted.size() - common.size()) +
                      " ids missing from the truth table");
  }

  std::vector<NamedReport> reports;
  reports.push_back({"extraction", extraction_metrics(extracted, truth, provenance)});

  // Both pipelines see the same ids, split and ground-truth labels.
  const TabularDataset gt = select_ids(truth, common);
  TabularDataset ext = select_ids(extracted, common);
  ext.labels = gt.labels;
  ext.labeled = true;
  const SplitAssignment s = split(gt, seed_of(c));
  const Prepared pg = prepare(gt, s);
  const Prepared pe = prepare(ext, s);
  for (ModelFamily fam : families_of(c)) {
    const TrainedModel mg = fit_family(fam, pg, schema, nullptr);
    const TrainedModel me = fit_family(fam, pe, schema, nullptr);
    reports.push_back({std::string(to_string(fam)) + "/fidelity",
                       fidelity(mg, me, pg.test.values, pe.test.values, pg.y_test)});
  }
  const fs::path dir = output_dir(c);
  write_file(dir / "compare_report.json", render_report(reports, ReportFormat::json));
  out << render_report(reports, report_format(f));
  return kExitOk;
}

int cmd_fewshot(const RunConfig& c, const Flags& f, std::ostream& out, std::ostream& err) {
  const auto schema = load_schema(need_file(c.schema, "schema"));
  if (!schema.label()) throw ConfigError("few-shot classification needs a schema with a label");
  const LabelSpec& label = *schema.label();
  const auto shot_reports = load_corpus_jsonl(need_file(c.shots, "shots file"));
  const int n_shots = c.n_shots.value_or(10);
  if (n_shots < 1) throw ConfigError("at least one shot is required");
  std::vector<LabeledReport> shots;
  for (const auto& r : shot_reports) {
    if (static_cast<int>(shots.size()) == n_shots) break;
    if (!r.label) throw ConfigError("shot '" + r.id + "' has no label");
    shots.push_back({r.text, *r.label});
  }
  if (shots.empty()) throw ConfigError("shots file holds no shots");
  const auto reports = load_corpus_jsonl(need_file(c.corpus, "corpus"));
  auto provider = make_provider(c);

  std::vector<int> y_true, y_pred;
  std::size_t abstained = 0;
  std::string csv = "id,answer,prediction\n";
  for (const auto& r : reports) {
    CompletionRequest req;
    req.prompt = build_fewshot_classifier_prompt(shots, r.text, label);
    req.max_tokens = c.max_tokens.value_or(16);
    const std::string answer = provider->complete(req).text;
    const auto parsed = parse_fewshot_answer(answer, label);
    csv += csv_escape(r.id) + "," + csv_escape(trim(answer)) + "," +
           (parsed ? csv_escape(*parsed ? label.positive_value : label.negative_value) : std::string()) + "\n";
    if (!parsed) {
      ++abstained;
      err << "report " << r.id << ": abstained (answer did not match a label value)\n";
      continue;
    }
    if (!r.label) continue;
    if (*r.label != label.positive_value && *r.label != label.negative_value) {
      throw ConfigError("report '" + r.id + "' has label '" + *r.label + "' outside the schema's label values");
    }
    y_true.push_back(*r.label == label.positive_value ? 1 : 0);
    y_pred.push_back(*parsed);
  }
  const fs::path dir = output_dir(c);
  write_file(dir / "fewshot_predictions.csv", csv);
  if (y_true.empty()) {
    out << "no scorable answers (" << abstained << " abstained)\n";
    return kExitOk;
  }
  ClassificationReport rep = label_metrics(y_true, y_pred);
  rep.abstained = abstained;
  out << render_report({{"fewshot", rep}}, report_format(f));
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Schema-driven extraction of tables from clinical reports, plus interpretable models", "temed"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "JSON run configuration; flags override its values")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "Split seed (default 42)");
  app.add_option("--output-dir", f.output_dir, "Directory for output files (default ./out)");
  app.add_flag("--json", f.json, "Machine-readable JSON on stdout");

  auto add_schema = [&](CLI::App* s) { s->add_option("--schema", f.schema, "Schema JSON file"); };
  auto add_provider = [&](CLI::App* s) {
    s->add_option("--provider", f.provider_kind, "Provider kind: http or replay");
    s->add_option("--script", f.script, "Replay script (implies --provider replay)");
    s->add_option("--endpoint", f.endpoint, "HTTP endpoint URL");
    s->add_option("--model-name", f.model_name, "Remote model name");
    s->add_option("--credential-env", f.credential_env, "Environment variable holding the API key");
    s->add_option("--api-style", f.api_style, "completions or chat");
    s->add_option("--max-tokens", f.max_tokens, "Completion token limit");
  };

  auto* preview = app.add_subcommand("prompt-preview", "Print the extraction prompt for one report");
  add_schema(preview);
  preview->add_option("--templates", f.templates, "Template directory for the schema");
  preview->add_option("--report", f.report, "Text file with the report");
  preview->add_flag("--no-reasoning", f.no_reasoning, "Extract-only prompt (no guidelines, no example reasoning)");

  auto* extract = app.add_subcommand("extract", "Extract a table from a JSONL corpus");
  add_schema(extract);
  extract->add_option("--templates", f.templates, "Template directory for the schema");
  extract->add_option("--corpus", f.corpus, "JSONL corpus of {id, text, label?}");
  extract->add_option("--budget", f.budget, "Correction prompts allowed per report (default 3)");
  extract->add_option("--parallelism", f.parallelism, "Concurrent reports (default 1)");
  extract->add_flag("--no-reasoning", f.no_reasoning, "Extract-only prompt");
  add_provider(extract);

  auto* train = app.add_subcommand("train", "Grid-search a model family on a labeled CSV");
  add_schema(train);
  train->add_option("--dataset", f.dataset, "Labeled CSV");
  train->add_option("--family", f.family, "logreg, dtree, gbdt or all");

  auto* evaluate = app.add_subcommand("evaluate", "Score a saved model on a CSV");
  evaluate->add_option("--model", f.model, "Model JSON written by train");
  evaluate->add_option("--dataset", f.dataset, "Labeled CSV");
  evaluate->add_option("--split", f.split, "split.json written by train");
  evaluate->add_option("--subset", f.subset, "train, val, test (default) or all");
  evaluate->add_option("--format", f.format, "text, json or csv");

  auto* compare = app.add_subcommand("compare", "Extraction quality and model fidelity against ground truth");
  add_schema(compare);
  compare->add_option("--truth", f.truth, "Ground-truth CSV");
  compare->add_option("--extracted", f.extracted, "Extracted CSV");
  compare->add_option("--provenance", f.provenance, "provenance.jsonl from extract");
  compare->add_option("--family", f.family, "logreg, dtree, gbdt or all");
  compare->add_option("--format", f.format, "text, json or csv");

  auto* fewshot = app.add_subcommand("fewshot", "Few-shot LLM classification baseline");
  add_schema(fewshot);
  fewshot->add_option("--shots", f.shots, "JSONL of labeled example reports");
  fewshot->add_option("--n-shots", f.n_shots, "Shots to include (default 10)");
  fewshot->add_option("--corpus", f.corpus, "JSONL corpus to classify");
  fewshot->add_option("--format", f.format, "text, json or csv");
  add_provider(fewshot);

  for (auto* s : {preview, extract, train, evaluate, compare, fewshot}) s->fallthrough();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }

  try {
    const RunConfig c = merge(f);
    if (preview->parsed()) return cmd_prompt_preview(c, f, out);
    if (extract->parsed()) return cmd_extract(c, f, out, err);
    if (train->parsed()) return cmd_train(c, f, out);
    if (evaluate->parsed()) return cmd_evaluate(c, f, out);
    if (compare->parsed()) return cmd_compare(c, f, out);
    if (fewshot->parsed()) return cmd_fewshot(c, f, out, err);
  } catch (const ProviderError& e) {
    err << "error: provider " << to_string(e.kind) << ": " << e.what() << "\n";
    const bool config_problem =
        e.kind == ProviderErrorKind::missing_setting || e.kind == ProviderErrorKind::unreadable_script;
    return config_problem ? kExitConfig : kExitProvider;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace temed::cli
