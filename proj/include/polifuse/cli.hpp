#ifndef POLIFUSE_CLI_HPP_
#define POLIFUSE_CLI_HPP_

// Batch command-line front end. One JSON config document plus dotted-key
// overrides fully determines a run; every subcommand writes its artifacts
// under one output directory. Exit codes: 0 success, 1 usage error, 2 config
// or data validation error, 3 runtime failure. Every failure prints a single
// machine-parseable `error[kind]: reason` line on the diagnostic stream.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "polifuse/analytics.hpp"
#include "polifuse/checkpoint.hpp"
#include "polifuse/common.hpp"
#include "polifuse/corpus.hpp"
#include "polifuse/jsonutil.hpp"
#include "polifuse/model.hpp"
#include "polifuse/synth.hpp"
#include "polifuse/trainer.hpp"

namespace polifuse {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Effective settings for one training or evaluation run, read from the merged
// config tree. `corpus` stays empty until the config provides it; subcommands
// that need records reject the empty path.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  std::string corpus;
  double train_frac = 0.7;
  double validation_frac = 0.15;
  std::uint64_t split_seed = 7;
  std::string out_dir = "out";
};

inline RunConfig run_config_from_json(const nlohmann::json& j) {
  detail::expect_keys(j, "config", {"model", "train", "data", "out"});
  RunConfig c;
  if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
  if (j.contains("train")) c.train = train_config_from_json(j.at("train"));
  if (j.contains("data")) {
    const auto& d = j.at("data");
    detail::expect_keys(d, "config.data",
                        {"corpus", "train_frac", "validation_frac", "split_seed"});
    detail::read_field(d, "corpus", c.corpus);
    detail::read_field(d, "train_frac", c.train_frac);
    detail::read_field(d, "validation_frac", c.validation_frac);
    detail::read_field(d, "split_seed", c.split_seed);
  }
  detail::read_field(j, "out", c.out_dir);
  c.model.validate();
  c.train.validate();
  return c;
}

inline SyntheticConfig synthetic_config_from_json(const nlohmann::json& j) {
  detail::expect_keys(j, "gen-synth config",
                      {"n_records", "n_classes", "resolution", "vocab_size",
                       "signal_strength_text", "signal_strength_image", "complementary",
                       "seed"});
  SyntheticConfig c;
  detail::read_field(j, "n_records", c.n_records);
  detail::read_field(j, "n_classes", c.n_classes);
  detail::read_field(j, "resolution", c.resolution);
  detail::read_field(j, "vocab_size", c.vocab_size);
  detail::read_field(j, "signal_strength_text", c.signal_strength_text);
  detail::read_field(j, "signal_strength_image", c.signal_strength_image);
  detail::read_field(j, "complementary", c.complementary);
  detail::read_field(j, "seed", c.seed);
  return c;
}

namespace detail {

// One `--set key=value` override. The value is typed by JSON parsing where it
// parses and kept as a string otherwise; dots in the key descend the tree,
// creating objects along the way.
inline void apply_override(nlohmann::json& tree, const std::string& spec) {
  const std::size_t eq = spec.find('=');
  if (eq == std::string::npos || eq == 0)
    throw UsageError("--set expects key=value, got '" + spec + "'");
  const std::string key = spec.substr(0, eq);
  nlohmann::json value = nlohmann::json::parse(spec.substr(eq + 1), nullptr, false);
  if (value.is_discarded()) value = spec.substr(eq + 1);

  nlohmann::json* node = &tree;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = key.find('.', start);
    const std::string part =
        key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw UsageError("--set key has an empty segment: '" + key + "'");
    if (dot == std::string::npos) {
      (*node)[part] = std::move(value);
      return;
    }
    nlohmann::json& child = (*node)[part];
    if (!child.is_object()) child = nlohmann::json::object();
    node = &child;
    start = dot + 1;
  }
}

struct CliOptions {
  std::string config_path;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::string objective;
  std::string model_path;
  std::string split = "test";
  std::string init_path;
  std::string annotations;
  std::string compare;
  std::string figure;
  std::string metrics_path;
};

inline void require_file(const std::string& path, const std::string& what) {
  if (path.empty()) throw ValidationError(what + " is required");
  if (!std::filesystem::exists(path))
    throw ValidationError(what + " not found: " + path);
}

// Config file plus overrides, in that order, as one JSON tree.
inline nlohmann::json config_tree(const CliOptions& o) {
  nlohmann::json tree = nlohmann::json::object();
  if (!o.config_path.empty()) {
    require_file(o.config_path, "config file");
    std::ifstream f(o.config_path);
    const std::string text((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
    tree = nlohmann::json::parse(text, nullptr, false);
    if (tree.is_discarded())
      throw ValidationError("config file " + o.config_path + " is not valid JSON");
    if (!tree.is_object())
      throw ValidationError("config file " + o.config_path + " must hold a JSON object");
  }
  for (const auto& spec : o.sets) apply_override(tree, spec);
  return tree;
}

// Seed flag folded into the tree at `key`, so the config hash covers it.
inline void apply_seed(nlohmann::json& tree, const CliOptions& o, const std::string& key) {
  if (!o.seed) return;
  if (key == "seed") {
    tree["seed"] = *o.seed;
    return;
  }
  nlohmann::json& train = tree["train"];
  if (!train.is_null() && !train.is_object())
    throw ValidationError("config key 'train' must be an object");
  if (train.is_null()) train = nlohmann::json::object();
  train["seed"] = *o.seed;
}

inline std::string effective_out(const CliOptions& o, const RunConfig& rc) {
  return o.out ? *o.out : rc.out_dir;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open " + path + " for writing");
  f << content;
  if (!f) throw std::runtime_error("short write to " + path);
}

inline std::vector<DocumentRecord> load_records(const std::string& corpus_path,
                                                int resolution) {
  require_file(corpus_path, "data.corpus");
  std::vector<DocumentRecord> records = load_corpus(corpus_path);
  load_images(records, corpus_path, resolution);
  return records;
}

struct SplitRecords {
  std::vector<DocumentRecord> train, validation, test;
};

inline SplitRecords split_records(const std::vector<DocumentRecord>& records,
                                  const RunConfig& rc) {
  const CorpusSplit split = split_clusters(build_clusters(records), rc.train_frac,
                                           rc.validation_frac, rc.split_seed);
  std::map<std::string, const DocumentRecord*> by_id;
  for (const auto& r : records) by_id[r.id] = &r;
  auto gather = [&](const std::vector<std::string>& ids) {
    std::vector<DocumentRecord> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(*by_id.at(id));
    return out;
  };
  return {gather(split.train_ids), gather(split.validation_ids),
          gather(split.test_ids)};
}

inline int cmd_gen_synth(const CliOptions& o, std::ostream& out) {
  nlohmann::json tree = config_tree(o);
  apply_seed(tree, o, "seed");
  const SyntheticConfig sc = synthetic_config_from_json(tree);
  const std::string dir = o.out ? *o.out : "out";
  auto [records, clusters] = generate_synthetic(sc);
  std::filesystem::create_directories(dir);
  write_corpus_tree(records, dir);
  out << "wrote " << records.size() << " records across " << clusters.size()
      << " stories to " << dir << "/records.jsonl\n";
  return 0;
}

inline int cmd_pretrain(const CliOptions& o, std::ostream& out) {
  nlohmann::json tree = config_tree(o);
  apply_seed(tree, o, "train.seed");
  const RunConfig rc = run_config_from_json(tree);

  std::vector<Objective> stages;
  if (o.objective.empty()) {
    stages.push_back(rc.train.objective);
  } else {
    std::size_t start = 0;
    while (start <= o.objective.size()) {
      const std::size_t comma = o.objective.find(',', start);
      const std::string part = o.objective.substr(
          start, comma == std::string::npos ? std::string::npos : comma - start);
      stages.push_back(parse_objective(part));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  for (Objective s : stages)
    if (s == Objective::kClassify)
      throw ValidationError("pretraining stages must be infonce, captioning, or triplet");

  const std::vector<DocumentRecord> records =
      load_records(rc.corpus, rc.model.image.resolution);
  const SplitRecords split = split_records(records, rc);
  ParameterSet<float> params;
  Rng rng(rc.train.seed);
  init_model(params, rc.model, rng);

  std::string losses_csv = "step,objective,loss\n";
  TrainConfig stage_tc = rc.train;
  double final_loss = 0;
  int step = 0;
  for (Objective s : stages) {
    stage_tc.objective = s;
    const PretrainResult res = pretrain(params, rc.model, stage_tc, split.train);
    for (double loss : res.step_losses)
      losses_csv += std::to_string(++step) + "," + to_string(s) + "," +
                    format_double(loss) + "\n";
    final_loss = res.final_loss;
  }

  const std::string dir = effective_out(o, rc);
  std::filesystem::create_directories(dir);
  write_text_file(dir + "/pretrain_losses.csv", losses_csv);
  save_checkpoint(dir + "/pretrained.bin", params,
                  pretrain_checkpoint_config(rc.model, stage_tc, final_loss));
  out << "pretrained " << stages.size() << " stage(s), " << step
      << " steps, final loss " << format_double(final_loss) << ", checkpoint " << dir
      << "/pretrained.bin\n";
  return 0;
}

inline int cmd_finetune(const CliOptions& o, std::ostream& out) {
  nlohmann::json tree = config_tree(o);
  apply_seed(tree, o, "train.seed");
  RunConfig rc = run_config_from_json(tree);
  rc.train.objective = Objective::kClassify;

  const std::vector<DocumentRecord> records =
      load_records(rc.corpus, rc.model.image.resolution);
  const SplitRecords split = split_records(records, rc);

  ParameterSet<float> params;
  if (!o.init_path.empty()) {
    require_file(o.init_path, "initial checkpoint");
    load_checkpoint(o.init_path, params);
  }
  Rng rng(rc.train.seed);
  init_model(params, rc.model, rng);

  const FinetuneResult res =
      finetune(params, rc.model, rc.train, split.train, split.validation);

  const std::string dir = effective_out(o, rc);
  std::filesystem::create_directories(dir);
  write_text_file(dir + "/history.csv", history_to_csv(res.history));
  save_checkpoint(dir + "/model.bin", params,
                  nlohmann::json{{"model", model_config_to_json(rc.model)},
                                 {"train", train_config_to_json(rc.train)}});
  out << "best epoch " << res.best_epoch << ", validation accuracy "
      << format_double(res.best_accuracy) << ", checkpoint " << dir << "/model.bin\n";
  return 0;
}

inline int cmd_evaluate(const CliOptions& o, std::ostream& out) {
  nlohmann::json tree = config_tree(o);
  apply_seed(tree, o, "train.seed");
  const RunConfig rc = run_config_from_json(tree);

  require_file(o.model_path, "model checkpoint");
  ParameterSet<float> params;
  const nlohmann::json stored = load_checkpoint(o.model_path, params);
  if (!stored.contains("model"))
    throw ValidationError("checkpoint " + o.model_path + " carries no model config");
  const ModelConfig mc = model_config_from_json(stored.at("model"));
  mc.validate();

  const std::vector<DocumentRecord> records =
      load_records(rc.corpus, mc.image.resolution);
  const SplitRecords split = split_records(records, rc);
  const std::vector<DocumentRecord>& chosen =
      o.split == "train"        ? split.train
      : o.split == "validation" ? split.validation
      : o.split == "test"       ? split.test
                                : records;

  const auto t0 = std::chrono::steady_clock::now();
  const MetricsReport report = evaluate(params, mc, chosen);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const nlohmann::json metrics = metrics_to_json(report, mc.scheme(),
                                                 config_hash(tree), rc.train.seed, wall);
  const std::string dir = effective_out(o, rc);
  std::filesystem::create_directories(dir);
  write_text_file(dir + "/metrics.json", metrics.dump(2) + "\n");
  out << "split " << o.split << ": accuracy "
      << format_double(report.overall_accuracy) << ", macro F1 "
      << format_double(report.macro_f1) << " over " << chosen.size() << " records, "
      << dir << "/metrics.json\n";
  return 0;
}

inline int cmd_analyze(const CliOptions& o, std::ostream& out) {
  require_file(o.annotations, "annotation file");
  const std::vector<AnnotationRecord> annotations = load_annotations(o.annotations);

  const std::string dir = o.out ? *o.out : "out";
  std::filesystem::create_directories(dir);
  write_text_file(dir + "/face_counts.csv",
                  table_to_csv(face_count_table(annotations), "faces"));
  write_text_file(dir + "/image_classes.csv",
                  table_to_csv(image_class_table(annotations), "image_class"));
  write_text_file(dir + "/emotions.csv",
                  table_to_csv(emotion_distribution(annotations), "emotion"));
  if (!o.figure.empty())
    write_text_file(dir + "/figures.csv",
                    table_to_csv(figure_cooccurrence(annotations, o.figure), o.figure));

  if (!o.compare.empty()) {
    require_file(o.compare, "comparison annotation file");
    std::map<std::string, IdeologyLabel> other;
    for (const AnnotationRecord& r : load_annotations(o.compare))
      other[r.record_id] = r.label;
    std::vector<std::string> ours, theirs;
    for (const AnnotationRecord& r : annotations) {
      const auto it = other.find(r.record_id);
      if (it == other.end()) continue;
      ours.push_back(to_string(r.label));
      theirs.push_back(to_string(it->second));
    }
    if (ours.empty())
      throw ValidationError("no shared record ids between the annotation files");
    const nlohmann::json agreement = {{"kappa", cohens_kappa(ours, theirs)},
                                      {"items", ours.size()}};
    write_text_file(dir + "/agreement.json", agreement.dump(2) + "\n");
  }
  out << "analyzed " << annotations.size() << " annotation records into " << dir << "\n";
  return 0;
}

inline std::string render_report(const nlohmann::json& metrics) {
  for (const char* field : {"overall_accuracy", "macro_f1", "per_class_recall"})
    if (!metrics.contains(field))
      throw ValidationError(std::string("metrics file missing field '") + field + "'");
  const nlohmann::json& recall = metrics.at("per_class_recall");
  if (!recall.is_object())
    throw ValidationError("per_class_recall must map class names to recalls");
  const LabelScheme scheme = scheme_for_classes(static_cast<int>(recall.size()));

  std::vector<std::string> headers{"Overall Acc."};
  std::vector<std::string> values{
      format_double(metrics.at("overall_accuracy").get<double>())};
  for (int c = 0; c < scheme_classes(scheme); ++c) {
    const std::string name = to_string(label_for_class(c, scheme));
    if (!recall.contains(name))
      throw ValidationError("per_class_recall missing class '" + name + "'");
    headers.push_back(name);
    values.push_back(format_double(recall.at(name).get<double>()));
  }
  headers.push_back("Macro F1");
  values.push_back(format_double(metrics.at("macro_f1").get<double>()));

  std::string top, bottom;
  for (std::size_t i = 0; i < headers.size(); ++i) {
    const std::size_t width = std::max(headers[i].size(), values[i].size());
    top += headers[i];
    bottom += values[i];
    if (i + 1 < headers.size()) {
      top.append(width - headers[i].size() + 2, ' ');
      bottom.append(width - values[i].size() + 2, ' ');
    }
  }
  return top + "\n" + bottom + "\n";
}

inline int cmd_report(const CliOptions& o, std::ostream& out) {
  require_file(o.metrics_path, "metrics file");
  std::ifstream f(o.metrics_path);
  const std::string text((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
  const nlohmann::json metrics = nlohmann::json::parse(text, nullptr, false);
  if (metrics.is_discarded())
    throw ValidationError("metrics file " + o.metrics_path + " is not valid JSON");
  out << render_report(metrics);
  return 0;
}

inline std::string one_line(const std::string& message) {
  std::string out = message;
  std::replace(out.begin(), out.end(), '\n', ' ');
  return out;
}

}  // namespace detail

// Entry point over program arguments (program name excluded). Parses the
// subcommand and flags, dispatches, and maps failures onto the exit-code
// contract documented at the top of this header.
inline int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
  detail::CliOptions o;
  CLI::App app{"multimodal ideology classification workbench", "polifuse"};
  app.require_subcommand(1);

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON run configuration file");
    sub->add_option("--set", o.sets,
                    "dotted-key config override, key=value (repeatable)");
    sub->add_option("--seed", o.seed, "random seed, overriding the config");
    sub->add_option("--out", o.out, "output directory (default: config out, else out/)");
    return sub;
  };

  CLI::App* gen = add_common(app.add_subcommand(
      "gen-synth", "generate a planted-signal corpus of JSONL records and PNGs"));
  CLI::App* pre = add_common(app.add_subcommand(
      "pretrain", "run continued-pretraining stages and save a checkpoint"));
  pre->add_option("--objective", o.objective,
                  "comma-separated stages: infonce, captioning, triplet");
  CLI::App* fin = add_common(
      app.add_subcommand("finetune", "train the classifier with early stopping"));
  fin->add_option("--init", o.init_path, "checkpoint to initialize from");
  CLI::App* eva = add_common(
      app.add_subcommand("evaluate", "score a checkpoint and write metrics JSON"));
  eva->add_option("--model", o.model_path, "model checkpoint to evaluate")->required();
  eva->add_option("--split", o.split, "records to score: train, validation, test, all")
      ->check(CLI::IsMember({"train", "validation", "test", "all"}));
  CLI::App* ana = add_common(app.add_subcommand(
      "analyze", "aggregate annotation records into CSV tables"));
  ana->add_option("--annotations", o.annotations, "annotation JSONL file")->required();
  ana->add_option("--figure", o.figure, "named figure for the co-occurrence table");
  ana->add_option("--compare", o.compare,
                  "second annotation JSONL; writes inter-annotator agreement");
  CLI::App* rep = add_common(
      app.add_subcommand("report", "render metrics JSON as a results table"));
  rep->add_option("--metrics", o.metrics_path, "metrics JSON file")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error[usage]: " << detail::one_line(e.what()) << "\n" << app.help();
    return 1;
  }

  try {
    if (gen->parsed()) return detail::cmd_gen_synth(o, out);
    if (pre->parsed()) return detail::cmd_pretrain(o, out);
    if (fin->parsed()) return detail::cmd_finetune(o, out);
    if (eva->parsed()) return detail::cmd_evaluate(o, out);
    if (ana->parsed()) return detail::cmd_analyze(o, out);
    if (rep->parsed()) return detail::cmd_report(o, out);
    err << "error[usage]: no subcommand given\n" << app.help();
    return 1;
  } catch (const UsageError& e) {
    err << "error[usage]: " << detail::one_line(e.what()) << "\n" << app.help();
    return 1;
  } catch (const ValidationError& e) {
    err << "error[validation]: " << detail::one_line(e.what()) << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "error[runtime]: " << detail::one_line(e.what()) << "\n";
    return 3;
  }
}

}  // namespace polifuse

#endif  // POLIFUSE_CLI_HPP_
