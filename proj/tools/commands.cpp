// Copyright 2026 The VKIE Authors.
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

#include "commands.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numeric>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "vkie/checkpoint.hpp"
#include "vkie/config_io.hpp"
#include "vkie/corpus.hpp"
#include "vkie/experiments.hpp"
#include "vkie/extraction_record.hpp"
#include "vkie/service.hpp"
#include "vkie/train.hpp"

namespace vkie::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Options shared by the run-producing subcommands.
struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string run_dir;
  std::string run_id;
  std::string out;
  std::string corpus;
};

void add_common(CLI::App *cmd, Common &c, bool with_corpus = true) {
  cmd->add_option("--config", c.config, "experiment config file (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("--set", c.sets, "override, e.g. --set corpus.frames=200 (value parsed as JSON, else string)");
  cmd->add_option("--run-dir", c.run_dir, "parent of run directories (default: $VKIE_RUN_DIR or ./runs)");
  cmd->add_option("--run-id", c.run_id, "run directory name (default: <command>-<time>-<config hash>)");
  cmd->add_option("--out", c.out, "output directory; overrides --run-dir/--run-id");
  if (with_corpus)
    cmd->add_option("--corpus", c.corpus, "corpus directory (default: generate from the config)")
        ->check(CLI::ExistingDirectory);
}

json read_json_file(const fs::path &path, const std::string &what) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + what + " " + path.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error &e) {
    throw ConfigError(what + " " + path.string() + " is not valid JSON: " + e.what());
  }
}

json resolved_json(const Common &c) {
  json j = c.config.empty() ? json::object() : read_json_file(c.config, "config");
  for (const auto &s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key.path=value, got " + s);
    std::string pointer;
    std::string key = s.substr(0, eq);
    for (size_t p = 0; p <= key.size();) {
      const auto dot = std::min(key.find('.', p), key.size());
      pointer += "/" + key.substr(p, dot - p);
      p = dot + 1;
    }
    const std::string raw = s.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::parse_error &) {
      value = raw;
    }
    j[json::json_pointer(pointer)] = value;
  }
  return j;
}

struct Run {
  ExperimentConfig config;
  json config_json;
  std::string hash;
  fs::path dir;
};

std::string timestamp() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

// Resolves the config, creates a fresh run directory and echoes the config
// into it. Existing non-empty directories are never reused.
Run start_run(const Common &c, const std::string &command, const json &extra = json::object()) {
  Run r;
  const json raw = resolved_json(c);
  r.config = experiment_from_json(raw);
  r.config_json = to_json(r.config);
  r.hash = config_hash(r.config_json);
  if (!c.out.empty()) {
    r.dir = c.out;
  } else {
    fs::path parent = c.run_dir;
    if (parent.empty()) {
      const char *env = std::getenv("VKIE_RUN_DIR");
      parent = env && *env ? env : "runs";
    }
    r.dir = parent / (c.run_id.empty() ? command + "-" + timestamp() + "-" + r.hash.substr(0, 8) : c.run_id);
  }
  if (fs::exists(r.dir) && !fs::is_empty(r.dir))
    throw Error("run directory " + r.dir.string() + " already exists; runs are append-only");
  fs::create_directories(r.dir);
  json echo = {{"command", command}, {"config", r.config_json}, {"config_hash", r.hash}, {"arguments", extra}};
  std::ofstream(r.dir / "config.json") << echo.dump(2) << "\n";
  std::cerr << "run directory: " << r.dir.string() << "\n";
  return r;
}

void write_text(const fs::path &path, const std::string &text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

CorpusSplits load_corpus(const Common &c, const ExperimentConfig &config) {
  if (!c.corpus.empty()) return read_corpus(c.corpus);
  std::cerr << "generating corpus (" << config.corpus.frames << " frames)\n";
  return generate_corpus(config.corpus);
}

void log_line(const std::string &s) { std::cerr << s << "\n"; }

json metrics_json(const MetricsReport &r) {
  json j = json::object();
  for (const auto &[k, v] : flatten(r)) j[k] = v;
  return j;
}

json aggregate_json(const std::map<std::string, MetricStat> &agg) {
  json j = json::object();
  for (const auto &[k, s] : agg) j[k] = {{"mean", s.mean}, {"std", s.stddev}, {"values", s.values}};
  return j;
}

json result_json(const TrainResult &result) {
  json runs = json::array();
  for (const auto &run : result.runs) {
    json epochs = json::array();
    for (const auto &e : run.epochs)
      epochs.push_back({{"epoch", e.epoch},
                        {"train_loss", e.train_loss},
                        {"dev_score", e.dev_score},
                        {"btc_loss", e.btc_loss},
                        {"er_loss", e.er_loss},
                        {"el_loss", e.el_loss}});
    runs.push_back({{"seed", run.seed},
                    {"diverged", run.diverged},
                    {"divergence", run.divergence},
                    {"selected_epoch", run.best_epoch},
                    {"dev_score", run.best_dev},
                    {"epochs", epochs},
                    {"dev", metrics_json(run.dev_report)},
                    {"checkpoint", run.checkpoint_path.string()}});
  }
  return {{"kind", to_string(result.kind)}, {"runs", runs}, {"aggregate", aggregate_json(result.aggregate)}};
}

std::string aggregate_text(const TrainResult &result) {
  std::ostringstream o;
  o << to_string(result.kind) << ": " << result.runs.size() << " seed(s)\n";
  char buf[160];
  for (const auto &[k, s] : result.aggregate) {
    std::snprintf(buf, sizeof buf, "  %-24s %.4f +- %.4f (n=%zu)\n", k.c_str(), s.mean, s.stddev, s.values.size());
    o << buf;
  }
  return o.str();
}

TrainConfig train_config_for(const ExperimentConfig &config, ModelKind kind, int seeds, int epochs) {
  TrainConfig t = config.train_config(kind);
  if (seeds > 0) {
    t.seeds.resize(seeds);
    std::iota(t.seeds.begin(), t.seeds.end(), 1);
  }
  if (epochs > 0) t.epochs = epochs;
  t.validate();
  return t;
}

TrainInputs inputs_for(const Run &run, const CorpusSplits &corpus) {
  TrainInputs in;
  in.corpus = &corpus;
  in.model = run.config.model;
  in.tokenizer = run.config.tokenizer;
  in.encoding = run.config.encoding;
  in.out_dir = run.dir;
  in.log = log_line;
  return in;
}

void check_ckpts(const std::string &model, const std::vector<std::string> &ckpts) {
  if (model == "uni" && ckpts.size() != 1) throw CLI::ValidationError("--ckpt", "uni takes one checkpoint");
  if (model == "pip" && ckpts.size() != 3)
    throw CLI::ValidationError("--ckpt", "pip takes three checkpoints: BTC, ER, EL");
}

std::vector<LabeledFrame> &split_of(CorpusSplits &c, const std::string &name) {
  if (name == "train") return c.train;
  if (name == "dev") return c.dev;
  return c.test;
}

}  // namespace

int dispatch(int argc, char **argv) {
  CLI::App app{"Key information extraction from video-frame text boxes"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "help for every subcommand");

  Common common;
  int seeds = 0, epochs = 0;
  std::string kind_name = "uni", model = "uni", split = "test", mode = "predicted", which = "modality";
  std::vector<std::string> ckpts, pip_ckpts;
  std::string uni_ckpt, frame_path, boxes_path, frame_id;
  bool gold_btc = false, gold_mentions = false;
  BenchmarkOptions bench;
  ServiceOptions serve_opts;

  auto *gen = app.add_subcommand("gen-corpus", "generate a labeled synthetic corpus");
  add_common(gen, common, false);

  auto *train_cmd = app.add_subcommand("train", "train one model kind over the configured seeds");
  add_common(train_cmd, common);
  train_cmd->add_option("--kind", kind_name, "uni, pip (all three stages), pip_btc, pip_er or pip_el")
      ->check(CLI::IsMember({"uni", "pip", "pip_btc", "pip_er", "pip_el"}));
  train_cmd->add_option("--seeds", seeds, "use seeds 1..N instead of the configured list")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", epochs, "override the epoch count")->check(CLI::PositiveNumber);
  train_cmd->add_option("--er-ckpt", ckpts, "trained ER checkpoints (pip_el only)");

  auto *eval_cmd = app.add_subcommand("eval", "score checkpoints on a corpus split");
  add_common(eval_cmd, common);
  eval_cmd->add_option("--model", model)->check(CLI::IsMember({"uni", "pip"}));
  eval_cmd->add_option("--ckpt", ckpts, "uni: one file; pip: BTC ER EL")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));
  eval_cmd->add_option("--mode", mode, "uni mention source")->check(CLI::IsMember({"predicted", "gold"}));
  eval_cmd->add_flag("--gold-btc", gold_btc, "pip: gate ER with labeled categories");
  eval_cmd->add_flag("--gold-mentions", gold_mentions, "pip: link labeled mentions");

  auto *ablate = app.add_subcommand("ablate", "modality or loss ablation of the unified model");
  add_common(ablate, common);
  ablate->add_option("--which", which)->check(CLI::IsMember({"modality", "loss"}));
  ablate->add_option("--seeds", seeds)->check(CLI::PositiveNumber);
  ablate->add_option("--epochs", epochs)->check(CLI::PositiveNumber);

  auto *study = app.add_subcommand("study-error", "upstream ground-truth substitution study");
  add_common(study, common);
  study->add_option("--pip-ckpt", pip_ckpts, "BTC ER EL checkpoints")->required()->expected(3)->check(CLI::ExistingFile);
  study->add_option("--uni-ckpt", uni_ckpt)->required()->check(CLI::ExistingFile);

  auto *bench_cmd = app.add_subcommand("benchmark", "latency and parameter comparison");
  add_common(bench_cmd, common);
  bench_cmd->add_option("--pip-ckpt", pip_ckpts)->required()->expected(3)->check(CLI::ExistingFile);
  bench_cmd->add_option("--uni-ckpt", uni_ckpt)->required()->check(CLI::ExistingFile);
  bench_cmd->add_option("--repetitions", bench.repetitions)->check(CLI::PositiveNumber);
  bench_cmd->add_option("--warmup", bench.warmup)->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--box-counts", bench.box_counts);
  bench_cmd->add_option("--split", split)->check(CLI::IsMember({"train", "dev", "test"}));

  auto *extract = app.add_subcommand("extract", "extract one frame and print its record");
  extract->add_option("--model", model)->check(CLI::IsMember({"uni", "pip"}));
  extract->add_option("--ckpt", ckpts, "uni: one file; pip: BTC ER EL")->required()->check(CLI::ExistingFile);
  extract->add_option("--frame", frame_path, "PNG image")->required()->check(CLI::ExistingFile);
  extract->add_option("--boxes", boxes_path, "OCR boxes JSON")->required()->check(CLI::ExistingFile);
  extract->add_option("--frame-id", frame_id, "default: image file stem");

  auto *serve = app.add_subcommand("serve", "HTTP extraction service");
  serve->add_option("--model", model)->check(CLI::IsMember({"uni", "pip"}));
  serve->add_option("--ckpt", ckpts, "uni: one file; pip: BTC ER EL")->required()->check(CLI::ExistingFile);
  serve->add_option("--host", serve_opts.host);
  serve->add_option("--port", serve_opts.port)->check(CLI::Range(0, 65535));
  serve->add_option("--threads", serve_opts.threads)->check(CLI::PositiveNumber);
  serve->add_option("--max-image-bytes", serve_opts.max_image_bytes);

  try {
    app.parse(argc, argv);
    if (extract->parsed() || serve->parsed() || eval_cmd->parsed()) check_ckpts(model, ckpts);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    torch::set_num_threads(1);
    if (gen->parsed()) {
      const auto run = start_run(common, "gen-corpus");
      const auto corpus = generate_corpus(run.config.corpus);
      write_corpus(corpus, run.dir, json{{"corpus", to_json(run.config.corpus)}, {"config_hash", run.hash}}.dump());
      std::cout << "wrote " << corpus.train.size() << "/" << corpus.dev.size() << "/" << corpus.test.size()
                << " train/dev/test frames to " << run.dir.string() << "\n";
    } else if (train_cmd->parsed()) {
      const auto run = start_run(common, "train", {{"kind", kind_name}, {"seeds", seeds}, {"epochs", epochs}});
      const auto corpus = load_corpus(common, run.config);
      auto inputs = inputs_for(run, corpus);
      json results = json::array();
      std::string text;
      auto train_kind = [&](ModelKind k) {
        const auto result = train(inputs, train_config_for(run.config, k, seeds, epochs));
        results.push_back(result_json(result));
        text += aggregate_text(result);
        return result;
      };
      if (kind_name == "pip" || kind_name == "pip_el") {
        if (kind_name == "pip") {
          train_kind(ModelKind::kPipBtc);
          const auto er = train_kind(ModelKind::kPipEr);
          for (const auto &r : er.runs)
            if (!r.diverged) inputs.er_checkpoints.push_back(r.checkpoint);
        } else {
          for (const auto &p : ckpts) inputs.er_checkpoints.push_back(load_checkpoint(p));
        }
        if (inputs.er_checkpoints.empty()) throw ConfigError("pip_el needs trained ER checkpoints (--er-ckpt)");
        train_kind(ModelKind::kPipEl);
      } else {
        train_kind(parse_model_kind(kind_name));
      }
      std::ofstream(run.dir / "train_result.json") << results.dump(2) << "\n";
      write_text(run.dir / "summary.txt", text);
      std::cout << text;
    } else if (eval_cmd->parsed()) {
      const auto run = start_run(common, "eval", {{"model", model}, {"ckpt", ckpts}, {"split", split}, {"mode", mode}});
      auto corpus = load_corpus(common, run.config);
      const auto &frames = split_of(corpus, split);
      MetricsReport report;
      if (model == "uni") {
        report = evaluate_uni(load_uni_system(ckpts[0]), frames, mode == "gold" ? SpanMode::kGold : SpanMode::kPredicted);
      } else {
        report = evaluate_pipeline(load_pip_system(ckpts[0], ckpts[1], ckpts[2]), frames, {gold_btc, gold_mentions});
      }
      const auto j = metrics_json(report);
      std::ofstream(run.dir / "metrics.json") << j.dump(2) << "\n";
      std::cout << j.dump(2) << "\n";
    } else if (ablate->parsed()) {
      const auto run = start_run(common, "ablate", {{"which", which}, {"seeds", seeds}, {"epochs", epochs}});
      const auto corpus = load_corpus(common, run.config);
      const auto inputs = inputs_for(run, corpus);
      const auto base = train_config_for(run.config, ModelKind::kUni, seeds, epochs);
      const auto table = which == "modality" ? ablate_modality(inputs, base) : ablate_loss(inputs, base);
      std::ofstream(run.dir / ("ablation_" + which + ".json")) << table.to_json().dump(2) << "\n";
      write_text(run.dir / ("ablation_" + which + ".txt"), table.to_text());
      std::cout << table.to_text();
    } else if (study->parsed()) {
      const auto run = start_run(common, "study-error", {{"pip_ckpt", pip_ckpts}, {"uni_ckpt", uni_ckpt}});
      const auto corpus = load_corpus(common, run.config);
      const auto table = error_accumulation_study(load_pip_system(pip_ckpts[0], pip_ckpts[1], pip_ckpts[2]),
                                                  load_uni_system(uni_ckpt), corpus.test);
      std::ofstream(run.dir / "error_study.json") << table.to_json().dump(2) << "\n";
      write_text(run.dir / "error_study.txt", table.to_text());
      std::cout << table.to_text();
    } else if (bench_cmd->parsed()) {
      const auto run = start_run(common, "benchmark",
                                 {{"pip_ckpt", pip_ckpts}, {"uni_ckpt", uni_ckpt}, {"repetitions", bench.repetitions}});
      auto corpus = load_corpus(common, run.config);
      const auto result = benchmark(load_pip_system(pip_ckpts[0], pip_ckpts[1], pip_ckpts[2]),
                                    load_uni_system(uni_ckpt), split_of(corpus, split), bench);
      std::ofstream(run.dir / "benchmark.json") << result.to_json().dump(2) << "\n";
      write_text(run.dir / "benchmark.txt", result.to_text());
      std::cout << result.to_text();
    } else if (extract->parsed()) {
      const auto extractor =
          model == "uni" ? Extractor::load_uni(ckpts[0]) : Extractor::load_pip(ckpts[0], ckpts[1], ckpts[2]);
      const auto image = read_png(frame_path);
      std::vector<OcrEntry> boxes;
      try {
        boxes = parse_ocr_boxes(read_json_file(boxes_path, "boxes file"));
      } catch (const RequestError &e) {
        throw ConfigError(std::string("boxes file: ") + e.what());
      }
      const auto id = frame_id.empty() ? fs::path(frame_path).stem().string() : frame_id;
      std::cout << to_json(extractor.extract(image, boxes, id)).dump() << "\n";
    } else if (serve->parsed()) {
      auto extractor = std::make_shared<const Extractor>(
          model == "uni" ? Extractor::load_uni(ckpts[0]) : Extractor::load_pip(ckpts[0], ckpts[1], ckpts[2]));
      Service service(extractor, serve_opts);
      const int port = service.bind();
      if (port < 0) throw Error("cannot bind " + serve_opts.host + ":" + std::to_string(serve_opts.port));
      std::cerr << "listening on " << serve_opts.host << ":" << port << " (config " << extractor->config_hash()
                << ")\n";
      if (!service.run_bound()) throw Error("service stopped unexpectedly");
    }
    return kExitOk;
  } catch (const ConfigError &e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace vkie::cli
