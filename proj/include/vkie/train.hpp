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

#ifndef VKIE_TRAIN_HPP_
#define VKIE_TRAIN_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vkie/backbone.hpp"
#include "vkie/checkpoint.hpp"
#include "vkie/metrics.hpp"
#include "vkie/pip_models.hpp"
#include "vkie/uni_model.hpp"

namespace vkie {

enum class ModelKind { kPipBtc, kPipEr, kPipEl, kUni };
std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

struct TrainConfig {
  ModelKind kind = ModelKind::kUni;
  std::string optimizer = "adamw";  // "adam" or "adamw"
  double learning_rate = 5e-5;
  double weight_decay = 0.01;       // AdamW only
  int batch_size = 32;              // frames (uni, EL) or boxes (BTC, ER)
  int epochs = 10;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  double warmup_fraction = 0.1;     // linear warm-up, then linear decay to 0
  double grad_clip = 1.0;           // global norm; <= 0 disables
  int threads = 1;
  int max_train_frames = 0;         // 0 keeps the whole split
  LossWeights weights;              // uni only
  Modality modality = Modality::kTextVisual;

  // Per-kind defaults: uni {AdamW, 5e-5, 32}, pip-BTC {Adam, 48},
  // pip-ER/EL {AdamW, 16}; 10 epochs and 10 seeds throughout.
  static TrainConfig defaults(ModelKind kind);
  void validate() const;
};

struct EpochLog {
  int epoch = 0;
  double train_loss = 0.0;  // mean over steps
  double dev_score = 0.0;   // selection metric
  double btc_loss = 0.0, er_loss = 0.0, el_loss = 0.0;  // uni components, mean over steps
};

struct SeedRun {
  std::uint64_t seed = 0;
  bool diverged = false;
  std::string divergence;
  int best_epoch = 0;  // 1-based; 0 when no epoch finished
  double best_dev = 0.0;
  std::vector<EpochLog> epochs;
  std::optional<LossBreakdown> first_step;  // components of the very first step (uni)
  MetricsReport dev_report;                 // at the selected epoch
  Checkpoint checkpoint;                    // weights at the selected epoch
  std::filesystem::path checkpoint_path;    // set when saved
};

struct TrainResult {
  ModelKind kind = ModelKind::kUni;
  std::vector<SeedRun> runs;
  std::map<std::string, MetricStat> aggregate;  // over runs that did not diverge
};

struct TrainInputs {
  const CorpusSplits *corpus = nullptr;
  ModelConfig model;
  Tokenizer tokenizer = Tokenizer::ascii();
  EncodingConfig encoding;
  // pip_el reuses a trained ER encoder; seed i takes er_checkpoints[i % n].
  std::vector<Checkpoint> er_checkpoints;
  // When set, each selected checkpoint is written here as <kind>-seed<k>.ckpt.
  std::filesystem::path out_dir;
  // Progress lines; may be empty.
  std::function<void(const std::string &)> log;
};

// An unfitted tokenizer in the inputs gets its vocabulary from the training
// split, and model.vocab_size is set to match.
TrainResult train(const TrainInputs &inputs, const TrainConfig &config);

Tokenizer fit_tokenizer(Tokenizer::Mode mode, const CorpusSplits &corpus);

// Selection metric per kind: dev Acc (BTC), macro F1 (ER), Acc (EL), mean of
// the three (uni).
double selection_score(ModelKind kind, const MetricsReport &report);

// Evaluation helpers; all run in inference mode.
MetricsReport evaluate_uni(const UniSystem &system, const std::vector<LabeledFrame> &frames,
                           SpanMode mode = SpanMode::kPredicted);
MetricsReport evaluate_pipeline(const PipSystem &system, const std::vector<LabeledFrame> &frames,
                                const PipelineOptions &options = {});
// Standalone stage scores: BTC over every box, ER over gold PersonInfo boxes,
// EL over gold mentions.
MetricsReport evaluate_pip_btc(const PipSystem &system, const std::vector<LabeledFrame> &frames);
MetricsReport evaluate_pip_er(const PipSystem &system, const std::vector<LabeledFrame> &frames);
MetricsReport evaluate_pip_el(const PipSystem &system, const std::vector<LabeledFrame> &frames);

}  // namespace vkie

#endif  // VKIE_TRAIN_HPP_
