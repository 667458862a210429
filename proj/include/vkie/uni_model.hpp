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

// The unified system: every box of a frame goes through one shared encoder
// pass, and three heads read the box classes (VISUAL positions), the BIO tags
// (TEXT positions) and the pair decisions (pooled spans) off the same states.

#ifndef VKIE_UNI_MODEL_HPP_
#define VKIE_UNI_MODEL_HPP_

#include <vector>

#include <torch/torch.h>

#include "vkie/backbone.hpp"
#include "vkie/encoding.hpp"
#include "vkie/pip_models.hpp"
#include "vkie/types.hpp"

namespace vkie {

struct LossWeights {
  double alpha = 0.3;  // BTC
  double beta = 0.3;   // ER
  double gamma() const { return 1.0 - alpha - beta; }  // EL
  // Throws ConfigError unless alpha, beta >= 0 and alpha + beta <= 1.
  void validate() const;
  friend bool operator==(const LossWeights &, const LossWeights &) = default;
};

enum class SpanMode { kGold, kPredicted };

// A span over TEXT positions [seq_begin, seq_end) of one sequence.
struct SeqSpan {
  int box_id = 0;
  int seq_begin = 0;
  int seq_end = 0;
  EntityCategory category = EntityCategory::kName;
  EntityRef ref;         // labeled span it came from (gold mode)
  bool clipped = false;  // cut by truncation
};

// One frame prepared for the unified model, with labels when available.
struct UniExample {
  const Image *image = nullptr;
  std::vector<BoxRecord> ordered;  // reading order, texts cleared for visual-only input
  InputSequence seq;
  std::vector<int> btc_labels;     // per box; -1 when unlabeled
  std::vector<int> er_labels;      // per TEXT position, BioTag ids
  std::vector<SeqSpan> gold_spans;  // present or right-clipped labeled spans
  std::vector<int> gold_pair_labels;  // per Name x Identity pair of gold_spans, 1 = Matched
  bool labeled = false;
};

UniExample make_uni_example(const Image &image, const std::vector<BoxRecord> &boxes, const Tokenizer &tokenizer,
                            const EncodingConfig &encoding, Modality modality);
// Adds labels from a labeled frame; the frame must outlive the example.
UniExample make_uni_example(const LabeledFrame &frame, const Tokenizer &tokenizer, const EncodingConfig &encoding,
                            Modality modality);

class UniModelImpl : public torch::nn::Module {
 public:
  UniModelImpl(const ModelConfig &config, Modality modality = Modality::kTextVisual);

  UnifiedEncoder encoder{nullptr};
  torch::nn::Linear btc_head{nullptr}, er_head{nullptr};
  nn::PairClassifier el_head{nullptr};
  const ModelConfig &config() const { return config_; }

 private:
  ModelConfig config_;
};
TORCH_MODULE(UniModel);

// Logits of a batch of frames; rows are frame-major.
struct UniOutputs {
  torch::Tensor hidden;      // (B, L, H)
  torch::Tensor btc_logits;  // (sum M, 4) in box order
  torch::Tensor er_logits;   // (sum N', 5) in TEXT position order
  torch::Tensor el_logits;   // (sum pairs, 2)
  std::vector<int64_t> btc_offset, er_offset, el_offset;  // B + 1 prefix sums
  std::vector<std::vector<SeqSpan>> spans;                // per frame, spans used for EL
  std::vector<std::vector<std::pair<int, int>>> pairs;    // per frame, (name, identity) span indices
  int bio_repairs = 0;
};

// One encoder pass. Gold mode pools labeled spans; predicted mode decodes the
// ER logits per box first.
UniOutputs uni_forward(UniModel &model, const std::vector<const UniExample *> &examples, SpanMode mode);

struct LossBreakdown {
  torch::Tensor total;
  double btc = 0.0, er = 0.0, el = 0.0;
  bool has_btc = false, has_er = false, has_el = false;
};

// alpha * btc + beta * er + (1 - alpha - beta) * el. Undefined components count
// as 0 and the weights are not renormalized.
LossBreakdown combine_losses(const torch::Tensor &btc, const torch::Tensor &er, const torch::Tensor &el,
                             const LossWeights &weights);
// Mean cross-entropy per task over its supervised rows, then combine_losses.
// Requires outputs from gold mode for the EL term.
LossBreakdown joint_loss(const UniOutputs &outputs, const std::vector<const UniExample *> &examples,
                         const LossWeights &weights);

struct UniSystem {
  ModelConfig config;
  Tokenizer tokenizer = Tokenizer::ascii();
  EncodingConfig encoding;
  LossWeights weights;
  Modality modality = Modality::kTextVisual;
  UniModel model{nullptr};

  static UniSystem create(const ModelConfig &config, const Tokenizer &tokenizer, Modality modality = Modality::kTextVisual);
};

struct UniExtractResult {
  FrameExtraction extraction;
  int encoder_calls = 0;
};

// One forward pass per frame. ER is not gated by BTC. Gold mode reads mentions
// from the boxes' labeled spans (the upstream-oracle variant of EL).
UniExtractResult uni_extract(const UniSystem &system, const Image &image, const std::vector<BoxRecord> &boxes,
                             SpanMode mode = SpanMode::kPredicted);

}  // namespace vkie

#endif  // VKIE_UNI_MODEL_HPP_
