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

// The sequential system: box classifier -> per-box entity tagger -> pair
// classifier, one box at a time. Each stage only sees what the previous one
// let through.

#ifndef VKIE_PIP_MODELS_HPP_
#define VKIE_PIP_MODELS_HPP_

#include <array>
#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "vkie/backbone.hpp"
#include "vkie/encoding.hpp"
#include "vkie/types.hpp"

namespace vkie {

enum class BioTag : int { kO = 0, kBName = 1, kIName = 2, kBIdentity = 3, kIIdentity = 4 };
inline constexpr int kNumBioTags = 5;

std::string_view to_string(BioTag t);
BioTag parse_bio_tag(std::string_view s);
BioTag begin_tag(EntityCategory c);
BioTag inside_tag(EntityCategory c);

struct BioDecode {
  std::vector<EntitySpan> spans;  // token index ranges
  int repairs = 0;                // I-X tags reinterpreted as B-X
};

// Spans open at B-X and run through consecutive I-X. An I-X at the start, after
// O or after a different category opens a new span and counts as a repair.
BioDecode decode_bio2(const std::vector<BioTag> &tags);
// Inverse of decode_bio2 for non-overlapping token spans.
std::vector<BioTag> encode_bio2(const std::vector<EntitySpan> &spans, int length);

// Token tags for character spans: the first piece inside a span gets B-X, the
// rest I-X, pieces outside every span O.
std::vector<BioTag> tags_from_char_spans(const std::vector<Tokenizer::Piece> &pieces,
                                         const std::vector<EntitySpan> &spans);
// Token span [begin, end) -> character span.
EntitySpan token_span_to_chars(const EntitySpan &token_span, const std::vector<Tokenizer::Piece> &pieces);
// Pieces lying inside a character span, as a token range; empty when none.
std::pair<int, int> char_span_to_tokens(const EntitySpan &span, const std::vector<Tokenizer::Piece> &pieces);

struct EntityMention {
  int box_id = 0;
  int start = 0;  // code points
  int end = 0;
  EntityCategory category = EntityCategory::kName;
  std::string text;
  bool clipped = false;  // right-clipped by sequence truncation
  torch::Tensor hidden;  // mean of the span's token states
};

// D(p, q) = [h_p ; h_q] for every Name p and Identity q, in mention order.
struct PairMatrix {
  std::vector<int> names;       // indices into the mention list
  std::vector<int> identities;
  torch::Tensor entries;        // (#names, #identities, 2H); undefined when empty

  bool empty() const { return names.empty() || identities.empty(); }
  int64_t size() const { return static_cast<int64_t>(names.size() * identities.size()); }
  // Row-major flattening (P * Q, 2H).
  torch::Tensor flat() const;
};

PairMatrix build_pair_matrix(const std::vector<EntityMention> &mentions);

struct BtcDecision {
  BoxCategory category = BoxCategory::kTitle;
  std::array<float, kNumBoxCategories> probabilities{};
};

struct ElDecision {
  bool matched = false;
  float probability = 0.5f;  // P(Matched)
};

// Softmax + argmax, ties to the lowest enum value.
BtcDecision btc_decide(const torch::Tensor &logits);
std::vector<BioTag> er_decide(const torch::Tensor &logits);  // (T, 5)
ElDecision el_decide(const torch::Tensor &logits);            // (2), index 1 = Matched

// Per-box token ids [CLS] t_1..t_n [SEP], right-padded across the batch.
struct BoxTextBatch {
  torch::Tensor ids;   // (B, T) int64
  torch::Tensor mask;  // (B, T) bool
  std::vector<std::vector<Tokenizer::Piece>> pieces;  // kept pieces per box
};

BoxTextBatch make_box_text_batch(const std::vector<std::string> &texts, const Tokenizer &tokenizer, int max_tokens);

// Inputs of the box classifier for a set of boxes of one frame.
struct BtcInputs {
  torch::Tensor image;       // (1, 3, H, W)
  torch::Tensor regions;     // (B, 4)
  torch::Tensor norm_boxes;  // (B, 4) int64
  BoxTextBatch text;
};

BtcInputs make_btc_inputs(const Image &image, const std::vector<BoxRecord> &boxes, const Tokenizer &tokenizer,
                          const ModelConfig &config);

class BtcModelImpl : public torch::nn::Module {
 public:
  explicit BtcModelImpl(const ModelConfig &config);
  // h_b = [h_vb ; h_tb], (B, visual_dim + hidden).
  torch::Tensor box_embedding(const BtcInputs &in);
  // Throws ShapeError when h_b has non-finite entries.
  torch::Tensor classify(const torch::Tensor &h_b);
  torch::Tensor forward(const BtcInputs &in) { return classify(box_embedding(in)); }

  FrameCnn cnn{nullptr};
  VisualBoxEncoder visual{nullptr};
  TextEncoder text{nullptr};
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(BtcModel);

class ErModelImpl : public torch::nn::Module {
 public:
  explicit ErModelImpl(const ModelConfig &config);
  torch::Tensor encode(const BoxTextBatch &in);         // (B, T, hidden)
  torch::Tensor tag_logits(const torch::Tensor &hidden);  // (B, T, 5)

  TextEncoder text{nullptr};
  torch::nn::Linear head{nullptr};
};
TORCH_MODULE(ErModel);

// Mentions are pooled from this model's own text encoder, not from ER's.
class ElModelImpl : public torch::nn::Module {
 public:
  explicit ElModelImpl(const ModelConfig &config);
  torch::Tensor encode(const BoxTextBatch &in) { return text(in.ids, in.mask); }  // (B, T, hidden)
  torch::Tensor forward(const torch::Tensor &pairs) { return head(pairs); }      // (P, 2H) -> (P, 2)

  TextEncoder text{nullptr};
  nn::PairClassifier head{nullptr};
};
TORCH_MODULE(ElModel);

// One extracted box with its predicted category.
struct BoxPrediction {
  int box_id = 0;
  BoxCategory category = BoxCategory::kMisc;
  std::array<float, kNumBoxCategories> probabilities{};
  std::string text;
  BBox bbox;
};

// An evaluated Name x Identity pair; indices refer to FrameExtraction::mentions.
struct PairPrediction {
  int name_index = 0;
  int identity_index = 0;
  bool matched = false;
  float probability = 0.0f;  // P(Matched)
};

struct FrameExtraction {
  std::vector<BoxPrediction> boxes;  // reading order, every box
  std::vector<EntityMention> mentions;
  std::vector<PairPrediction> pairs;
  int bio_repairs = 0;

  // Segment-level fields; Misc boxes are left out.
  std::vector<const BoxPrediction *> segments() const;
  std::vector<std::string> texts_of(BoxCategory c) const;
  std::optional<BoxCategory> category_of(int box_id) const;
};

struct PipelineCounts {
  int btc_calls = 0;
  int er_calls = 0;
  int el_calls = 0;
};

struct PipelineOptions {
  // Use the boxes' labeled categories instead of BTC predictions when gating ER.
  bool gold_btc = false;
  // Use labeled spans instead of ER predictions when forming EL pairs.
  bool gold_mentions = false;
  // Replaces the BTC model. Its category is both the reported prediction and the gate.
  std::function<BoxCategory(const BoxRecord &)> btc_oracle;
};

// The three trained models plus their tokenizer.
struct PipSystem {
  ModelConfig config;
  Tokenizer tokenizer = Tokenizer::ascii();
  BtcModel btc{nullptr};
  ErModel er{nullptr};
  ElModel el{nullptr};

  static PipSystem create(const ModelConfig &config, const Tokenizer &tokenizer);
  void eval();
  int64_t parameter_count() const;
};

struct PipelineResult {
  FrameExtraction extraction;
  PipelineCounts counts;
};

// BTC over every box, ER over boxes classified PersonInfo, EL over the mentions
// ER produced. Each model call sees a single box or pair.
PipelineResult run_pipeline(const PipSystem &system, const Image &image, const std::vector<BoxRecord> &boxes,
                            const PipelineOptions &options = {});

// Mean of hidden rows [begin, end) of a (T, H) tensor.
torch::Tensor mean_pool(const torch::Tensor &hidden, int begin, int end);

}  // namespace vkie

#endif  // VKIE_PIP_MODELS_HPP_
