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

// Visual, textual, positional and fused representations.
//
// Two paths share these blocks:
//  * the per-box path: shallow CNN -> ROIAlign conditioned on the box position
//    -> one cross-attention block in which the box token attends over the frame
//    grid, concatenated with a CLS state from a small text transformer;
//  * the unified path: one transformer over [CLS] text [SEP] visual [PAD]...,
//    where VISUAL positions carry projected ROI features and every box-bearing
//    position carries a projected 2-D box embedding.

#ifndef VKIE_BACKBONE_HPP_
#define VKIE_BACKBONE_HPP_

#include <array>
#include <atomic>
#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "vkie/encoding.hpp"
#include "vkie/types.hpp"

namespace vkie {

struct ModelConfig {
  // Shared transformer geometry.
  int hidden = 768;
  int layers = 12;
  int heads = 12;
  int ffn = 3072;
  int vocab_size = 21128;
  int max_length = 128;
  int coord_size = 128;
  int pos1d_dim = 512;
  int pos2d_dim = 1024;
  double dropout = 0.1;

  // Visual path. Three stride-2 stages give an output stride of 8.
  std::array<int, 3> cnn_channels{32, 64, 128};
  int roi_grid = 3;
  int visual_dim = 266;
  int visual_heads = 2;
  int max_grid = 256;  // rows/cols of the learned frame-grid position table

  // Per-box models.
  int btc_text_layers = 4;
  int er_text_layers = 12;
  int box_max_tokens = 64;  // [CLS] + text + [SEP]
  int el_hidden = 768;

  static constexpr int kCnnStride = 8;

  static ModelConfig paper();
  // paper() with widths divided by width_div and depths by depth_div.
  ModelConfig scaled(int width_div, int depth_div) const;
  // Default desk-scale configuration (width / 12, depth / 4).
  static ModelConfig desk();

  void validate() const;
  friend bool operator==(const ModelConfig &, const ModelConfig &) = default;
};

// Float tensor (3, H, W) normalized from an RGB image. Throws ShapeError for
// non-3-channel input.
torch::Tensor image_to_tensor(const Image &image);
torch::Tensor image_to_tensor(const std::uint8_t *data, int width, int height, int channels);

// Feature-grid size for an image dimension under the CNN stride.
int feature_extent(int pixels);

namespace nn {

class MultiHeadAttentionImpl : public torch::nn::Module {
 public:
  MultiHeadAttentionImpl(int64_t dim, int64_t heads);
  // query (B, Lq, D), key_value (B, Lk, D), key_mask (B, Lk) bool or undefined.
  torch::Tensor forward(const torch::Tensor &query, const torch::Tensor &key_value,
                        const torch::Tensor &key_mask = {});

  torch::nn::Linear q{nullptr}, k{nullptr}, v{nullptr}, o{nullptr};
  int64_t heads = 1;
  int64_t head_dim = 1;
  // When set, forward() stores the attention weights (B, H, Lq, Lk). Not
  // thread-safe; for inspection only.
  bool capture = false;
  torch::Tensor last_weights;
};
TORCH_MODULE(MultiHeadAttention);

// Post-LN transformer layer with GELU feed-forward.
class TransformerLayerImpl : public torch::nn::Module {
 public:
  TransformerLayerImpl(int64_t dim, int64_t heads, int64_t ffn, double dropout);
  torch::Tensor forward(const torch::Tensor &x, const torch::Tensor &key_mask = {});

  MultiHeadAttention attention{nullptr};
  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Linear ff1{nullptr}, ff2{nullptr};
  torch::nn::Dropout drop{nullptr};
};
TORCH_MODULE(TransformerLayer);

class TransformerEncoderImpl : public torch::nn::Module {
 public:
  TransformerEncoderImpl(int64_t layers, int64_t dim, int64_t heads, int64_t ffn, double dropout);
  torch::Tensor forward(torch::Tensor x, const torch::Tensor &key_mask = {});
  TransformerLayer layer(size_t i) const { return layers_[i]; }
  size_t depth() const { return layers_.size(); }

 private:
  std::vector<TransformerLayer> layers_;
};
TORCH_MODULE(TransformerEncoder);

// Two-layer pair classifier: Linear -> GELU -> Linear(2). Output index 0 is
// NotMatched, 1 is Matched.
class PairClassifierImpl : public torch::nn::Module {
 public:
  PairClassifierImpl(int64_t input_dim, int64_t hidden);
  torch::Tensor forward(const torch::Tensor &pairs);
  torch::nn::Linear fc{nullptr}, out{nullptr};
};
TORCH_MODULE(PairClassifier);

}  // namespace nn

// Three 3x3 stride-2 convolutions with replicate padding and ReLU.
class FrameCnnImpl : public torch::nn::Module {
 public:
  explicit FrameCnnImpl(const std::array<int, 3> &channels);
  // (B, 3, H, W) -> (B, C, ceil(H/8), ceil(W/8)).
  torch::Tensor forward(const torch::Tensor &images);
  int out_channels() const { return channels_[2]; }
  static constexpr int stride() { return ModelConfig::kCnnStride; }

 private:
  std::array<int, 3> channels_;
  torch::nn::Conv2d conv1{nullptr}, conv2{nullptr}, conv3{nullptr};
};
TORCH_MODULE(FrameCnn);

// Bilinear ROI sampling. features (C, H, W); regions (B, 4) float
// [x0, y0, x1, y1] in feature-cell units where cell i spans [i, i + 1).
// Each of the grid x grid bins is sampled once at its centre. Returns
// (B, C * grid * grid).
torch::Tensor roi_align(const torch::Tensor &features, const torch::Tensor &regions, int grid);

struct RoiRegions {
  torch::Tensor regions;  // (B, 4) float
  int expanded = 0;       // boxes widened to the 1-cell minimum
};

// Maps normalized boxes onto the feature grid of an image of the given size.
RoiRegions feature_regions(const std::vector<NormalizedBox> &boxes, int image_width, int image_height,
                           int coord_size);

// Concatenated (x_min, y_min, x_max, y_max) embeddings; dim must divide by 4.
class BoxPositionEmbeddingImpl : public torch::nn::Module {
 public:
  BoxPositionEmbeddingImpl(int64_t coord_size, int64_t dim);
  // coords (..., 4) int64 -> (..., dim)
  torch::Tensor forward(const torch::Tensor &coords);
  torch::nn::Embedding x_min{nullptr}, y_min{nullptr}, x_max{nullptr}, y_max{nullptr};
};
TORCH_MODULE(BoxPositionEmbedding);

// Box-to-frame cross-attention block: the box token queries the frame grid
// tokens plus itself; post-LN with a feed-forward sublayer.
class FusionBlockImpl : public torch::nn::Module {
 public:
  FusionBlockImpl(int64_t dim, int64_t heads, int64_t ffn, double dropout);
  // box (B, D); grid (1 or B, P, D) -> (B, D)
  torch::Tensor forward(const torch::Tensor &box, const torch::Tensor &grid);

  nn::MultiHeadAttention attention{nullptr};
  torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
  torch::nn::Linear ff1{nullptr}, ff2{nullptr};
  torch::nn::Dropout drop{nullptr};
};
TORCH_MODULE(FusionBlock);

// h_vb for a set of boxes of one frame.
class VisualBoxEncoderImpl : public torch::nn::Module {
 public:
  explicit VisualBoxEncoderImpl(const ModelConfig &config);
  // features (1, C, Hf, Wf) from the CNN; regions (B, 4); norm_boxes (B, 4)
  // int64 -> (B, visual_dim)
  torch::Tensor forward(const torch::Tensor &features, const torch::Tensor &regions, const torch::Tensor &norm_boxes);
  // Frame grid tokens (1, Hf * Wf, visual_dim) with position embeddings.
  torch::Tensor grid_tokens(const torch::Tensor &features);

  int roi_grid = 3;
  torch::nn::Linear roi_proj{nullptr}, grid_proj{nullptr}, pos_proj{nullptr};
  BoxPositionEmbedding box_pos{nullptr};
  torch::nn::Embedding grid_row{nullptr}, grid_col{nullptr};
  FusionBlock fusion{nullptr};
};
TORCH_MODULE(VisualBoxEncoder);

// Token + learned position embeddings followed by a transformer stack.
class TextEncoderImpl : public torch::nn::Module {
 public:
  TextEncoderImpl(const ModelConfig &config, int layers);
  // ids (B, T) int64, mask (B, T) bool -> (B, T, hidden). Throws ShapeError
  // when T exceeds the configured maximum.
  torch::Tensor forward(const torch::Tensor &ids, const torch::Tensor &mask);
  int64_t max_tokens() const { return max_tokens_; }

  torch::nn::Embedding tokens{nullptr}, positions{nullptr};
  torch::nn::LayerNorm norm{nullptr};
  torch::nn::Dropout drop{nullptr};
  nn::TransformerEncoder encoder{nullptr};

 private:
  int64_t max_tokens_ = 64;
};
TORCH_MODULE(TextEncoder);

// Which modalities feed the unified encoder.
enum class Modality { kTextVisual, kTextOnly, kVisualOnly };
std::string_view to_string(Modality m);
Modality parse_modality(std::string_view s);

// Tensors for a batch of assembled sequences.
struct UnifiedBatch {
  torch::Tensor ids;        // (B, L) int64
  torch::Tensor roles;      // (B, L) int64
  torch::Tensor mask;       // (B, L) bool
  torch::Tensor coords;     // (B, L, 4) int64 normalized box per position
  torch::Tensor has_box;    // (B, L) bool
  torch::Tensor in_box;     // (B, L) int64 token index within its box (0 elsewhere)
  torch::Tensor images;     // (B, 3, H, W) float, undefined for text-only
  torch::Tensor visual_batch;     // (V) int64 frame index of each VISUAL position
  torch::Tensor visual_position;  // (V) int64 sequence index
  torch::Tensor regions;          // (V, 4) float feature-grid regions
  int expanded_regions = 0;
  int length = 0;
};

// Builds a batch; every image must have the same size. Throws ShapeError when
// an alignment map refers to an unknown box or lengths disagree.
UnifiedBatch make_unified_batch(const std::vector<const InputSequence *> &seqs,
                                const std::vector<const Image *> &images, const ModelConfig &config,
                                bool need_images = true);

class UnifiedEncoderImpl : public torch::nn::Module {
 public:
  UnifiedEncoderImpl(const ModelConfig &config, Modality modality = Modality::kTextVisual);
  // -> (B, L, hidden)
  torch::Tensor forward(const UnifiedBatch &batch);
  Modality modality() const { return modality_; }
  int64_t calls() const { return calls_.load(); }
  void reset_calls() { calls_ = 0; }

  FrameCnn cnn{nullptr};
  torch::nn::Linear roi_proj{nullptr}, pos1d_proj{nullptr}, pos2d_proj{nullptr};
  torch::nn::Embedding tokens{nullptr}, roles{nullptr}, pos1d{nullptr};
  // Added to the sequence position before projection.
  torch::nn::Embedding pos_in_box{nullptr};
  BoxPositionEmbedding pos2d{nullptr};
  torch::Tensor visual_constant;  // learned VISUAL embedding for text-only
  torch::nn::LayerNorm norm{nullptr};
  torch::nn::Dropout drop{nullptr};
  nn::TransformerEncoder encoder{nullptr};

 private:
  ModelConfig config_;
  Modality modality_;
  std::atomic<int64_t> calls_{0};
};
TORCH_MODULE(UnifiedEncoder);

// Total trainable scalar parameters.
int64_t parameter_count(const torch::nn::Module &module);

}  // namespace vkie

#endif  // VKIE_BACKBONE_HPP_
