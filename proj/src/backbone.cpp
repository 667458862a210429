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

#include "vkie/backbone.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace vkie {

namespace {

int round_to(double v, int multiple, int minimum) {
  const int r = static_cast<int>(std::lround(v / multiple)) * multiple;
  return std::max(minimum, r);
}

void init_embedding(torch::nn::Embedding &e) {
  torch::NoGradGuard guard;
  e->weight.normal_(0.0, 0.02);
}

}  // namespace

ModelConfig ModelConfig::paper() { return ModelConfig{}; }

ModelConfig ModelConfig::scaled(int width_div, int depth_div) const {
  if (width_div < 1 || depth_div < 1) throw ConfigError("scale divisors must be >= 1");
  ModelConfig c = *this;
  c.hidden = round_to(static_cast<double>(hidden) / width_div, 8, 16);
  c.heads = std::max(1, std::min(heads, c.hidden / 16));
  while (c.hidden % c.heads != 0) --c.heads;
  c.ffn = round_to(static_cast<double>(ffn) / width_div, 8, 32);
  c.pos1d_dim = round_to(static_cast<double>(pos1d_dim) / width_div, 2, 8);
  c.pos2d_dim = round_to(static_cast<double>(pos2d_dim) / width_div, 4, 16);
  c.visual_dim = round_to(static_cast<double>(visual_dim) / width_div, 2, 8);
  while (c.visual_dim % c.visual_heads != 0) c.visual_dim += 1;
  c.el_hidden = round_to(static_cast<double>(el_hidden) / width_div, 8, 16);
  for (size_t i = 0; i < 3; ++i) c.cnn_channels[i] = std::max(8, cnn_channels[i] * 4 / width_div);
  c.layers = std::max(1, layers / depth_div);
  c.btc_text_layers = std::max(1, btc_text_layers / depth_div);
  c.er_text_layers = std::max(1, er_text_layers / depth_div);
  return c;
}

ModelConfig ModelConfig::desk() {
  ModelConfig c = paper().scaled(12, 4);
  c.vocab_size = 99;  // specials + printable ASCII
  return c;
}

void ModelConfig::validate() const {
  auto require = [](bool ok, const char *what) {
    if (!ok) throw ConfigError(std::string("invalid model config: ") + what);
  };
  require(hidden > 0 && heads > 0 && hidden % heads == 0, "hidden must be a positive multiple of heads");
  require(layers >= 1 && btc_text_layers >= 1 && er_text_layers >= 1, "layer counts must be >= 1");
  require(ffn > 0 && vocab_size >= 4 && max_length >= 2 && coord_size >= 1, "sizes must be positive");
  require(pos1d_dim > 0 && pos2d_dim > 0 && pos2d_dim % 4 == 0, "pos2d dimension must divide by 4");
  require(visual_dim > 0 && visual_heads > 0 && visual_dim % visual_heads == 0,
          "visual dimension must be a multiple of visual heads");
  require(roi_grid >= 1 && max_grid >= 1 && box_max_tokens >= 3 && el_hidden > 0, "grid/token sizes");
  require(cnn_channels[0] > 0 && cnn_channels[1] > 0 && cnn_channels[2] > 0, "cnn channels");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
}

torch::Tensor image_to_tensor(const std::uint8_t *data, int width, int height, int channels) {
  if (channels != 3) throw ShapeError("expected a 3-channel image, got " + std::to_string(channels));
  if (width <= 0 || height <= 0) throw ShapeError("empty image");
  auto t = torch::from_blob(const_cast<std::uint8_t *>(data), {height, width, 3}, torch::kUInt8);
  return (t.permute({2, 0, 1}).to(torch::kFloat32) / 255.0f - 0.5f) / 0.25f;
}

torch::Tensor image_to_tensor(const Image &image) {
  if (image.rgb.size() != static_cast<size_t>(image.width) * image.height * 3)
    throw ShapeError("image buffer does not hold 3 channels");
  return image_to_tensor(image.rgb.data(), image.width, image.height, 3);
}

int feature_extent(int pixels) {
  int n = pixels;
  for (int i = 0; i < 3; ++i) n = (n + 1) / 2;
  return n;
}

namespace nn {

MultiHeadAttentionImpl::MultiHeadAttentionImpl(int64_t dim, int64_t heads_) : heads(heads_), head_dim(dim / heads_) {
  if (dim % heads_ != 0) throw ConfigError("attention dim must be a multiple of heads");
  q = register_module("q", torch::nn::Linear(dim, dim));
  k = register_module("k", torch::nn::Linear(dim, dim));
  v = register_module("v", torch::nn::Linear(dim, dim));
  o = register_module("o", torch::nn::Linear(dim, dim));
}

torch::Tensor MultiHeadAttentionImpl::forward(const torch::Tensor &query, const torch::Tensor &key_value,
                                              const torch::Tensor &key_mask) {
  const auto B = query.size(0), Lq = query.size(1), Lk = key_value.size(1), D = query.size(2);
  auto qh = q(query).view({B, Lq, heads, head_dim}).transpose(1, 2);
  auto kh = k(key_value).view({B, Lk, heads, head_dim}).transpose(1, 2);
  auto vh = v(key_value).view({B, Lk, heads, head_dim}).transpose(1, 2);
  auto scores = torch::matmul(qh, kh.transpose(-2, -1)) / std::sqrt(static_cast<double>(head_dim));
  if (key_mask.defined())
    scores = scores.masked_fill(key_mask.logical_not().view({B, 1, 1, Lk}), -std::numeric_limits<double>::infinity());
  auto weights = torch::softmax(scores, -1);
  if (capture) last_weights = weights.detach();
  auto out = torch::matmul(weights, vh).transpose(1, 2).reshape({B, Lq, D});
  return o(out);
}

TransformerLayerImpl::TransformerLayerImpl(int64_t dim, int64_t heads, int64_t ffn, double dropout) {
  attention = register_module("attention", MultiHeadAttention(dim, heads));
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  ff1 = register_module("ff1", torch::nn::Linear(dim, ffn));
  ff2 = register_module("ff2", torch::nn::Linear(ffn, dim));
  drop = register_module("drop", torch::nn::Dropout(dropout));
}

torch::Tensor TransformerLayerImpl::forward(const torch::Tensor &x, const torch::Tensor &key_mask) {
  auto h = norm1(x + drop(attention(x, x, key_mask)));
  return norm2(h + drop(ff2(torch::gelu(ff1(h)))));
}

TransformerEncoderImpl::TransformerEncoderImpl(int64_t layers, int64_t dim, int64_t heads, int64_t ffn,
                                               double dropout) {
  for (int64_t i = 0; i < layers; ++i)
    layers_.push_back(register_module("layer" + std::to_string(i), TransformerLayer(dim, heads, ffn, dropout)));
}

torch::Tensor TransformerEncoderImpl::forward(torch::Tensor x, const torch::Tensor &key_mask) {
  for (auto &layer : layers_) x = layer(x, key_mask);
  return x;
}

PairClassifierImpl::PairClassifierImpl(int64_t input_dim, int64_t hidden) {
  fc = register_module("fc", torch::nn::Linear(input_dim, hidden));
  out = register_module("out", torch::nn::Linear(hidden, 2));
}

torch::Tensor PairClassifierImpl::forward(const torch::Tensor &pairs) { return out(torch::gelu(fc(pairs))); }

}  // namespace nn

FrameCnnImpl::FrameCnnImpl(const std::array<int, 3> &channels) : channels_(channels) {
  auto conv = [](int in, int out) {
    return torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 3).stride(2).padding(1).padding_mode(torch::kReplicate));
  };
  conv1 = register_module("conv1", conv(3, channels[0]));
  conv2 = register_module("conv2", conv(channels[0], channels[1]));
  conv3 = register_module("conv3", conv(channels[1], channels[2]));
}

torch::Tensor FrameCnnImpl::forward(const torch::Tensor &images) {
  if (images.dim() != 4 || images.size(1) != 3)
    throw ShapeError("frame CNN expects (B, 3, H, W) input");
  return torch::relu(conv3(torch::relu(conv2(torch::relu(conv1(images))))));
}

torch::Tensor roi_align(const torch::Tensor &features, const torch::Tensor &regions, int grid) {
  if (features.dim() != 3) throw ShapeError("roi_align expects (C, H, W) features");
  if (regions.dim() != 2 || regions.size(1) != 4) throw ShapeError("roi_align expects (B, 4) regions");
  const auto C = features.size(0), H = features.size(1), W = features.size(2), B = regions.size(0);
  const auto r = regions.to(features.scalar_type());
  auto steps = (torch::arange(grid, r.options()) + 0.5) / grid;
  auto x0 = r.select(1, 0).unsqueeze(1), y0 = r.select(1, 1).unsqueeze(1);
  auto x1 = r.select(1, 2).unsqueeze(1), y1 = r.select(1, 3).unsqueeze(1);
  auto xs = (x0 + steps * (x1 - x0) - 0.5).clamp(0, static_cast<double>(W - 1));
  auto ys = (y0 + steps * (y1 - y0) - 0.5).clamp(0, static_cast<double>(H - 1));
  auto xl = xs.floor(), yl = ys.floor();
  auto wx = xs - xl, wy = ys - yl;
  auto xl_i = xl.to(torch::kLong), yl_i = yl.to(torch::kLong);
  auto xh_i = (xl_i + 1).clamp_max(W - 1), yh_i = (yl_i + 1).clamp_max(H - 1);

  auto flat = features.reshape({C, H * W});
  auto gather = [&](const torch::Tensor &yi, const torch::Tensor &xi) {
    return flat.index_select(1, (yi.unsqueeze(2) * W + xi.unsqueeze(1)).reshape({-1}));
  };
  auto weight = [&](const torch::Tensor &a, const torch::Tensor &b) {
    return (a.unsqueeze(2) * b.unsqueeze(1)).reshape({-1});
  };
  auto out = gather(yl_i, xl_i) * weight(1 - wy, 1 - wx) + gather(yl_i, xh_i) * weight(1 - wy, wx) +
             gather(yh_i, xl_i) * weight(wy, 1 - wx) + gather(yh_i, xh_i) * weight(wy, wx);
  return out.reshape({C, B, grid, grid}).permute({1, 0, 2, 3}).reshape({B, C * grid * grid});
}

RoiRegions feature_regions(const std::vector<NormalizedBox> &boxes, int image_width, int image_height,
                           int coord_size) {
  const double fw = feature_extent(image_width), fh = feature_extent(image_height);
  const double sx = static_cast<double>(image_width) / coord_size / ModelConfig::kCnnStride;
  const double sy = static_cast<double>(image_height) / coord_size / ModelConfig::kCnnStride;
  RoiRegions out;
  std::vector<float> data;
  data.reserve(boxes.size() * 4);
  auto fix = [&](double lo, double hi, double extent) {
    lo = std::clamp(lo, 0.0, extent);
    hi = std::clamp(hi, 0.0, extent);
    if (hi - lo < 1.0) {
      const double c = std::clamp(0.5 * (lo + hi), 0.5, extent - 0.5);
      return std::pair<double, double>{c - 0.5, c + 0.5};
    }
    return std::pair<double, double>{lo, hi};
  };
  for (const auto &b : boxes) {
    const double x0 = b.x_min * sx, x1 = (b.x_max + 1) * sx;
    const double y0 = b.y_min * sy, y1 = (b.y_max + 1) * sy;
    const auto [ax0, ax1] = fix(x0, x1, fw);
    const auto [ay0, ay1] = fix(y0, y1, fh);
    if (ax1 - ax0 != x1 - x0 || ay1 - ay0 != y1 - y0) {
      if (x1 - x0 < 1.0 || y1 - y0 < 1.0) ++out.expanded;
    }
    data.insert(data.end(), {static_cast<float>(ax0), static_cast<float>(ay0), static_cast<float>(ax1),
                             static_cast<float>(ay1)});
  }
  out.regions = torch::from_blob(data.data(), {static_cast<int64_t>(boxes.size()), 4}, torch::kFloat32).clone();
  return out;
}

BoxPositionEmbeddingImpl::BoxPositionEmbeddingImpl(int64_t coord_size, int64_t dim) {
  if (dim % 4 != 0) throw ConfigError("box position embedding dim must divide by 4");
  x_min = register_module("x_min", torch::nn::Embedding(coord_size, dim / 4));
  y_min = register_module("y_min", torch::nn::Embedding(coord_size, dim / 4));
  x_max = register_module("x_max", torch::nn::Embedding(coord_size, dim / 4));
  y_max = register_module("y_max", torch::nn::Embedding(coord_size, dim / 4));
  for (auto *e : {&x_min, &y_min, &x_max, &y_max}) init_embedding(*e);
}

torch::Tensor BoxPositionEmbeddingImpl::forward(const torch::Tensor &coords) {
  return torch::cat({x_min(coords.select(-1, 0)), y_min(coords.select(-1, 1)), x_max(coords.select(-1, 2)),
                     y_max(coords.select(-1, 3))},
                    -1);
}

FusionBlockImpl::FusionBlockImpl(int64_t dim, int64_t heads, int64_t ffn, double dropout) {
  attention = register_module("attention", nn::MultiHeadAttention(dim, heads));
  norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
  ff1 = register_module("ff1", torch::nn::Linear(dim, ffn));
  ff2 = register_module("ff2", torch::nn::Linear(ffn, dim));
  drop = register_module("drop", torch::nn::Dropout(dropout));
}

torch::Tensor FusionBlockImpl::forward(const torch::Tensor &box, const torch::Tensor &grid) {
  const auto B = box.size(0);
  auto query = box.unsqueeze(1);
  auto kv = torch::cat({grid.expand({B, grid.size(1), grid.size(2)}), query}, 1);
  auto h = norm1(query + drop(attention(query, kv)));
  return norm2(h + drop(ff2(torch::gelu(ff1(h))))).squeeze(1);
}

VisualBoxEncoderImpl::VisualBoxEncoderImpl(const ModelConfig &config) : roi_grid(config.roi_grid) {
  const int64_t c = config.cnn_channels[2];
  roi_proj = register_module("roi_proj", torch::nn::Linear(c * roi_grid * roi_grid, config.visual_dim));
  grid_proj = register_module("grid_proj", torch::nn::Linear(c, config.visual_dim));
  box_pos = register_module("box_pos", BoxPositionEmbedding(config.coord_size, config.pos2d_dim));
  pos_proj = register_module("pos_proj", torch::nn::Linear(config.pos2d_dim, config.visual_dim));
  grid_row = register_module("grid_row", torch::nn::Embedding(config.max_grid, config.visual_dim));
  grid_col = register_module("grid_col", torch::nn::Embedding(config.max_grid, config.visual_dim));
  init_embedding(grid_row);
  init_embedding(grid_col);
  fusion = register_module("fusion", FusionBlock(config.visual_dim, config.visual_heads, 4 * config.visual_dim,
                                                 config.dropout));
}

torch::Tensor VisualBoxEncoderImpl::grid_tokens(const torch::Tensor &features) {
  const auto C = features.size(1), Hf = features.size(2), Wf = features.size(3);
  if (Hf > grid_row->weight.size(0) || Wf > grid_col->weight.size(0))
    throw ShapeError("feature grid exceeds the position table; raise max_grid");
  auto tokens = grid_proj(features[0].permute({1, 2, 0}));  // (Hf, Wf, D)
  auto rows = grid_row(torch::arange(Hf, torch::kLong)).unsqueeze(1);
  auto cols = grid_col(torch::arange(Wf, torch::kLong)).unsqueeze(0);
  return (tokens + rows + cols).reshape({1, Hf * Wf, -1});
  (void)C;
}

torch::Tensor VisualBoxEncoderImpl::forward(const torch::Tensor &features, const torch::Tensor &regions,
                                            const torch::Tensor &norm_boxes) {
  auto roi = roi_align(features[0], regions, roi_grid);
  auto box = roi_proj(roi) + pos_proj(box_pos(norm_boxes));
  return fusion(box, grid_tokens(features));
}

TextEncoderImpl::TextEncoderImpl(const ModelConfig &config, int layers) : max_tokens_(config.box_max_tokens) {
  tokens = register_module("tokens", torch::nn::Embedding(config.vocab_size, config.hidden));
  positions = register_module("positions", torch::nn::Embedding(config.box_max_tokens, config.hidden));
  init_embedding(tokens);
  init_embedding(positions);
  norm = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({config.hidden})));
  drop = register_module("drop", torch::nn::Dropout(config.dropout));
  encoder = register_module("encoder",
                            nn::TransformerEncoder(layers, config.hidden, config.heads, config.ffn, config.dropout));
}

torch::Tensor TextEncoderImpl::forward(const torch::Tensor &ids, const torch::Tensor &mask) {
  const auto T = ids.size(1);
  if (T > max_tokens_)
    throw ShapeError("text of " + std::to_string(T) + " tokens exceeds the encoder maximum of " +
                     std::to_string(max_tokens_));
  auto x = tokens(ids) + positions(torch::arange(T, torch::kLong)).unsqueeze(0);
  return encoder(drop(norm(x)), mask);
}

std::string_view to_string(Modality m) {
  switch (m) {
    case Modality::kTextVisual: return "text+visual";
    case Modality::kTextOnly: return "text";
    case Modality::kVisualOnly: return "visual";
  }
  return "?";
}

Modality parse_modality(std::string_view s) {
  if (s == "text+visual") return Modality::kTextVisual;
  if (s == "text") return Modality::kTextOnly;
  if (s == "visual") return Modality::kVisualOnly;
  throw ConfigError("unknown modality '" + std::string(s) + "'");
}

UnifiedBatch make_unified_batch(const std::vector<const InputSequence *> &seqs,
                                const std::vector<const Image *> &images, const ModelConfig &config,
                                bool need_images) {
  if (seqs.empty()) throw ShapeError("empty batch");
  if (seqs.size() != images.size()) throw ShapeError("sequence and image counts differ");
  const int B = static_cast<int>(seqs.size());
  const int L = seqs[0]->length;
  UnifiedBatch batch;
  batch.length = L;
  std::vector<int64_t> ids(B * L), roles(B * L), coords(B * L * 4, 0);
  std::vector<uint8_t> mask(B * L), has_box(B * L, 0);
  std::vector<int64_t> in_box(B * L, 0);
  std::vector<int64_t> vb, vp;
  std::vector<torch::Tensor> regions;
  std::vector<torch::Tensor> pixels;

  for (int b = 0; b < B; ++b) {
    const InputSequence &s = *seqs[b];
    if (s.length != L) throw ShapeError("sequences in a batch must share L");
    if (L > config.max_length) throw ShapeError("sequence length exceeds the configured maximum");
    check_sequence(s);
    const Image &img = *images[b];
    if (img.width <= 0 || img.height <= 0) throw ShapeError("frame image is empty");
    if (b > 0 && (img.width != images[0]->width || img.height != images[0]->height))
      throw ShapeError("frames in a batch must share dimensions");

    std::vector<NormalizedBox> norm(s.num_boxes);
    for (int i = 0; i < s.num_boxes; ++i) norm[i] = normalize_bbox(s.box_bboxes[i], img.width, img.height, config.coord_size);
    for (int i = 0; i < L; ++i) {
      const size_t at = static_cast<size_t>(b) * L + i;
      if (s.token_ids[i] < 0 || s.token_ids[i] >= config.vocab_size) throw ShapeError("token id outside vocabulary");
      ids[at] = s.token_ids[i];
      roles[at] = static_cast<int64_t>(s.roles[i]);
      mask[at] = s.attention_mask[i];
      const int owner = s.roles[i] == Role::kText ? s.text_to_box[i] : (s.roles[i] == Role::kVisual ? s.visual_to_box[i] : -1);
      if (owner >= 0) {
        const int bi = s.box_index(owner);
        if (bi < 0) throw ShapeError("alignment map refers to unknown box " + std::to_string(owner));
        has_box[at] = 1;
        if (s.roles[i] == Role::kText) in_box[at] = i - s.text_begin[bi];
        const auto &n = norm[bi];
        coords[at * 4 + 0] = n.x_min;
        coords[at * 4 + 1] = n.y_min;
        coords[at * 4 + 2] = n.x_max;
        coords[at * 4 + 3] = n.y_max;
      }
    }
    for (int i = 0; i < s.num_boxes; ++i) {
      vb.push_back(b);
      vp.push_back(s.visual_position(i));
    }
    auto r = feature_regions(norm, img.width, img.height, config.coord_size);
    batch.expanded_regions += r.expanded;
    regions.push_back(r.regions);
    if (need_images) pixels.push_back(image_to_tensor(img));
  }
  auto opts = torch::TensorOptions().dtype(torch::kLong);
  batch.ids = torch::tensor(ids, opts).view({B, L});
  batch.roles = torch::tensor(roles, opts).view({B, L});
  batch.mask = torch::tensor(std::vector<int64_t>(mask.begin(), mask.end()), opts).view({B, L}).to(torch::kBool);
  batch.coords = torch::tensor(coords, opts).view({B, L, 4});
  batch.has_box = torch::tensor(std::vector<int64_t>(has_box.begin(), has_box.end()), opts).view({B, L}).to(torch::kBool);
  batch.in_box = torch::tensor(in_box, opts).view({B, L});
  batch.visual_batch = torch::tensor(vb, opts);
  batch.visual_position = torch::tensor(vp, opts);
  batch.regions = torch::cat(regions, 0);
  if (need_images) batch.images = torch::stack(pixels, 0);
  return batch;
}

UnifiedEncoderImpl::UnifiedEncoderImpl(const ModelConfig &config, Modality modality)
    : config_(config), modality_(modality) {
  config.validate();
  const int64_t H = config.hidden;
  if (modality != Modality::kTextOnly) {
    cnn = register_module("cnn", FrameCnn(config.cnn_channels));
    roi_proj = register_module(
        "roi_proj", torch::nn::Linear(static_cast<int64_t>(config.cnn_channels[2]) * config.roi_grid * config.roi_grid, H));
  } else {
    visual_constant = register_parameter("visual_constant", torch::randn({H}) * 0.02);
  }
  tokens = register_module("tokens", torch::nn::Embedding(config.vocab_size, H));
  roles = register_module("roles", torch::nn::Embedding(kNumRoles, H));
  pos1d = register_module("pos1d", torch::nn::Embedding(config.max_length, config.pos1d_dim));
  pos_in_box = register_module("pos_in_box", torch::nn::Embedding(config.max_length, config.pos1d_dim));
  pos1d_proj = register_module("pos1d_proj", torch::nn::Linear(config.pos1d_dim, H));
  pos2d = register_module("pos2d", BoxPositionEmbedding(config.coord_size, config.pos2d_dim));
  pos2d_proj = register_module("pos2d_proj", torch::nn::Linear(config.pos2d_dim, H));
  for (auto *e : {&tokens, &roles, &pos1d, &pos_in_box}) init_embedding(*e);
  norm = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({H})));
  drop = register_module("drop", torch::nn::Dropout(config.dropout));
  encoder = register_module("encoder", nn::TransformerEncoder(config.layers, H, config.heads, config.ffn, config.dropout));
}

torch::Tensor UnifiedEncoderImpl::forward(const UnifiedBatch &batch) {
  ++calls_;
  const auto B = batch.ids.size(0), L = batch.ids.size(1);
  const int64_t H = config_.hidden;
  auto emb = tokens(batch.ids);
  const auto V = batch.visual_batch.size(0);
  if (V > 0) {
    torch::Tensor visual;
    if (modality_ == Modality::kTextOnly) {
      visual = visual_constant.unsqueeze(0).expand({V, H});
    } else {
      if (!batch.images.defined()) throw ShapeError("batch lacks images for a visual modality");
      auto features = cnn(batch.images.to(emb.scalar_type()));
      std::vector<torch::Tensor> rois;
      auto vb = batch.visual_batch.accessor<int64_t, 1>();
      int64_t start = 0;
      while (start < V) {
        int64_t end = start;
        while (end < V && vb[end] == vb[start]) ++end;
        rois.push_back(roi_align(features[vb[start]], batch.regions.slice(0, start, end), config_.roi_grid));
        start = end;
      }
      visual = roi_proj(torch::cat(rois, 0));
    }
    emb = emb.index_put({batch.visual_batch, batch.visual_position}, visual.to(emb.scalar_type()));
  }
  auto positions = pos1d_proj(pos1d(torch::arange(L, torch::kLong)).unsqueeze(0) + pos_in_box(batch.in_box));
  auto layout = pos2d_proj(pos2d(batch.coords)) * batch.has_box.unsqueeze(-1).to(emb.scalar_type());
  emb = emb + roles(batch.roles) + positions + layout;
  (void)B;
  return encoder(drop(norm(emb)), batch.mask);
}

int64_t parameter_count(const torch::nn::Module &module) {
  int64_t n = 0;
  for (const auto &p : module.parameters())
    if (p.requires_grad()) n += p.numel();
  return n;
}

}  // namespace vkie
