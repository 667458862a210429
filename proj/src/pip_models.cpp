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

#include "vkie/pip_models.hpp"

#include <algorithm>

namespace vkie {

std::string_view to_string(BioTag t) {
  switch (t) {
    case BioTag::kO: return "O";
    case BioTag::kBName: return "B-Name";
    case BioTag::kIName: return "I-Name";
    case BioTag::kBIdentity: return "B-Identity";
    case BioTag::kIIdentity: return "I-Identity";
  }
  return "?";
}

BioTag parse_bio_tag(std::string_view s) {
  for (int i = 0; i < kNumBioTags; ++i)
    if (to_string(static_cast<BioTag>(i)) == s) return static_cast<BioTag>(i);
  throw ConfigError("unknown BIO tag '" + std::string(s) + "'");
}

BioTag begin_tag(EntityCategory c) { return c == EntityCategory::kName ? BioTag::kBName : BioTag::kBIdentity; }
BioTag inside_tag(EntityCategory c) { return c == EntityCategory::kName ? BioTag::kIName : BioTag::kIIdentity; }

BioDecode decode_bio2(const std::vector<BioTag> &tags) {
  BioDecode out;
  std::optional<EntitySpan> open;
  auto close = [&](int at) {
    if (open) {
      open->end = at;
      out.spans.push_back(*open);
      open.reset();
    }
  };
  for (int i = 0; i < static_cast<int>(tags.size()); ++i) {
    const BioTag t = tags[i];
    if (t == BioTag::kO) {
      close(i);
      continue;
    }
    const EntityCategory cat =
        (t == BioTag::kBName || t == BioTag::kIName) ? EntityCategory::kName : EntityCategory::kIdentity;
    const bool inside = t == BioTag::kIName || t == BioTag::kIIdentity;
    if (inside && open && open->category == cat) continue;
    if (inside) ++out.repairs;
    close(i);
    open = EntitySpan{i, i, cat};
  }
  close(static_cast<int>(tags.size()));
  return out;
}

std::vector<BioTag> encode_bio2(const std::vector<EntitySpan> &spans, int length) {
  std::vector<BioTag> tags(length, BioTag::kO);
  std::vector<bool> used(length, false);
  for (const auto &s : spans) {
    if (s.start < 0 || s.end > length || s.start >= s.end) throw ShapeError("span outside the tag sequence");
    for (int i = s.start; i < s.end; ++i) {
      if (used[i]) throw ShapeError("overlapping spans cannot be BIO2 encoded");
      used[i] = true;
      tags[i] = i == s.start ? begin_tag(s.category) : inside_tag(s.category);
    }
  }
  return tags;
}

std::vector<BioTag> tags_from_char_spans(const std::vector<Tokenizer::Piece> &pieces,
                                         const std::vector<EntitySpan> &spans) {
  std::vector<EntitySpan> token_spans;
  for (const auto &s : spans) {
    const auto [b, e] = char_span_to_tokens(s, pieces);
    if (b < e) token_spans.push_back({b, e, s.category});
  }
  return encode_bio2(token_spans, static_cast<int>(pieces.size()));
}

EntitySpan token_span_to_chars(const EntitySpan &token_span, const std::vector<Tokenizer::Piece> &pieces) {
  if (token_span.start < 0 || token_span.end > static_cast<int>(pieces.size()) || token_span.start >= token_span.end)
    throw ShapeError("token span outside the piece list");
  return {pieces[token_span.start].char_start, pieces[token_span.end - 1].char_end, token_span.category};
}

std::pair<int, int> char_span_to_tokens(const EntitySpan &span, const std::vector<Tokenizer::Piece> &pieces) {
  int b = -1, e = -1;
  for (int i = 0; i < static_cast<int>(pieces.size()); ++i) {
    if (pieces[i].char_start >= span.start && pieces[i].char_end <= span.end) {
      if (b < 0) b = i;
      e = i + 1;
    }
  }
  if (b < 0) return {0, 0};
  return {b, e};
}

torch::Tensor PairMatrix::flat() const {
  if (empty()) return {};
  return entries.reshape({size(), entries.size(2)});
}

PairMatrix build_pair_matrix(const std::vector<EntityMention> &mentions) {
  PairMatrix pm;
  for (int i = 0; i < static_cast<int>(mentions.size()); ++i)
    (mentions[i].category == EntityCategory::kName ? pm.names : pm.identities).push_back(i);
  if (pm.empty()) return pm;
  std::vector<torch::Tensor> rows;
  for (int p : pm.names) {
    std::vector<torch::Tensor> row;
    for (int q : pm.identities) row.push_back(torch::cat({mentions[p].hidden, mentions[q].hidden}, 0));
    rows.push_back(torch::stack(row, 0));
  }
  pm.entries = torch::stack(rows, 0);
  return pm;
}

namespace {

template <size_t N>
std::pair<int, std::array<float, N>> softmax_argmax(const torch::Tensor &logits) {
  if (logits.numel() != static_cast<int64_t>(N)) throw ShapeError("unexpected logit count");
  auto p = torch::softmax(logits.detach().to(torch::kFloat64).reshape({-1}), 0);
  auto a = p.accessor<double, 1>();
  std::array<float, N> probs{};
  int best = 0;
  for (size_t i = 0; i < N; ++i) {
    probs[i] = static_cast<float>(a[i]);
    if (a[i] > a[best]) best = static_cast<int>(i);
  }
  return {best, probs};
}

}  // namespace

BtcDecision btc_decide(const torch::Tensor &logits) {
  const auto [best, probs] = softmax_argmax<kNumBoxCategories>(logits);
  return {static_cast<BoxCategory>(best), probs};
}

std::vector<BioTag> er_decide(const torch::Tensor &logits) {
  if (logits.dim() != 2 || logits.size(1) != kNumBioTags) throw ShapeError("ER logits must be (T, 5)");
  auto l = logits.detach().to(torch::kFloat32).contiguous();
  auto a = l.accessor<float, 2>();
  std::vector<BioTag> tags(l.size(0));
  for (int64_t t = 0; t < l.size(0); ++t) {
    int best = 0;
    for (int k = 1; k < kNumBioTags; ++k)
      if (a[t][k] > a[t][best]) best = k;
    tags[t] = static_cast<BioTag>(best);
  }
  return tags;
}

ElDecision el_decide(const torch::Tensor &logits) {
  const auto [best, probs] = softmax_argmax<2>(logits);
  return {best == 1, probs[1]};
}

BoxTextBatch make_box_text_batch(const std::vector<std::string> &texts, const Tokenizer &tokenizer, int max_tokens) {
  if (max_tokens < 2) throw ConfigError("box token budget must hold [CLS] and [SEP]");
  BoxTextBatch out;
  const int64_t B = static_cast<int64_t>(texts.size());
  std::vector<std::vector<int>> seqs;
  int64_t T = 2;
  for (const auto &text : texts) {
    auto pieces = tokenizer.tokenize_with_offsets(text);
    if (static_cast<int>(pieces.size()) > max_tokens - 2) pieces.resize(max_tokens - 2);
    std::vector<int> ids{tokenizer.cls_id()};
    for (const auto &p : pieces) ids.push_back(p.id);
    ids.push_back(tokenizer.sep_id());
    T = std::max<int64_t>(T, static_cast<int64_t>(ids.size()));
    seqs.push_back(std::move(ids));
    out.pieces.push_back(std::move(pieces));
  }
  std::vector<int64_t> ids(B * T, tokenizer.pad_id());
  std::vector<int64_t> mask(B * T, 0);
  for (int64_t b = 0; b < B; ++b)
    for (size_t i = 0; i < seqs[b].size(); ++i) {
      ids[b * T + i] = seqs[b][i];
      mask[b * T + i] = 1;
    }
  out.ids = torch::tensor(ids, torch::kLong).view({B, T});
  out.mask = torch::tensor(mask, torch::kLong).view({B, T}).to(torch::kBool);
  return out;
}

BtcInputs make_btc_inputs(const Image &image, const std::vector<BoxRecord> &boxes, const Tokenizer &tokenizer,
                          const ModelConfig &config) {
  BtcInputs in;
  in.image = image_to_tensor(image).unsqueeze(0);
  std::vector<NormalizedBox> norm;
  std::vector<int64_t> coords;
  std::vector<std::string> texts;
  for (const auto &b : boxes) {
    norm.push_back(normalize_bbox(b.bbox, image.width, image.height, config.coord_size));
    coords.insert(coords.end(), {norm.back().x_min, norm.back().y_min, norm.back().x_max, norm.back().y_max});
    texts.push_back(b.text);
  }
  in.regions = feature_regions(norm, image.width, image.height, config.coord_size).regions;
  in.norm_boxes = torch::tensor(coords, torch::kLong).view({static_cast<int64_t>(boxes.size()), 4});
  in.text = make_box_text_batch(texts, tokenizer, config.box_max_tokens);
  return in;
}

BtcModelImpl::BtcModelImpl(const ModelConfig &config) {
  config.validate();
  cnn = register_module("cnn", FrameCnn(config.cnn_channels));
  visual = register_module("visual", VisualBoxEncoder(config));
  text = register_module("text", TextEncoder(config, config.btc_text_layers));
  head = register_module("head", torch::nn::Linear(config.visual_dim + config.hidden, kNumBoxCategories));
}

torch::Tensor BtcModelImpl::box_embedding(const BtcInputs &in) {
  auto features = cnn(in.image);
  auto h_vb = visual(features, in.regions, in.norm_boxes);
  auto h_tb = text(in.text.ids, in.text.mask).select(1, 0);
  return torch::cat({h_vb, h_tb}, 1);
}

torch::Tensor BtcModelImpl::classify(const torch::Tensor &h_b) {
  if (!torch::isfinite(h_b).all().item<bool>()) throw ShapeError("box embedding has non-finite entries");
  return head(h_b);
}

ErModelImpl::ErModelImpl(const ModelConfig &config) {
  config.validate();
  text = register_module("text", TextEncoder(config, config.er_text_layers));
  head = register_module("head", torch::nn::Linear(config.hidden, kNumBioTags));
}

torch::Tensor ErModelImpl::encode(const BoxTextBatch &in) { return text(in.ids, in.mask); }

torch::Tensor ErModelImpl::tag_logits(const torch::Tensor &hidden) { return head(hidden); }

ElModelImpl::ElModelImpl(const ModelConfig &config) {
  config.validate();
  text = register_module("text", TextEncoder(config, config.er_text_layers));
  head = register_module("head", nn::PairClassifier(2 * config.hidden, config.el_hidden));
}

std::vector<const BoxPrediction *> FrameExtraction::segments() const {
  std::vector<const BoxPrediction *> out;
  for (const auto &b : boxes)
    if (b.category != BoxCategory::kMisc) out.push_back(&b);
  return out;
}

std::vector<std::string> FrameExtraction::texts_of(BoxCategory c) const {
  std::vector<std::string> out;
  for (const auto &b : boxes)
    if (b.category == c) out.push_back(b.text);
  return out;
}

std::optional<BoxCategory> FrameExtraction::category_of(int box_id) const {
  for (const auto &b : boxes)
    if (b.box_id == box_id) return b.category;
  return std::nullopt;
}

PipSystem PipSystem::create(const ModelConfig &config, const Tokenizer &tokenizer) {
  if (tokenizer.size() > config.vocab_size) throw ConfigError("tokenizer is larger than the model vocabulary");
  PipSystem s;
  s.config = config;
  s.tokenizer = tokenizer;
  s.btc = BtcModel(config);
  s.er = ErModel(config);
  s.el = ElModel(config);
  return s;
}

void PipSystem::eval() {
  btc->eval();
  er->eval();
  el->eval();
}

int64_t PipSystem::parameter_count() const {
  return vkie::parameter_count(*btc) + vkie::parameter_count(*er) + vkie::parameter_count(*el);
}

torch::Tensor mean_pool(const torch::Tensor &hidden, int begin, int end) {
  if (begin < 0 || end > hidden.size(0) || begin >= end) throw ShapeError("empty pooling range");
  return hidden.slice(0, begin, end).mean(0);
}

PipelineResult run_pipeline(const PipSystem &system, const Image &image, const std::vector<BoxRecord> &boxes,
                            const PipelineOptions &options) {
  torch::NoGradGuard no_grad;
  BtcModel btc = system.btc;
  ErModel er = system.er;
  ElModel el = system.el;
  if (!btc || !er || !el) throw ConfigError("pipeline models are not loaded");

  PipelineResult result;
  FrameExtraction &ex = result.extraction;
  const auto ordered = order_boxes(boxes, default_row_tolerance(image.height));

  std::vector<BoxCategory> gate;
  for (const auto &box : ordered) {
    BtcDecision decision;
    if (options.btc_oracle) {
      decision.category = options.btc_oracle(box);
      decision.probabilities[static_cast<size_t>(decision.category)] = 1.0F;
    } else {
      decision = btc_decide(btc->forward(make_btc_inputs(image, {box}, system.tokenizer, system.config))[0]);
    }
    ++result.counts.btc_calls;
    ex.boxes.push_back({box.box_id, decision.category, decision.probabilities, box.text, box.bbox});
    if (options.gold_btc) {
      if (!box.category) throw ConfigError("gold BTC requested for an unlabeled box " + std::to_string(box.box_id));
      gate.push_back(*box.category);
    } else {
      gate.push_back(decision.category);
    }
  }

  for (size_t i = 0; i < ordered.size(); ++i) {
    if (gate[i] != BoxCategory::kPersonInfo) continue;
    const auto &box = ordered[i];
    auto batch = make_box_text_batch({box.text}, system.tokenizer, system.config.box_max_tokens);
    auto hidden = er->encode(batch)[0];
    ++result.counts.er_calls;
    torch::Tensor link_states;
    const auto &pieces = batch.pieces[0];
    const int n = static_cast<int>(pieces.size());
    std::vector<EntitySpan> token_spans;
    if (options.gold_mentions) {
      for (const auto &s : box.entity_spans) {
        const auto [b, e] = char_span_to_tokens(s, pieces);
        if (b < e) token_spans.push_back({b, e, s.category});
      }
    } else if (n > 0) {
      auto decoded = decode_bio2(er_decide(er->tag_logits(hidden).slice(0, 1, 1 + n)));
      ex.bio_repairs += decoded.repairs;
      token_spans = std::move(decoded.spans);
    }
    for (const auto &ts : token_spans) {
      const auto cs = token_span_to_chars(ts, pieces);
      EntityMention m;
      m.box_id = box.box_id;
      m.start = cs.start;
      m.end = cs.end;
      m.category = ts.category;
      m.text = utf8::substr(box.text, cs.start, cs.end);
      if (!link_states.defined()) link_states = el->encode(batch)[0];
      m.hidden = mean_pool(link_states, 1 + ts.start, 1 + ts.end);
      ex.mentions.push_back(std::move(m));
    }
  }

  const auto pm = build_pair_matrix(ex.mentions);
  for (size_t p = 0; p < pm.names.size(); ++p) {
    for (size_t q = 0; q < pm.identities.size(); ++q) {
      auto d = el_decide(el->forward(pm.entries[p][q].unsqueeze(0))[0]);
      ++result.counts.el_calls;
      ex.pairs.push_back({pm.names[p], pm.identities[q], d.matched, d.probability});
    }
  }
  return result;
}

}  // namespace vkie
