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

#include "vkie/uni_model.hpp"

#include <algorithm>
#include <cmath>

namespace vkie {

void LossWeights::validate() const {
  if (!std::isfinite(alpha) || !std::isfinite(beta) || alpha < 0.0 || beta < 0.0 || alpha + beta > 1.0 + 1e-12)
    throw ConfigError("loss weights need alpha >= 0, beta >= 0 and alpha + beta <= 1 (got " + std::to_string(alpha) +
                      ", " + std::to_string(beta) + ")");
}

namespace {

std::vector<std::pair<int, int>> span_pairs(const std::vector<SeqSpan> &spans) {
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < static_cast<int>(spans.size()); ++i) {
    if (spans[i].category != EntityCategory::kName) continue;
    for (int j = 0; j < static_cast<int>(spans.size()); ++j)
      if (spans[j].category == EntityCategory::kIdentity) out.emplace_back(i, j);
  }
  return out;
}

std::vector<Tokenizer::Piece> kept_pieces(const InputSequence &seq, int box) {
  std::vector<Tokenizer::Piece> out;
  for (int p = seq.text_begin[box]; p < seq.text_end[box]; ++p)
    out.push_back({seq.token_ids[p], seq.char_start[p], seq.char_end[p]});
  return out;
}

torch::Tensor masked_cross_entropy(const torch::Tensor &logits, const std::vector<int64_t> &labels) {
  std::vector<int64_t> rows, targets;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    rows.push_back(static_cast<int64_t>(i));
    targets.push_back(labels[i]);
  }
  if (rows.empty()) return {};
  auto picked = logits.index_select(0, torch::tensor(rows, torch::kLong));
  return torch::nn::functional::cross_entropy(picked, torch::tensor(targets, torch::kLong));
}

}  // namespace

UniExample make_uni_example(const Image &image, const std::vector<BoxRecord> &boxes, const Tokenizer &tokenizer,
                            const EncodingConfig &encoding, Modality modality) {
  UniExample ex;
  ex.image = &image;
  ex.ordered = order_boxes(boxes, encoding.row_tolerance_fraction * image.height);
  if (modality == Modality::kVisualOnly) {
    for (auto &b : ex.ordered) {
      b.text.clear();
      b.entity_spans.clear();
    }
  }
  ex.seq = assemble_sequence(ex.ordered, tokenizer, encoding.max_length);
  ex.labeled = true;
  for (const auto &b : ex.ordered) {
    ex.btc_labels.push_back(b.category ? static_cast<int>(*b.category) : -1);
    if (!b.category) ex.labeled = false;
  }
  ex.er_labels.assign(ex.seq.num_text, 0);
  for (int b = 0; b < ex.seq.num_boxes; ++b) {
    const auto tags = tags_from_char_spans(kept_pieces(ex.seq, b), ex.ordered[b].entity_spans);
    for (size_t t = 0; t < tags.size(); ++t) ex.er_labels[ex.seq.text_begin[b] + t - 1] = static_cast<int>(tags[t]);
  }
  for (const auto &p : project_spans(ex.seq, ex.ordered)) {
    if (p.status == SpanStatus::kAbsent) continue;
    ex.gold_spans.push_back(
        {p.ref.box_id, p.seq_begin, p.seq_end, p.span.category, p.ref, p.status == SpanStatus::kRightClipped});
  }
  return ex;
}

UniExample make_uni_example(const LabeledFrame &frame, const Tokenizer &tokenizer, const EncodingConfig &encoding,
                            Modality modality) {
  UniExample ex = make_uni_example(frame.image, frame.boxes, tokenizer, encoding, modality);
  for (const auto &[i, j] : span_pairs(ex.gold_spans)) {
    int label = 0;
    for (const auto &link : frame.links)
      if (link.name == ex.gold_spans[i].ref && link.identity == ex.gold_spans[j].ref) label = link.matched ? 1 : 0;
    ex.gold_pair_labels.push_back(label);
  }
  return ex;
}

UniModelImpl::UniModelImpl(const ModelConfig &config, Modality modality) : config_(config) {
  encoder = register_module("encoder", UnifiedEncoder(config, modality));
  btc_head = register_module("btc_head", torch::nn::Linear(config.hidden, kNumBoxCategories));
  er_head = register_module("er_head", torch::nn::Linear(config.hidden, kNumBioTags));
  el_head = register_module("el_head", nn::PairClassifier(2 * config.hidden, config.el_hidden));
}

UniOutputs uni_forward(UniModel &model, const std::vector<const UniExample *> &examples, SpanMode mode) {
  std::vector<const InputSequence *> seqs;
  std::vector<const Image *> images;
  for (const auto *ex : examples) {
    seqs.push_back(&ex->seq);
    images.push_back(ex->image);
  }
  const bool need_images = model->encoder->modality() != Modality::kTextOnly;
  const auto batch = make_unified_batch(seqs, images, model->config(), need_images);

  UniOutputs out;
  out.hidden = model->encoder->forward(batch);
  const int64_t H = out.hidden.size(2);
  out.btc_logits = model->btc_head(out.hidden.index({batch.visual_batch, batch.visual_position}));

  std::vector<int64_t> tb, tp;
  out.btc_offset = {0};
  out.er_offset = {0};
  for (size_t b = 0; b < examples.size(); ++b) {
    const auto &seq = examples[b]->seq;
    for (int p = 1; p <= seq.num_text; ++p) {
      tb.push_back(static_cast<int64_t>(b));
      tp.push_back(p);
    }
    out.btc_offset.push_back(out.btc_offset.back() + seq.num_boxes);
    out.er_offset.push_back(out.er_offset.back() + seq.num_text);
  }
  auto text_states = out.hidden.index({torch::tensor(tb, torch::kLong), torch::tensor(tp, torch::kLong)});
  out.er_logits = model->er_head(text_states.view({-1, H}));

  std::vector<torch::Tensor> pair_rows;
  out.el_offset = {0};
  for (size_t b = 0; b < examples.size(); ++b) {
    const auto &ex = *examples[b];
    const auto &seq = ex.seq;
    std::vector<SeqSpan> spans;
    if (mode == SpanMode::kGold) {
      spans = ex.gold_spans;
    } else {
      for (int box = 0; box < seq.num_boxes; ++box) {
        const int begin = seq.text_begin[box], end = seq.text_end[box];
        if (begin == end) continue;
        const int64_t row = out.er_offset[b] + begin - 1;
        auto decoded = decode_bio2(er_decide(out.er_logits.slice(0, row, row + (end - begin))));
        out.bio_repairs += decoded.repairs;
        for (const auto &s : decoded.spans) {
          SeqSpan span{seq.box_ids[box], begin + s.start, begin + s.end, s.category, {seq.box_ids[box], -1}, false};
          span.clipped = seq.truncated(box) && span.seq_end == end;
          spans.push_back(span);
        }
      }
    }
    auto pairs = span_pairs(spans);
    if (!pairs.empty()) {
      std::vector<torch::Tensor> pooled;
      for (const auto &s : spans) pooled.push_back(out.hidden[b].slice(0, s.seq_begin, s.seq_end).mean(0));
      for (const auto &[i, j] : pairs) pair_rows.push_back(torch::cat({pooled[i], pooled[j]}, 0));
    }
    out.el_offset.push_back(out.el_offset.back() + static_cast<int64_t>(pairs.size()));
    out.spans.push_back(std::move(spans));
    out.pairs.push_back(std::move(pairs));
  }
  if (pair_rows.empty())
    out.el_logits = torch::zeros({0, 2}, out.hidden.options());
  else
    out.el_logits = model->el_head(torch::stack(pair_rows, 0));
  return out;
}

LossBreakdown combine_losses(const torch::Tensor &btc, const torch::Tensor &er, const torch::Tensor &el,
                             const LossWeights &weights) {
  weights.validate();
  LossBreakdown out;
  torch::Tensor total;
  auto add = [&](const torch::Tensor &component, double w, double &value, bool &present) {
    if (!component.defined()) return;
    present = true;
    value = component.item<double>();
    total = total.defined() ? total + w * component : w * component;
  };
  add(btc, weights.alpha, out.btc, out.has_btc);
  add(er, weights.beta, out.er, out.has_er);
  add(el, weights.gamma(), out.el, out.has_el);
  out.total = total.defined() ? total : torch::zeros({});
  return out;
}

LossBreakdown joint_loss(const UniOutputs &outputs, const std::vector<const UniExample *> &examples,
                         const LossWeights &weights) {
  std::vector<int64_t> btc, er, el;
  for (size_t b = 0; b < examples.size(); ++b) {
    const auto &ex = *examples[b];
    btc.insert(btc.end(), ex.btc_labels.begin(), ex.btc_labels.end());
    er.insert(er.end(), ex.er_labels.begin(), ex.er_labels.end());
    const auto n_pairs = outputs.el_offset[b + 1] - outputs.el_offset[b];
    if (n_pairs != static_cast<int64_t>(ex.gold_pair_labels.size()))
      throw ShapeError("pair labels do not match the evaluated pairs; use gold span mode for training");
    el.insert(el.end(), ex.gold_pair_labels.begin(), ex.gold_pair_labels.end());
  }
  if (static_cast<int64_t>(btc.size()) != outputs.btc_logits.size(0) ||
      static_cast<int64_t>(er.size()) != outputs.er_logits.size(0))
    throw ShapeError("labels are misaligned with the logits");
  return combine_losses(masked_cross_entropy(outputs.btc_logits, btc), masked_cross_entropy(outputs.er_logits, er),
                        masked_cross_entropy(outputs.el_logits, el), weights);
}

UniSystem UniSystem::create(const ModelConfig &config, const Tokenizer &tokenizer, Modality modality) {
  if (tokenizer.size() > config.vocab_size) throw ConfigError("tokenizer is larger than the model vocabulary");
  UniSystem s;
  s.config = config;
  s.tokenizer = tokenizer;
  s.encoding.max_length = config.max_length;
  s.encoding.coord_size = config.coord_size;
  s.modality = modality;
  s.model = UniModel(config, modality);
  return s;
}

UniExtractResult uni_extract(const UniSystem &system, const Image &image, const std::vector<BoxRecord> &boxes,
                             SpanMode mode) {
  torch::NoGradGuard no_grad;
  UniModel model = system.model;
  if (!model) throw ConfigError("unified model is not loaded");
  const auto ex = make_uni_example(image, boxes, system.tokenizer, system.encoding, system.modality);
  const auto out = uni_forward(model, {&ex}, mode);

  UniExtractResult result;
  result.encoder_calls = 1;
  FrameExtraction &fx = result.extraction;
  fx.bio_repairs = out.bio_repairs;
  const auto &seq = ex.seq;
  for (int b = 0; b < seq.num_boxes; ++b) {
    const auto d = btc_decide(out.btc_logits[b]);
    std::string text;
    for (const auto &box : boxes)
      if (box.box_id == seq.box_ids[b]) text = box.text;
    fx.boxes.push_back({seq.box_ids[b], d.category, d.probabilities, std::move(text), seq.box_bboxes[b]});
  }

  const bool text_defined = system.modality != Modality::kVisualOnly;
  if (!text_defined) return result;
  for (const auto &s : out.spans[0]) {
    const int box = seq.box_index(s.box_id);
    EntityMention m;
    m.box_id = s.box_id;
    m.start = seq.char_start[s.seq_begin];
    m.end = seq.char_end[s.seq_end - 1];
    m.category = s.category;
    m.text = utf8::substr(ex.ordered[box].text, m.start, m.end);
    m.clipped = s.clipped;
    m.hidden = out.hidden[0].slice(0, s.seq_begin, s.seq_end).mean(0);
    fx.mentions.push_back(std::move(m));
  }
  for (size_t k = 0; k < out.pairs[0].size(); ++k) {
    const auto d = el_decide(out.el_logits[static_cast<int64_t>(k)]);
    fx.pairs.push_back({out.pairs[0][k].first, out.pairs[0][k].second, d.matched, d.probability});
  }
  return result;
}

}  // namespace vkie
