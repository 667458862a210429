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

#include "vkie/encoding.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

namespace vkie {

Tokenizer::Tokenizer(std::vector<std::string> tokens, Mode mode) : tokens_(std::move(tokens)), mode_(mode) {
  for (int i = 0; i < static_cast<int>(tokens_.size()); ++i) {
    if (!index_.emplace(tokens_[i], i).second) throw ConfigError("duplicate vocabulary token '" + tokens_[i] + "'");
  }
  auto special = [&](const char *name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError(std::string("vocabulary lacks special token ") + name);
    return it->second;
  };
  pad_ = special("[PAD]");
  unk_ = special("[UNK]");
  cls_ = special("[CLS]");
  sep_ = special("[SEP]");
}

Tokenizer Tokenizer::ascii(Mode mode) {
  std::vector<std::string> tokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]"};
  for (char c = 0x20; c < 0x7F; ++c) tokens.emplace_back(1, c);
  return Tokenizer(std::move(tokens), mode);
}

Tokenizer Tokenizer::unfitted(Mode mode) { return Tokenizer({"[PAD]", "[UNK]", "[CLS]", "[SEP]"}, mode); }

Tokenizer Tokenizer::build(const std::vector<std::string> &texts, Mode mode, int min_count) {
  const Tokenizer splitter = unfitted(mode);
  std::map<std::string, int> counts;
  for (const auto &text : texts) {
    const auto cps = utf8::decode(text);
    for (const auto &p : splitter.tokenize_with_offsets(text))
      ++counts[utf8::encode(std::vector<char32_t>(cps.begin() + p.char_start, cps.begin() + p.char_end))];
  }
  std::vector<std::string> tokens = splitter.tokens();
  for (const auto &[piece, n] : counts)
    if (n >= min_count && !splitter.index_.count(piece)) tokens.push_back(piece);
  return Tokenizer(std::move(tokens), mode);
}

Tokenizer Tokenizer::load(const std::filesystem::path &path, Mode mode) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open vocabulary " + path.string());
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(line);
  }
  return Tokenizer(std::move(tokens), mode);
}

void Tokenizer::save(const std::filesystem::path &path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write vocabulary " + path.string());
  for (const auto &t : tokens_) out << t << '\n';
}

int Tokenizer::id_of(const std::string &token) const {
  auto it = index_.find(token);
  return it == index_.end() ? unk_ : it->second;
}

std::vector<Tokenizer::Piece> Tokenizer::tokenize_with_offsets(std::string_view text) const {
  const auto cps = utf8::decode(text);
  std::vector<Piece> out;
  if (mode_ == Mode::kCharacter) {
    out.reserve(cps.size());
    for (int i = 0; i < static_cast<int>(cps.size()); ++i) out.push_back({id_of(utf8::encode(cps[i])), i, i + 1});
    return out;
  }
  int i = 0;
  const int n = static_cast<int>(cps.size());
  auto blank = [](char32_t c) { return c == U' ' || c == U'\t'; };
  auto alnum = [](char32_t c) { return c < 0x80 && std::isalnum(static_cast<int>(c)); };
  if (mode_ == Mode::kWord) {
    while (i < n) {
      if (blank(cps[i])) {
        ++i;
        continue;
      }
      int j = i + 1;
      if (alnum(cps[i]))
        while (j < n && alnum(cps[j])) ++j;
      out.push_back({id_of(utf8::encode(std::vector<char32_t>(cps.begin() + i, cps.begin() + j))), i, j});
      i = j;
    }
    return out;
  }
  while (i < n) {
    while (i < n && (cps[i] == U' ' || cps[i] == U'\t')) ++i;
    if (i >= n) break;
    int j = i;
    while (j < n && cps[j] != U' ' && cps[j] != U'\t') ++j;
    out.push_back({id_of(utf8::encode(std::vector<char32_t>(cps.begin() + i, cps.begin() + j))), i, j});
    i = j;
  }
  return out;
}

std::vector<int> Tokenizer::tokenize(std::string_view text) const {
  std::vector<int> ids;
  for (const auto &p : tokenize_with_offsets(text)) ids.push_back(p.id);
  return ids;
}

NormalizedBox normalize_bbox(const BBox &bbox, int frame_width, int frame_height, int coord_size) {
  if (frame_width <= 0 || frame_height <= 0) throw ConfigError("frame dimensions must be positive");
  if (coord_size <= 0) throw ConfigError("coordinate size must be positive");
  auto scale = [&](int v, int dim) {
    const auto s = static_cast<int>(std::floor(static_cast<double>(v) * coord_size / dim));
    return std::clamp(s, 0, coord_size - 1);
  };
  return {scale(bbox.x_min, frame_width), scale(bbox.y_min, frame_height), scale(bbox.x_max, frame_width),
          scale(bbox.y_max, frame_height)};
}

double default_row_tolerance(int frame_height) { return 0.04 * frame_height; }

std::vector<BoxRecord> order_boxes(std::vector<BoxRecord> boxes, double row_tolerance) {
  std::stable_sort(boxes.begin(), boxes.end(), [](const BoxRecord &a, const BoxRecord &b) {
    if (a.bbox.y_min != b.bbox.y_min) return a.bbox.y_min < b.bbox.y_min;
    return a.box_id < b.box_id;
  });
  std::vector<BoxRecord> out;
  out.reserve(boxes.size());
  size_t i = 0;
  while (i < boxes.size()) {
    const double anchor = boxes[i].bbox.y_min;
    size_t j = i;
    while (j < boxes.size() && boxes[j].bbox.y_min - anchor < row_tolerance) ++j;
    std::stable_sort(boxes.begin() + static_cast<long>(i), boxes.begin() + static_cast<long>(j),
                     [](const BoxRecord &a, const BoxRecord &b) {
                       if (a.bbox.x_min != b.bbox.x_min) return a.bbox.x_min < b.bbox.x_min;
                       return a.box_id < b.box_id;
                     });
    for (size_t k = i; k < j; ++k) out.push_back(std::move(boxes[k]));
    i = j;
  }
  return out;
}

int InputSequence::box_index(int box_id) const {
  for (int i = 0; i < num_boxes; ++i)
    if (box_ids[i] == box_id) return i;
  return -1;
}

InputSequence assemble_sequence(const std::vector<BoxRecord> &ordered_boxes, const Tokenizer &tokenizer,
                                int max_length) {
  const int M = static_cast<int>(ordered_boxes.size());
  if (max_length < M + 2)
    throw CapacityError("sequence length " + std::to_string(max_length) + " cannot hold " + std::to_string(M) +
                        " visual tokens plus [CLS]/[SEP]");

  InputSequence seq;
  seq.length = max_length;
  seq.num_boxes = M;
  seq.token_ids.assign(max_length, tokenizer.pad_id());
  seq.roles.assign(max_length, Role::kPad);
  seq.attention_mask.assign(max_length, 0);
  seq.text_to_box.assign(max_length, -1);
  seq.visual_to_box.assign(max_length, -1);
  seq.char_start.assign(max_length, -1);
  seq.char_end.assign(max_length, -1);

  std::vector<std::vector<Tokenizer::Piece>> pieces(M);
  for (int b = 0; b < M; ++b) {
    pieces[b] = tokenizer.tokenize_with_offsets(ordered_boxes[b].text);
    seq.num_text_total += static_cast<int>(pieces[b].size());
  }
  const int capacity = max_length - M - 2;
  seq.num_text = std::min(seq.num_text_total, capacity);

  seq.token_ids[0] = tokenizer.cls_id();
  seq.roles[0] = Role::kCls;
  int pos = 1;
  for (int b = 0; b < M; ++b) {
    const auto &box = ordered_boxes[b];
    seq.box_ids.push_back(box.box_id);
    seq.box_bboxes.push_back(box.bbox);
    seq.chars_total.push_back(static_cast<int>(utf8::length(box.text)));
    seq.text_begin.push_back(pos);
    int kept = 0;
    size_t kept_pieces = 0;
    for (const auto &p : pieces[b]) {
      if (pos > seq.num_text) break;
      seq.token_ids[pos] = p.id;
      seq.roles[pos] = Role::kText;
      seq.text_to_box[pos] = box.box_id;
      seq.char_start[pos] = p.char_start;
      seq.char_end[pos] = p.char_end;
      kept = p.char_end;
      ++kept_pieces;
      ++pos;
    }
    seq.text_end.push_back(pos);
    seq.chars_kept.push_back(kept_pieces == pieces[b].size() ? seq.chars_total.back() : kept);
  }
  seq.token_ids[pos] = tokenizer.sep_id();
  seq.roles[pos] = Role::kSep;
  ++pos;
  for (int b = 0; b < M; ++b, ++pos) {
    seq.token_ids[pos] = tokenizer.pad_id();
    seq.roles[pos] = Role::kVisual;
    seq.visual_to_box[pos] = ordered_boxes[b].box_id;
  }
  for (int i = 0; i < max_length; ++i) seq.attention_mask[i] = seq.roles[i] != Role::kPad ? 1 : 0;
  return seq;
}

void check_sequence(const InputSequence &seq) {
  auto fail = [](const std::string &what) { throw ShapeError("inconsistent input sequence: " + what); };
  const int L = seq.length;
  if (static_cast<int>(seq.token_ids.size()) != L || static_cast<int>(seq.roles.size()) != L ||
      static_cast<int>(seq.attention_mask.size()) != L || static_cast<int>(seq.text_to_box.size()) != L ||
      static_cast<int>(seq.visual_to_box.size()) != L)
    fail("per-position arrays differ from L");
  if (seq.num_text + seq.num_boxes + 2 > L) fail("N + M + 2 exceeds L");
  if (static_cast<int>(seq.box_ids.size()) != seq.num_boxes || static_cast<int>(seq.box_bboxes.size()) != seq.num_boxes)
    fail("box tables differ from M");
  for (int i = 0; i < L; ++i) {
    Role expect = Role::kPad;
    if (i == 0)
      expect = Role::kCls;
    else if (i <= seq.num_text)
      expect = Role::kText;
    else if (i == seq.num_text + 1)
      expect = Role::kSep;
    else if (i < seq.visual_begin() + seq.num_boxes)
      expect = Role::kVisual;
    if (seq.roles[i] != expect) fail("role at position " + std::to_string(i));
    if ((seq.attention_mask[i] != 0) != (expect != Role::kPad)) fail("attention mask at " + std::to_string(i));
    if (expect == Role::kText && seq.box_index(seq.text_to_box[i]) < 0) fail("text_to_box at " + std::to_string(i));
    if (expect != Role::kText && seq.text_to_box[i] != -1) fail("stray text_to_box at " + std::to_string(i));
    if (expect == Role::kVisual && seq.visual_to_box[i] != seq.box_ids[i - seq.visual_begin()])
      fail("visual_to_box at " + std::to_string(i));
    if (expect != Role::kVisual && seq.visual_to_box[i] != -1) fail("stray visual_to_box at " + std::to_string(i));
  }
  int last = -1;
  for (int i = 1; i <= seq.num_text; ++i) {
    const int b = seq.box_index(seq.text_to_box[i]);
    if (b < last) fail("text positions out of box order");
    last = b;
  }
}

std::vector<ProjectedSpan> project_spans(const InputSequence &seq, const std::vector<BoxRecord> &boxes) {
  std::vector<ProjectedSpan> out;
  for (const auto &box : boxes) {
    const int b = seq.box_index(box.box_id);
    for (int k = 0; k < static_cast<int>(box.entity_spans.size()); ++k) {
      const auto &span = box.entity_spans[k];
      ProjectedSpan p;
      p.ref = {box.box_id, k};
      p.span = span;
      if (b >= 0) {
        for (int pos = seq.text_begin[b]; pos < seq.text_end[b]; ++pos) {
          if (seq.char_start[pos] >= span.start && seq.char_end[pos] <= span.end) {
            if (p.seq_begin < 0) p.seq_begin = pos;
            p.seq_end = pos + 1;
          }
        }
      }
      if (p.seq_begin < 0) {
        p.status = SpanStatus::kAbsent;
      } else if (seq.char_end[p.seq_end - 1] < span.end) {
        p.status = SpanStatus::kRightClipped;
        p.clip_char = seq.char_end[p.seq_end - 1];
      } else {
        p.status = SpanStatus::kPresent;
      }
      out.push_back(p);
    }
  }
  return out;
}

InputSequence encode_frame(const std::vector<BoxRecord> &boxes, int frame_height, const Tokenizer &tokenizer,
                           const EncodingConfig &config) {
  const auto ordered = order_boxes(boxes, config.row_tolerance_fraction * frame_height);
  return assemble_sequence(ordered, tokenizer, config.max_length);
}

}  // namespace vkie
