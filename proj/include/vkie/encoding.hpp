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

#ifndef VKIE_ENCODING_HPP_
#define VKIE_ENCODING_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vkie/types.hpp"

namespace vkie {

// Token vocabulary. Ids are line numbers of the vocabulary file; the special
// tokens [PAD], [UNK], [CLS] and [SEP] must each appear exactly once.
//
// kCharacter: one token per code point. kWhitespace: blank-separated chunks.
// kWord: runs of ASCII letters and digits, every other non-blank code point on
// its own.
class Tokenizer {
 public:
  enum class Mode { kCharacter, kWhitespace, kWord };

  struct Piece {
    int id = 0;
    int char_start = 0;  // code point offsets into the source text
    int char_end = 0;
  };

  Tokenizer(std::vector<std::string> tokens, Mode mode = Mode::kCharacter);

  // Specials followed by printable ASCII (U+0020..U+007E).
  static Tokenizer ascii(Mode mode = Mode::kCharacter);
  static Tokenizer load(const std::filesystem::path &path, Mode mode = Mode::kCharacter);
  // Specials followed by every piece seen at least min_count times, sorted.
  static Tokenizer build(const std::vector<std::string> &texts, Mode mode, int min_count = 1);
  // Only the four specials: the vocabulary is fitted on training text later.
  static Tokenizer unfitted(Mode mode);
  bool fitted() const { return tokens_.size() > 4; }
  void save(const std::filesystem::path &path) const;

  std::vector<int> tokenize(std::string_view text) const;
  std::vector<Piece> tokenize_with_offsets(std::string_view text) const;

  int id_of(const std::string &token) const;
  const std::string &token(int id) const { return tokens_.at(static_cast<size_t>(id)); }
  int size() const { return static_cast<int>(tokens_.size()); }
  Mode mode() const { return mode_; }
  const std::vector<std::string> &tokens() const { return tokens_; }

  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int cls_id() const { return cls_; }
  int sep_id() const { return sep_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
  Mode mode_;
  int pad_ = -1, unk_ = -1, cls_ = -1, sep_ = -1;
};

// Box coordinates on a C x C grid. Cells x_min..x_max are covered inclusively.
struct NormalizedBox {
  int x_min = 0, y_min = 0, x_max = 0, y_max = 0;
  friend bool operator==(const NormalizedBox &, const NormalizedBox &) = default;
};

NormalizedBox normalize_bbox(const BBox &bbox, int frame_width, int frame_height, int coord_size = 128);

// Default same-row tolerance: 4% of the frame height.
double default_row_tolerance(int frame_height);

// Reading order, top-left to bottom-right. Boxes whose y_min is within
// `row_tolerance` of the row's first box share a row and are sorted by x_min.
std::vector<BoxRecord> order_boxes(std::vector<BoxRecord> boxes, double row_tolerance);

enum class Role : std::uint8_t { kCls = 0, kText = 1, kSep = 2, kVisual = 3, kPad = 4 };
inline constexpr int kNumRoles = 5;

// [CLS] t_1..t_N [SEP] v_1..v_M [PAD]... with alignment maps back to boxes.
struct InputSequence {
  int length = 0;  // L
  std::vector<int> token_ids;
  std::vector<Role> roles;
  std::vector<std::uint8_t> attention_mask;
  // Per position: owning box id for TEXT / VISUAL positions, -1 elsewhere.
  std::vector<int> text_to_box;
  std::vector<int> visual_to_box;
  // Per TEXT position: code point range of the token inside its box text.
  std::vector<int> char_start;
  std::vector<int> char_end;

  int num_text = 0;        // N after truncation
  int num_text_total = 0;  // N before truncation
  int num_boxes = 0;       // M

  // Per box, in reading order.
  std::vector<int> box_ids;
  std::vector<BBox> box_bboxes;
  std::vector<int> text_begin;  // sequence positions [text_begin, text_end)
  std::vector<int> text_end;
  std::vector<int> chars_total;  // code points in the box text
  std::vector<int> chars_kept;   // code points surviving truncation

  int visual_begin() const { return num_text + 2; }
  int visual_position(int box_index) const { return visual_begin() + box_index; }
  int box_index(int box_id) const;
  bool truncated(int box_index) const { return chars_kept[box_index] < chars_total[box_index]; }
};

// Builds the unified sequence. Text is tail-truncated so that N' + M + 2 <= L;
// every box keeps its VISUAL position. Throws CapacityError when L < M + 2.
InputSequence assemble_sequence(const std::vector<BoxRecord> &ordered_boxes, const Tokenizer &tokenizer,
                                int max_length);

// Throws ShapeError if the sequence violates its layout or alignment invariants.
void check_sequence(const InputSequence &seq);

enum class SpanStatus { kPresent, kRightClipped, kAbsent };

// A labeled span located in an assembled sequence.
struct ProjectedSpan {
  EntityRef ref;
  EntitySpan span;
  SpanStatus status = SpanStatus::kAbsent;
  int seq_begin = -1;  // TEXT positions [seq_begin, seq_end)
  int seq_end = -1;
  int clip_char = -1;  // code point where a right-clipped span was cut
};

std::vector<ProjectedSpan> project_spans(const InputSequence &seq, const std::vector<BoxRecord> &boxes);

struct EncodingConfig {
  int max_length = 128;
  int coord_size = 128;
  double row_tolerance_fraction = 0.04;
  friend bool operator==(const EncodingConfig &, const EncodingConfig &) = default;
};

// order_boxes + assemble_sequence with the configured tolerance.
InputSequence encode_frame(const std::vector<BoxRecord> &boxes, int frame_height, const Tokenizer &tokenizer,
                           const EncodingConfig &config);

}  // namespace vkie

#endif  // VKIE_ENCODING_HPP_
