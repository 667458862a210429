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

#ifndef VKIE_TYPES_HPP_
#define VKIE_TYPES_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace vkie {

// Segment-level category of one OCR box.
enum class BoxCategory : int { kTitle = 0, kPersonInfo = 1, kSubtitle = 2, kMisc = 3 };
inline constexpr int kNumBoxCategories = 4;

// Entity-level category inside PersonInfo text.
enum class EntityCategory : int { kName = 0, kIdentity = 1 };
inline constexpr int kNumEntityCategories = 2;

std::string_view to_string(BoxCategory c);
std::string_view to_string(EntityCategory c);
BoxCategory parse_box_category(std::string_view s);
EntityCategory parse_entity_category(std::string_view s);

// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class LoadError : public Error {
 public:
  using Error::Error;
};

class CapacityError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

// Pixel rectangle, max coordinates exclusive.
struct BBox {
  int x_min = 0;
  int y_min = 0;
  int x_max = 0;
  int y_max = 0;

  int width() const { return x_max - x_min; }
  int height() const { return y_max - y_min; }
  bool valid() const { return x_min < x_max && y_min < y_max; }
  bool intersects(const BBox &o) const {
    return x_min < o.x_max && o.x_min < x_max && y_min < o.y_max && o.y_min < y_max;
  }
  friend bool operator==(const BBox &, const BBox &) = default;
};

// Character span [start, end) in code points.
struct EntitySpan {
  int start = 0;
  int end = 0;
  EntityCategory category = EntityCategory::kName;
  friend bool operator==(const EntitySpan &, const EntitySpan &) = default;
};

struct BoxRecord {
  int box_id = 0;
  std::string text;
  BBox bbox;
  std::optional<BoxCategory> category;
  std::vector<EntitySpan> entity_spans;
  friend bool operator==(const BoxRecord &, const BoxRecord &) = default;
};

// Reference to a labeled span: (box_id, index into entity_spans).
struct EntityRef {
  int box_id = 0;
  int span_index = 0;
  friend bool operator==(const EntityRef &, const EntityRef &) = default;
  friend auto operator<=>(const EntityRef &, const EntityRef &) = default;
};

struct Link {
  EntityRef name;
  EntityRef identity;
  bool matched = false;
  friend bool operator==(const Link &, const Link &) = default;
};

// Interleaved 8-bit RGB raster, row-major.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 0) {}

  std::uint8_t *pixel(int x, int y) { return rgb.data() + (static_cast<size_t>(y) * width + x) * 3; }
  const std::uint8_t *pixel(int x, int y) const {
    return rgb.data() + (static_cast<size_t>(y) * width + x) * 3;
  }
  bool empty() const { return rgb.empty(); }
  friend bool operator==(const Image &, const Image &) = default;
};

struct LabeledFrame {
  std::string frame_id;
  std::string source_id;
  Image image;
  std::vector<BoxRecord> boxes;
  std::vector<Link> links;

  const BoxRecord *find_box(int box_id) const;
  friend bool operator==(const LabeledFrame &, const LabeledFrame &) = default;
};

struct CorpusSplits {
  std::vector<LabeledFrame> train;
  std::vector<LabeledFrame> dev;
  std::vector<LabeledFrame> test;
  friend bool operator==(const CorpusSplits &, const CorpusSplits &) = default;
};

// Checks the BoxRecord and LabeledFrame invariants; throws LoadError naming the
// offending frame/box.
void validate_frame(const LabeledFrame &frame);

// Every Name x Identity span pair of a frame, in (box order, span order).
std::vector<std::pair<EntityRef, EntityRef>> name_identity_pairs(const LabeledFrame &frame);

namespace utf8 {
// Splits a UTF-8 string into code points; invalid bytes decode to U+FFFD.
std::vector<char32_t> decode(std::string_view s);
std::string encode(char32_t cp);
std::string encode(const std::vector<char32_t> &cps);
size_t length(std::string_view s);
// Substring by code point range [start, end).
std::string substr(std::string_view s, int start, int end);
}  // namespace utf8

}  // namespace vkie

#endif  // VKIE_TYPES_HPP_
