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

// Synthetic labeled frame corpora: generation, on-disk format and OCR
// ingestion.
//
// A generated frame mimics a news lower-third layout: titles in a top band,
// subtitles in a bottom band, person groups ("Name, Identity" in one box or a
// name box stacked directly above an identity box) in the middle band, and
// Misc clutter (tickers, logos, blurred background text) anywhere. Each
// category has a distinct background/foreground palette so that visual cues are
// discriminative.

#ifndef VKIE_CORPUS_HPP_
#define VKIE_CORPUS_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "vkie/types.hpp"

namespace vkie {

using Rgb = std::array<std::uint8_t, 3>;

struct Lexicon {
  std::vector<std::string> first_names;
  std::vector<std::string> last_names;
  // Roles ending in " of", " at" or " for" are completed with an organisation.
  std::vector<std::string> roles;
  std::vector<std::string> organisations;
  std::vector<std::string> headline_words;
  std::vector<std::string> subtitle_words;

  static Lexicon ascii_default();
  friend bool operator==(const Lexicon &, const Lexicon &) = default;
};

struct CategoryStyle {
  Rgb background{0, 0, 0};
  Rgb foreground{255, 255, 255};
  bool has_background = true;
  // Hershey font scale at a 360 px tall frame; scaled with the frame height.
  double font_scale_min = 0.5;
  double font_scale_max = 0.6;
  friend bool operator==(const CategoryStyle &, const CategoryStyle &) = default;
};

// Vertical band [top, bottom) as fractions of the frame height.
struct Band {
  double top = 0.0;
  double bottom = 1.0;
  friend bool operator==(const Band &, const Band &) = default;
};

struct FrameSpec {
  int width = 640;
  int height = 360;

  int titles = 1;
  int subtitles = 1;
  // Number of person groups; each yields one Name and one Identity span.
  int persons = 1;
  int misc = 2;

  // Probability that a person group is drawn as two stacked boxes instead of a
  // single "NAME<sep>IDENTITY" box.
  double stacked_probability = 0.3;
  std::string separator = ", ";

  Lexicon lexicon = Lexicon::ascii_default();
  // Indexed by BoxCategory.
  std::array<CategoryStyle, kNumBoxCategories> styles = default_styles();
  double color_jitter = 12.0;

  Band title_band{0.02, 0.26};
  Band person_band{0.36, 0.80};
  Band subtitle_band{0.80, 0.99};

  // Share of Misc boxes rendered as blurred, low-contrast headline text.
  double misc_headline_probability = 0.35;
  // Person groups keep at least this vertical distance (fraction of height)
  // from each other so that vertical adjacency identifies a group.
  double adjacency_gap = 0.06;
  int max_placement_attempts = 300;

  static std::array<CategoryStyle, kNumBoxCategories> default_styles();
  friend bool operator==(const FrameSpec &, const FrameSpec &) = default;
};

// Renders one labeled frame. Pure function of (spec, seed).
LabeledFrame generate_frame(const FrameSpec &spec, std::uint64_t seed);

struct CountRange {
  int min = 0;
  int max = 0;
  friend bool operator==(const CountRange &, const CountRange &) = default;
};

struct CorpusConfig {
  int frames = 500;
  int sources = 10;
  std::array<int, 3> split_ratio{3, 1, 1};
  std::uint64_t seed = 1;

  // Dimensions, palette and lexicon; per-frame counts come from the ranges.
  FrameSpec frame;
  CountRange titles{0, 1};
  CountRange subtitles{0, 1};
  CountRange persons{0, 2};
  CountRange misc{0, 3};
  // Per-source palette offset amplitude, simulating channel branding.
  double source_color_shift = 16.0;
  friend bool operator==(const CorpusConfig &, const CorpusConfig &) = default;
};

// Number of sources per split for a given source count and ratio; the
// remainder goes to train. Throws ConfigError when a split would be empty.
std::array<int, 3> split_source_counts(int sources, const std::array<int, 3> &ratio);

// Deterministic per-frame seed derivation.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

CorpusSplits generate_corpus(const CorpusConfig &config);

inline constexpr const char *kCorpusSchemaVersion = "vkie-corpus/1";

// Writes manifest.json, {train,dev,test}.jsonl and images/<frame_id>.png under
// dir. config_echo (JSON text, may be empty) is stored in the manifest.
void write_corpus(const CorpusSplits &corpus, const std::filesystem::path &dir,
                  const std::string &config_echo = "");
CorpusSplits read_corpus(const std::filesystem::path &dir);

// Frame record (one JSON line) without the image payload.
std::string frame_to_record(const LabeledFrame &frame, const std::string &image_path);

// PNG IO for Image; lossless.
void write_png(const Image &image, const std::filesystem::path &path);
Image read_png(const std::filesystem::path &path);
Image decode_png(const std::vector<std::uint8_t> &bytes);
std::vector<std::uint8_t> encode_png(const Image &image);

// ---- OCR ingestion ----

struct OcrRect {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;
};
using OcrQuad = std::array<std::array<double, 2>, 4>;

struct OcrEntry {
  std::string text;
  std::variant<OcrRect, OcrQuad> geometry;
};

struct IngestResult {
  std::vector<BoxRecord> boxes;
  std::vector<std::string> warnings;
};

// Unlabeled BoxRecords with ids assigned in input order. Empty texts are
// dropped; rects are clamped to the frame (with a warning).
IngestResult ingest_ocr(const std::vector<OcrEntry> &raw, int frame_width, int frame_height);
IngestResult ingest_ocr(const std::vector<OcrEntry> &raw, const Image &frame_image);

}  // namespace vkie

#endif  // VKIE_CORPUS_HPP_
