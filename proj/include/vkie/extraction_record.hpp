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

// The structured output of one frame, the request schema for OCR boxes, and an
// Extractor that wraps either trained system behind one call.

#ifndef VKIE_EXTRACTION_RECORD_HPP_
#define VKIE_EXTRACTION_RECORD_HPP_

#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "vkie/corpus.hpp"
#include "vkie/pip_models.hpp"
#include "vkie/uni_model.hpp"

namespace vkie {

inline constexpr const char *kRecordSchemaVersion = "vkie-record/1";

struct RecordSegment {
  int box_id = 0;
  BoxCategory category = BoxCategory::kMisc;
  std::string text;
  BBox bbox;
  friend bool operator==(const RecordSegment &, const RecordSegment &) = default;
};

struct RecordEntity {
  EntityCategory category = EntityCategory::kName;
  std::string text;
  int box_id = 0;
  int start = 0;  // code points into the box text
  int end = 0;
  friend bool operator==(const RecordEntity &, const RecordEntity &) = default;
};

// A matched pair; indices point into entities.
struct RecordLink {
  int name_index = 0;
  int identity_index = 0;
  double confidence = 0.0;
  friend bool operator==(const RecordLink &, const RecordLink &) = default;
};

struct ExtractionRecord {
  std::string frame_id;
  std::vector<RecordSegment> segments;  // Title, PersonInfo and Subtitle boxes
  std::vector<RecordEntity> entities;
  std::vector<RecordLink> links;
  std::string model;  // "pip" or "uni"
  double timing_ms = 0.0;

  // Throws LoadError when an index does not resolve or a confidence is outside [0, 1].
  void validate() const;
  friend bool operator==(const ExtractionRecord &, const ExtractionRecord &) = default;
};

nlohmann::json to_json(const ExtractionRecord &r);
// Throws LoadError naming the offending field.
ExtractionRecord record_from_json(const nlohmann::json &j);

ExtractionRecord make_record(const FrameExtraction &extraction, const std::string &frame_id,
                             const std::string &model, double timing_ms);

// Request error carrying the JSON path of the bad field.
class RequestError : public Error {
 public:
  RequestError(std::string field, const std::string &message)
      : Error(field + ": " + message), field_(std::move(field)) {}
  const std::string &field() const { return field_; }

 private:
  std::string field_;
};

// Boxes JSON: either a list or {"boxes": [...]}; each entry is
// {"text": str, "bbox": [x_min, y_min, x_max, y_max]} or
// {"text": str, "quad": [[x, y] x 4]}.
std::vector<OcrEntry> parse_ocr_boxes(const nlohmann::json &j);

// A loaded system of either kind. Weights are read-only after construction, so
// extract may run from several threads at once.
class Extractor {
 public:
  static Extractor load_uni(const std::filesystem::path &checkpoint);
  static Extractor load_pip(const std::filesystem::path &btc, const std::filesystem::path &er,
                            const std::filesystem::path &el);
  explicit Extractor(UniSystem system);
  explicit Extractor(PipSystem system);

  ExtractionRecord extract(const Image &image, const std::vector<OcrEntry> &boxes, const std::string &frame_id) const;
  ExtractionRecord extract(const Image &image, const std::vector<BoxRecord> &boxes, const std::string &frame_id) const;

  const std::string &model() const { return model_; }
  // Hash of the model config and tokenizer.
  const std::string &config_hash() const { return hash_; }

 private:
  std::variant<UniSystem, PipSystem> system_;
  std::string model_;
  std::string hash_;
};

}  // namespace vkie

#endif  // VKIE_EXTRACTION_RECORD_HPP_
