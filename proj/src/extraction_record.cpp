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

#include "vkie/extraction_record.hpp"

#include <chrono>

#include "vkie/checkpoint.hpp"
#include "vkie/config_io.hpp"

namespace vkie {

using nlohmann::json;

void ExtractionRecord::validate() const {
  const int n = static_cast<int>(entities.size());
  for (size_t i = 0; i < links.size(); ++i) {
    const auto &l = links[i];
    const std::string where = "links[" + std::to_string(i) + "]";
    if (l.name_index < 0 || l.name_index >= n || entities[l.name_index].category != EntityCategory::kName)
      throw LoadError(where + ".name_index does not refer to a Name entity");
    if (l.identity_index < 0 || l.identity_index >= n ||
        entities[l.identity_index].category != EntityCategory::kIdentity)
      throw LoadError(where + ".identity_index does not refer to an Identity entity");
    if (!(l.confidence >= 0.0 && l.confidence <= 1.0)) throw LoadError(where + ".confidence outside [0, 1]");
  }
  for (size_t i = 0; i < entities.size(); ++i)
    if (entities[i].start < 0 || entities[i].end <= entities[i].start)
      throw LoadError("entities[" + std::to_string(i) + "].span is empty or negative");
  if (model != "pip" && model != "uni") throw LoadError("model must be \"pip\" or \"uni\"");
}

json to_json(const ExtractionRecord &r) {
  json segments = json::array(), entities = json::array(), links = json::array();
  for (const auto &s : r.segments)
    segments.push_back({{"box_id", s.box_id},
                        {"category", to_string(s.category)},
                        {"text", s.text},
                        {"bbox", {s.bbox.x_min, s.bbox.y_min, s.bbox.x_max, s.bbox.y_max}}});
  for (const auto &e : r.entities)
    entities.push_back(
        {{"category", to_string(e.category)}, {"text", e.text}, {"box_id", e.box_id}, {"span", {e.start, e.end}}});
  for (const auto &l : r.links)
    links.push_back({{"name_index", l.name_index}, {"identity_index", l.identity_index}, {"confidence", l.confidence}});
  return {{"schema_version", kRecordSchemaVersion},
          {"frame_id", r.frame_id},
          {"segments", segments},
          {"entities", entities},
          {"links", links},
          {"model", r.model},
          {"timing_ms", r.timing_ms}};
}

namespace {

template <typename T>
T field(const json &j, const std::string &key, const std::string &where) {
  if (!j.is_object() || !j.contains(key)) throw LoadError(where + "." + key + " is missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception &) {
    throw LoadError(where + "." + key + " has the wrong type");
  }
}

}  // namespace

ExtractionRecord record_from_json(const json &j) {
  if (field<std::string>(j, "schema_version", "record") != kRecordSchemaVersion)
    throw LoadError("record.schema_version is not " + std::string(kRecordSchemaVersion));
  ExtractionRecord r;
  r.frame_id = field<std::string>(j, "frame_id", "record");
  r.model = field<std::string>(j, "model", "record");
  r.timing_ms = field<double>(j, "timing_ms", "record");
  try {
    const auto segs = field<json>(j, "segments", "record");
    for (size_t i = 0; i < segs.size(); ++i) {
      const std::string w = "segments[" + std::to_string(i) + "]";
      RecordSegment s;
      s.box_id = field<int>(segs[i], "box_id", w);
      s.category = parse_box_category(field<std::string>(segs[i], "category", w));
      s.text = field<std::string>(segs[i], "text", w);
      const auto b = field<std::array<int, 4>>(segs[i], "bbox", w);
      s.bbox = {b[0], b[1], b[2], b[3]};
      r.segments.push_back(std::move(s));
    }
    const auto ents = field<json>(j, "entities", "record");
    for (size_t i = 0; i < ents.size(); ++i) {
      const std::string w = "entities[" + std::to_string(i) + "]";
      RecordEntity e;
      e.category = parse_entity_category(field<std::string>(ents[i], "category", w));
      e.text = field<std::string>(ents[i], "text", w);
      e.box_id = field<int>(ents[i], "box_id", w);
      const auto span = field<std::array<int, 2>>(ents[i], "span", w);
      e.start = span[0];
      e.end = span[1];
      r.entities.push_back(std::move(e));
    }
    const auto links = field<json>(j, "links", "record");
    for (size_t i = 0; i < links.size(); ++i) {
      const std::string w = "links[" + std::to_string(i) + "]";
      r.links.push_back({field<int>(links[i], "name_index", w), field<int>(links[i], "identity_index", w),
                         field<double>(links[i], "confidence", w)});
    }
  } catch (const ConfigError &e) {
    throw LoadError(std::string("record: ") + e.what());
  }
  r.validate();
  return r;
}

ExtractionRecord make_record(const FrameExtraction &extraction, const std::string &frame_id, const std::string &model,
                             double timing_ms) {
  ExtractionRecord r;
  r.frame_id = frame_id;
  r.model = model;
  r.timing_ms = timing_ms;
  for (const auto *b : extraction.segments()) r.segments.push_back({b->box_id, b->category, b->text, b->bbox});
  for (const auto &m : extraction.mentions) r.entities.push_back({m.category, m.text, m.box_id, m.start, m.end});
  for (const auto &p : extraction.pairs)
    if (p.matched) r.links.push_back({p.name_index, p.identity_index, static_cast<double>(p.probability)});
  return r;
}

std::vector<OcrEntry> parse_ocr_boxes(const json &j) {
  const json *list = &j;
  if (j.is_object()) {
    if (!j.contains("boxes")) throw RequestError("boxes", "missing");
    list = &j["boxes"];
  }
  if (!list->is_array()) throw RequestError("boxes", "expected a list");
  std::vector<OcrEntry> out;
  for (size_t i = 0; i < list->size(); ++i) {
    const auto &e = (*list)[i];
    const std::string w = "boxes[" + std::to_string(i) + "]";
    if (!e.is_object()) throw RequestError(w, "expected an object");
    if (!e.contains("text") || !e["text"].is_string()) throw RequestError(w + ".text", "expected a string");
    OcrEntry entry;
    entry.text = e["text"].get<std::string>();
    auto number = [&](const json &v, const std::string &f) {
      if (!v.is_number()) throw RequestError(f, "expected a number");
      return v.get<double>();
    };
    if (e.contains("bbox")) {
      const auto &b = e["bbox"];
      if (!b.is_array() || b.size() != 4) throw RequestError(w + ".bbox", "expected [x_min, y_min, x_max, y_max]");
      entry.geometry = OcrRect{number(b[0], w + ".bbox[0]"), number(b[1], w + ".bbox[1]"),
                               number(b[2], w + ".bbox[2]"), number(b[3], w + ".bbox[3]")};
    } else if (e.contains("quad")) {
      const auto &q = e["quad"];
      if (!q.is_array() || q.size() != 4) throw RequestError(w + ".quad", "expected four [x, y] points");
      OcrQuad quad;
      for (size_t k = 0; k < 4; ++k) {
        const std::string f = w + ".quad[" + std::to_string(k) + "]";
        if (!q[k].is_array() || q[k].size() != 2) throw RequestError(f, "expected [x, y]");
        quad[k] = {number(q[k][0], f), number(q[k][1], f)};
      }
      entry.geometry = quad;
    } else {
      throw RequestError(w, "needs \"bbox\" or \"quad\"");
    }
    out.push_back(std::move(entry));
  }
  return out;
}

Extractor::Extractor(UniSystem system) : system_(std::move(system)), model_("uni") {
  const auto &s = std::get<UniSystem>(system_);
  hash_ = vkie::config_hash({{"model", model_},
                             {"config", to_json(s.config)},
                             {"tokenizer", to_json(s.tokenizer)},
                             {"encoding", to_json(s.encoding)},
                             {"modality", to_string(s.modality)}});
}

Extractor::Extractor(PipSystem system) : system_(std::move(system)), model_("pip") {
  const auto &s = std::get<PipSystem>(system_);
  hash_ = vkie::config_hash({{"model", model_}, {"config", to_json(s.config)}, {"tokenizer", to_json(s.tokenizer)}});
}

Extractor Extractor::load_uni(const std::filesystem::path &checkpoint) { return Extractor(load_uni_system(checkpoint)); }

Extractor Extractor::load_pip(const std::filesystem::path &btc, const std::filesystem::path &er,
                              const std::filesystem::path &el) {
  return Extractor(load_pip_system(btc, er, el));
}

ExtractionRecord Extractor::extract(const Image &image, const std::vector<OcrEntry> &boxes,
                                    const std::string &frame_id) const {
  return extract(image, ingest_ocr(boxes, image).boxes, frame_id);
}

ExtractionRecord Extractor::extract(const Image &image, const std::vector<BoxRecord> &boxes,
                                    const std::string &frame_id) const {
  const auto t0 = std::chrono::steady_clock::now();
  FrameExtraction x;
  if (const auto *uni = std::get_if<UniSystem>(&system_))
    x = uni_extract(*uni, image, boxes).extraction;
  else
    x = run_pipeline(std::get<PipSystem>(system_), image, boxes).extraction;
  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return make_record(x, frame_id, model_, ms);
}

}  // namespace vkie
