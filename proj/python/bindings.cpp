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

// Low-level bindings. Structured values cross the boundary as JSON strings;
// the vkie package turns them into dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vkie/checkpoint.hpp"
#include "vkie/config_io.hpp"
#include "vkie/corpus.hpp"
#include "vkie/extraction_record.hpp"
#include "vkie/metrics.hpp"
#include "vkie/pip_models.hpp"
#include "vkie/train.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

vkie::ExperimentConfig experiment(const std::string &config_json) {
  return vkie::experiment_from_json(config_json.empty() ? json::object() : json::parse(config_json));
}

std::string extract_json(const vkie::Extractor &ex, const vkie::Image &image, const std::string &boxes_json,
                         const std::string &frame_id) {
  const auto boxes = vkie::parse_ocr_boxes(json::parse(boxes_json));
  return vkie::to_json(ex.extract(image, boxes, frame_id)).dump();
}

std::string train_json(const std::string &config_json, const std::string &kind, const std::string &out_dir,
                       const std::string &corpus_dir, const std::vector<std::string> &er_checkpoints) {
  const auto config = experiment(config_json);
  const auto corpus = corpus_dir.empty() ? vkie::generate_corpus(config.corpus) : vkie::read_corpus(corpus_dir);
  vkie::TrainInputs in;
  in.corpus = &corpus;
  in.model = config.model;
  in.tokenizer = config.tokenizer;
  in.encoding = config.encoding;
  in.out_dir = out_dir;
  for (const auto &p : er_checkpoints) in.er_checkpoints.push_back(vkie::load_checkpoint(p));
  const auto k = vkie::parse_model_kind(kind);
  const auto result = vkie::train(in, config.train_config(k));
  json runs = json::array();
  for (const auto &r : result.runs)
    runs.push_back({{"seed", r.seed},
                    {"diverged", r.diverged},
                    {"best_epoch", r.best_epoch},
                    {"best_dev", r.best_dev},
                    {"checkpoint", r.checkpoint_path.string()}});
  json agg = json::object();
  for (const auto &[name, stat] : result.aggregate) agg[name] = {{"mean", stat.mean}, {"std", stat.stddev}};
  return json{{"kind", kind}, {"runs", runs}, {"aggregate", agg}}.dump();
}

}  // namespace

PYBIND11_MODULE(_vkie, m) {
  m.doc() = "Key information extraction from video-frame text boxes";

  // Translators run newest first, so the base class is registered before its subclasses.
  auto base = py::register_exception<vkie::Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<vkie::ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<vkie::LoadError>(m, "LoadError", base.ptr());
  py::register_exception<vkie::ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<vkie::RequestError>(m, "RequestError", base.ptr());

  m.def(
      "experiment_config",
      [](const std::string &config_json) { return vkie::to_json(experiment(config_json)).dump(); },
      py::arg("config_json") = "", "Normalised experiment config with every default filled in.");

  m.def(
      "load_experiment", [](const std::string &path) { return vkie::to_json(vkie::load_experiment(path)).dump(); },
      py::arg("path"));

  m.def(
      "generate_corpus",
      [](const std::string &config_json, const std::string &out_dir) {
        py::gil_scoped_release release;
        const auto config = experiment(config_json);
        const auto corpus = vkie::generate_corpus(config.corpus);
        vkie::write_corpus(corpus, out_dir, json{{"corpus", vkie::to_json(config.corpus)}}.dump());
        return std::make_tuple(corpus.train.size(), corpus.dev.size(), corpus.test.size());
      },
      py::arg("config_json"), py::arg("out_dir"), "Writes a corpus; returns (train, dev, test) frame counts.");

  m.def(
      "train",
      [](const std::string &config_json, const std::string &kind, const std::string &out_dir,
         const std::string &corpus_dir, const std::vector<std::string> &er_checkpoints) {
        py::gil_scoped_release release;
        return train_json(config_json, kind, out_dir, corpus_dir, er_checkpoints);
      },
      py::arg("config_json"), py::arg("kind"), py::arg("out_dir"), py::arg("corpus_dir") = "",
      py::arg("er_checkpoints") = std::vector<std::string>{});

  m.def(
      "decode_bio2",
      [](const std::vector<std::string> &tags) {
        std::vector<vkie::BioTag> t;
        for (const auto &s : tags) t.push_back(vkie::parse_bio_tag(s));
        const auto d = vkie::decode_bio2(t);
        std::vector<std::tuple<int, int, std::string>> spans;
        for (const auto &s : d.spans) spans.emplace_back(s.start, s.end, std::string(vkie::to_string(s.category)));
        return std::make_pair(spans, d.repairs);
      },
      py::arg("tags"), "Returns ([(start, end, category)], repairs).");

  py::class_<vkie::Extractor>(m, "Extractor")
      .def_static(
          "load_uni", [](const std::string &path) { return vkie::Extractor::load_uni(path); }, py::arg("checkpoint"))
      .def_static(
          "load_pip",
          [](const std::string &btc, const std::string &er, const std::string &el) {
            return vkie::Extractor::load_pip(btc, er, el);
          },
          py::arg("btc"), py::arg("er"), py::arg("el"))
      .def_property_readonly("model", &vkie::Extractor::model)
      .def_property_readonly("config_hash", &vkie::Extractor::config_hash)
      .def(
          "extract_file",
          [](const vkie::Extractor &ex, const std::string &image_path, const std::string &boxes_json,
             const std::string &frame_id) {
            py::gil_scoped_release release;
            return extract_json(ex, vkie::read_png(image_path), boxes_json, frame_id);
          },
          py::arg("image_path"), py::arg("boxes_json"), py::arg("frame_id") = "")
      .def(
          "extract_png",
          [](const vkie::Extractor &ex, const py::bytes &png, const std::string &boxes_json,
             const std::string &frame_id) {
            const std::string raw = png;
            py::gil_scoped_release release;
            vkie::Image image;
            try {
              image = vkie::decode_png(std::vector<std::uint8_t>(raw.begin(), raw.end()));
            } catch (const vkie::Error &e) {
              throw vkie::RequestError("image", e.what());
            }
            return extract_json(ex, image, boxes_json, frame_id);
          },
          py::arg("png"), py::arg("boxes_json"), py::arg("frame_id") = "");
}
