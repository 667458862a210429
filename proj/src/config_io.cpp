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

#include "vkie/config_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

namespace vkie {

using nlohmann::json;

namespace {

void check_keys(const json &j, const std::string &where, std::initializer_list<const char *> allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto &item : j.items())
    if (!ok.count(item.key())) throw ConfigError("unknown key '" + item.key() + "' in " + where);
}

template <typename T>
void read(const json &j, const char *key, T &out, const std::string &where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception &) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

json range_json(const CountRange &r) { return json::array({r.min, r.max}); }

void read_range(const json &j, const char *key, CountRange &r, const std::string &where) {
  if (!j.contains(key)) return;
  std::array<int, 2> v{};
  read(j, key, v, where);
  if (v[0] < 0 || v[1] < v[0]) throw ConfigError(where + "." + key + " must be [min, max] with 0 <= min <= max");
  r = {v[0], v[1]};
}

}  // namespace

json to_json(const ModelConfig &c) {
  return {{"image_channels", 3},
          {"hidden_dimension", c.hidden},
          {"number_of_hidden_layers", c.layers},
          {"attention_heads", c.heads},
          {"intermediate_dimension", c.ffn},
          {"vocabulary_size", c.vocab_size},
          {"token_max_length_in_encoder", c.max_length},
          {"normalized_coordinate_size", c.coord_size},
          {"1d_position_embedding_dimension", c.pos1d_dim},
          {"2d_position_embedding_dimension", c.pos2d_dim},
          {"hidden_layer_dropout_prob", c.dropout},
          {"visual_feature_extractor_channels", c.cnn_channels},
          {"roi_grid", c.roi_grid},
          {"hidden_dimension_of_visual_feature", c.visual_dim},
          {"visual_attention_heads", c.visual_heads},
          {"max_feature_grid", c.max_grid},
          {"btc_textual_feature_extractor_layers", c.btc_text_layers},
          {"er_textual_feature_extractor_layers", c.er_text_layers},
          {"box_max_tokens", c.box_max_tokens},
          {"el_hidden_dimension", c.el_hidden}};
}

ModelConfig model_config_from_json(const json &j, const ModelConfig &base) {
  const std::string w = "model";
  check_keys(j, w,
             {"image_channels", "hidden_dimension", "number_of_hidden_layers", "attention_heads",
              "intermediate_dimension", "vocabulary_size", "token_max_length_in_encoder", "normalized_coordinate_size",
              "1d_position_embedding_dimension", "2d_position_embedding_dimension", "hidden_layer_dropout_prob",
              "visual_feature_extractor_channels", "roi_grid", "hidden_dimension_of_visual_feature",
              "visual_attention_heads", "max_feature_grid", "btc_textual_feature_extractor_layers",
              "er_textual_feature_extractor_layers", "box_max_tokens", "el_hidden_dimension"});
  ModelConfig c = base;
  int channels = 3;
  read(j, "image_channels", channels, w);
  if (channels != 3) throw ConfigError("model.image_channels must be 3");
  read(j, "hidden_dimension", c.hidden, w);
  read(j, "number_of_hidden_layers", c.layers, w);
  read(j, "attention_heads", c.heads, w);
  read(j, "intermediate_dimension", c.ffn, w);
  read(j, "vocabulary_size", c.vocab_size, w);
  read(j, "token_max_length_in_encoder", c.max_length, w);
  read(j, "normalized_coordinate_size", c.coord_size, w);
  read(j, "1d_position_embedding_dimension", c.pos1d_dim, w);
  read(j, "2d_position_embedding_dimension", c.pos2d_dim, w);
  read(j, "hidden_layer_dropout_prob", c.dropout, w);
  read(j, "visual_feature_extractor_channels", c.cnn_channels, w);
  read(j, "roi_grid", c.roi_grid, w);
  read(j, "hidden_dimension_of_visual_feature", c.visual_dim, w);
  read(j, "visual_attention_heads", c.visual_heads, w);
  read(j, "max_feature_grid", c.max_grid, w);
  read(j, "btc_textual_feature_extractor_layers", c.btc_text_layers, w);
  read(j, "er_textual_feature_extractor_layers", c.er_text_layers, w);
  read(j, "box_max_tokens", c.box_max_tokens, w);
  read(j, "el_hidden_dimension", c.el_hidden, w);
  c.validate();
  return c;
}

json to_json(const EncodingConfig &c) {
  return {{"token_max_length_in_encoder", c.max_length},
          {"normalized_coordinate_size", c.coord_size},
          {"row_tolerance_fraction", c.row_tolerance_fraction}};
}

EncodingConfig encoding_config_from_json(const json &j, const EncodingConfig &base) {
  const std::string w = "encoding";
  check_keys(j, w, {"token_max_length_in_encoder", "normalized_coordinate_size", "row_tolerance_fraction"});
  EncodingConfig c = base;
  read(j, "token_max_length_in_encoder", c.max_length, w);
  read(j, "normalized_coordinate_size", c.coord_size, w);
  read(j, "row_tolerance_fraction", c.row_tolerance_fraction, w);
  if (c.max_length < 2 || c.coord_size < 1 || c.row_tolerance_fraction < 0.0)
    throw ConfigError("encoding parameters out of range");
  return c;
}

json to_json(const CorpusConfig &c) {
  return {{"frames", c.frames},
          {"sources", c.sources},
          {"split_ratio", c.split_ratio},
          {"seed", c.seed},
          {"frame_width", c.frame.width},
          {"frame_height", c.frame.height},
          {"titles", range_json(c.titles)},
          {"subtitles", range_json(c.subtitles)},
          {"persons", range_json(c.persons)},
          {"misc", range_json(c.misc)},
          {"stacked_probability", c.frame.stacked_probability},
          {"separator", c.frame.separator},
          {"color_jitter", c.frame.color_jitter},
          {"misc_headline_probability", c.frame.misc_headline_probability},
          {"adjacency_gap", c.frame.adjacency_gap},
          {"max_placement_attempts", c.frame.max_placement_attempts},
          {"source_color_shift", c.source_color_shift}};
}

CorpusConfig corpus_config_from_json(const json &j, const CorpusConfig &base) {
  const std::string w = "corpus";
  check_keys(j, w,
             {"frames", "sources", "split_ratio", "seed", "frame_width", "frame_height", "titles", "subtitles",
              "persons", "misc", "stacked_probability", "separator", "color_jitter", "misc_headline_probability",
              "adjacency_gap", "max_placement_attempts", "source_color_shift"});
  CorpusConfig c = base;
  read(j, "frames", c.frames, w);
  read(j, "sources", c.sources, w);
  read(j, "split_ratio", c.split_ratio, w);
  read(j, "seed", c.seed, w);
  read(j, "frame_width", c.frame.width, w);
  read(j, "frame_height", c.frame.height, w);
  read_range(j, "titles", c.titles, w);
  read_range(j, "subtitles", c.subtitles, w);
  read_range(j, "persons", c.persons, w);
  read_range(j, "misc", c.misc, w);
  read(j, "stacked_probability", c.frame.stacked_probability, w);
  read(j, "separator", c.frame.separator, w);
  read(j, "color_jitter", c.frame.color_jitter, w);
  read(j, "misc_headline_probability", c.frame.misc_headline_probability, w);
  read(j, "adjacency_gap", c.frame.adjacency_gap, w);
  read(j, "max_placement_attempts", c.frame.max_placement_attempts, w);
  read(j, "source_color_shift", c.source_color_shift, w);
  if (c.frames < 0 || c.frame.width <= 0 || c.frame.height <= 0) throw ConfigError("corpus sizes out of range");
  return c;
}

json to_json(const TrainConfig &c) {
  return {{"optimizer", c.optimizer},
          {"learning_rate", c.learning_rate},
          {"weight_decay", c.weight_decay},
          {"batch_size", c.batch_size},
          {"epochs_of_training", c.epochs},
          {"seeds", c.seeds},
          {"warmup_fraction", c.warmup_fraction},
          {"grad_clip", c.grad_clip},
          {"threads", c.threads},
          {"max_train_frames", c.max_train_frames},
          {"trade_off_factors", {c.weights.alpha, c.weights.beta, c.weights.gamma()}},
          {"modality", std::string(to_string(c.modality))}};
}

TrainConfig train_config_from_json(const json &j, const TrainConfig &base) {
  const std::string w = "train." + std::string(to_string(base.kind));
  check_keys(j, w,
             {"optimizer", "learning_rate", "weight_decay", "batch_size", "epochs_of_training", "seeds",
              "warmup_fraction", "grad_clip", "threads", "max_train_frames", "trade_off_factors", "modality"});
  TrainConfig c = base;
  read(j, "optimizer", c.optimizer, w);
  read(j, "learning_rate", c.learning_rate, w);
  read(j, "weight_decay", c.weight_decay, w);
  read(j, "batch_size", c.batch_size, w);
  read(j, "epochs_of_training", c.epochs, w);
  read(j, "seeds", c.seeds, w);
  read(j, "warmup_fraction", c.warmup_fraction, w);
  read(j, "grad_clip", c.grad_clip, w);
  read(j, "threads", c.threads, w);
  read(j, "max_train_frames", c.max_train_frames, w);
  if (j.contains("trade_off_factors")) {
    std::vector<double> f;
    read(j, "trade_off_factors", f, w);
    if (f.size() != 3 || std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9)
      throw ConfigError(w + ".trade_off_factors must be three values summing to 1");
    c.weights = {f[0], f[1]};
  }
  if (j.contains("modality")) c.modality = parse_modality(j.at("modality").get<std::string>());
  c.validate();
  return c;
}

json to_json(const Tokenizer &t) {
  const char *mode = t.mode() == Tokenizer::Mode::kCharacter    ? "character"
                     : t.mode() == Tokenizer::Mode::kWhitespace ? "whitespace"
                                                                : "word";
  return {{"mode", mode}, {"tokens", t.tokens()}};
}

Tokenizer tokenizer_from_json(const json &j) {
  check_keys(j, "tokenizer", {"mode", "tokens", "vocabulary_file"});
  Tokenizer::Mode mode = Tokenizer::Mode::kCharacter;
  if (j.contains("mode")) {
    const auto m = j.at("mode").get<std::string>();
    if (m == "whitespace")
      mode = Tokenizer::Mode::kWhitespace;
    else if (m == "word")
      mode = Tokenizer::Mode::kWord;
    else if (m != "character")
      throw ConfigError("tokenizer.mode must be 'character', 'whitespace' or 'word'");
  }
  if (j.contains("tokens")) return Tokenizer(j.at("tokens").get<std::vector<std::string>>(), mode);
  if (j.contains("vocabulary_file")) return Tokenizer::load(j.at("vocabulary_file").get<std::string>(), mode);
  // Word vocabularies come from the training split unless given explicitly.
  if (mode == Tokenizer::Mode::kWord) return Tokenizer::unfitted(mode);
  return Tokenizer::ascii(mode);
}

ExperimentConfig::ExperimentConfig() {
  for (auto k : {ModelKind::kPipBtc, ModelKind::kPipEr, ModelKind::kPipEl, ModelKind::kUni})
    train.emplace(k, TrainConfig::defaults(k));
}

ExperimentConfig experiment_from_json(const json &j) {
  check_keys(j, "config", {"corpus", "model", "scale", "encoding", "seeds", "train", "tokenizer"});
  ExperimentConfig c;
  if (j.contains("tokenizer")) c.tokenizer = tokenizer_from_json(j.at("tokenizer"));
  if (j.contains("corpus")) c.corpus = corpus_config_from_json(j.at("corpus"));
  ModelConfig base = ModelConfig::desk();
  if (j.contains("scale")) {
    const auto &s = j.at("scale");
    check_keys(s, "scale", {"width_divisor", "depth_divisor"});
    int wd = 1, dd = 1;
    read(s, "width_divisor", wd, "scale");
    read(s, "depth_divisor", dd, "scale");
    base = ModelConfig::paper().scaled(wd, dd);
    base.vocab_size = c.tokenizer.size();
  }
  c.model = j.contains("model") ? model_config_from_json(j.at("model"), base) : base;
  if (c.tokenizer.size() > c.model.vocab_size)
    throw ConfigError("tokenizer has " + std::to_string(c.tokenizer.size()) + " tokens but model.vocabulary_size is " +
                      std::to_string(c.model.vocab_size));
  c.encoding.max_length = c.model.max_length;
  c.encoding.coord_size = c.model.coord_size;
  if (j.contains("encoding")) c.encoding = encoding_config_from_json(j.at("encoding"), c.encoding);
  if (c.encoding.max_length != c.model.max_length || c.encoding.coord_size != c.model.coord_size)
    throw ConfigError("encoding and model disagree on sequence length or coordinate size");

  std::optional<std::vector<std::uint64_t>> seeds;
  if (j.contains("seeds")) {
    std::vector<std::uint64_t> s;
    read(j, "seeds", s, "config");
    seeds = s;
  }
  for (auto &[kind, tc] : c.train)
    if (seeds) tc.seeds = *seeds;
  if (j.contains("train")) {
    const auto &t = j.at("train");
    check_keys(t, "train", {"pip_btc", "pip_er", "pip_el", "uni"});
    for (const auto &item : t.items()) {
      const auto kind = parse_model_kind(item.key());
      c.train[kind] = train_config_from_json(item.value(), c.train[kind]);
    }
  }
  for (auto &[kind, tc] : c.train) tc.validate();
  return c;
}

json to_json(const ExperimentConfig &c) {
  json train = json::object();
  for (const auto &[kind, tc] : c.train) train[std::string(to_string(kind))] = to_json(tc);
  return {{"corpus", to_json(c.corpus)},
          {"model", to_json(c.model)},
          {"encoding", to_json(c.encoding)},
          {"train", train},
          {"tokenizer", to_json(c.tokenizer)}};
}

ExperimentConfig load_experiment(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception &e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return experiment_from_json(j);
}

std::string config_hash(const json &j) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace vkie
