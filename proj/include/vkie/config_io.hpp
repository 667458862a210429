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

// JSON experiment configuration. Model keys follow the hyperparameter table
// wording ("hidden_dimension", "number_of_hidden_layers", ...). Unknown keys
// are rejected so typos surface as ConfigError.

#ifndef VKIE_CONFIG_IO_HPP_
#define VKIE_CONFIG_IO_HPP_

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"
#include "vkie/backbone.hpp"
#include "vkie/corpus.hpp"
#include "vkie/encoding.hpp"
#include "vkie/train.hpp"

namespace vkie {

nlohmann::json to_json(const ModelConfig &c);
ModelConfig model_config_from_json(const nlohmann::json &j, const ModelConfig &base = ModelConfig::paper());

nlohmann::json to_json(const EncodingConfig &c);
EncodingConfig encoding_config_from_json(const nlohmann::json &j, const EncodingConfig &base = {});

nlohmann::json to_json(const CorpusConfig &c);
CorpusConfig corpus_config_from_json(const nlohmann::json &j, const CorpusConfig &base = {});

nlohmann::json to_json(const TrainConfig &c);
TrainConfig train_config_from_json(const nlohmann::json &j, const TrainConfig &base);

nlohmann::json to_json(const Tokenizer &t);
Tokenizer tokenizer_from_json(const nlohmann::json &j);

// Whole experiment file:
// {"corpus": {...}, "model": {...}, "scale": {"width_divisor", "depth_divisor"},
//  "encoding": {...}, "seeds": [...], "train": {"uni": {...}, "pip_btc": {...}, ...}}
struct ExperimentConfig {
  CorpusConfig corpus;
  ModelConfig model = ModelConfig::desk();
  EncodingConfig encoding;
  std::map<ModelKind, TrainConfig> train;
  Tokenizer tokenizer = Tokenizer::ascii();

  ExperimentConfig();
  const TrainConfig &train_config(ModelKind kind) const { return train.at(kind); }
};

ExperimentConfig experiment_from_json(const nlohmann::json &j);
nlohmann::json to_json(const ExperimentConfig &c);
ExperimentConfig load_experiment(const std::filesystem::path &path);

// FNV-1a 64-bit of the canonical JSON dump, hex encoded.
std::string config_hash(const nlohmann::json &j);

}  // namespace vkie

#endif  // VKIE_CONFIG_IO_HPP_
