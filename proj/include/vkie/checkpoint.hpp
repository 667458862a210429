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

// Weight files.
//
//   VKIECKPT 1\n
//   <one-line JSON header>\n
//   <tensor data, little-endian float32, concatenated in header order>
//
// The header holds "kind" (pip_btc | pip_er | pip_el | uni), "config" (model
// configuration, Table-style keys), "tokenizer" (vocabulary and mode), and
// "tensors": [{"name", "shape", "offset"}] with offsets in bytes from the
// start of the data block. Kind-specific entries: "loss_weights" and
// "modality" for uni.

#ifndef VKIE_CHECKPOINT_HPP_
#define VKIE_CHECKPOINT_HPP_

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "json.hpp"
#include "vkie/pip_models.hpp"
#include "vkie/uni_model.hpp"

namespace vkie {

inline constexpr const char *kCheckpointMagic = "VKIECKPT";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  std::string kind;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<std::pair<std::string, torch::Tensor>> tensors;

  bool empty() const { return tensors.empty(); }
};

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt);
// Throws LoadError on a bad magic line, header or truncated data.
Checkpoint load_checkpoint(const std::filesystem::path &path);

// Copies the module's parameters and buffers (detached clones).
Checkpoint capture_module(const std::string &kind, const torch::nn::Module &module);
// Strict load: every parameter and buffer must be present with equal shape.
void restore_module(torch::nn::Module &module, const Checkpoint &ckpt);

// Checkpoints carrying config and tokenizer, and the systems built from them.
Checkpoint pip_checkpoint(const std::string &kind, const torch::nn::Module &module, const ModelConfig &config,
                          const Tokenizer &tokenizer);
Checkpoint uni_checkpoint(const UniSystem &system);
PipSystem load_pip_system(const Checkpoint &btc, const Checkpoint &er, const Checkpoint &el);
PipSystem load_pip_system(const std::filesystem::path &btc, const std::filesystem::path &er,
                          const std::filesystem::path &el);
UniSystem load_uni_system(const Checkpoint &ckpt);
UniSystem load_uni_system(const std::filesystem::path &path);

}  // namespace vkie

#endif  // VKIE_CHECKPOINT_HPP_
