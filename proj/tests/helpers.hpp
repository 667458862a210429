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

#ifndef VKIE_TESTS_HELPERS_HPP_
#define VKIE_TESTS_HELPERS_HPP_

#include <unistd.h>

#include <filesystem>
#include <ostream>
#include <random>
#include <string>

#include <torch/torch.h>

// libtorch's logging macros share names with doctest's assertions.
#undef CHECK
#undef CHECK_EQ
#undef CHECK_NE
#undef CHECK_LT
#undef CHECK_LE
#undef CHECK_GT
#undef CHECK_GE
#include "doctest.h"

#include "vkie/backbone.hpp"
#include "vkie/corpus.hpp"
#include "vkie/encoding.hpp"
#include "vkie/pip_models.hpp"
#include "vkie/types.hpp"

namespace vkie {

// Failure messages for containers of these types.
inline std::ostream &operator<<(std::ostream &os, Role r) { return os << static_cast<int>(r); }
inline std::ostream &operator<<(std::ostream &os, BioTag t) { return os << to_string(t); }
inline std::ostream &operator<<(std::ostream &os, BoxCategory c) { return os << to_string(c); }
inline std::ostream &operator<<(std::ostream &os, EntityCategory c) { return os << to_string(c); }
inline std::ostream &operator<<(std::ostream &os, const EntitySpan &s) {
  return os << "[" << s.start << "," << s.end << " " << to_string(s.category) << "]";
}

}  // namespace vkie

namespace vkie::testing {

// A few-thousand-parameter config for fast unit tests.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.hidden = 16;
  c.layers = 1;
  c.heads = 2;
  c.ffn = 32;
  c.vocab_size = 99;
  c.max_length = 96;
  c.coord_size = 32;
  c.pos1d_dim = 8;
  c.pos2d_dim = 8;
  c.dropout = 0.0;
  c.cnn_channels = {4, 4, 8};
  c.roi_grid = 2;
  c.visual_dim = 8;
  c.visual_heads = 2;
  c.max_grid = 64;
  c.btc_text_layers = 1;
  c.er_text_layers = 1;
  c.box_max_tokens = 48;
  c.el_hidden = 8;
  return c;
}

inline FrameSpec small_spec() {
  FrameSpec s;
  s.width = 320;
  s.height = 180;
  return s;
}

inline CorpusConfig small_corpus(int frames, std::uint64_t seed = 1) {
  CorpusConfig c;
  c.frames = frames;
  c.sources = 5;
  c.seed = seed;
  c.frame = small_spec();
  return c;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / ("vkie-test-" + name + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace vkie::testing

#endif  // VKIE_TESTS_HELPERS_HPP_
