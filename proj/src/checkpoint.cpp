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

#include "vkie/checkpoint.hpp"

#include <bit>
#include <fstream>
#include <map>

#include "vkie/config_io.hpp"

namespace vkie {

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt) {
  nlohmann::json header = ckpt.meta;
  header["kind"] = ckpt.kind;
  header["format_version"] = kCheckpointVersion;
  auto table = nlohmann::json::array();
  int64_t offset = 0;
  std::vector<torch::Tensor> data;
  for (const auto &[name, t] : ckpt.tensors) {
    auto c = t.detach().to(torch::kFloat32).contiguous();
    table.push_back({{"name", name}, {"shape", c.sizes().vec()}, {"offset", offset}});
    offset += c.numel() * 4;
    data.push_back(c);
  }
  header["tensors"] = table;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out << kCheckpointMagic << ' ' << kCheckpointVersion << '\n' << header.dump() << '\n';
  for (const auto &c : data) out.write(reinterpret_cast<const char *>(c.data_ptr<float>()), c.numel() * 4);
  if (!out) throw Error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open checkpoint " + path.string());
  std::string magic, header_line;
  std::getline(in, magic);
  if (magic != std::string(kCheckpointMagic) + " " + std::to_string(kCheckpointVersion))
    throw LoadError(path.string() + ": not a version " + std::to_string(kCheckpointVersion) + " checkpoint");
  std::getline(in, header_line);
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception &e) {
    throw LoadError(path.string() + ": malformed header: " + e.what());
  }
  const auto data_start = in.tellg();
  in.seekg(0, std::ios::end);
  const int64_t data_size = static_cast<int64_t>(in.tellg() - data_start);
  in.seekg(data_start);

  Checkpoint ckpt;
  try {
    ckpt.kind = header.at("kind").get<std::string>();
    for (const auto &entry : header.at("tensors")) {
      const auto name = entry.at("name").get<std::string>();
      const auto shape = entry.at("shape").get<std::vector<int64_t>>();
      const auto offset = entry.at("offset").get<int64_t>();
      auto t = torch::empty(shape, torch::kFloat32);
      if (offset < 0 || offset + t.numel() * 4 > data_size)
        throw LoadError(path.string() + ": tensor " + name + " lies outside the data block");
      in.seekg(data_start + static_cast<std::streamoff>(offset));
      in.read(reinterpret_cast<char *>(t.data_ptr<float>()), t.numel() * 4);
      if (!in) throw LoadError(path.string() + ": truncated data for " + name);
      ckpt.tensors.emplace_back(name, t);
    }
  } catch (const nlohmann::json::exception &e) {
    throw LoadError(path.string() + ": bad header field: " + e.what());
  }
  header.erase("tensors");
  header.erase("kind");
  header.erase("format_version");
  ckpt.meta = header;
  return ckpt;
}

Checkpoint capture_module(const std::string &kind, const torch::nn::Module &module) {
  Checkpoint c;
  c.kind = kind;
  for (const auto &p : module.named_parameters()) c.tensors.emplace_back(p.key(), p.value().detach().clone());
  for (const auto &b : module.named_buffers()) c.tensors.emplace_back(b.key(), b.value().detach().clone());
  return c;
}

void restore_module(torch::nn::Module &module, const Checkpoint &ckpt) {
  std::map<std::string, const torch::Tensor *> by_name;
  for (const auto &[name, t] : ckpt.tensors) by_name[name] = &t;
  torch::NoGradGuard no_grad;
  size_t used = 0;
  auto copy = [&](const std::string &name, torch::Tensor &dst) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw LoadError("checkpoint (" + ckpt.kind + ") lacks tensor " + name);
    if (it->second->sizes() != dst.sizes())
      throw LoadError("checkpoint tensor " + name + " has shape " + c10::str(it->second->sizes()) + ", model expects " +
                      c10::str(dst.sizes()));
    dst.copy_(*it->second);
    ++used;
  };
  for (auto &p : module.named_parameters()) copy(p.key(), p.value());
  for (auto &b : module.named_buffers()) copy(b.key(), b.value());
  if (used != by_name.size()) throw LoadError("checkpoint (" + ckpt.kind + ") has tensors the model does not use");
}

Checkpoint pip_checkpoint(const std::string &kind, const torch::nn::Module &module, const ModelConfig &config,
                          const Tokenizer &tokenizer) {
  Checkpoint c = capture_module(kind, module);
  c.meta["config"] = to_json(config);
  c.meta["tokenizer"] = to_json(tokenizer);
  return c;
}

Checkpoint uni_checkpoint(const UniSystem &system) {
  Checkpoint c = capture_module("uni", *system.model);
  c.meta["config"] = to_json(system.config);
  c.meta["tokenizer"] = to_json(system.tokenizer);
  c.meta["encoding"] = to_json(system.encoding);
  c.meta["loss_weights"] = {system.weights.alpha, system.weights.beta, system.weights.gamma()};
  c.meta["modality"] = std::string(to_string(system.modality));
  return c;
}

namespace {

void expect_kind(const Checkpoint &c, const std::string &kind) {
  if (c.kind != kind) throw LoadError("expected a " + kind + " checkpoint, got " + c.kind);
}

ModelConfig config_of(const Checkpoint &c) {
  try {
    return model_config_from_json(c.meta.at("config"));
  } catch (const nlohmann::json::exception &e) {
    throw LoadError("checkpoint (" + c.kind + ") lacks a model config: " + e.what());
  } catch (const ConfigError &e) {
    throw LoadError("checkpoint (" + c.kind + ") has an invalid model config: " + e.what());
  }
}

Tokenizer tokenizer_of(const Checkpoint &c) {
  try {
    return tokenizer_from_json(c.meta.at("tokenizer"));
  } catch (const nlohmann::json::exception &e) {
    throw LoadError("checkpoint (" + c.kind + ") lacks a tokenizer: " + e.what());
  }
}

}  // namespace

PipSystem load_pip_system(const Checkpoint &btc, const Checkpoint &er, const Checkpoint &el) {
  expect_kind(btc, "pip_btc");
  expect_kind(er, "pip_er");
  expect_kind(el, "pip_el");
  const auto config = config_of(btc);
  if (!(config_of(er) == config) || !(config_of(el) == config))
    throw LoadError("pipeline checkpoints were trained with different model configs");
  PipSystem s = PipSystem::create(config, tokenizer_of(btc));
  restore_module(*s.btc, btc);
  restore_module(*s.er, er);
  restore_module(*s.el, el);
  s.eval();
  return s;
}

PipSystem load_pip_system(const std::filesystem::path &btc, const std::filesystem::path &er,
                          const std::filesystem::path &el) {
  return load_pip_system(load_checkpoint(btc), load_checkpoint(er), load_checkpoint(el));
}

UniSystem load_uni_system(const Checkpoint &ckpt) {
  expect_kind(ckpt, "uni");
  const auto config = config_of(ckpt);
  Modality modality = Modality::kTextVisual;
  if (ckpt.meta.contains("modality")) modality = parse_modality(ckpt.meta["modality"].get<std::string>());
  UniSystem s = UniSystem::create(config, tokenizer_of(ckpt), modality);
  if (ckpt.meta.contains("encoding")) s.encoding = encoding_config_from_json(ckpt.meta["encoding"]);
  if (ckpt.meta.contains("loss_weights")) {
    const auto w = ckpt.meta["loss_weights"];
    s.weights = {w.at(0).get<double>(), w.at(1).get<double>()};
  }
  restore_module(*s.model, ckpt);
  s.model->eval();
  return s;
}

UniSystem load_uni_system(const std::filesystem::path &path) { return load_uni_system(load_checkpoint(path)); }

}  // namespace vkie
