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

// Acceptance suite. Usage: vkie_acceptance [--clean] [--artifacts DIR] [N ...]
// Prints one PASS/FAIL line per requested criterion (all ten by default) and
// exits non-zero when any fails. Trained checkpoints are shared between
// criteria through the artifacts directory.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "oracles.hpp"
#include "vkie/backbone.hpp"
#include "vkie/checkpoint.hpp"
#include "vkie/config_io.hpp"
#include "vkie/corpus.hpp"
#include "vkie/encoding.hpp"
#include "vkie/experiments.hpp"
#include "vkie/metrics.hpp"
#include "vkie/pip_models.hpp"
#include "vkie/train.hpp"
#include "vkie/uni_model.hpp"

namespace fs = std::filesystem;
using namespace vkie;

namespace {

// Pinned tolerances and budgets.
constexpr double kLossRelTol = 1e-6;
constexpr double kGradRelTol = 1e-3;
constexpr double kGradAbsFloor = 1e-7;  // for entries whose true gradient is ~0
constexpr double kGradEps = 1e-6;
constexpr int kGradConfigs = 20;
constexpr int kGradSamples = 40;
constexpr double kBtcMin = 0.95, kErMin = 0.90, kElMin = 0.85;
constexpr int kSeeds = 3;

constexpr double kBudget1 = 10, kBudget2 = 5, kBudget3 = 120, kBudget4 = 30, kBudget5 = 1800, kBudget6 = 600,
                 kBudget7 = 300, kBudget8 = 1800, kBudget9 = 5, kBudget10 = 5;

struct Outcome {
  bool pass = false;
  std::string detail;
  double budget_s = 0;
  double charged_s = -1;  // time compared to the budget; -1 = whole criterion
};

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char *f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double median_of(std::vector<double> v) { return median(std::move(v)); }

// ---------------------------------------------------------------- artifacts

struct Shared {
  fs::path dir;
  ExperimentConfig config;
  std::optional<CorpusSplits> corpus;
  double corpus_seconds = 0;

  const CorpusSplits &splits() {
    if (!corpus) {
      Stopwatch w;
      corpus = generate_corpus(config.corpus);
      corpus_seconds = w.seconds();
      std::cerr << "generated corpus: " << corpus->train.size() << "/" << corpus->dev.size() << "/"
                << corpus->test.size() << " frames in " << fmt("%.1f", corpus_seconds) << " s\n";
    }
    return *corpus;
  }

  TrainInputs inputs(const fs::path &out) {
    fs::create_directories(out);
    TrainInputs in;
    in.corpus = &splits();
    in.model = config.model;
    in.tokenizer = config.tokenizer;
    in.encoding = config.encoding;
    in.out_dir = out;
    in.log = [](const std::string &line) { std::cerr << "  " << line << "\n"; };
    return in;
  }

  TrainConfig train_config(ModelKind kind) const {
    auto c = config.train_config(kind);
    c.seeds.resize(kSeeds);
    for (int i = 0; i < kSeeds; ++i) c.seeds[i] = static_cast<std::uint64_t>(i + 1);
    return c;
  }

  static fs::path ckpt(const fs::path &sub, ModelKind kind, int seed) {
    return sub / (std::string(to_string(kind)) + "-seed" + std::to_string(seed) + ".ckpt");
  }

  static bool have(const fs::path &sub, const std::vector<ModelKind> &kinds) {
    for (auto k : kinds)
      for (int s = 1; s <= kSeeds; ++s)
        if (!fs::exists(ckpt(sub, k, s))) return false;
    return true;
  }
};

// Returns (systems, seconds spent training in this call).
std::pair<std::vector<UniSystem>, double> uni_systems(Shared &sh, Modality modality) {
  const auto sub = sh.dir / (modality == Modality::kTextVisual ? "uni" : "uni_" + std::string(to_string(modality)));
  double spent = 0;
  if (!Shared::have(sub, {ModelKind::kUni})) {
    auto in = sh.inputs(sub);
    Stopwatch w;
    auto c = sh.train_config(ModelKind::kUni);
    c.modality = modality;
    train(in, c);
    spent = w.seconds();
  }
  std::vector<UniSystem> out;
  for (int s = 1; s <= kSeeds; ++s)
    if (fs::exists(Shared::ckpt(sub, ModelKind::kUni, s)))
      out.push_back(load_uni_system(Shared::ckpt(sub, ModelKind::kUni, s)));
  return {std::move(out), spent};
}

struct PipSet {
  std::vector<PipSystem> full;  // fully trained BTC
  std::vector<PipSystem> weak;  // under-trained BTC, same ER and EL
  double train_seconds = 0;
};

PipSet pip_systems(Shared &sh, bool with_weak) {
  PipSet set;
  const auto sub = sh.dir / "pip";
  const auto weak_sub = sh.dir / "pip_weak";
  Stopwatch w;
  if (!Shared::have(sub, {ModelKind::kPipBtc, ModelKind::kPipEr, ModelKind::kPipEl})) {
    auto in = sh.inputs(sub);
    train(in, sh.train_config(ModelKind::kPipBtc));
    const auto er = train(in, sh.train_config(ModelKind::kPipEr));
    for (const auto &r : er.runs) in.er_checkpoints.push_back(r.checkpoint);
    train(in, sh.train_config(ModelKind::kPipEl));
  }
  if (with_weak && !Shared::have(weak_sub, {ModelKind::kPipBtc})) {
    auto in = sh.inputs(weak_sub);
    auto c = sh.train_config(ModelKind::kPipBtc);
    c.max_train_frames = 60;
    c.epochs = 2;
    train(in, c);
  }
  set.train_seconds = w.seconds();
  for (int s = 1; s <= kSeeds; ++s) {
    const auto er = Shared::ckpt(sub, ModelKind::kPipEr, s), el = Shared::ckpt(sub, ModelKind::kPipEl, s);
    set.full.push_back(load_pip_system(Shared::ckpt(sub, ModelKind::kPipBtc, s), er, el));
    if (with_weak) set.weak.push_back(load_pip_system(Shared::ckpt(weak_sub, ModelKind::kPipBtc, s), er, el));
  }
  return set;
}

// ---------------------------------------------------------------- criterion 1

std::string sequence_violation(const InputSequence &seq, const std::vector<BoxRecord> &boxes, const Tokenizer &tok,
                               const EncodingConfig &enc, int frame_height) {
  const int L = enc.max_length;
  if (seq.length != L) return "length";
  const auto ordered = order_boxes(boxes, enc.row_tolerance_fraction * frame_height);
  const int M = static_cast<int>(ordered.size());
  if (seq.num_boxes != M) return "box count";

  // Reading-order token stream, truncated to what fits.
  std::vector<std::pair<int, int>> stream;  // (box index, token id)
  for (int b = 0; b < M; ++b)
    for (int id : tok.tokenize(ordered[b].text)) stream.emplace_back(b, id);
  const int N = std::min<int>(static_cast<int>(stream.size()), L - 2 - M);
  if (seq.num_text != N || seq.num_text_total != static_cast<int>(stream.size())) return "text count";

  for (int p = 0; p < L; ++p) {
    Role want;
    if (p == 0) want = Role::kCls;
    else if (p <= N) want = Role::kText;
    else if (p == N + 1) want = Role::kSep;
    else if (p < N + 2 + M) want = Role::kVisual;
    else want = Role::kPad;
    if (seq.roles[p] != want) return "role at " + std::to_string(p);
    if ((seq.attention_mask[p] != 0) != (want != Role::kPad)) return "mask at " + std::to_string(p);
    const int text_box = want == Role::kText ? ordered[stream[p - 1].first].box_id : -1;
    const int visual_box = want == Role::kVisual ? ordered[p - N - 2].box_id : -1;
    if (seq.text_to_box[p] != text_box) return "text alignment at " + std::to_string(p);
    if (seq.visual_to_box[p] != visual_box) return "visual alignment at " + std::to_string(p);
    if (want == Role::kText && seq.token_ids[p] != stream[p - 1].second) return "token at " + std::to_string(p);
    if (want == Role::kCls && seq.token_ids[p] != tok.cls_id()) return "cls id";
    if (want == Role::kSep && seq.token_ids[p] != tok.sep_id()) return "sep id";
  }
  // Totality: every box owns exactly one VISUAL position and a (possibly empty)
  // contiguous TEXT range, and ranges tile [1, N + 1).
  int cursor = 1;
  for (int b = 0; b < M; ++b) {
    if (seq.box_ids[b] != ordered[b].box_id) return "box order";
    if (seq.text_begin[b] != cursor || seq.text_end[b] < cursor) return "text range";
    for (int p = seq.text_begin[b]; p < seq.text_end[b]; ++p)
      if (seq.text_to_box[p] != ordered[b].box_id) return "text range owner";
    cursor = seq.text_end[b];
    int owners = 0;
    for (int p = 0; p < L; ++p) owners += seq.visual_to_box[p] == ordered[b].box_id;
    if (owners != 1) return "visual ownership";
    if (seq.chars_total[b] != static_cast<int>(utf8::length(ordered[b].text))) return "char total";
    if (seq.chars_kept[b] > seq.chars_total[b]) return "char kept";
  }
  if (cursor != N + 1) return "text ranges do not tile";
  return "";
}

Outcome criterion1() {
  std::mt19937_64 rng(101);
  FrameSpec spec;
  spec.width = 320;
  spec.height = 180;
  // A word vocabulary fitted on a separate batch of frames, so some words
  // fall back to [UNK].
  std::vector<std::string> texts;
  for (int i = 0; i < 40; ++i)
    for (const auto &b : generate_frame(spec, 9000 + i).boxes) texts.push_back(b.text);
  const std::vector<Tokenizer> tokenizers{Tokenizer::ascii(), Tokenizer::build(texts, Tokenizer::Mode::kWord),
                                          Tokenizer::ascii(Tokenizer::Mode::kWhitespace)};
  const int lengths[] = {20, 40, 64, 128};
  int ok = 0, truncated = 0;
  std::string first_error;
  for (int i = 0; i < 1000; ++i) {
    auto s = spec;
    s.titles = static_cast<int>(rng() % 2);
    s.subtitles = static_cast<int>(rng() % 2);
    s.persons = static_cast<int>(rng() % 4);
    s.misc = static_cast<int>(rng() % 4);
    const auto frame = generate_frame(s, rng());
    const auto &tok = tokenizers[i % tokenizers.size()];
    EncodingConfig enc;
    enc.max_length = lengths[rng() % 4];
    std::string err;
    try {
      const auto seq = encode_frame(frame.boxes, frame.image.height, tok, enc);
      check_sequence(seq);
      err = sequence_violation(seq, frame.boxes, tok, enc, frame.image.height);
      truncated += seq.num_text < seq.num_text_total;
    } catch (const std::exception &e) {
      err = e.what();
    }
    if (err.empty()) ++ok;
    else if (first_error.empty()) first_error = "frame " + std::to_string(i) + ": " + err;
  }
  Outcome o;
  o.pass = ok == 1000;
  o.detail = std::to_string(ok) + "/1000 sequences valid (" + std::to_string(truncated) + " truncated)" +
             (first_error.empty() ? "" : "; " + first_error);
  o.budget_s = kBudget1;
  return o;
}

// ---------------------------------------------------------------- criterion 2

// Mean negative log-likelihood over rows whose label is not -1.
double reference_cross_entropy(const torch::Tensor &logits, const std::vector<int> &labels) {
  const auto l = logits.detach().to(torch::kDouble).contiguous();
  auto a = l.accessor<double, 2>();
  double sum = 0;
  int n = 0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0) continue;
    double mx = -1e300;
    for (int k = 0; k < l.size(1); ++k) mx = std::max(mx, a[i][k]);
    double z = 0;
    for (int k = 0; k < l.size(1); ++k) z += std::exp(a[i][k] - mx);
    sum += mx + std::log(z) - a[i][labels[i]];
    ++n;
  }
  return sum / n;
}

ModelConfig tiny_model() {
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

FrameSpec person_spec(int persons) {
  FrameSpec s;
  s.width = 320;
  s.height = 180;
  s.persons = persons;
  return s;
}

bool rel_close(double got, double want, double tol) { return std::abs(got - want) <= tol * std::abs(want); }

Outcome criterion2() {
  torch::manual_seed(2);
  auto sys = UniSystem::create(tiny_model(), Tokenizer::ascii());
  sys.model->eval();
  const auto f1 = generate_frame(person_spec(2), 41), f2 = generate_frame(person_spec(3), 42);
  const auto e1 = make_uni_example(f1, sys.tokenizer, sys.encoding, sys.modality);
  const auto e2 = make_uni_example(f2, sys.tokenizer, sys.encoding, sys.modality);
  const std::vector<const UniExample *> batch{&e1, &e2};
  const auto out = uni_forward(sys.model, batch, SpanMode::kGold);

  std::vector<int> btc, er, el;
  for (const auto *e : batch) {
    btc.insert(btc.end(), e->btc_labels.begin(), e->btc_labels.end());
    er.insert(er.end(), e->er_labels.begin(), e->er_labels.end());
    el.insert(el.end(), e->gold_pair_labels.begin(), e->gold_pair_labels.end());
  }
  const double ref_btc = reference_cross_entropy(out.btc_logits, btc);
  const double ref_er = reference_cross_entropy(out.er_logits, er);
  const double ref_el = reference_cross_entropy(out.el_logits, el);

  std::vector<LossWeights> settings;
  for (const auto &[label, w] : loss_ablation_settings()) settings.push_back(w);
  settings.push_back({0.0, 1.0});
  settings.push_back({0.0, 0.0});
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  while (settings.size() < 100) {
    // Uniform on the simplex: sorted uniforms cut [0, 1] into three parts.
    double a = u(rng), b = u(rng);
    if (a > b) std::swap(a, b);
    settings.push_back({a, b - a});
  }

  int ok = 0;
  double worst = 0;
  std::string first_error;
  for (const auto &w : settings) {
    const auto lb = joint_loss(out, batch, w);
    const double want = w.alpha * lb.btc + w.beta * lb.er + w.gamma() * lb.el;
    const double got = lb.total.item<double>();
    worst = std::max(worst, std::abs(got - want) / std::max(std::abs(want), 1e-300));
    const bool good = lb.has_btc && lb.has_er && lb.has_el && rel_close(got, want, kLossRelTol) &&
                      rel_close(lb.btc, ref_btc, kLossRelTol) && rel_close(lb.er, ref_er, kLossRelTol) &&
                      rel_close(lb.el, ref_el, kLossRelTol);
    if (good) ++ok;
    else if (first_error.empty())
      first_error = "alpha " + fmt("%.3f", w.alpha) + " beta " + fmt("%.3f", w.beta);
  }
  Outcome o;
  o.pass = ok == static_cast<int>(settings.size());
  o.detail = std::to_string(ok) + "/" + std::to_string(settings.size()) + " weight settings, worst rel " +
             fmt("%.2e", worst) + (first_error.empty() ? "" : "; first failure " + first_error);
  o.budget_s = kBudget2;
  return o;
}

// ---------------------------------------------------------------- criterion 3

struct GradStats {
  int checked = 0;
  int failed = 0;
  double worst = 0;  // worst relative error among entries well above the floor
};

// Compares autograd against central differences on sampled entries of
// `tensors`. Entries with a non-zero analytic gradient are preferred.
GradStats grad_check(const std::function<torch::Tensor()> &objective, const std::vector<torch::Tensor> &tensors,
                     std::mt19937_64 &rng) {
  const auto loss = objective();
  auto grads = torch::autograd::grad({loss}, tensors, {}, false, false, true);
  std::vector<std::pair<size_t, int64_t>> nonzero, any;
  for (size_t t = 0; t < tensors.size(); ++t) {
    if (!grads[t].defined()) grads[t] = torch::zeros_like(tensors[t]);
    const auto g = grads[t].reshape({-1});
    for (int64_t i = 0; i < g.numel(); ++i) {
      any.emplace_back(t, i);
      if (g[i].item<double>() != 0.0) nonzero.emplace_back(t, i);
    }
  }
  GradStats s;
  torch::NoGradGuard guard;
  for (int k = 0; k < kGradSamples; ++k) {
    const auto &pool = (k % 4 != 3 && !nonzero.empty()) ? nonzero : any;
    const auto [t, i] = pool[rng() % pool.size()];
    auto flat = tensors[t].detach().view({-1});
    const double x = flat[i].item<double>();
    flat[i] = x + kGradEps;
    const double up = objective().item<double>();
    flat[i] = x - kGradEps;
    const double down = objective().item<double>();
    flat[i] = x;
    const double numeric = (up - down) / (2 * kGradEps);
    const double analytic = grads[t].reshape({-1})[i].item<double>();
    const double err = std::abs(analytic - numeric);
    const double scale = std::max(std::abs(analytic), std::abs(numeric));
    ++s.checked;
    if (err > kGradRelTol * scale + kGradAbsFloor) ++s.failed;
    if (scale > 1e3 * kGradAbsFloor) s.worst = std::max(s.worst, err / scale);
  }
  return s;
}

std::vector<torch::Tensor> params_of(const torch::nn::Module &m) {
  std::vector<torch::Tensor> out;
  for (const auto &p : m.parameters())
    if (p.requires_grad()) out.push_back(p);
  return out;
}

Outcome criterion3() {
  std::mt19937_64 rng(33);
  auto opts = torch::TensorOptions().dtype(torch::kDouble);
  std::vector<std::pair<std::string, GradStats>> results;

  for (int c = 0; c < kGradConfigs; ++c) {
    torch::manual_seed(100 + c);
    const int variant = c % 4;
    std::string name;
    GradStats s;
    if (c < 4) {
      // Visual box path: ROI features and box position through the fusion block.
      auto cfg = tiny_model();
      cfg.visual_dim = variant % 2 == 0 ? 8 : 12;
      cfg.visual_heads = variant < 2 ? 2 : 4;
      cfg.roi_grid = 2 + variant % 2;
      VisualBoxEncoder enc(cfg);
      enc->to(torch::kDouble);
      enc->eval();
      const int C = cfg.cnn_channels[2], Hf = 5 + variant, Wf = 9;
      auto features = torch::randn({1, C, Hf, Wf}, opts).requires_grad_(true);
      const int B = 3 + variant;
      auto x0 = torch::rand({B, 1}, opts) * (Wf - 2), y0 = torch::rand({B, 1}, opts) * (Hf - 2);
      auto regions = torch::cat({x0, y0, x0 + 1 + torch::rand({B, 1}, opts), y0 + 1 + torch::rand({B, 1}, opts)}, 1);
      auto boxes = torch::randint(0, cfg.coord_size, {B, 4}, torch::kLong);
      auto weights = torch::randn({B, cfg.visual_dim}, opts);
      auto tensors = params_of(*enc);
      tensors.push_back(features);
      s = grad_check([&] { return (enc->forward(features, regions, boxes) * weights).sum(); }, tensors, rng);
      name = "fusion";
    } else if (c < 8) {
      auto cfg = tiny_model();
      cfg.layers = 1 + variant % 2;
      cfg.heads = variant < 2 ? 2 : 4;
      cfg.max_length = 48;
      const auto modality = variant == 3 ? Modality::kTextOnly : Modality::kTextVisual;
      auto spec = person_spec(1 + variant % 2);
      spec.width = 96;
      spec.height = 64;
      spec.misc = 1;
      const auto frame = generate_frame(spec, 500 + c);
      EncodingConfig enc_cfg;
      enc_cfg.max_length = cfg.max_length;
      enc_cfg.coord_size = cfg.coord_size;
      const auto seq = encode_frame(frame.boxes, frame.image.height, Tokenizer::ascii(), enc_cfg);
      auto batch = make_unified_batch({&seq}, {&frame.image}, cfg, modality != Modality::kTextOnly);
      if (batch.images.defined()) batch.images = batch.images.to(torch::kDouble);
      if (batch.regions.defined()) batch.regions = batch.regions.to(torch::kDouble);
      UnifiedEncoder model(cfg, modality);
      model->to(torch::kDouble);
      model->eval();
      auto weights = torch::randn({1, cfg.max_length, cfg.hidden}, opts);
      s = grad_check([&] { return (model->forward(batch) * weights).sum(); }, params_of(*model), rng);
      name = "unified encoder";
    } else {
      // Heads under their training losses.
      const int head = (c - 8) / 4;
      const int H = 8 + 4 * variant, rows = 5 + variant;
      auto features = torch::randn({rows, head == 2 ? 2 * H : H}, opts).requires_grad_(true);
      std::shared_ptr<torch::nn::Module> module;
      std::function<torch::Tensor(const torch::Tensor &)> forward;
      int classes = 0;
      if (head == 0) {
        torch::nn::Linear lin(H, kNumBoxCategories);
        module = lin.ptr();
        forward = [lin](const torch::Tensor &x) mutable { return lin(x); };
        classes = kNumBoxCategories;
        name = "BTC head";
      } else if (head == 1) {
        torch::nn::Linear lin(H, kNumBioTags);
        module = lin.ptr();
        forward = [lin](const torch::Tensor &x) mutable { return lin(x); };
        classes = kNumBioTags;
        name = "ER head";
      } else {
        nn::PairClassifier pc(2 * H, 4 + variant);
        module = pc.ptr();
        forward = [pc](const torch::Tensor &x) mutable { return pc(x); };
        classes = 2;
        name = "EL head";
      }
      module->to(torch::kDouble);
      auto labels = torch::randint(0, classes, {rows}, torch::kLong);
      auto tensors = params_of(*module);
      tensors.push_back(features);
      s = grad_check([&] { return torch::nn::functional::cross_entropy(forward(features), labels); }, tensors, rng);
    }
    results.emplace_back(name, s);
  }

  int failed_configs = 0, checked = 0;
  double worst = 0;
  std::map<std::string, int> per_target;
  std::string first_error;
  for (const auto &[name, s] : results) {
    checked += s.checked;
    worst = std::max(worst, s.worst);
    ++per_target[name];
    if (s.failed > 0) {
      ++failed_configs;
      if (first_error.empty()) first_error = name + ": " + std::to_string(s.failed) + " entries off";
    }
  }
  Outcome o;
  o.pass = failed_configs == 0 && static_cast<int>(results.size()) == kGradConfigs;
  std::ostringstream d;
  d << (results.size() - failed_configs) << "/" << results.size() << " configs agree (";
  bool first = true;
  for (const auto &[n, k] : per_target) {
    d << (first ? "" : ", ") << n << " x" << k;
    first = false;
  }
  d << "), " << checked << " entries, worst rel " << fmt("%.2e", worst);
  if (!first_error.empty()) d << "; " << first_error;
  o.detail = d.str();
  o.budget_s = kBudget3;
  return o;
}

// ---------------------------------------------------------------- criterion 4

struct RandomCase {
  std::vector<LabeledFrame> gold;
  std::vector<FrameExtraction> pred;
};

RandomCase random_case(std::mt19937_64 &rng) {
  auto pick = [&](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };
  RandomCase rc;
  const int frames = 1 + pick(4);
  for (int f = 0; f < frames; ++f) {
    LabeledFrame g;
    g.frame_id = "r" + std::to_string(f);
    FrameExtraction p;
    const int boxes = pick(5);
    for (int b = 0; b < boxes; ++b) {
      BoxRecord box;
      box.box_id = b;
      box.text = "abcdefghijkl";
      box.category = static_cast<BoxCategory>(pick(kNumBoxCategories));
      if (*box.category == BoxCategory::kPersonInfo) {
        int start = 0;
        const int spans = pick(3);
        for (int s = 0; s < spans && start < 10; ++s) {
          const int end = start + 1 + pick(2);
          box.entity_spans.push_back({start, end, static_cast<EntityCategory>(pick(2))});
          start = end + pick(2);
        }
      }
      g.boxes.push_back(box);
      if (pick(6) > 0) p.boxes.push_back({b, static_cast<BoxCategory>(pick(kNumBoxCategories)), {}, "", {}});
    }
    // Gold links: every Name x Identity pair, randomly matched.
    std::vector<EntityRef> names, ids;
    for (const auto &b : g.boxes)
      for (int s = 0; s < static_cast<int>(b.entity_spans.size()); ++s)
        (b.entity_spans[s].category == EntityCategory::kName ? names : ids).push_back({b.box_id, s});
    for (const auto &n : names)
      for (const auto &i : ids) g.links.push_back({n, i, pick(2) == 1});
    // Predicted mentions: copies of gold spans, perturbed spans and duplicates.
    for (const auto &b : g.boxes)
      for (const auto &s : b.entity_spans) {
        const int r = pick(5);
        if (r == 0) continue;
        EntityMention m;
        m.box_id = b.box_id;
        m.start = s.start;
        m.end = s.end + (r == 1 ? 1 : 0);
        m.category = r == 2 ? static_cast<EntityCategory>(1 - static_cast<int>(s.category)) : s.category;
        p.mentions.push_back(m);
        if (r == 3) p.mentions.push_back(m);
      }
    if (pick(3) == 0) {
      EntityMention m;
      m.box_id = pick(5);
      m.start = pick(6);
      m.end = m.start + 1 + pick(3);
      m.category = static_cast<EntityCategory>(pick(2));
      p.mentions.push_back(m);
    }
    std::vector<int> pn, pi;
    for (int k = 0; k < static_cast<int>(p.mentions.size()); ++k)
      (p.mentions[k].category == EntityCategory::kName ? pn : pi).push_back(k);
    for (int n : pn)
      for (int i : pi)
        if (pick(4) > 0) p.pairs.push_back({n, i, pick(2) == 1, 0.5f});
    rc.gold.push_back(std::move(g));
    rc.pred.push_back(std::move(p));
  }
  return rc;
}

// Brute-force scoring straight from the definitions.
struct Expected {
  std::vector<oracle::Counts> per_class;
  std::optional<double> accuracy;
};

bool scores_match(const TaskMetrics &m, const Expected &e) {
  if (m.per_class.size() != e.per_class.size()) return false;
  double sp = 0, sr = 0, sf = 0;
  int64_t tp = 0, fp = 0, fn = 0;
  for (size_t c = 0; c < e.per_class.size(); ++c) {
    const auto &k = e.per_class[c];
    const double pr = oracle::ratio(k.tp, k.tp + k.fp), rc = oracle::ratio(k.tp, k.tp + k.fn);
    const double f1 = pr + rc > 0 ? 2 * pr * rc / (pr + rc) : 0.0;
    const auto &s = m.per_class[c];
    if (s.tp != k.tp || s.fp != k.fp || s.fn != k.fn) return false;
    if (s.precision != pr || s.recall != rc || s.f1 != f1) return false;
    sp += pr;
    sr += rc;
    sf += f1;
    tp += k.tp;
    fp += k.fp;
    fn += k.fn;
  }
  const double n = static_cast<double>(e.per_class.size());
  if (m.macro.precision != sp / n || m.macro.recall != sr / n || m.macro.f1 != sf / n) return false;
  if (m.micro.tp != tp || m.micro.fp != fp || m.micro.fn != fn) return false;
  if (m.micro.precision != oracle::ratio(tp, tp + fp) || m.micro.recall != oracle::ratio(tp, tp + fn)) return false;
  if (e.accuracy.has_value() != m.accuracy.has_value()) return false;
  return !e.accuracy || *e.accuracy == *m.accuracy;
}

Expected expected_btc(const RandomCase &rc) {
  std::vector<int> g, p;
  for (size_t f = 0; f < rc.gold.size(); ++f)
    for (const auto &b : rc.gold[f].boxes) {
      g.push_back(static_cast<int>(*b.category));
      int pred = -1;
      for (const auto &pb : rc.pred[f].boxes)
        if (pb.box_id == b.box_id) pred = static_cast<int>(pb.category);
      p.push_back(pred);
    }
  Expected e;
  for (int c = 0; c < kNumBoxCategories; ++c) e.per_class.push_back(oracle::class_counts(g, p, c));
  e.accuracy = oracle::accuracy(g, p);
  return e;
}

Expected expected_er(const RandomCase &rc) {
  std::vector<std::vector<oracle::Span>> g, p;
  for (size_t f = 0; f < rc.gold.size(); ++f) {
    g.emplace_back();
    p.emplace_back();
    for (const auto &b : rc.gold[f].boxes)
      for (const auto &s : b.entity_spans)
        g.back().emplace_back(b.box_id, s.start, s.end, static_cast<int>(s.category));
    for (const auto &m : rc.pred[f].mentions)
      p.back().emplace_back(m.box_id, m.start, m.end, static_cast<int>(m.category));
  }
  Expected e;
  for (int c = 0; c < kNumEntityCategories; ++c) e.per_class.push_back(oracle::span_counts(g, p, c));
  return e;
}

Expected expected_el(const RandomCase &rc) {
  // Instances: the union of gold and predicted (name span, identity span)
  // pairs. A gold pair missing from the prediction counts as unanswered; a
  // predicted pair missing from gold is gold NotMatched. For a pair predicted
  // twice the later decision stands.
  using Pair = std::pair<oracle::Span, oracle::Span>;
  std::vector<int> g, p;
  for (size_t f = 0; f < rc.gold.size(); ++f) {
    const auto &frame = rc.gold[f];
    auto span_of = [&](const EntityRef &r) {
      const auto *b = frame.find_box(r.box_id);
      const auto &s = b->entity_spans[r.span_index];
      return oracle::Span{b->box_id, s.start, s.end, static_cast<int>(s.category)};
    };
    std::vector<std::pair<Pair, bool>> gold, pred;
    for (const auto &l : frame.links) gold.push_back({{span_of(l.name), span_of(l.identity)}, l.matched});
    for (const auto &pp : rc.pred[f].pairs) {
      const auto &n = rc.pred[f].mentions[pp.name_index], &i = rc.pred[f].mentions[pp.identity_index];
      const Pair key{{n.box_id, n.start, n.end, static_cast<int>(n.category)},
                     {i.box_id, i.start, i.end, static_cast<int>(i.category)}};
      bool found = false;
      for (auto &[k, v] : pred)
        if (k == key) {
          v = pp.matched;
          found = true;
        }
      if (!found) pred.push_back({key, pp.matched});
    }
    auto lookup = [](const std::vector<std::pair<Pair, bool>> &v, const Pair &k) -> std::optional<bool> {
      for (const auto &[key, val] : v)
        if (key == k) return val;
      return std::nullopt;
    };
    for (const auto &[k, v] : gold) {
      g.push_back(v ? 1 : 0);
      const auto q = lookup(pred, k);
      p.push_back(q ? (*q ? 1 : 0) : -1);
    }
    for (const auto &[k, v] : pred)
      if (!lookup(gold, k)) {
        g.push_back(0);
        p.push_back(v ? 1 : 0);
      }
  }
  Expected e;
  for (int c = 0; c < 2; ++c) e.per_class.push_back(oracle::class_counts(g, p, c));
  e.accuracy = oracle::accuracy(g, p);
  return e;
}

Outcome criterion4() {
  std::mt19937_64 rng(404);
  int ok[3] = {0, 0, 0};
  for (int t = 0; t < 1000; ++t) {
    const auto rc = random_case(rng);
    const auto r = compute_metrics(rc.pred, rc.gold);
    ok[0] += scores_match(*r.btc, expected_btc(rc));
    ok[1] += scores_match(*r.er, expected_er(rc));
    ok[2] += scores_match(*r.el, expected_el(rc));
  }
  Outcome o;
  o.pass = ok[0] == 1000 && ok[1] == 1000 && ok[2] == 1000;
  o.detail = "exact agreement BTC " + std::to_string(ok[0]) + "/1000, ER " + std::to_string(ok[1]) + "/1000, EL " +
             std::to_string(ok[2]) + "/1000";
  o.budget_s = kBudget4;
  return o;
}

// ---------------------------------------------------------------- criterion 5

Outcome criterion5(Shared &sh) {
  sh.splits();
  Stopwatch w;
  auto [systems, spent] = uni_systems(sh, Modality::kTextVisual);
  std::vector<double> btc, er, el;
  for (const auto &s : systems) {
    const auto r = evaluate_uni(s, sh.splits().dev);
    btc.push_back(r.btc ? *r.btc->accuracy : 0.0);
    er.push_back(r.er ? r.er->macro.f1 : 0.0);
    el.push_back(r.el && r.el->accuracy ? *r.el->accuracy : 0.0);
  }
  Outcome o;
  o.budget_s = kBudget5;
  if (static_cast<int>(systems.size()) < kSeeds) {
    o.detail = "only " + std::to_string(systems.size()) + " of " + std::to_string(kSeeds) + " seeds finished";
    return o;
  }
  const double mb = median_of(btc), me = median_of(er), ml = median_of(el);
  o.pass = mb >= kBtcMin && me >= kErMin && ml >= kElMin;
  std::ostringstream d;
  d << "dev medians over " << kSeeds << " seeds: BTC Acc " << fmt("%.4f", mb) << " (>= " << kBtcMin << "), ER F1 "
    << fmt("%.4f", me) << " (>= " << kErMin << "), EL Acc " << fmt("%.4f", ml) << " (>= " << kElMin << ")";
  d << "; per seed BTC/ER/EL";
  for (size_t i = 0; i < btc.size(); ++i)
    d << " " << fmt("%.3f", btc[i]) << "/" << fmt("%.3f", er[i]) << "/" << fmt("%.3f", el[i]);
  if (spent == 0) d << "; checkpoints reused";
  o.detail = d.str();
  o.charged_s = w.seconds();
  return o;
}

// ---------------------------------------------------------------- criterion 6

Outcome criterion6(Shared &sh) {
  const auto &test = sh.splits().test;
  auto pip = pip_systems(sh, true);
  Stopwatch w;
  int holds = 0, imperfect = 0, equal = 0, oracle_ready = 0;
  std::ostringstream d;
  for (int s = 0; s < kSeeds; ++s) {
    const auto star = evaluate_pipeline(pip.weak[s], test, {true, false});
    const auto plain = evaluate_pipeline(pip.weak[s], test, {false, false});
    const double btc_acc = *plain.btc->accuracy;
    const bool is_imperfect = btc_acc < 1.0;
    imperfect += is_imperfect;
    holds += is_imperfect && star.er->macro.f1 >= plain.er->macro.f1;

    // Oracle BTC injected in place of the weak one: it answers with the
    // labels through the prediction path, which must then gate like Pip*.
    PipelineOptions oracle_opts;
    oracle_opts.btc_oracle = [](const BoxRecord &b) { return b.category.value(); };
    const auto with_oracle = evaluate_pipeline(pip.weak[s], test, oracle_opts);
    const bool perfect = *with_oracle.btc->accuracy == 1.0;
    oracle_ready += perfect;
    bool same = with_oracle.er->macro.f1 == star.er->macro.f1;
    for (int c = 0; c < kNumEntityCategories; ++c) {
      const auto &a = with_oracle.er->per_class[c], &b = star.er->per_class[c];
      same = same && a.tp == b.tp && a.fp == b.fp && a.fn == b.fn;
    }
    equal += perfect && same;
    d << (s ? "; " : "") << "seed " << s + 1 << ": weak BTC Acc " << fmt("%.3f", btc_acc) << ", Pip* ER F1 "
      << fmt("%.4f", star.er->macro.f1) << " vs Pip " << fmt("%.4f", plain.er->macro.f1) << ", oracle BTC Acc "
      << fmt("%.3f", *with_oracle.btc->accuracy) << (same ? " equal" : " differs");
  }
  Outcome o;
  o.pass = holds >= 2 && equal == kSeeds;
  o.detail = "inequality in " + std::to_string(holds) + "/" + std::to_string(kSeeds) + " seeds (imperfect BTC in " +
             std::to_string(imperfect) + "), exact equality with oracle BTC in " + std::to_string(equal) + "/" +
             std::to_string(kSeeds) + " (oracle perfect in " + std::to_string(oracle_ready) + "); " + d.str() +
             "; training " + fmt("%.0f", pip.train_seconds) + " s not charged";
  o.budget_s = kBudget6;
  o.charged_s = w.seconds();
  return o;
}

// ---------------------------------------------------------------- criterion 7

Outcome criterion7(Shared &sh) {
  std::vector<LabeledFrame> frames;
  for (const auto &f : sh.splits().test)
    if (f.boxes.size() >= 5 && frames.size() < 40) frames.push_back(f);
  auto pip = pip_systems(sh, false);
  auto [unis, spent] = uni_systems(sh, Modality::kTextVisual);
  Outcome o;
  o.budget_s = kBudget7;
  if (unis.empty() || frames.empty()) {
    o.detail = "no trained unified model or no frame with >= 5 boxes";
    return o;
  }
  Stopwatch w;
  BenchmarkOptions opt;
  opt.warmup = 1;
  opt.repetitions = 3;
  opt.box_counts.clear();
  const auto r = benchmark(pip.full[0], unis[0], frames, opt);
  o.pass = r.pip.frames > 0 && r.uni.median_ms < r.pip.median_ms && r.uni_params < r.pip_params;
  o.detail = std::to_string(r.uni.frames) + " frames with >= 5 boxes: median latency uni " + fmt("%.2f", r.uni.median_ms) +
             " ms vs pip " + fmt("%.2f", r.pip.median_ms) + " ms; params uni " + std::to_string(r.uni_params) +
             " vs pip " + std::to_string(r.pip_params);
  o.charged_s = w.seconds();
  return o;
}

// ---------------------------------------------------------------- criterion 8

Outcome criterion8(Shared &sh) {
  const auto &test = sh.splits().test;
  auto [visual, visual_spent] = uni_systems(sh, Modality::kTextVisual);
  Stopwatch w;
  auto [text, text_spent] = uni_systems(sh, Modality::kTextOnly);
  std::vector<double> tv, to;
  for (const auto &s : visual) tv.push_back(*evaluate_uni(s, test).btc->accuracy);
  for (const auto &s : text) to.push_back(*evaluate_uni(s, test).btc->accuracy);
  Outcome o;
  o.budget_s = kBudget8;
  o.charged_s = w.seconds();
  if (static_cast<int>(tv.size()) < kSeeds || static_cast<int>(to.size()) < kSeeds) {
    o.detail = "missing seeds";
    return o;
  }
  const double a = median_of(tv), b = median_of(to);
  o.pass = a >= b;
  o.detail = "test BTC Acc median text+visual " + fmt("%.4f", a) + " vs text-only " + fmt("%.4f", b) +
             "; per seed text+visual";
  for (double v : tv) o.detail += " " + fmt("%.3f", v);
  o.detail += ", text-only";
  for (double v : to) o.detail += " " + fmt("%.3f", v);
  if (visual_spent > 0) o.detail += "; text+visual training " + fmt("%.0f", visual_spent) + " s not charged";
  return o;
}

// ---------------------------------------------------------------- criterion 9

Outcome criterion9() {
  // Hand-checked rows: tags as 0=O 1=B-N 2=I-N 3=B-I 4=I-I; spans (begin, end, category 0=Name 1=Identity).
  struct Row {
    std::vector<int> tags;
    std::vector<std::tuple<int, int, int>> spans;
    int repairs;
  };
  const std::vector<Row> table{
      {{0, 0, 0, 0}, {}, 0},
      {{1, 2, 2, 2}, {{0, 4, 0}}, 0},
      {{1, 1, 1, 1}, {{0, 1, 0}, {1, 2, 0}, {2, 3, 0}, {3, 4, 0}}, 0},
      {{2, 2, 0, 4}, {{0, 2, 0}, {3, 4, 1}}, 2},
      {{1, 4, 4, 0}, {{0, 1, 0}, {1, 3, 1}}, 1},
      {{3, 4, 1, 2}, {{0, 2, 1}, {2, 4, 0}}, 0},
      {{0, 2, 4, 2}, {{1, 2, 0}, {2, 3, 1}, {3, 4, 0}}, 3},
      {{3, 2, 0, 0}, {{0, 1, 1}, {1, 2, 0}}, 1},
      {{4, 4, 4, 4}, {{0, 4, 1}}, 1},
      {{1, 0, 2, 2}, {{0, 1, 0}, {2, 4, 0}}, 1},
  };
  auto decode = [](const std::vector<int> &tags) {
    std::vector<BioTag> t;
    for (int v : tags) t.push_back(static_cast<BioTag>(v));
    const auto d = decode_bio2(t);
    oracle::RefDecode out;
    for (const auto &s : d.spans) out.spans.emplace_back(s.start, s.end, static_cast<int>(s.category));
    out.repairs = d.repairs;
    return out;
  };
  int table_ok = 0;
  for (const auto &row : table) {
    const auto got = decode(row.tags);
    const auto ref = oracle::reference_bio2(row.tags);
    table_ok += got.spans == row.spans && got.repairs == row.repairs && ref.spans == row.spans &&
                ref.repairs == row.repairs;
  }
  int ok = 0, with_repairs = 0;
  for (int code = 0; code < 625; ++code) {
    std::vector<int> tags(4);
    for (int i = 0, c = code; i < 4; ++i, c /= 5) tags[i] = c % 5;
    const auto got = decode(tags);
    const auto ref = oracle::reference_bio2(tags);
    ok += got.spans == ref.spans && got.repairs == ref.repairs;
    with_repairs += ref.repairs > 0;
  }
  Outcome o;
  o.pass = ok == 625 && table_ok == static_cast<int>(table.size());
  o.detail = std::to_string(ok) + "/625 sequences match the reference decoder (" + std::to_string(with_repairs) +
             " involve repairs), hand table " + std::to_string(table_ok) + "/" + std::to_string(table.size());
  o.budget_s = kBudget9;
  return o;
}

// ---------------------------------------------------------------- criterion 10

void force_class(torch::nn::Linear &head, int cls) {
  torch::NoGradGuard g;
  head->weight.zero_();
  head->bias.zero_();
  head->bias[cls] = 10.0;
}

Outcome criterion10() {
  auto spec = person_spec(1);
  spec.titles = 1;
  spec.subtitles = 0;
  spec.misc = 1;
  spec.stacked_probability = 0.0;
  const auto frame = generate_frame(spec, 77);
  int person_boxes = 0, person_box = -1;
  for (const auto &b : frame.boxes)
    if (b.category == BoxCategory::kPersonInfo) {
      ++person_boxes;
      person_box = b.box_id;
    }

  torch::manual_seed(10);
  auto pip = PipSystem::create(tiny_model(), Tokenizer::ascii());
  pip.eval();
  force_class(pip.btc->head, static_cast<int>(BoxCategory::kMisc));
  force_class(pip.er->head, static_cast<int>(BioTag::kBName));
  const auto pr = run_pipeline(pip, frame.image, frame.boxes);

  auto uni = UniSystem::create(tiny_model(), Tokenizer::ascii());
  uni.model->eval();
  force_class(uni.model->btc_head, static_cast<int>(BoxCategory::kMisc));
  force_class(uni.model->er_head, static_cast<int>(BioTag::kBName));
  const auto ur = uni_extract(uni, frame.image, frame.boxes);
  int uni_in_person = 0;
  for (const auto &m : ur.extraction.mentions) uni_in_person += m.box_id == person_box;

  const auto cat = pr.extraction.category_of(person_box);
  Outcome o;
  o.pass = person_boxes == 1 && cat == BoxCategory::kMisc && pr.extraction.mentions.empty() &&
           pr.counts.er_calls == 0 && uni_in_person > 0;
  o.detail = "PersonInfo boxes " + std::to_string(person_boxes) + ", BTC says " +
             (cat ? std::string(to_string(*cat)) : "none") + "; pipeline mentions " +
             std::to_string(pr.extraction.mentions.size()) + " (ER calls " + std::to_string(pr.counts.er_calls) +
             "), unified mentions in that box " + std::to_string(uni_in_person);
  o.budget_s = kBudget10;
  return o;
}

const char *title(int n) {
  static const char *t[] = {"",
                            "sequence layout and alignment",
                            "joint loss arithmetic",
                            "gradient checks",
                            "metric oracle",
                            "unified end-to-end learning",
                            "error accumulation direction",
                            "efficiency direction",
                            "modality ablation direction",
                            "BIO2 exhaustive decode",
                            "pipeline gating"};
  return t[n];
}

}  // namespace

int main(int argc, char **argv) {
  torch::set_num_threads(1);
  Shared sh;
  sh.dir = VKIE_ACCEPTANCE_DIR;
  std::vector<int> wanted;
  bool clean = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--clean") clean = true;
    else if (a == "--artifacts" && i + 1 < argc) sh.dir = argv[++i];
    else wanted.push_back(std::stoi(a));
  }
  if (clean) {
    fs::remove_all(sh.dir);
    std::cout << "removed " << sh.dir.string() << "\n";
    if (wanted.empty()) return 0;
  }
  if (wanted.empty())
    for (int n = 1; n <= 10; ++n) wanted.push_back(n);
  sh.config = load_experiment(fs::path(VKIE_SOURCE_DIR) / "configs" / "desk.json");

  int failures = 0;
  for (int n : wanted) {
    Stopwatch w;
    Outcome o;
    try {
      switch (n) {
        case 1: o = criterion1(); break;
        case 2: o = criterion2(); break;
        case 3: o = criterion3(); break;
        case 4: o = criterion4(); break;
        case 5: o = criterion5(sh); break;
        case 6: o = criterion6(sh); break;
        case 7: o = criterion7(sh); break;
        case 8: o = criterion8(sh); break;
        case 9: o = criterion9(); break;
        case 10: o = criterion10(); break;
        default: o.detail = "no such criterion";
      }
    } catch (const std::exception &e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    const double total = w.seconds();
    const double charged = o.charged_s >= 0 ? o.charged_s : total;
    const bool in_time = o.budget_s <= 0 || charged <= o.budget_s;
    const bool pass = o.pass && in_time;
    failures += !pass;
    std::cout << "criterion " << n << " " << (pass ? "PASS" : "FAIL") << "  " << title(n) << ": " << o.detail << " ["
              << fmt("%.1f", charged) << " s of " << fmt("%.0f", o.budget_s) << " s"
              << (in_time ? "" : ", over budget") << "]" << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
