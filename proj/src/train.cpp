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

#include "vkie/train.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>
#include <sstream>

#include "vkie/config_io.hpp"

namespace vkie {

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kPipBtc: return "pip_btc";
    case ModelKind::kPipEr: return "pip_er";
    case ModelKind::kPipEl: return "pip_el";
    case ModelKind::kUni: return "uni";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  for (auto k : {ModelKind::kPipBtc, ModelKind::kPipEr, ModelKind::kPipEl, ModelKind::kUni})
    if (to_string(k) == s) return k;
  throw ConfigError("unknown model kind '" + std::string(s) + "' (expected pip_btc, pip_er, pip_el or uni)");
}

TrainConfig TrainConfig::defaults(ModelKind kind) {
  TrainConfig c;
  c.kind = kind;
  switch (kind) {
    case ModelKind::kUni:
      c.optimizer = "adamw";
      c.batch_size = 32;
      break;
    case ModelKind::kPipBtc:
      c.optimizer = "adam";
      c.batch_size = 48;
      break;
    case ModelKind::kPipEr:
    case ModelKind::kPipEl:
      c.optimizer = "adamw";
      c.batch_size = 16;
      break;
  }
  return c;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  if (batch_size < 1) throw ConfigError("batch size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
  if (optimizer != "adam" && optimizer != "adamw") throw ConfigError("optimizer must be 'adam' or 'adamw'");
  if (warmup_fraction < 0.0 || warmup_fraction >= 1.0) throw ConfigError("warmup fraction must lie in [0, 1)");
  if (threads < 1) throw ConfigError("threads must be >= 1");
  if (max_train_frames < 0) throw ConfigError("max_train_frames must be >= 0");
  weights.validate();
}

namespace {

class Schedule {
 public:
  Schedule(std::vector<torch::Tensor> params, const TrainConfig &c, int64_t total_steps)
      : params_(std::move(params)), base_(c.learning_rate), clip_(c.grad_clip),
        total_(std::max<int64_t>(1, total_steps)),
        warmup_(static_cast<int64_t>(std::floor(c.warmup_fraction * static_cast<double>(total_)))) {
    if (c.optimizer == "adam")
      opt_ = std::make_unique<torch::optim::Adam>(params_, torch::optim::AdamOptions(base_));
    else
      opt_ = std::make_unique<torch::optim::AdamW>(params_,
                                                   torch::optim::AdamWOptions(base_).weight_decay(c.weight_decay));
  }

  void zero() { opt_->zero_grad(); }

  void step() {
    double lr = base_;
    if (step_ < warmup_)
      lr = base_ * static_cast<double>(step_ + 1) / static_cast<double>(warmup_ + 1);
    else
      lr = base_ * std::max(0.0, static_cast<double>(total_ - step_) / static_cast<double>(total_ - warmup_));
    for (auto &g : opt_->param_groups()) g.options().set_lr(lr);
    if (clip_ > 0.0) torch::nn::utils::clip_grad_norm_(params_, clip_);
    opt_->step();
    ++step_;
  }

 private:
  std::vector<torch::Tensor> params_;
  double base_;
  double clip_;
  int64_t total_;
  int64_t warmup_;
  int64_t step_ = 0;
  std::unique_ptr<torch::optim::Optimizer> opt_;
};

struct Divergence : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void require_finite(const torch::Tensor &loss, int epoch) {
  if (!std::isfinite(loss.item<double>()))
    throw Divergence("non-finite loss in epoch " + std::to_string(epoch));
}

std::vector<const LabeledFrame *> training_frames(const CorpusSplits &corpus, const TrainConfig &c) {
  std::vector<const LabeledFrame *> out;
  for (const auto &f : corpus.train) out.push_back(&f);
  if (c.max_train_frames > 0 && static_cast<int>(out.size()) > c.max_train_frames) out.resize(c.max_train_frames);
  return out;
}

template <typename T>
std::vector<std::vector<T>> make_batches(std::vector<T> units, int batch, std::mt19937_64 &rng) {
  std::shuffle(units.begin(), units.end(), rng);
  std::vector<std::vector<T>> out;
  for (size_t i = 0; i < units.size(); i += static_cast<size_t>(batch))
    out.emplace_back(units.begin() + static_cast<long>(i),
                     units.begin() + static_cast<long>(std::min(units.size(), i + static_cast<size_t>(batch))));
  return out;
}

std::vector<int64_t> token_targets(const std::vector<std::vector<Tokenizer::Piece>> &pieces,
                                   const std::vector<const BoxRecord *> &boxes, int64_t T) {
  std::vector<int64_t> targets(pieces.size() * T, -100);
  for (size_t b = 0; b < pieces.size(); ++b) {
    const auto tags = tags_from_char_spans(pieces[b], boxes[b]->entity_spans);
    for (size_t t = 0; t < tags.size(); ++t) targets[b * T + 1 + t] = static_cast<int64_t>(tags[t]);
  }
  return targets;
}

// Mentions from labeled spans, pooled over ER encoder states.
// Labeled spans of one box pooled from the given encoder's states.
std::vector<EntityMention> gold_mentions(TextEncoder &encoder, const Tokenizer &tokenizer, const ModelConfig &config,
                                         const BoxRecord &box) {
  auto batch = make_box_text_batch({box.text}, tokenizer, config.box_max_tokens);
  auto hidden = encoder(batch.ids, batch.mask)[0];
  std::vector<EntityMention> out;
  for (const auto &s : box.entity_spans) {
    const auto [b, e] = char_span_to_tokens(s, batch.pieces[0]);
    if (b >= e) continue;
    EntityMention m;
    m.box_id = box.box_id;
    m.start = s.start;
    m.end = s.end;
    m.category = s.category;
    m.text = utf8::substr(box.text, s.start, s.end);
    m.hidden = mean_pool(hidden, 1 + b, 1 + e);
    out.push_back(std::move(m));
  }
  return out;
}

struct Selection {
  double best = -1.0;
  int epoch = 0;
};

void log_line(const TrainInputs &in, const std::string &s) {
  if (in.log) in.log(s);
}

}  // namespace

Tokenizer fit_tokenizer(Tokenizer::Mode mode, const CorpusSplits &corpus) {
  std::vector<std::string> texts;
  for (const auto &f : corpus.train)
    for (const auto &b : f.boxes) texts.push_back(b.text);
  return Tokenizer::build(texts, mode);
}

double selection_score(ModelKind kind, const MetricsReport &r) {
  switch (kind) {
    case ModelKind::kPipBtc: return r.btc ? r.btc->accuracy.value_or(0.0) : 0.0;
    case ModelKind::kPipEr: return r.er ? r.er->macro.f1 : 0.0;
    case ModelKind::kPipEl: return r.el ? r.el->accuracy.value_or(0.0) : 0.0;
    case ModelKind::kUni: {
      double sum = 0.0;
      int n = 0;
      if (r.btc) sum += r.btc->accuracy.value_or(0.0), ++n;
      if (r.er) sum += r.er->macro.f1, ++n;
      if (r.el) sum += r.el->accuracy.value_or(0.0), ++n;
      return n ? sum / n : 0.0;
    }
  }
  return 0.0;
}

MetricsReport evaluate_uni(const UniSystem &system, const std::vector<LabeledFrame> &frames, SpanMode mode) {
  std::vector<FrameExtraction> preds;
  int64_t truncated = 0;
  for (const auto &f : frames) {
    preds.push_back(uni_extract(system, f.image, f.boxes, mode).extraction);
    const auto seq = encode_frame(f.boxes, f.image.height, system.tokenizer, system.encoding);
    for (int b = 0; b < seq.num_boxes; ++b) truncated += seq.truncated(b) ? 1 : 0;
  }
  std::vector<Task> tasks{Task::kBtc};
  if (system.modality != Modality::kVisualOnly) {
    tasks.push_back(Task::kEr);
    tasks.push_back(Task::kEl);
  }
  auto r = compute_metrics(preds, frames, tasks);
  r.truncated_boxes = truncated;
  return r;
}

MetricsReport evaluate_pipeline(const PipSystem &system, const std::vector<LabeledFrame> &frames,
                                const PipelineOptions &options) {
  std::vector<FrameExtraction> preds;
  for (const auto &f : frames) preds.push_back(run_pipeline(system, f.image, f.boxes, options).extraction);
  return compute_metrics(preds, frames);
}

MetricsReport evaluate_pip_btc(const PipSystem &system, const std::vector<LabeledFrame> &frames) {
  torch::NoGradGuard no_grad;
  BtcModel btc = system.btc;
  std::vector<FrameExtraction> preds;
  for (const auto &f : frames) {
    FrameExtraction ex;
    if (!f.boxes.empty()) {
      auto logits = btc->forward(make_btc_inputs(f.image, f.boxes, system.tokenizer, system.config));
      for (size_t i = 0; i < f.boxes.size(); ++i) {
        const auto d = btc_decide(logits[static_cast<int64_t>(i)]);
        ex.boxes.push_back({f.boxes[i].box_id, d.category, d.probabilities, f.boxes[i].text, f.boxes[i].bbox});
      }
    }
    preds.push_back(std::move(ex));
  }
  return compute_metrics(preds, frames, {Task::kBtc});
}

MetricsReport evaluate_pip_er(const PipSystem &system, const std::vector<LabeledFrame> &frames) {
  torch::NoGradGuard no_grad;
  ErModel er = system.er;
  std::vector<FrameExtraction> preds;
  for (const auto &f : frames) {
    FrameExtraction ex;
    for (const auto &box : f.boxes) {
      if (box.category != BoxCategory::kPersonInfo) continue;
      auto batch = make_box_text_batch({box.text}, system.tokenizer, system.config.box_max_tokens);
      const int n = static_cast<int>(batch.pieces[0].size());
      if (n == 0) continue;
      auto hidden = er->encode(batch)[0];
      auto decoded = decode_bio2(er_decide(er->tag_logits(hidden).slice(0, 1, 1 + n)));
      ex.bio_repairs += decoded.repairs;
      for (const auto &ts : decoded.spans) {
        const auto cs = token_span_to_chars(ts, batch.pieces[0]);
        ex.mentions.push_back({box.box_id, cs.start, cs.end, ts.category, utf8::substr(box.text, cs.start, cs.end),
                               false, {}});
      }
    }
    preds.push_back(std::move(ex));
  }
  return compute_metrics(preds, frames, {Task::kEr});
}

MetricsReport evaluate_pip_el(const PipSystem &system, const std::vector<LabeledFrame> &frames) {
  torch::NoGradGuard no_grad;
  ElModel el = system.el;
  std::vector<FrameExtraction> preds;
  for (const auto &f : frames) {
    FrameExtraction ex;
    for (const auto &box : f.boxes) {
      if (box.category != BoxCategory::kPersonInfo) continue;
      for (auto &m : gold_mentions(el->text, system.tokenizer, system.config, box)) ex.mentions.push_back(std::move(m));
    }
    const auto pm = build_pair_matrix(ex.mentions);
    if (!pm.empty()) {
      auto logits = el->forward(pm.flat());
      for (size_t p = 0; p < pm.names.size(); ++p)
        for (size_t q = 0; q < pm.identities.size(); ++q) {
          const auto d = el_decide(logits[static_cast<int64_t>(p * pm.identities.size() + q)]);
          ex.pairs.push_back({pm.names[p], pm.identities[q], d.matched, d.probability});
        }
    }
    preds.push_back(std::move(ex));
  }
  return compute_metrics(preds, frames, {Task::kEl});
}

namespace {

// Shared epoch loop: trains, evaluates on dev after each epoch and keeps the
// first epoch with the best selection score.
template <typename TrainEpoch, typename Evaluate, typename Capture>
void epoch_loop(SeedRun &run, const TrainInputs &in, const TrainConfig &c, torch::nn::Module &model,
                TrainEpoch &&train_epoch, Evaluate &&evaluate, Capture &&capture) {
  Selection sel;
  for (int epoch = 1; epoch <= c.epochs; ++epoch) {
    model.train();
    EpochLog log = train_epoch(epoch);
    log.epoch = epoch;
    model.eval();
    MetricsReport dev = evaluate();
    log.dev_score = selection_score(c.kind, dev);
    run.epochs.push_back(log);
    std::ostringstream line;
    line << to_string(c.kind) << " seed " << run.seed << " epoch " << epoch << ": loss " << log.train_loss
         << " dev " << log.dev_score;
    log_line(in, line.str());
    if (log.dev_score > sel.best) {
      sel.best = log.dev_score;
      sel.epoch = epoch;
      run.dev_report = dev;
      run.checkpoint = capture();
    }
  }
  run.best_epoch = sel.epoch;
  run.best_dev = sel.best;
}

SeedRun train_pip_btc(const TrainInputs &in, const TrainConfig &c, std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  torch::manual_seed(seed);
  std::mt19937_64 rng(seed);
  PipSystem sys = PipSystem::create(in.model, in.tokenizer);
  auto frames = training_frames(*in.corpus, c);
  frames.erase(std::remove_if(frames.begin(), frames.end(), [](auto *f) { return f->boxes.empty(); }), frames.end());

  // Batches are groups of whole frames holding at least batch_size boxes.
  auto group = [&](std::vector<const LabeledFrame *> order) {
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<const LabeledFrame *>> out(1);
    int boxes = 0;
    for (auto *f : order) {
      out.back().push_back(f);
      boxes += static_cast<int>(f->boxes.size());
      if (boxes >= c.batch_size) {
        out.emplace_back();
        boxes = 0;
      }
    }
    if (out.back().empty()) out.pop_back();
    return out;
  };
  int64_t total_boxes = 0;
  for (auto *f : frames) total_boxes += static_cast<int64_t>(f->boxes.size());
  const int64_t steps = (total_boxes + c.batch_size - 1) / c.batch_size;
  Schedule opt(sys.btc->parameters(), c, steps * c.epochs);

  epoch_loop(
      run, in, c, *sys.btc,
      [&](int epoch) {
        EpochLog log;
        int n = 0;
        for (const auto &batch : group(frames)) {
          opt.zero();
          std::vector<torch::Tensor> logits;
          std::vector<int64_t> labels;
          for (auto *f : batch) {
            logits.push_back(sys.btc->forward(make_btc_inputs(f->image, f->boxes, in.tokenizer, in.model)));
            for (const auto &b : f->boxes) labels.push_back(static_cast<int64_t>(b.category.value()));
          }
          auto loss = torch::nn::functional::cross_entropy(torch::cat(logits, 0), torch::tensor(labels, torch::kLong));
          require_finite(loss, epoch);
          loss.backward();
          opt.step();
          log.train_loss += loss.item<double>();
          ++n;
        }
        if (n) log.train_loss /= n;
        return log;
      },
      [&] { return evaluate_pip_btc(sys, in.corpus->dev); },
      [&] { return pip_checkpoint("pip_btc", *sys.btc, in.model, in.tokenizer); });
  return run;
}

SeedRun train_pip_er(const TrainInputs &in, const TrainConfig &c, std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  torch::manual_seed(seed);
  std::mt19937_64 rng(seed);
  PipSystem sys = PipSystem::create(in.model, in.tokenizer);
  std::vector<const BoxRecord *> boxes;
  for (auto *f : training_frames(*in.corpus, c))
    for (const auto &b : f->boxes)
      if (b.category == BoxCategory::kPersonInfo && !b.text.empty()) boxes.push_back(&b);
  const int64_t steps = (static_cast<int64_t>(boxes.size()) + c.batch_size - 1) / c.batch_size;
  Schedule opt(sys.er->parameters(), c, steps * c.epochs);

  epoch_loop(
      run, in, c, *sys.er,
      [&](int epoch) {
        EpochLog log;
        int n = 0;
        for (const auto &batch : make_batches(boxes, c.batch_size, rng)) {
          opt.zero();
          std::vector<std::string> texts;
          for (auto *b : batch) texts.push_back(b->text);
          auto tb = make_box_text_batch(texts, in.tokenizer, in.model.box_max_tokens);
          const int64_t T = tb.ids.size(1);
          auto targets = torch::tensor(token_targets(tb.pieces, batch, T), torch::kLong);
          auto logits = sys.er->tag_logits(sys.er->encode(tb)).view({-1, kNumBioTags});
          auto loss = torch::nn::functional::cross_entropy(
              logits, targets, torch::nn::functional::CrossEntropyFuncOptions().ignore_index(-100));
          require_finite(loss, epoch);
          loss.backward();
          opt.step();
          log.train_loss += loss.item<double>();
          ++n;
        }
        if (n) log.train_loss /= n;
        return log;
      },
      [&] { return evaluate_pip_er(sys, in.corpus->dev); },
      [&] { return pip_checkpoint("pip_er", *sys.er, in.model, in.tokenizer); });
  return run;
}

SeedRun train_pip_el(const TrainInputs &in, const TrainConfig &c, std::uint64_t seed, const Checkpoint &er_ckpt) {
  SeedRun run;
  run.seed = seed;
  torch::manual_seed(seed);
  std::mt19937_64 rng(seed);
  PipSystem sys = PipSystem::create(in.model, in.tokenizer);
  // The link encoder starts from the trained ER encoder.
  restore_module(*sys.er, er_ckpt);
  {
    torch::NoGradGuard no_grad;
    auto src = sys.er->text->named_parameters();
    for (auto &p : sys.el->text->named_parameters()) p.value().copy_(src[p.key()]);
  }

  // Frames with at least one Name x Identity pair.
  std::vector<const LabeledFrame *> frames;
  for (auto *f : training_frames(*in.corpus, c)) {
    int names = 0, identities = 0;
    for (const auto &b : f->boxes)
      for (const auto &s : b.entity_spans) (s.category == EntityCategory::kName ? names : identities)++;
    if (names > 0 && identities > 0) frames.push_back(f);
  }
  const int64_t steps = (static_cast<int64_t>(frames.size()) + c.batch_size - 1) / c.batch_size;
  Schedule opt(sys.el->parameters(), c, steps * c.epochs);

  epoch_loop(
      run, in, c, *sys.el,
      [&](int epoch) {
        EpochLog log;
        int n = 0;
        for (const auto &batch : make_batches(frames, c.batch_size, rng)) {
          opt.zero();
          std::vector<torch::Tensor> x;
          std::vector<int64_t> y;
          for (const auto *f : batch) {
            std::vector<EntityMention> mentions;
            for (const auto &box : f->boxes)
              if (box.category == BoxCategory::kPersonInfo)
                for (auto &m : gold_mentions(sys.el->text, in.tokenizer, in.model, box)) mentions.push_back(std::move(m));
            const auto pm = build_pair_matrix(mentions);
            if (pm.empty()) continue;
            const auto gold = gold_pair_keys(*f);
            for (size_t p = 0; p < pm.names.size(); ++p)
              for (size_t q = 0; q < pm.identities.size(); ++q) {
                const auto &nm = mentions[pm.names[p]];
                const auto &id = mentions[pm.identities[q]];
                auto it = gold.find({{nm.box_id, nm.start, nm.end, nm.category}, {id.box_id, id.start, id.end, id.category}});
                y.push_back(it != gold.end() && it->second ? 1 : 0);
              }
            x.push_back(pm.flat());
          }
          if (x.empty()) continue;
          auto loss = torch::nn::functional::cross_entropy(sys.el->forward(torch::cat(x, 0)), torch::tensor(y, torch::kLong));
          require_finite(loss, epoch);
          loss.backward();
          opt.step();
          log.train_loss += loss.item<double>();
          ++n;
        }
        if (n) log.train_loss /= n;
        return log;
      },
      [&] { return evaluate_pip_el(sys, in.corpus->dev); },
      [&] { return pip_checkpoint("pip_el", *sys.el, in.model, in.tokenizer); });
  return run;
}

SeedRun train_uni(const TrainInputs &in, const TrainConfig &c, std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  torch::manual_seed(seed);
  std::mt19937_64 rng(seed);
  UniSystem sys = UniSystem::create(in.model, in.tokenizer, c.modality);
  sys.encoding = in.encoding;
  sys.weights = c.weights;

  std::vector<UniExample> examples;
  for (auto *f : training_frames(*in.corpus, c))
    examples.push_back(make_uni_example(*f, in.tokenizer, in.encoding, c.modality));
  std::vector<int> index(examples.size());
  for (size_t i = 0; i < index.size(); ++i) index[i] = static_cast<int>(i);
  const int64_t steps = (static_cast<int64_t>(index.size()) + c.batch_size - 1) / c.batch_size;
  Schedule opt(sys.model->parameters(), c, steps * c.epochs);

  // Selection only looks at tasks that receive a loss.
  auto dev_report = [&] {
    MetricsReport r = evaluate_uni(sys, in.corpus->dev);
    if (c.weights.alpha == 0.0) r.btc.reset();
    if (c.weights.beta == 0.0) r.er.reset();
    if (c.weights.gamma() <= 0.0) r.el.reset();
    return r;
  };

  epoch_loop(
      run, in, c, *sys.model,
      [&](int epoch) {
        EpochLog log;
        int n = 0;
        for (const auto &batch : make_batches(index, c.batch_size, rng)) {
          opt.zero();
          std::vector<const UniExample *> ptrs;
          for (int i : batch) ptrs.push_back(&examples[i]);
          auto out = uni_forward(sys.model, ptrs, SpanMode::kGold);
          auto loss = joint_loss(out, ptrs, c.weights);
          if (!run.first_step) run.first_step = loss;
          require_finite(loss.total, epoch);
          if (loss.total.requires_grad()) {
            loss.total.backward();
            opt.step();
          }
          log.train_loss += loss.total.item<double>();
          log.btc_loss += loss.btc;
          log.er_loss += loss.er;
          log.el_loss += loss.el;
          ++n;
        }
        if (n) {
          log.train_loss /= n;
          log.btc_loss /= n;
          log.er_loss /= n;
          log.el_loss /= n;
        }
        return log;
      },
      dev_report, [&] { return uni_checkpoint(sys); });
  return run;
}

}  // namespace

TrainResult train(const TrainInputs &given, const TrainConfig &config) {
  config.validate();
  if (!given.corpus) throw ConfigError("training needs a corpus");
  if (config.kind == ModelKind::kPipEl && given.er_checkpoints.empty())
    throw ConfigError("pip_el training needs trained pip_er checkpoints");
  TrainInputs inputs = given;
  if (config.kind == ModelKind::kPipEl && given.er_checkpoints[0].meta.contains("tokenizer")) {
    inputs.tokenizer = tokenizer_from_json(given.er_checkpoints[0].meta.at("tokenizer"));
  } else if (!inputs.tokenizer.fitted()) {
    inputs.tokenizer = fit_tokenizer(inputs.tokenizer.mode(), *inputs.corpus);
  }
  if (!given.tokenizer.fitted()) inputs.model.vocab_size = inputs.tokenizer.size();
  if (inputs.tokenizer.size() > inputs.model.vocab_size)
    throw ConfigError("tokenizer is larger than the model vocabulary");
  inputs.model.validate();
  torch::set_num_threads(config.threads);

  TrainResult result;
  result.kind = config.kind;
  std::vector<MetricsReport> reports;
  for (size_t i = 0; i < config.seeds.size(); ++i) {
    const auto seed = config.seeds[i];
    SeedRun run;
    try {
      switch (config.kind) {
        case ModelKind::kPipBtc: run = train_pip_btc(inputs, config, seed); break;
        case ModelKind::kPipEr: run = train_pip_er(inputs, config, seed); break;
        case ModelKind::kPipEl:
          run = train_pip_el(inputs, config, seed, inputs.er_checkpoints[i % inputs.er_checkpoints.size()]);
          break;
        case ModelKind::kUni: run = train_uni(inputs, config, seed); break;
      }
    } catch (const Divergence &d) {
      run = SeedRun{};
      run.seed = seed;
      run.diverged = true;
      run.divergence = d.what();
      log_line(inputs, std::string(to_string(config.kind)) + " seed " + std::to_string(seed) + " diverged: " + d.what());
    }
    if (!run.diverged && !run.checkpoint.empty()) {
      run.checkpoint.meta["seed"] = seed;
      run.checkpoint.meta["selected_epoch"] = run.best_epoch;
      if (config.kind == ModelKind::kUni) {
        run.checkpoint.meta["loss_weights"] = {config.weights.alpha, config.weights.beta, config.weights.gamma()};
        run.checkpoint.meta["modality"] = std::string(to_string(config.modality));
      }
      if (!inputs.out_dir.empty()) {
        run.checkpoint_path =
            inputs.out_dir / (std::string(to_string(config.kind)) + "-seed" + std::to_string(seed) + ".ckpt");
        save_checkpoint(run.checkpoint_path, run.checkpoint);
      }
      reports.push_back(run.dev_report);
    }
    result.runs.push_back(std::move(run));
  }
  result.aggregate = aggregate(reports);
  return result;
}

}  // namespace vkie
