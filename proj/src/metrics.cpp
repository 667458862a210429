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

#include "vkie/metrics.hpp"

#include <cmath>
#include <set>

namespace vkie {

double f1_score(double precision, double recall) {
  return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

ClassScores scores_from_counts(int64_t tp, int64_t fp, int64_t fn) {
  ClassScores s;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  s.precision = tp + fp > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
  s.recall = tp + fn > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
  s.f1 = f1_score(s.precision, s.recall);
  return s;
}

namespace {

void finish(TaskMetrics &m) {
  int64_t tp = 0, fp = 0, fn = 0;
  const double n = static_cast<double>(m.per_class.size());
  for (const auto &c : m.per_class) {
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
    m.macro.precision += c.precision;
    m.macro.recall += c.recall;
    m.macro.f1 += c.f1;
  }
  m.macro.precision /= n;
  m.macro.recall /= n;
  m.macro.f1 /= n;
  m.macro.tp = tp;
  m.macro.fp = fp;
  m.macro.fn = fn;
  m.micro = scores_from_counts(tp, fp, fn);
}

}  // namespace

TaskMetrics classification_metrics(const std::string &task, const std::vector<std::string> &classes,
                                   const std::vector<int> &gold, const std::vector<int> &pred) {
  if (gold.size() != pred.size())
    throw ShapeError(task + ": " + std::to_string(gold.size()) + " gold labels vs " + std::to_string(pred.size()) +
                     " predictions");
  const int K = static_cast<int>(classes.size());
  std::vector<int64_t> tp(K, 0), fp(K, 0), fn(K, 0);
  int64_t correct = 0;
  for (size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] < 0 || gold[i] >= K) throw ShapeError(task + ": gold label out of range at " + std::to_string(i));
    if (pred[i] < -1 || pred[i] >= K) throw ShapeError(task + ": prediction out of range at " + std::to_string(i));
    if (pred[i] == gold[i]) {
      ++tp[gold[i]];
      ++correct;
    } else {
      ++fn[gold[i]];
      if (pred[i] >= 0) ++fp[pred[i]];
    }
  }
  TaskMetrics m;
  m.task = task;
  m.classes = classes;
  m.instances = static_cast<int64_t>(gold.size());
  for (int k = 0; k < K; ++k) m.per_class.push_back(scores_from_counts(tp[k], fp[k], fn[k]));
  finish(m);
  m.accuracy = gold.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(gold.size());
  return m;
}

TaskMetrics span_metrics(const std::vector<std::vector<SpanKey>> &gold, const std::vector<std::vector<SpanKey>> &pred) {
  if (gold.size() != pred.size()) throw ShapeError("ER: gold and prediction frame counts differ");
  int64_t tp[kNumEntityCategories] = {}, fp[kNumEntityCategories] = {}, fn[kNumEntityCategories] = {};
  TaskMetrics m;
  m.task = "ER";
  m.classes = {"Name", "Identity"};
  for (size_t f = 0; f < gold.size(); ++f) {
    const std::set<SpanKey> g(gold[f].begin(), gold[f].end()), p(pred[f].begin(), pred[f].end());
    for (const auto &k : p) (g.count(k) ? tp : fp)[static_cast<int>(k.category)]++;
    for (const auto &k : g)
      if (!p.count(k)) fn[static_cast<int>(k.category)]++;
    m.instances += static_cast<int64_t>(g.size());
  }
  for (int c = 0; c < kNumEntityCategories; ++c) m.per_class.push_back(scores_from_counts(tp[c], fp[c], fn[c]));
  finish(m);
  return m;
}

TaskMetrics pair_metrics(const std::vector<std::map<PairKey, bool>> &gold,
                         const std::vector<std::map<PairKey, bool>> &pred) {
  if (gold.size() != pred.size()) throw ShapeError("EL: gold and prediction frame counts differ");
  std::vector<int> g, p;
  for (size_t f = 0; f < gold.size(); ++f) {
    for (const auto &[key, matched] : gold[f]) {
      g.push_back(matched ? 1 : 0);
      auto it = pred[f].find(key);
      p.push_back(it == pred[f].end() ? -1 : (it->second ? 1 : 0));
    }
    for (const auto &[key, matched] : pred[f]) {
      if (gold[f].count(key)) continue;
      g.push_back(0);
      p.push_back(matched ? 1 : 0);
    }
  }
  return classification_metrics("EL", el_classes(), g, p);
}

std::vector<SpanKey> gold_span_keys(const LabeledFrame &frame) {
  std::vector<SpanKey> out;
  for (const auto &b : frame.boxes)
    for (const auto &s : b.entity_spans) out.push_back({b.box_id, s.start, s.end, s.category});
  return out;
}

std::map<PairKey, bool> gold_pair_keys(const LabeledFrame &frame) {
  std::map<PairKey, bool> out;
  auto key = [&](const EntityRef &r) {
    const BoxRecord *b = frame.find_box(r.box_id);
    if (!b || r.span_index < 0 || r.span_index >= static_cast<int>(b->entity_spans.size()))
      throw ShapeError("link refers to a missing span in frame " + frame.frame_id);
    const auto &s = b->entity_spans[r.span_index];
    return SpanKey{b->box_id, s.start, s.end, s.category};
  };
  for (const auto &l : frame.links) out[{key(l.name), key(l.identity)}] = l.matched;
  return out;
}

std::vector<SpanKey> predicted_span_keys(const FrameExtraction &ex) {
  std::vector<SpanKey> out;
  for (const auto &m : ex.mentions) out.push_back({m.box_id, m.start, m.end, m.category});
  return out;
}

std::map<PairKey, bool> predicted_pair_keys(const FrameExtraction &ex) {
  std::map<PairKey, bool> out;
  for (const auto &p : ex.pairs) {
    const auto &n = ex.mentions.at(p.name_index);
    const auto &i = ex.mentions.at(p.identity_index);
    out[{{n.box_id, n.start, n.end, n.category}, {i.box_id, i.start, i.end, i.category}}] = p.matched;
  }
  return out;
}

MetricsReport compute_metrics(const std::vector<FrameExtraction> &predictions, const std::vector<LabeledFrame> &gold,
                              const std::vector<Task> &tasks) {
  if (predictions.size() != gold.size())
    throw ShapeError("compute_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                     std::to_string(gold.size()) + " frames");
  auto wants = [&](Task t) { return std::find(tasks.begin(), tasks.end(), t) != tasks.end(); };
  MetricsReport r;
  r.frames = static_cast<int64_t>(gold.size());
  for (const auto &p : predictions) {
    r.bio_repairs += p.bio_repairs;
    for (const auto &m : p.mentions) r.clipped_mentions += m.clipped ? 1 : 0;
  }
  if (wants(Task::kBtc)) {
    std::vector<int> g, p;
    for (size_t f = 0; f < gold.size(); ++f) {
      for (const auto &b : gold[f].boxes) {
        if (!b.category) throw ShapeError("frame " + gold[f].frame_id + " has an unlabeled box");
        g.push_back(static_cast<int>(*b.category));
        const auto c = predictions[f].category_of(b.box_id);
        p.push_back(c ? static_cast<int>(*c) : -1);
      }
    }
    r.btc = classification_metrics("BTC", btc_classes(), g, p);
  }
  if (wants(Task::kEr)) {
    std::vector<std::vector<SpanKey>> g, p;
    for (size_t f = 0; f < gold.size(); ++f) {
      g.push_back(gold_span_keys(gold[f]));
      p.push_back(predicted_span_keys(predictions[f]));
    }
    r.er = span_metrics(g, p);
  }
  if (wants(Task::kEl)) {
    std::vector<std::map<PairKey, bool>> g, p;
    for (size_t f = 0; f < gold.size(); ++f) {
      g.push_back(gold_pair_keys(gold[f]));
      p.push_back(predicted_pair_keys(predictions[f]));
    }
    r.el = pair_metrics(g, p);
  }
  return r;
}

std::map<std::string, double> flatten(const MetricsReport &report) {
  std::map<std::string, double> out;
  auto put = [&](const std::string &prefix, const ClassScores &s) {
    out[prefix + ".P"] = s.precision;
    out[prefix + ".R"] = s.recall;
    out[prefix + ".F1"] = s.f1;
  };
  for (const auto *t : {&report.btc, &report.er, &report.el}) {
    if (!*t) continue;
    const TaskMetrics &m = **t;
    for (size_t k = 0; k < m.classes.size(); ++k) put(m.task + "." + m.classes[k], m.per_class[k]);
    put(m.task + ".macro", m.macro);
    put(m.task + ".micro", m.micro);
    if (m.accuracy) out[m.task + ".Acc"] = *m.accuracy;
  }
  return out;
}

std::map<std::string, MetricStat> aggregate(const std::vector<MetricsReport> &reports) {
  std::map<std::string, MetricStat> out;
  for (const auto &r : reports)
    for (const auto &[k, v] : flatten(r)) out[k].values.push_back(v);
  for (auto &[k, s] : out) {
    const double n = static_cast<double>(s.values.size());
    double sum = 0.0;
    for (double v : s.values) sum += v;
    s.mean = sum / n;
    double sq = 0.0;
    for (double v : s.values) sq += (v - s.mean) * (v - s.mean);
    s.stddev = s.values.size() > 1 ? std::sqrt(sq / (n - 1.0)) : 0.0;
  }
  return out;
}

}  // namespace vkie
