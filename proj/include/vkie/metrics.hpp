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

#ifndef VKIE_METRICS_HPP_
#define VKIE_METRICS_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vkie/pip_models.hpp"
#include "vkie/types.hpp"

namespace vkie {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  int64_t tp = 0, fp = 0, fn = 0;
};

// F1 = 2PR / (P + R), 0 when P + R = 0.
double f1_score(double precision, double recall);
ClassScores scores_from_counts(int64_t tp, int64_t fp, int64_t fn);

struct TaskMetrics {
  std::string task;
  std::vector<std::string> classes;
  std::vector<ClassScores> per_class;
  ClassScores macro;  // unweighted mean of the per-class P, R and F1
  ClassScores micro;  // from pooled counts
  std::optional<double> accuracy;
  int64_t instances = 0;
};

// Single-label classification. gold[i] in [0, classes); pred[i] in
// [-1, classes) where -1 marks an instance the system produced no answer for.
// Throws ShapeError on length mismatch or out-of-range labels.
TaskMetrics classification_metrics(const std::string &task, const std::vector<std::string> &classes,
                                   const std::vector<int> &gold, const std::vector<int> &pred);

// An entity mention located by box, code-point span and category.
struct SpanKey {
  int box_id = 0;
  int start = 0;
  int end = 0;
  EntityCategory category = EntityCategory::kName;
  friend auto operator<=>(const SpanKey &, const SpanKey &) = default;
};

// Exact span + category matching per frame; gold and pred hold one set per
// frame. No accuracy is reported.
TaskMetrics span_metrics(const std::vector<std::vector<SpanKey>> &gold, const std::vector<std::vector<SpanKey>> &pred);

struct PairKey {
  SpanKey name;
  SpanKey identity;
  friend auto operator<=>(const PairKey &, const PairKey &) = default;
};

// Pair classification over the union of gold and predicted pairs per frame.
// A gold pair the system never evaluated counts as unanswered (-1); a
// predicted pair absent from gold has gold label NotMatched.
TaskMetrics pair_metrics(const std::vector<std::map<PairKey, bool>> &gold,
                         const std::vector<std::map<PairKey, bool>> &pred);

inline const std::vector<std::string> &btc_classes() {
  static const std::vector<std::string> c{"Title", "PersonInfo", "Subtitle", "Misc"};
  return c;
}
inline const std::vector<std::string> &el_classes() {
  static const std::vector<std::string> c{"NotMatched", "Matched"};
  return c;
}

struct MetricsReport {
  std::optional<TaskMetrics> btc, er, el;
  int64_t bio_repairs = 0;
  int64_t truncated_boxes = 0;
  int64_t clipped_mentions = 0;
  int64_t frames = 0;
};

enum class Task { kBtc, kEr, kEl };

// Scores extractions against labeled frames (aligned by index). Tasks not in
// `tasks` are left empty.
MetricsReport compute_metrics(const std::vector<FrameExtraction> &predictions, const std::vector<LabeledFrame> &gold,
                              const std::vector<Task> &tasks = {Task::kBtc, Task::kEr, Task::kEl});

std::vector<SpanKey> gold_span_keys(const LabeledFrame &frame);
std::map<PairKey, bool> gold_pair_keys(const LabeledFrame &frame);
std::vector<SpanKey> predicted_span_keys(const FrameExtraction &ex);
std::map<PairKey, bool> predicted_pair_keys(const FrameExtraction &ex);

// Scalar view, e.g. "BTC.Acc", "ER.Name.F1", "ER.macro.F1", "EL.micro.P".
std::map<std::string, double> flatten(const MetricsReport &report);

struct MetricStat {
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for a single value
  std::vector<double> values;
};

// Mean and standard deviation per flattened metric over seeds. Metrics missing
// from some reports are aggregated over the reports that have them.
std::map<std::string, MetricStat> aggregate(const std::vector<MetricsReport> &reports);

}  // namespace vkie

#endif  // VKIE_METRICS_HPP_
