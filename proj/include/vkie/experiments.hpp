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

// Comparison tables: upstream-oracle study, modality and loss ablations, and
// the latency/parameter benchmark. Each table has a JSON form and a text form.

#ifndef VKIE_EXPERIMENTS_HPP_
#define VKIE_EXPERIMENTS_HPP_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vkie/metrics.hpp"
#include "vkie/pip_models.hpp"
#include "vkie/train.hpp"
#include "vkie/uni_model.hpp"

namespace vkie {

// One row of the ER/EL comparison. "*" rows replace the upstream prediction
// with ground truth; the unified ER has no such row because its ER does not
// depend on BTC.
struct ErrorStudyRow {
  std::string method;               // "PipVKIE*", "PipVKIE", "UniVKIE*", "UniVKIE"
  std::optional<TaskMetrics> er;    // Name/Identity/Avg P, R, F1
  std::optional<double> el_accuracy;
};

struct ErrorStudyTable {
  std::vector<ErrorStudyRow> rows;  // always the four rows above, in that order
  nlohmann::json to_json() const;
  std::string to_text() const;
};

ErrorStudyTable error_accumulation_study(const PipSystem &pip, const UniSystem &uni,
                                         const std::vector<LabeledFrame> &test);

struct AblationRow {
  std::string label;
  std::vector<bool> flags;  // modality or loss checkmarks
  std::optional<double> btc_accuracy;
  std::optional<double> er_f1;
  std::optional<double> el_accuracy;
  int seeds = 0;
};

struct AblationTable {
  std::vector<std::string> flag_names;
  std::vector<AblationRow> rows;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Row value = median over seeds of the test-split metric ("-" when the task is
// undefined for the row).
AblationRow ablation_row(const std::string &label, std::vector<bool> flags, const std::vector<MetricsReport> &reports);

// Trains uni variants and scores them on the test split. Rows: visual only,
// text only, text + visual.
AblationTable ablate_modality(const TrainInputs &inputs, const TrainConfig &base);
// Rows: full (0.3/0.3/0.4), ER+EL, BTC+ER, BTC only.
AblationTable ablate_loss(const TrainInputs &inputs, const TrainConfig &base);
std::vector<std::pair<std::string, LossWeights>> loss_ablation_settings();

struct LatencyStats {
  double median_ms = 0.0;
  double p95_ms = 0.0;
  int frames = 0;
};

struct BenchmarkResult {
  LatencyStats pip, uni;
  int64_t pip_params = 0, uni_params = 0;
  std::vector<int> box_counts;          // slope study
  std::vector<double> pip_by_boxes_ms;  // median per count
  std::vector<double> uni_by_boxes_ms;
  double pip_slope_ms_per_box = 0.0;    // least-squares fit
  double uni_slope_ms_per_box = 0.0;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

struct BenchmarkOptions {
  int warmup = 2;
  int repetitions = 5;
  std::vector<int> box_counts{2, 5, 10, 20};
  int frames_per_count = 3;
  std::uint64_t seed = 7;
};

// Per-frame wall time of run_pipeline and uni_extract on the given frames
// (only frames with at least 5 boxes are timed) plus a box-count sweep on
// generated frames of the same size.
BenchmarkResult benchmark(const PipSystem &pip, const UniSystem &uni, const std::vector<LabeledFrame> &frames,
                          const BenchmarkOptions &options = {});

// Least-squares slope of y over x.
double fit_slope(const std::vector<double> &x, const std::vector<double> &y);
double percentile(std::vector<double> values, double q);
double median(std::vector<double> values);

}  // namespace vkie

#endif  // VKIE_EXPERIMENTS_HPP_
