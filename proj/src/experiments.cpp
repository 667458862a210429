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

#include "vkie/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "vkie/checkpoint.hpp"
#include "vkie/corpus.hpp"

namespace vkie {

using nlohmann::json;

double median(std::vector<double> values) { return percentile(std::move(values), 0.5); }

double percentile(std::vector<double> values, double q) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<size_t>(std::floor(pos));
  const auto hi = std::min(values.size() - 1, lo + 1);
  return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double fit_slope(const std::vector<double> &x, const std::vector<double> &y) {
  if (x.size() != y.size() || x.size() < 2) throw ShapeError("slope fit needs two or more paired points");
  const double n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0, sxx = 0;
  for (size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (sxx == 0.0) throw ShapeError("slope fit needs distinct x values");
  return sxy / sxx;
}

namespace {

std::string cell(const std::optional<double> &v) {
  if (!v) return "-";
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", 100.0 * *v);
  return buf;
}

json opt_json(const std::optional<double> &v) { return v ? json(*v) : json(nullptr); }

json scores_json(const ClassScores &s) { return {{"P", s.precision}, {"R", s.recall}, {"F1", s.f1}}; }

std::string pad(const std::string &s, size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

}  // namespace

ErrorStudyTable error_accumulation_study(const PipSystem &pip, const UniSystem &uni,
                                         const std::vector<LabeledFrame> &test) {
  ErrorStudyTable t;
  const auto pip_star_er = evaluate_pipeline(pip, test, {true, false});
  const auto pip_star_el = evaluate_pipeline(pip, test, {true, true});
  const auto pip_plain = evaluate_pipeline(pip, test, {false, false});
  const auto uni_star = evaluate_uni(uni, test, SpanMode::kGold);
  const auto uni_plain = evaluate_uni(uni, test, SpanMode::kPredicted);
  auto acc = [](const MetricsReport &r) -> std::optional<double> {
    return r.el ? r.el->accuracy : std::nullopt;
  };
  t.rows.push_back({"PipVKIE*", pip_star_er.er, acc(pip_star_el)});
  t.rows.push_back({"PipVKIE", pip_plain.er, acc(pip_plain)});
  t.rows.push_back({"UniVKIE*", std::nullopt, acc(uni_star)});
  t.rows.push_back({"UniVKIE", uni_plain.er, acc(uni_plain)});
  return t;
}

json ErrorStudyTable::to_json() const {
  json rows_json = json::array();
  for (const auto &r : rows) {
    json er = nullptr;
    if (r.er)
      er = {{"Name", scores_json(r.er->per_class[0])},
            {"Identity", scores_json(r.er->per_class[1])},
            {"Avg", scores_json(r.er->macro)},
            {"Avg_micro", scores_json(r.er->micro)}};
    rows_json.push_back({{"method", r.method}, {"ER", er}, {"EL_Acc", opt_json(r.el_accuracy)}});
  }
  return {{"table", "error_accumulation"}, {"rows", rows_json}};
}

std::string ErrorStudyTable::to_text() const {
  std::ostringstream o;
  o << pad("Methods", 10) << "| Name P   R      F1     | Identity P R     F1     | Avg P    R      F1     || EL Acc\n";
  for (const auto &r : rows) {
    o << pad(r.method, 10) << "| ";
    for (int k = 0; k < 3; ++k) {
      std::optional<ClassScores> s;
      if (r.er) s = k < 2 ? r.er->per_class[k] : r.er->macro;
      for (int m = 0; m < 3; ++m) {
        std::optional<double> v;
        if (s) v = m == 0 ? s->precision : (m == 1 ? s->recall : s->f1);
        o << pad(cell(v), 7);
      }
      o << "| ";
    }
    o << "| " << cell(r.el_accuracy) << "\n";
  }
  return o.str();
}

AblationRow ablation_row(const std::string &label, std::vector<bool> flags, const std::vector<MetricsReport> &reports) {
  AblationRow row;
  row.label = label;
  row.flags = std::move(flags);
  row.seeds = static_cast<int>(reports.size());
  std::vector<double> btc, er, el;
  for (const auto &r : reports) {
    if (r.btc && r.btc->accuracy) btc.push_back(*r.btc->accuracy);
    if (r.er) er.push_back(r.er->macro.f1);
    if (r.el && r.el->accuracy) el.push_back(*r.el->accuracy);
  }
  if (!btc.empty()) row.btc_accuracy = median(btc);
  if (!er.empty()) row.er_f1 = median(er);
  if (!el.empty()) row.el_accuracy = median(el);
  return row;
}

json AblationTable::to_json() const {
  json rows_json = json::array();
  for (const auto &r : rows)
    rows_json.push_back({{"label", r.label},
                         {"flags", r.flags},
                         {"BTC_Acc", opt_json(r.btc_accuracy)},
                         {"ER_F1", opt_json(r.er_f1)},
                         {"EL_Acc", opt_json(r.el_accuracy)},
                         {"seeds", r.seeds}});
  return {{"flag_names", flag_names}, {"rows", rows_json}};
}

std::string AblationTable::to_text() const {
  std::ostringstream o;
  for (const auto &n : flag_names) o << pad(n, 8);
  o << "| BTC Acc | ER F1  | EL Acc\n";
  for (const auto &r : rows) {
    for (bool f : r.flags) o << pad(f ? "x" : "", 8);
    o << "| " << pad(cell(r.btc_accuracy), 8) << "| " << pad(cell(r.er_f1), 7) << "| " << cell(r.el_accuracy) << "\n";
  }
  return o.str();
}

namespace {

std::vector<MetricsReport> test_reports(const TrainResult &result, const std::vector<LabeledFrame> &test,
                                        const LossWeights &weights) {
  std::vector<MetricsReport> out;
  for (const auto &run : result.runs) {
    if (run.diverged || run.checkpoint.tensors.empty()) continue;
    const auto sys = load_uni_system(run.checkpoint);
    auto r = evaluate_uni(sys, test);
    if (weights.alpha == 0.0) r.btc.reset();
    if (weights.beta == 0.0) r.er.reset();
    if (weights.gamma() <= 0.0) r.el.reset();
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

AblationTable ablate_modality(const TrainInputs &inputs, const TrainConfig &base) {
  AblationTable t;
  t.flag_names = {"Visual", "Text"};
  const std::vector<std::tuple<std::string, Modality, bool, bool>> variants{
      {"visual", Modality::kVisualOnly, true, false},
      {"text", Modality::kTextOnly, false, true},
      {"text+visual", Modality::kTextVisual, true, true}};
  for (const auto &[label, modality, v, x] : variants) {
    TrainConfig c = base;
    c.kind = ModelKind::kUni;
    c.modality = modality;
    const auto result = train(inputs, c);
    t.rows.push_back(ablation_row(label, {v, x}, test_reports(result, inputs.corpus->test, c.weights)));
  }
  return t;
}

std::vector<std::pair<std::string, LossWeights>> loss_ablation_settings() {
  return {{"BTC+ER+EL", {0.3, 0.3}}, {"ER+EL", {0.0, 3.0 / 7.0}}, {"BTC+ER", {0.5, 0.5}}, {"BTC", {1.0, 0.0}}};
}

AblationTable ablate_loss(const TrainInputs &inputs, const TrainConfig &base) {
  AblationTable t;
  t.flag_names = {"L_BTC", "L_ER", "L_EL"};
  for (const auto &[label, w] : loss_ablation_settings()) {
    TrainConfig c = base;
    c.kind = ModelKind::kUni;
    c.weights = w;
    const auto result = train(inputs, c);
    t.rows.push_back(ablation_row(label, {w.alpha > 0, w.beta > 0, w.gamma() > 1e-12},
                                  test_reports(result, inputs.corpus->test, w)));
  }
  return t;
}

json BenchmarkResult::to_json() const {
  return {{"pip", {{"median_ms", pip.median_ms}, {"p95_ms", pip.p95_ms}, {"frames", pip.frames}}},
          {"uni", {{"median_ms", uni.median_ms}, {"p95_ms", uni.p95_ms}, {"frames", uni.frames}}},
          {"pip_params", pip_params},
          {"uni_params", uni_params},
          {"box_counts", box_counts},
          {"pip_by_boxes_ms", pip_by_boxes_ms},
          {"uni_by_boxes_ms", uni_by_boxes_ms},
          {"pip_slope_ms_per_box", pip_slope_ms_per_box},
          {"uni_slope_ms_per_box", uni_slope_ms_per_box}};
}

std::string BenchmarkResult::to_text() const {
  std::ostringstream o;
  char buf[160];
  o << "Methods                   | Speed (median / p95) | Params\n";
  std::snprintf(buf, sizeof buf, "PipVKIE (BTC + ER + EL)   | %8.2fms / %8.2fms | %lld\n", pip.median_ms, pip.p95_ms,
                static_cast<long long>(pip_params));
  o << buf;
  std::snprintf(buf, sizeof buf, "UniVKIE (BTC + ER + EL)   | %8.2fms / %8.2fms | %lld\n", uni.median_ms, uni.p95_ms,
                static_cast<long long>(uni_params));
  o << buf << "\nboxes | pip ms   | uni ms\n";
  for (size_t i = 0; i < box_counts.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%5d | %8.2f | %8.2f\n", box_counts[i], pip_by_boxes_ms[i], uni_by_boxes_ms[i]);
    o << buf;
  }
  std::snprintf(buf, sizeof buf, "slope ms/box: pip %.3f, uni %.3f\n", pip_slope_ms_per_box, uni_slope_ms_per_box);
  o << buf;
  return o.str();
}

namespace {

double time_ms(const std::function<void()> &f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

// A frame with n unlabeled boxes on a grid over a generated background.
std::pair<Image, std::vector<BoxRecord>> sweep_frame(int width, int height, int n, std::mt19937_64 &rng) {
  FrameSpec spec;
  spec.width = width;
  spec.height = height;
  spec.titles = spec.subtitles = spec.persons = spec.misc = 0;
  Image image = generate_frame(spec, rng()).image;
  const int cols = 4;
  const int rows = (n + cols - 1) / cols;
  const int cw = width / cols, ch = height / rows;
  const auto &lex = spec.lexicon;
  std::vector<BoxRecord> boxes;
  for (int i = 0; i < n; ++i) {
    BoxRecord b;
    b.box_id = i;
    const int r = i / cols, c = i % cols;
    b.bbox = {c * cw + 1, r * ch + 1, (c + 1) * cw - 1, (r + 1) * ch - 1};
    b.text = lex.first_names[rng() % lex.first_names.size()] + " " + lex.last_names[rng() % lex.last_names.size()] +
             ", " + lex.roles[rng() % lex.roles.size()];
    boxes.push_back(std::move(b));
  }
  return {std::move(image), std::move(boxes)};
}

}  // namespace

BenchmarkResult benchmark(const PipSystem &pip, const UniSystem &uni, const std::vector<LabeledFrame> &frames,
                          const BenchmarkOptions &options) {
  BenchmarkResult r;
  r.pip_params = pip.parameter_count();
  r.uni_params = parameter_count(*uni.model);

  auto measure = [&](const Image &image, const std::vector<BoxRecord> &boxes, std::vector<double> &pip_ms,
                     std::vector<double> &uni_ms) {
    for (int w = 0; w < options.warmup; ++w) {
      run_pipeline(pip, image, boxes);
      uni_extract(uni, image, boxes);
    }
    for (int k = 0; k < options.repetitions; ++k) {
      pip_ms.push_back(time_ms([&] { run_pipeline(pip, image, boxes); }));
      uni_ms.push_back(time_ms([&] { uni_extract(uni, image, boxes); }));
    }
  };

  std::vector<double> pip_ms, uni_ms;
  int timed = 0;
  for (const auto &f : frames) {
    if (f.boxes.size() < 5) continue;
    measure(f.image, f.boxes, pip_ms, uni_ms);
    ++timed;
  }
  r.pip = {median(pip_ms), percentile(pip_ms, 0.95), timed};
  r.uni = {median(uni_ms), percentile(uni_ms, 0.95), timed};

  if (!options.box_counts.empty()) {
    const int width = frames.empty() ? 640 : frames[0].image.width;
    const int height = frames.empty() ? 360 : frames[0].image.height;
    std::mt19937_64 rng(options.seed);
    std::vector<double> xs;
    for (int n : options.box_counts) {
      std::vector<double> p, u;
      for (int k = 0; k < options.frames_per_count; ++k) {
        const auto [image, boxes] = sweep_frame(width, height, n, rng);
        measure(image, boxes, p, u);
      }
      r.box_counts.push_back(n);
      xs.push_back(n);
      r.pip_by_boxes_ms.push_back(median(p));
      r.uni_by_boxes_ms.push_back(median(u));
    }
    if (xs.size() >= 2) {
      r.pip_slope_ms_per_box = fit_slope(xs, r.pip_by_boxes_ms);
      r.uni_slope_ms_per_box = fit_slope(xs, r.uni_by_boxes_ms);
    }
  }
  return r;
}

}  // namespace vkie
