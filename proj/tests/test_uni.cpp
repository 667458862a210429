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

#include "helpers.hpp"
#include "vkie/uni_model.hpp"

using namespace vkie;

namespace {

EncodingConfig tiny_encoding() {
  EncodingConfig e;
  e.max_length = testing::tiny_config().max_length;
  e.coord_size = testing::tiny_config().coord_size;
  return e;
}

LabeledFrame person_frame(std::uint64_t seed, int persons = 2) {
  auto spec = testing::small_spec();
  spec.persons = persons;
  return generate_frame(spec, seed);
}

}  // namespace

TEST_CASE("loss weights must lie on the simplex") {
  CHECK_NOTHROW((LossWeights{0.3, 0.3}).validate());
  CHECK_NOTHROW((LossWeights{1.0, 0.0}).validate());
  CHECK_THROWS_AS((LossWeights{0.7, 0.4}).validate(), ConfigError);
  CHECK_THROWS_AS((LossWeights{-0.1, 0.5}).validate(), ConfigError);
  CHECK((LossWeights{0.3, 0.3}).gamma() == doctest::Approx(0.4));
}

TEST_CASE("combine_losses is the weighted sum and drops undefined terms") {
  const auto a = torch::tensor(2.0), b = torch::tensor(3.0), c = torch::tensor(5.0);
  auto l = combine_losses(a, b, c, {0.3, 0.3});
  CHECK(l.total.item<double>() == doctest::Approx(0.3 * 2 + 0.3 * 3 + 0.4 * 5));
  CHECK(l.has_btc);
  CHECK(l.el == doctest::Approx(5.0));
  l = combine_losses(a, b, torch::Tensor(), {0.3, 0.3});
  CHECK_FALSE(l.has_el);
  CHECK(l.total.item<double>() == doctest::Approx(0.3 * 2 + 0.3 * 3));
}

TEST_CASE("examples carry one BTC label per box and one ER label per TEXT token") {
  const auto frame = person_frame(12);
  const auto ex = make_uni_example(frame, Tokenizer::ascii(), tiny_encoding(), Modality::kTextVisual);
  CHECK(ex.labeled);
  CHECK(static_cast<int>(ex.btc_labels.size()) == ex.seq.num_boxes);
  CHECK(static_cast<int>(ex.er_labels.size()) == ex.seq.num_text);
  int names = 0, identities = 0;
  for (const auto &s : ex.gold_spans) (s.category == EntityCategory::kName ? names : identities)++;
  CHECK(ex.gold_pair_labels.size() == static_cast<size_t>(names * identities));
  int matched = 0;
  for (int v : ex.gold_pair_labels) matched += v;
  CHECK(matched <= std::min(names, identities));

  const auto visual = make_uni_example(frame, Tokenizer::ascii(), tiny_encoding(), Modality::kVisualOnly);
  CHECK(visual.seq.num_text == 0);
  CHECK(visual.gold_spans.empty());
  CHECK(visual.seq.num_boxes == ex.seq.num_boxes);
}

TEST_CASE("a forward pass yields logits at the positions the roles dictate") {
  torch::manual_seed(1);
  auto sys = UniSystem::create(testing::tiny_config(), Tokenizer::ascii());
  sys.encoding = tiny_encoding();
  const auto f1 = person_frame(3), f2 = person_frame(4, 1);
  const auto e1 = make_uni_example(f1, sys.tokenizer, sys.encoding, sys.modality);
  const auto e2 = make_uni_example(f2, sys.tokenizer, sys.encoding, sys.modality);
  auto out = uni_forward(sys.model, {&e1, &e2}, SpanMode::kGold);
  CHECK(out.btc_logits.size(0) == e1.seq.num_boxes + e2.seq.num_boxes);
  CHECK(out.er_logits.size(0) == e1.seq.num_text + e2.seq.num_text);
  CHECK(out.btc_offset == std::vector<int64_t>{0, e1.seq.num_boxes, e1.seq.num_boxes + e2.seq.num_boxes});
  const auto pairs = static_cast<int64_t>(e1.gold_pair_labels.size() + e2.gold_pair_labels.size());
  CHECK(out.el_logits.size(0) == pairs);
  CHECK(out.el_logits.size(1) == 2);
  const auto loss = joint_loss(out, {&e1, &e2}, sys.weights);
  CHECK(loss.has_btc);
  CHECK(loss.has_er);
  CHECK(loss.total.requires_grad());
  CHECK(loss.total.item<double>() ==
        doctest::Approx(0.3 * loss.btc + 0.3 * loss.er + (loss.has_el ? 0.4 * loss.el : 0.0)).epsilon(1e-6));
}

TEST_CASE("uni_extract runs the encoder exactly once per frame") {
  torch::manual_seed(2);
  auto sys = UniSystem::create(testing::tiny_config(), Tokenizer::ascii());
  sys.encoding = tiny_encoding();
  sys.model->eval();
  const auto frame = person_frame(8);
  const auto before = sys.model->encoder->calls();
  const auto r = uni_extract(sys, frame.image, frame.boxes);
  CHECK(sys.model->encoder->calls() - before == 1);
  CHECK(r.encoder_calls == 1);
  CHECK(r.extraction.boxes.size() == frame.boxes.size());
  for (const auto &p : r.extraction.pairs) {
    CHECK(p.probability >= 0.0f);
    CHECK(p.probability <= 1.0f);
  }
  // Gold mode pools every labeled span that survived truncation.
  const auto gold = uni_extract(sys, frame.image, frame.boxes, SpanMode::kGold);
  const auto ex = make_uni_example(frame, sys.tokenizer, sys.encoding, sys.modality);
  CHECK(gold.extraction.mentions.size() == ex.gold_spans.size());
}

TEST_CASE("inference is deterministic") {
  torch::manual_seed(5);
  auto sys = UniSystem::create(testing::tiny_config(), Tokenizer::ascii());
  sys.encoding = tiny_encoding();
  sys.model->eval();
  const auto frame = person_frame(21);
  const auto a = uni_extract(sys, frame.image, frame.boxes, SpanMode::kGold);
  const auto b = uni_extract(sys, frame.image, frame.boxes, SpanMode::kGold);
  REQUIRE(a.extraction.pairs.size() == b.extraction.pairs.size());
  for (size_t i = 0; i < a.extraction.pairs.size(); ++i)
    CHECK(a.extraction.pairs[i].probability == b.extraction.pairs[i].probability);
  for (size_t i = 0; i < a.extraction.boxes.size(); ++i)
    CHECK(a.extraction.boxes[i].probabilities == b.extraction.boxes[i].probabilities);
}

TEST_CASE("a frame without boxes extracts nothing") {
  auto sys = UniSystem::create(testing::tiny_config(), Tokenizer::ascii());
  sys.encoding = tiny_encoding();
  sys.model->eval();
  const auto frame = person_frame(1);
  const auto r = uni_extract(sys, frame.image, {});
  CHECK(r.extraction.boxes.empty());
  CHECK(r.extraction.mentions.empty());
  CHECK(r.extraction.pairs.empty());
}

TEST_CASE("the unified model has fewer parameters than the three pipeline models") {
  const auto c = ModelConfig::desk();
  const auto tok = Tokenizer::ascii();
  const auto uni = UniSystem::create(c, tok);
  const auto pip = PipSystem::create(c, tok);
  CHECK(parameter_count(*uni.model) < pip.parameter_count());
}
