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


#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "vkie/pip_models.hpp"

using namespace vkie;

namespace {

constexpr auto O = BioTag::kO;
constexpr auto BN = BioTag::kBName;
constexpr auto IN = BioTag::kIName;
constexpr auto BI = BioTag::kBIdentity;
constexpr auto II = BioTag::kIIdentity;
constexpr auto kName = EntityCategory::kName;
constexpr auto kIdentity = EntityCategory::kIdentity;

int count_persons(const LabeledFrame &f) {
  int n = 0;
  for (const auto &b : f.boxes) n += b.category == BoxCategory::kPersonInfo;
  return n;
}

}  // namespace

TEST_CASE("BIO2 decoding of hand-written sequences") {
  auto d = decode_bio2({BN, IN, O, BI, II, II});
  CHECK(d.spans == std::vector<EntitySpan>{{0, 2, kName}, {3, 6, kIdentity}});
  CHECK(d.repairs == 0);

  d = decode_bio2({IN, IN, O});
  CHECK(d.spans == std::vector<EntitySpan>{{0, 2, kName}});
  CHECK(d.repairs == 1);

  d = decode_bio2({BN, II, II});
  CHECK(d.spans == std::vector<EntitySpan>{{0, 1, kName}, {1, 3, kIdentity}});
  CHECK(d.repairs == 1);

  d = decode_bio2({BN, BN, O, II});
  CHECK(d.spans == std::vector<EntitySpan>{{0, 1, kName}, {1, 2, kName}, {3, 4, kIdentity}});
  CHECK(d.repairs == 1);

  CHECK(decode_bio2({}).spans.empty());
  CHECK(decode_bio2({O, O}).spans.empty());
}

TEST_CASE("encode_bio2 inverts decode_bio2 on random span sets") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 12);
    std::vector<EntitySpan> spans;
    int i = 0;
    while (i < n) {
      i += static_cast<int>(rng() % 3);
      if (i >= n) break;
      const int len = 1 + static_cast<int>(rng() % 3);
      const int end = std::min(n, i + len);
      spans.push_back({i, end, rng() % 2 ? kName : kIdentity});
      i = end;
    }
    const auto tags = encode_bio2(spans, n);
    REQUIRE(static_cast<int>(tags.size()) == n);
    const auto d = decode_bio2(tags);
    CHECK(d.spans == spans);
    CHECK(d.repairs == 0);
  }
}

TEST_CASE("tag names round-trip") {
  for (auto t : {O, BN, IN, BI, II}) CHECK(parse_bio_tag(to_string(t)) == t);
  CHECK(begin_tag(kIdentity) == BI);
  CHECK(inside_tag(kName) == IN);
}

TEST_CASE("character spans become token tags and back") {
  const auto tok = Tokenizer::build({"Ana Li, Mayor of Oslo"}, Tokenizer::Mode::kWord);
  const std::string text = "Ana Li, Mayor of Oslo";
  const auto pieces = tok.tokenize_with_offsets(text);
  REQUIRE(pieces.size() == 6);  // Ana Li , Mayor of Oslo
  const std::vector<EntitySpan> spans{{0, 6, kName}, {8, 21, kIdentity}};
  const auto tags = tags_from_char_spans(pieces, spans);
  CHECK(tags == std::vector<BioTag>{BN, IN, O, BI, II, II});
  const auto d = decode_bio2(tags);
  REQUIRE(d.spans.size() == 2);
  CHECK(token_span_to_chars(d.spans[0], pieces) == spans[0]);
  CHECK(token_span_to_chars(d.spans[1], pieces) == spans[1]);
  CHECK(char_span_to_tokens(spans[1], pieces) == std::pair<int, int>{3, 6});
  const auto none = char_span_to_tokens({6, 7, kName}, pieces);  // the comma's gap
  CHECK(none.first == 2);
}

TEST_CASE("pair matrix holds [h_p ; h_q] in mention order") {
  std::vector<EntityMention> ms(4);
  ms[0].category = kName;
  ms[1].category = kIdentity;
  ms[2].category = kName;
  ms[3].category = kIdentity;
  for (int i = 0; i < 4; ++i) ms[i].hidden = torch::full({3}, static_cast<float>(i));
  const auto pm = build_pair_matrix(ms);
  CHECK(pm.names == std::vector<int>{0, 2});
  CHECK(pm.identities == std::vector<int>{1, 3});
  REQUIRE(pm.entries.sizes() == torch::IntArrayRef{2, 2, 6});
  CHECK(torch::equal(pm.entries[1][0], torch::tensor({2.f, 2.f, 2.f, 1.f, 1.f, 1.f})));
  CHECK(pm.flat().sizes() == torch::IntArrayRef{4, 6});
  CHECK(torch::equal(pm.flat()[3], pm.entries[1][1]));

  std::vector<EntityMention> only_names(2);
  for (auto &m : only_names) m.hidden = torch::zeros({3});
  CHECK(build_pair_matrix(only_names).empty());
}

TEST_CASE("decisions take the argmax with ties to the lowest class") {
  const auto b = btc_decide(torch::tensor({1.0f, 3.0f, 3.0f, 0.0f}));
  CHECK(b.category == BoxCategory::kPersonInfo);
  double sum = 0.0;
  for (float p : b.probabilities) sum += p;
  CHECK(sum == doctest::Approx(1.0));
  CHECK_FALSE(el_decide(torch::tensor({0.0f, 0.0f})).matched);
  const auto e = el_decide(torch::tensor({0.0f, 2.0f}));
  CHECK(e.matched);
  CHECK(e.probability == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-6));
  const auto tags = er_decide(torch::tensor({{0.f, 1.f, 0.f, 0.f, 0.f}, {0.f, 0.f, 0.f, 0.f, 0.f}}));
  CHECK(tags == std::vector<BioTag>{BN, O});
}

TEST_CASE("box text batches are [CLS] text [SEP] and right-padded") {
  const auto tok = Tokenizer::ascii();
  const auto b = make_box_text_batch({"ab", "abcd"}, tok, 5);
  REQUIRE(b.ids.sizes() == torch::IntArrayRef{2, 5});
  CHECK(b.ids[0][0].item<int64_t>() == tok.cls_id());
  CHECK(b.ids[0][3].item<int64_t>() == tok.sep_id());
  CHECK(b.ids[0][4].item<int64_t>() == tok.pad_id());
  CHECK_FALSE(b.mask[0][4].item<bool>());
  CHECK(b.pieces[1].size() == 3);  // truncated to fit
  CHECK(b.ids[1][4].item<int64_t>() == tok.sep_id());
}

TEST_CASE("pipeline counts one call per box, per gated box and per pair") {
  torch::manual_seed(0);
  auto sys = PipSystem::create(testing::tiny_config(), Tokenizer::ascii());
  sys.eval();
  auto spec = testing::small_spec();
  spec.persons = 2;
  spec.stacked_probability = 0.0;
  const auto frame = generate_frame(spec, 4);
  PipelineOptions gold;
  gold.gold_btc = true;
  gold.gold_mentions = true;
  const auto r = run_pipeline(sys, frame.image, frame.boxes, gold);
  CHECK(r.counts.btc_calls == static_cast<int>(frame.boxes.size()));
  CHECK(r.counts.er_calls == count_persons(frame));
  CHECK(r.extraction.mentions.size() == 4);
  CHECK(r.counts.el_calls == 4);
  CHECK(r.extraction.pairs.size() == 4);
  CHECK(r.extraction.boxes.size() == frame.boxes.size());
}

TEST_CASE("a box BTC rejects never reaches ER or EL") {
  torch::manual_seed(0);
  auto sys = PipSystem::create(testing::tiny_config(), Tokenizer::ascii());
  sys.eval();
  {
    torch::NoGradGuard g;
    sys.btc->head->weight.zero_();
    sys.btc->head->bias.copy_(torch::tensor({0.f, 0.f, 0.f, 10.f}));  // always Misc
  }
  auto spec = testing::small_spec();
  spec.persons = 2;
  const auto frame = generate_frame(spec, 9);
  PipelineOptions opts;
  opts.gold_mentions = true;  // even labeled spans are not consulted for rejected boxes
  const auto r = run_pipeline(sys, frame.image, frame.boxes, opts);
  CHECK(r.counts.er_calls == 0);
  CHECK(r.counts.el_calls == 0);
  CHECK(r.extraction.mentions.empty());
  CHECK(r.extraction.segments().empty());
}

TEST_CASE("an injected BTC oracle is reported and gates like the labels") {
  torch::manual_seed(0);
  auto sys = PipSystem::create(testing::tiny_config(), Tokenizer::ascii());
  sys.eval();
  {
    torch::NoGradGuard g;
    sys.btc->head->weight.zero_();
    sys.btc->head->bias.copy_(torch::tensor({0.f, 0.f, 0.f, 10.f}));
  }
  auto spec = testing::small_spec();
  spec.persons = 2;
  const auto frame = generate_frame(spec, 9);
  PipelineOptions oracle;
  oracle.btc_oracle = [](const BoxRecord &b) { return b.category.value(); };
  PipelineOptions gold;
  gold.gold_btc = true;
  const auto a = run_pipeline(sys, frame.image, frame.boxes, oracle);
  const auto b = run_pipeline(sys, frame.image, frame.boxes, gold);
  for (const auto &p : a.extraction.boxes) {
    const auto it = std::find_if(frame.boxes.begin(), frame.boxes.end(),
                                 [&](const BoxRecord &x) { return x.box_id == p.box_id; });
    REQUIRE(it != frame.boxes.end());
    CHECK(p.category == *it->category);
  }
  CHECK(a.counts.er_calls == count_persons(frame));
  CHECK(a.counts.er_calls == b.counts.er_calls);
  REQUIRE(a.extraction.mentions.size() == b.extraction.mentions.size());
  for (size_t i = 0; i < a.extraction.mentions.size(); ++i) {
    CHECK(a.extraction.mentions[i].box_id == b.extraction.mentions[i].box_id);
    CHECK(a.extraction.mentions[i].start == b.extraction.mentions[i].start);
    CHECK(a.extraction.mentions[i].end == b.extraction.mentions[i].end);
  }
}

TEST_CASE("summed pipeline parameters cover all three models") {
  const auto sys = PipSystem::create(testing::tiny_config(), Tokenizer::ascii());
  CHECK(sys.parameter_count() ==
        parameter_count(*sys.btc) + parameter_count(*sys.er) + parameter_count(*sys.el));
  CHECK_THROWS_AS(mean_pool(torch::zeros({3, 2}), 2, 2), ShapeError);
  CHECK(torch::equal(mean_pool(torch::arange(6, torch::kFloat).view({3, 2}), 1, 3), torch::tensor({3.f, 4.f})));
}
