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

#include "vkie/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

namespace vkie {

using json = nlohmann::json;

Lexicon Lexicon::ascii_default() {
  Lexicon lex;
  lex.first_names = {"Maria",  "John",   "Aisha",  "Kenji",  "Elena",  "Omar",   "Lucas",
                     "Sofia",  "Ravi",   "Chloe",  "Daniel", "Fatima", "Pavel",  "Ingrid",
                     "Mateo",  "Yuki",   "Grace",  "Tomas",  "Amara",  "Victor", "Lena",
                     "Hassan", "Nora",   "Felix",  "Priya",  "Diego",  "Hana",   "Samuel",
                     "Olga",   "Kwame",  "Irene",  "Marco"};
  lex.last_names = {"Lopez",  "Smith",   "Khan",    "Tanaka", "Petrova", "Haddad", "Martin",
                    "Rossi",  "Patel",   "Dubois",  "Becker", "Nasser",  "Novak",  "Larsen",
                    "Garcia", "Sato",    "Okafor",  "Weber",  "Mensah",  "Moreau", "Ivanov",
                    "Silva",  "Kowalski", "Jensen", "Costa",  "Fischer", "Ali",    "Brown"};
  lex.roles = {"Mayor of",        "Minister of", "Governor of", "Spokesperson for",
               "CEO of",          "Professor at", "Coach of",   "Director of",
               "Reporter",        "Analyst",      "Economist",  "Senator",
               "Ambassador to",   "Chair of",     "Witness",    "Surgeon at"};
  lex.organisations = {"Lyon",    "Finance",  "Ohio",     "Acme Corp", "the Port", "Energy",
                       "Oslo",    "City FC",  "Health",   "Kenya",     "Unity Bank", "Trade",
                       "Madrid",  "the Board", "Tech Inst", "Seoul"};
  lex.headline_words = {"STORM",  "HITS",   "COAST",  "TALKS",  "RESUME", "MARKETS", "RALLY",
                        "FLOOD",  "WARNING", "ELECTION", "RESULTS", "NEW",  "BUDGET",  "VOTE",
                        "STRIKE", "ENDS",   "TRADE",  "DEAL",   "SIGNED", "FIRE",    "CRISIS",
                        "SUMMIT", "OPENS",  "RECORD", "HEAT",   "CITY",   "PLAN",    "LIVE"};
  lex.subtitle_words = {"the",     "council", "approved", "a",     "new",     "plan",   "for",
                        "city",    "roads",   "today",    "we",    "expect",  "more",   "rain",
                        "this",    "week",    "prices",   "rose",  "again",   "in",     "march",
                        "talks",   "will",    "continue", "after", "the",     "summit", "said",
                        "people",  "are",     "waiting",  "news",  "from",    "north"};
  return lex;
}

std::array<CategoryStyle, kNumBoxCategories> FrameSpec::default_styles() {
  std::array<CategoryStyle, kNumBoxCategories> s;
  s[static_cast<int>(BoxCategory::kTitle)] = {{22, 44, 150}, {255, 255, 255}, true, 0.62, 0.74};
  s[static_cast<int>(BoxCategory::kPersonInfo)] = {{178, 24, 36}, {255, 255, 255}, true, 0.50, 0.58};
  s[static_cast<int>(BoxCategory::kSubtitle)] = {{16, 16, 16}, {255, 226, 0}, true, 0.55, 0.64};
  s[static_cast<int>(BoxCategory::kMisc)] = {{96, 96, 96}, {235, 235, 235}, true, 0.38, 0.48};
  return s;
}

namespace {

constexpr int kFont = cv::FONT_HERSHEY_SIMPLEX;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  int uniform_int(int lo, int hi) {  // inclusive
    return std::uniform_int_distribution<int>(lo, hi)(engine_);
  }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  bool bernoulli(double p) { return uniform(0.0, 1.0) < p; }
  template <typename T>
  const T &pick(const std::vector<T> &v) {
    return v[static_cast<size_t>(uniform_int(0, static_cast<int>(v.size()) - 1))];
  }
  std::mt19937_64 &engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

std::uint8_t clamp_u8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

Rgb jitter(const Rgb &c, double amount, Rng &rng) {
  Rgb out;
  for (int k = 0; k < 3; ++k) out[k] = clamp_u8(c[k] + rng.uniform(-amount, amount));
  return out;
}

cv::Scalar to_scalar(const Rgb &c) { return cv::Scalar(c[0], c[1], c[2]); }

std::string to_upper(std::string s) {
  for (auto &c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::string make_title(const Lexicon &lex, Rng &rng, int max_chars) {
  std::string out;
  const int words = rng.uniform_int(2, 4);
  for (int i = 0; i < words; ++i) {
    std::string w = to_upper(rng.pick(lex.headline_words));
    std::string next = out.empty() ? w : out + " " + w;
    if (static_cast<int>(next.size()) > max_chars) break;
    out = next;
  }
  return out.empty() ? to_upper(rng.pick(lex.headline_words)) : out;
}

std::string make_subtitle(const Lexicon &lex, Rng &rng, int max_chars) {
  std::string out;
  const int words = rng.uniform_int(3, 6);
  for (int i = 0; i < words; ++i) {
    const std::string &w = rng.pick(lex.subtitle_words);
    std::string next = out.empty() ? w : out + " " + w;
    if (static_cast<int>(next.size()) + 1 > max_chars) break;
    out = next;
  }
  if (out.empty()) out = rng.pick(lex.subtitle_words);
  out[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(out[0])));
  return out + ".";
}

std::string make_name(const Lexicon &lex, Rng &rng) {
  return rng.pick(lex.first_names) + " " + rng.pick(lex.last_names);
}

std::string make_identity(const Lexicon &lex, Rng &rng) {
  const std::string &role = rng.pick(lex.roles);
  auto ends_with = [&](const std::string &suffix) {
    return role.size() > suffix.size() && role.compare(role.size() - suffix.size(), suffix.size(), suffix) == 0;
  };
  if (ends_with(" of") || ends_with(" at") || ends_with(" for") || ends_with(" to"))
    return role + " " + rng.pick(lex.organisations);
  return role;
}

enum class MiscKind { kTicker, kTag, kBackground };

std::string make_misc_text(MiscKind kind, const Lexicon &lex, Rng &rng) {
  static const std::vector<std::string> tags = {"LIVE", "HD", "NEWS24", "BREAKING", "REPLAY", "4K"};
  switch (kind) {
    case MiscKind::kTicker: {
      std::ostringstream os;
      os << "+++ " << to_upper(rng.pick(lex.headline_words)) << " " << rng.uniform_int(10, 99) << "."
         << rng.uniform_int(0, 9) << (rng.bernoulli(0.5) ? " +" : " -") << rng.uniform_int(0, 4) << "."
         << rng.uniform_int(0, 9) << "% +++";
      return os.str();
    }
    case MiscKind::kTag: {
      switch (rng.uniform_int(0, 3)) {
        case 0: return rng.pick(tags);
        case 1: {
          char buf[16];
          std::snprintf(buf, sizeof(buf), "%02d:%02d", rng.uniform_int(0, 23), rng.uniform_int(0, 59));
          return buf;
        }
        case 2: {
          std::string s;
          for (int i = 0; i < 2; ++i) s += static_cast<char>('A' + rng.uniform_int(0, 25));
          return s + "-" + std::to_string(rng.uniform_int(1000, 9999));
        }
        default: {
          std::string w = rng.pick(lex.subtitle_words);
          return "www." + w + "news.tv";
        }
      }
    }
    case MiscKind::kBackground:
      return rng.bernoulli(0.5) ? make_title(lex, rng, 20) : make_subtitle(lex, rng, 26);
  }
  return "?";
}

struct TextMetrics {
  int width = 0;
  int ascent = 0;
  int baseline = 0;
};

TextMetrics measure(const std::string &text, double scale) {
  int baseline = 0;
  cv::Size sz = cv::getTextSize(text, kFont, scale, 1, &baseline);
  return {sz.width, sz.height, baseline};
}

// Renders text into a local 8-bit coverage mask and returns it together with
// the tight bounding box relative to the mask origin.
struct TextMask {
  cv::Mat mask;
  cv::Rect tight;
  int margin = 3;
};

TextMask render_mask(const std::string &text, double scale) {
  TextMask tm;
  const TextMetrics m = measure(text, scale);
  tm.mask = cv::Mat::zeros(m.ascent + m.baseline + 2 * tm.margin, m.width + 2 * tm.margin, CV_8UC1);
  cv::putText(tm.mask, text, cv::Point(tm.margin, tm.margin + m.ascent), kFont, scale, cv::Scalar(255), 1,
              cv::LINE_AA);
  std::vector<cv::Point> nz;
  cv::findNonZero(tm.mask, nz);
  tm.tight = nz.empty() ? cv::Rect(0, 0, 1, 1) : cv::boundingRect(nz);
  return tm;
}

struct Placed {
  BBox region;  // padded background extent
  int group = -1;
};

bool fits(const BBox &r, int w, int h) { return r.x_min >= 0 && r.y_min >= 0 && r.x_max <= w && r.y_max <= h; }

BBox grow(const BBox &b, int dx, int dy) { return {b.x_min - dx, b.y_min - dy, b.x_max + dx, b.y_max + dy}; }

BBox unite(const BBox &a, const BBox &b) {
  return {std::min(a.x_min, b.x_min), std::min(a.y_min, b.y_min), std::max(a.x_max, b.x_max),
          std::max(a.y_max, b.y_max)};
}

// One text element staged for placement: the mask and its tight bbox offset.
struct Staged {
  std::string text;
  TextMask tm;
  BoxCategory category = BoxCategory::kMisc;
  MiscKind misc_kind = MiscKind::kTag;
  std::vector<EntitySpan> spans;
  // Tight text bbox relative to the element origin.
  int dx = 0, dy = 0;
};

Staged stage(std::string text, BoxCategory cat, double scale) {
  Staged s;
  s.text = std::move(text);
  s.category = cat;
  s.tm = render_mask(s.text, scale);
  return s;
}

class FrameBuilder {
 public:
  FrameBuilder(const FrameSpec &spec, std::uint64_t seed)
      : spec_(spec), rng_(seed), canvas_(spec.height, spec.width, CV_8UC3) {
    if (spec.width < 32 || spec.height < 32) throw GenerationError("frame dimensions too small");
    pad_ = std::max(1, static_cast<int>(std::lround(2.0 * spec.height / 360.0)));
    gap_ = std::max(1, static_cast<int>(std::lround(spec.adjacency_gap * spec.height)));
  }

  LabeledFrame build() {
    paint_scene();
    for (int i = 0; i < spec_.titles; ++i) place_single(BoxCategory::kTitle, spec_.title_band);
    for (int i = 0; i < spec_.persons; ++i) place_person(i);
    for (int i = 0; i < spec_.subtitles; ++i) place_single(BoxCategory::kSubtitle, spec_.subtitle_band);
    for (int i = 0; i < spec_.misc; ++i) place_single(BoxCategory::kMisc, Band{0.0, 1.0});

    LabeledFrame frame;
    frame.image = Image(spec_.width, spec_.height);
    std::copy(canvas_.data, canvas_.data + frame.image.rgb.size(), frame.image.rgb.begin());
    frame.boxes = std::move(boxes_);

    std::map<EntityRef, int> group_of;
    for (const auto &b : frame.boxes)
      for (int k = 0; k < static_cast<int>(b.entity_spans.size()); ++k) group_of[{b.box_id, k}] = box_group_[b.box_id];
    for (const auto &[n, id] : name_identity_pairs(frame))
      frame.links.push_back({n, id, group_of.at(n) == group_of.at(id)});
    return frame;
  }

 private:
  double scale_for(BoxCategory c) {
    const auto &st = spec_.styles[static_cast<int>(c)];
    return rng_.uniform(st.font_scale_min, st.font_scale_max) * spec_.height / 360.0;
  }

  int max_chars(double scale) const {
    const int per_char = std::max(1, measure("M", scale).width);
    return std::max(4, (spec_.width - 4 * pad_) / per_char);
  }

  void paint_scene() {
    const Rgb top{static_cast<std::uint8_t>(rng_.uniform_int(30, 170)), static_cast<std::uint8_t>(rng_.uniform_int(30, 170)),
                  static_cast<std::uint8_t>(rng_.uniform_int(30, 170))};
    const Rgb bottom{static_cast<std::uint8_t>(rng_.uniform_int(30, 170)), static_cast<std::uint8_t>(rng_.uniform_int(30, 170)),
                     static_cast<std::uint8_t>(rng_.uniform_int(30, 170))};
    for (int y = 0; y < spec_.height; ++y) {
      const double t = static_cast<double>(y) / std::max(1, spec_.height - 1);
      cv::Vec3b c;
      for (int k = 0; k < 3; ++k) c[k] = clamp_u8(top[k] * (1 - t) + bottom[k] * t);
      canvas_.row(y).setTo(cv::Scalar(c[0], c[1], c[2]));
    }
    const int shapes = rng_.uniform_int(2, 6);
    for (int i = 0; i < shapes; ++i) {
      const cv::Scalar col(rng_.uniform_int(20, 200), rng_.uniform_int(20, 200), rng_.uniform_int(20, 200));
      const cv::Point c(rng_.uniform_int(0, spec_.width - 1), rng_.uniform_int(0, spec_.height - 1));
      const int r = rng_.uniform_int(spec_.height / 12, spec_.height / 3);
      if (rng_.bernoulli(0.5))
        cv::circle(canvas_, c, r, col, cv::FILLED, cv::LINE_8);
      else
        cv::rectangle(canvas_, cv::Rect(c.x - r, c.y - r / 2, 2 * r, r), col, cv::FILLED, cv::LINE_8);
    }
    cv::GaussianBlur(canvas_, canvas_, cv::Size(7, 7), 0);
  }

  // Picks text for a single-box element; regenerates until it fits the width.
  Staged stage_single(BoxCategory cat) {
    for (int attempt = 0; attempt < 20; ++attempt) {
      const double scale = scale_for(cat);
      const int cap = max_chars(scale);
      std::string text;
      MiscKind kind = MiscKind::kTag;
      switch (cat) {
        case BoxCategory::kTitle: text = make_title(spec_.lexicon, rng_, std::min(cap, 26)); break;
        case BoxCategory::kSubtitle: text = make_subtitle(spec_.lexicon, rng_, std::min(cap, 36)); break;
        case BoxCategory::kMisc:
          if (rng_.bernoulli(spec_.misc_headline_probability))
            kind = MiscKind::kBackground;
          else
            kind = rng_.bernoulli(0.5) ? MiscKind::kTicker : MiscKind::kTag;
          text = make_misc_text(kind, spec_.lexicon, rng_);
          break;
        case BoxCategory::kPersonInfo: break;
      }
      Staged s = stage(text, cat, scale);
      s.misc_kind = kind;
      if (s.tm.tight.width + 2 * pad_ + 2 <= spec_.width) return s;
    }
    throw GenerationError("text does not fit the frame width");
  }

  bool free_of(const BBox &region, int group, bool person) const {
    for (const auto &p : placed_) {
      BBox other = grow(p.region, 1, 1);
      if (person && p.group >= 0 && p.group != group) other = grow(p.region, 0, gap_);
      if (region.intersects(other)) return false;
    }
    return true;
  }

  // Background region of a staged element whose tight text bbox starts at (x, y).
  BBox region_at(const Staged &s, int x, int y) const {
    return {x - pad_, y - pad_, x + s.tm.tight.width + pad_, y + s.tm.tight.height + pad_};
  }

  void place_single(BoxCategory cat, Band band) {
    for (int attempt = 0; attempt < spec_.max_placement_attempts; ++attempt) {
      Staged s = stage_single(cat);
      const int w = s.tm.tight.width, h = s.tm.tight.height;
      const int y_lo = static_cast<int>(band.top * spec_.height) + pad_;
      const int y_hi = static_cast<int>(band.bottom * spec_.height) - pad_ - h;
      const int x_lo = pad_, x_hi = spec_.width - pad_ - w;
      if (y_hi < y_lo || x_hi < x_lo) continue;
      const int x = rng_.uniform_int(x_lo, x_hi), y = rng_.uniform_int(y_lo, y_hi);
      const BBox region = region_at(s, x, y);
      if (!fits(region, spec_.width, spec_.height) || !free_of(region, -1, false)) continue;
      commit(s, x, y, -1);
      return;
    }
    throw GenerationError("cannot place a " + std::string(to_string(cat)) +
                          " box without overlap; reduce the box count");
  }

  void place_person(int group) {
    const auto &lex = spec_.lexicon;
    for (int attempt = 0; attempt < spec_.max_placement_attempts; ++attempt) {
      const double scale = scale_for(BoxCategory::kPersonInfo);
      const std::string name = make_name(lex, rng_);
      const std::string identity = make_identity(lex, rng_);
      const bool stacked = rng_.bernoulli(spec_.stacked_probability);
      std::vector<Staged> parts;
      if (stacked) {
        Staged n = stage(name, BoxCategory::kPersonInfo, scale);
        n.spans = {{0, static_cast<int>(utf8::length(name)), EntityCategory::kName}};
        Staged i = stage(identity, BoxCategory::kPersonInfo, scale * 0.9);
        i.spans = {{0, static_cast<int>(utf8::length(identity)), EntityCategory::kIdentity}};
        parts = {std::move(n), std::move(i)};
      } else {
        const std::string text = name + spec_.separator + identity;
        Staged c = stage(text, BoxCategory::kPersonInfo, scale);
        const int nl = static_cast<int>(utf8::length(name));
        const int sl = static_cast<int>(utf8::length(spec_.separator));
        c.spans = {{0, nl, EntityCategory::kName}, {nl + sl, static_cast<int>(utf8::length(text)), EntityCategory::kIdentity}};
        parts = {std::move(c)};
      }
      int total_w = 0, total_h = 0;
      for (const auto &p : parts) {
        total_w = std::max(total_w, p.tm.tight.width);
        total_h += p.tm.tight.height + 2 * pad_;
      }
      const int inner_gap = pad_;
      total_h += inner_gap * (static_cast<int>(parts.size()) - 1);
      const int y_lo = static_cast<int>(spec_.person_band.top * spec_.height) + pad_;
      const int y_hi = static_cast<int>(spec_.person_band.bottom * spec_.height) - total_h;
      const int x_lo = pad_, x_hi = spec_.width - pad_ - total_w;
      if (y_hi < y_lo || x_hi < x_lo) continue;
      const int x = rng_.uniform_int(x_lo, x_hi);
      int y = rng_.uniform_int(y_lo, y_hi);

      std::vector<std::pair<int, int>> origins;
      BBox group_region{};
      bool ok = true;
      for (size_t k = 0; k < parts.size(); ++k) {
        const int px = x + (k == 0 ? 0 : rng_.uniform_int(0, 2));
        const BBox region = region_at(parts[k], px, y);
        if (!fits(region, spec_.width, spec_.height)) {
          ok = false;
          break;
        }
        group_region = k == 0 ? region : unite(group_region, region);
        origins.emplace_back(px, y);
        y = region.y_max + inner_gap + pad_;
      }
      if (!ok || !free_of(group_region, group, true)) continue;
      for (size_t k = 0; k < parts.size(); ++k) commit(parts[k], origins[k].first, origins[k].second, group);
      return;
    }
    throw GenerationError("cannot place a PersonInfo group without overlap; reduce the box count");
  }

  void commit(const Staged &s, int x, int y, int group) {
    const CategoryStyle &style = spec_.styles[static_cast<int>(s.category)];
    const BBox region = region_at(s, x, y);
    const cv::Rect roi(region.x_min, region.y_min, region.width(), region.height());
    Rgb fg = jitter(style.foreground, spec_.color_jitter, rng_);
    bool background = style.has_background;
    Rgb bg = jitter(style.background, spec_.color_jitter, rng_);
    if (s.category == BoxCategory::kMisc) {
      if (s.misc_kind == MiscKind::kBackground) {
        background = false;
        const cv::Vec3b under = canvas_.at<cv::Vec3b>(region.y_min + region.height() / 2, region.x_min + region.width() / 2);
        const double lift = rng_.bernoulli(0.5) ? 45.0 : -45.0;
        fg = {clamp_u8(under[0] + lift), clamp_u8(under[1] + lift), clamp_u8(under[2] + lift)};
      } else if (s.misc_kind == MiscKind::kTag) {
        background = rng_.bernoulli(0.5);
        bg = {static_cast<std::uint8_t>(rng_.uniform_int(0, 255)), static_cast<std::uint8_t>(rng_.uniform_int(0, 255)),
              static_cast<std::uint8_t>(rng_.uniform_int(0, 255))};
      }
    }
    if (background) cv::rectangle(canvas_, roi, to_scalar(bg), cv::FILLED);

    // Alpha-blend the coverage mask so that the tight text box lands at (x, y).
    const int ox = x - s.tm.tight.x, oy = y - s.tm.tight.y;
    for (int my = 0; my < s.tm.mask.rows; ++my) {
      for (int mx = 0; mx < s.tm.mask.cols; ++mx) {
        const int a = s.tm.mask.at<std::uint8_t>(my, mx);
        if (a == 0) continue;
        const int fx = ox + mx, fy = oy + my;
        if (fx < 0 || fy < 0 || fx >= spec_.width || fy >= spec_.height) continue;
        auto &px = canvas_.at<cv::Vec3b>(fy, fx);
        for (int k = 0; k < 3; ++k) px[k] = clamp_u8((px[k] * (255 - a) + fg[k] * a) / 255.0);
      }
    }
    if (s.category == BoxCategory::kMisc && s.misc_kind == MiscKind::kBackground) {
      cv::Mat patch = canvas_(roi);
      cv::GaussianBlur(patch, patch, cv::Size(3, 3), 0);
    }

    BoxRecord box;
    box.box_id = static_cast<int>(boxes_.size());
    box.text = s.text;
    box.bbox = {x, y, x + s.tm.tight.width, y + s.tm.tight.height};
    box.category = s.category;
    box.entity_spans = s.spans;
    box_group_.push_back(group);
    boxes_.push_back(std::move(box));
    placed_.push_back({region, group});
  }

  const FrameSpec &spec_;
  Rng rng_;
  cv::Mat canvas_;
  int pad_ = 2;
  int gap_ = 20;
  std::vector<Placed> placed_;
  std::vector<BoxRecord> boxes_;
  std::vector<int> box_group_;
};

void check_spec(const FrameSpec &spec) {
  if (spec.titles < 0 || spec.subtitles < 0 || spec.persons < 0 || spec.misc < 0)
    throw ConfigError("negative box count in frame spec");
  if (spec.lexicon.first_names.empty() || spec.lexicon.last_names.empty() || spec.lexicon.roles.empty() ||
      spec.lexicon.organisations.empty() || spec.lexicon.headline_words.empty() ||
      spec.lexicon.subtitle_words.empty())
    throw ConfigError("lexicon lists must be non-empty");
}

}  // namespace

LabeledFrame generate_frame(const FrameSpec &spec, std::uint64_t seed) {
  check_spec(spec);
  FrameBuilder builder(spec, seed);
  LabeledFrame frame = builder.build();
  frame.frame_id = "frame-" + std::to_string(seed);
  return frame;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  // splitmix64 over the combined state.
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::array<int, 3> split_source_counts(int sources, const std::array<int, 3> &ratio) {
  if (ratio[0] <= 0 || ratio[1] <= 0 || ratio[2] <= 0) throw ConfigError("split ratio entries must be positive");
  const int total = ratio[0] + ratio[1] + ratio[2];
  if (sources < total)
    throw ConfigError("need at least " + std::to_string(total) + " sources to honor the split ratio, got " +
                      std::to_string(sources));
  std::array<int, 3> counts{};
  counts[1] = sources * ratio[1] / total;
  counts[2] = sources * ratio[2] / total;
  counts[0] = sources - counts[1] - counts[2];
  return counts;
}

CorpusSplits generate_corpus(const CorpusConfig &config) {
  if (config.frames < 0) throw ConfigError("frame count must be non-negative");
  const auto counts = split_source_counts(config.sources, config.split_ratio);
  for (const CountRange *r : {&config.titles, &config.subtitles, &config.persons, &config.misc})
    if (r->min < 0 || r->max < r->min) throw ConfigError("invalid box count range");
  check_spec(config.frame);

  // Shuffle source order with the master seed, then cut by split counts.
  std::vector<int> order(config.sources);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 shuffler(derive_seed(config.seed, 0xC0FFEE));
  std::shuffle(order.begin(), order.end(), shuffler);
  std::vector<int> split_of(config.sources);
  for (int i = 0; i < config.sources; ++i) split_of[order[i]] = i < counts[0] ? 0 : (i < counts[0] + counts[1] ? 1 : 2);

  // Each source gets a branded palette offset.
  std::vector<FrameSpec> source_specs;
  source_specs.reserve(config.sources);
  for (int s = 0; s < config.sources; ++s) {
    FrameSpec spec = config.frame;
    Rng rng(derive_seed(config.seed, 1000000 + s));
    for (auto &style : spec.styles) style.background = jitter(style.background, config.source_color_shift, rng);
    source_specs.push_back(std::move(spec));
  }

  CorpusSplits out;
  std::array<std::vector<LabeledFrame> *, 3> splits{&out.train, &out.dev, &out.test};
  for (int i = 0; i < config.frames; ++i) {
    const int source = i % config.sources;
    const std::uint64_t seed = derive_seed(config.seed, static_cast<std::uint64_t>(i));
    FrameSpec spec = source_specs[source];
    Rng rng(seed ^ 0x5EEDULL);
    spec.titles = rng.uniform_int(config.titles.min, config.titles.max);
    spec.subtitles = rng.uniform_int(config.subtitles.min, config.subtitles.max);
    spec.persons = rng.uniform_int(config.persons.min, config.persons.max);
    spec.misc = rng.uniform_int(config.misc.min, config.misc.max);
    LabeledFrame frame = generate_frame(spec, seed);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "src%03d-f%06d", source, i);
    frame.frame_id = buf;
    std::snprintf(buf, sizeof(buf), "src%03d", source);
    frame.source_id = buf;
    splits[split_of[source]]->push_back(std::move(frame));
  }
  return out;
}

// ---- PNG ----

std::vector<std::uint8_t> encode_png(const Image &image) {
  cv::Mat rgb(image.height, image.width, CV_8UC3, const_cast<std::uint8_t *>(image.rgb.data()));
  cv::Mat bgr;
  cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  std::vector<std::uint8_t> buf;
  if (!cv::imencode(".png", bgr, buf)) throw Error("PNG encoding failed");
  return buf;
}

Image decode_png(const std::vector<std::uint8_t> &bytes) {
  cv::Mat bgr = cv::imdecode(bytes, cv::IMREAD_COLOR);
  if (bgr.empty()) throw LoadError("cannot decode image data");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  Image img(rgb.cols, rgb.rows);
  for (int y = 0; y < rgb.rows; ++y) std::copy(rgb.ptr<std::uint8_t>(y), rgb.ptr<std::uint8_t>(y) + rgb.cols * 3, img.pixel(0, y));
  return img;
}

void write_png(const Image &image, const std::filesystem::path &path) {
  const auto buf = encode_png(image);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char *>(buf.data()), static_cast<std::streamsize>(buf.size()));
}

Image read_png(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("missing image file " + path.string());
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_png(buf);
}

// ---- corpus records ----

namespace {

json frame_json(const LabeledFrame &frame, const std::string &image_path) {
  json boxes = json::array();
  for (const auto &b : frame.boxes) {
    json spans = json::array();
    for (const auto &s : b.entity_spans) spans.push_back({s.start, s.end, std::string(to_string(s.category))});
    json jb = {{"box_id", b.box_id},
               {"text", b.text},
               {"bbox", {b.bbox.x_min, b.bbox.y_min, b.bbox.x_max, b.bbox.y_max}},
               {"entity_spans", spans}};
    jb["category"] = b.category ? json(std::string(to_string(*b.category))) : json(nullptr);
    boxes.push_back(std::move(jb));
  }
  json links = json::array();
  for (const auto &l : frame.links)
    links.push_back({{"name", {l.name.box_id, l.name.span_index}},
                     {"identity", {l.identity.box_id, l.identity.span_index}},
                     {"matched", l.matched}});
  return {{"frame_id", frame.frame_id}, {"source_id", frame.source_id},      {"image", image_path},
          {"width", frame.image.width}, {"height", frame.image.height},      {"boxes", boxes},
          {"links", links}};
}

LabeledFrame frame_from_json(const json &j, const std::filesystem::path &root, const std::string &where) {
  LabeledFrame f;
  try {
    f.frame_id = j.at("frame_id").get<std::string>();
    f.source_id = j.value("source_id", "");
    for (const auto &jb : j.at("boxes")) {
      BoxRecord b;
      b.box_id = jb.at("box_id").get<int>();
      b.text = jb.at("text").get<std::string>();
      const auto &bb = jb.at("bbox");
      if (!bb.is_array() || bb.size() != 4) throw LoadError("box_id " + std::to_string(b.box_id) + ": bbox must have 4 entries");
      b.bbox = {bb[0].get<int>(), bb[1].get<int>(), bb[2].get<int>(), bb[3].get<int>()};
      if (jb.contains("category") && !jb["category"].is_null())
        b.category = parse_box_category(jb["category"].get<std::string>());
      for (const auto &js : jb.value("entity_spans", json::array()))
        b.entity_spans.push_back({js.at(0).get<int>(), js.at(1).get<int>(), parse_entity_category(js.at(2).get<std::string>())});
      f.boxes.push_back(std::move(b));
    }
    for (const auto &jl : j.value("links", json::array())) {
      Link l;
      l.name = {jl.at("name").at(0).get<int>(), jl.at("name").at(1).get<int>()};
      l.identity = {jl.at("identity").at(0).get<int>(), jl.at("identity").at(1).get<int>()};
      l.matched = jl.at("matched").get<bool>();
      f.links.push_back(l);
    }
  } catch (const json::exception &e) {
    throw LoadError(where + ": malformed record: " + e.what());
  } catch (const LoadError &e) {
    throw LoadError(where + " (frame '" + f.frame_id + "'): " + e.what());
  }
  const std::string image = j.value("image", "");
  if (image.empty()) throw LoadError(where + ": record has no image path");
  if (!std::filesystem::exists(root / image)) throw LoadError(where + ": missing image file " + image);
  f.image = read_png(root / image);
  try {
    validate_frame(f);
  } catch (const LoadError &e) {
    throw LoadError(where + ": " + e.what());
  }
  return f;
}

constexpr std::array<const char *, 3> kSplitNames{"train", "dev", "test"};

}  // namespace

std::string frame_to_record(const LabeledFrame &frame, const std::string &image_path) {
  return frame_json(frame, image_path).dump();
}

void write_corpus(const CorpusSplits &corpus, const std::filesystem::path &dir, const std::string &config_echo) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "images");
  const std::array<const std::vector<LabeledFrame> *, 3> splits{&corpus.train, &corpus.dev, &corpus.test};
  json manifest = {{"schema_version", kCorpusSchemaVersion}};
  manifest["config"] = config_echo.empty() ? json(nullptr) : json::parse(config_echo);
  for (int s = 0; s < 3; ++s) {
    const std::string file = std::string(kSplitNames[s]) + ".jsonl";
    std::ofstream out(dir / file);
    if (!out) throw Error("cannot write " + (dir / file).string());
    for (const auto &f : *splits[s]) {
      const std::string rel = "images/" + f.frame_id + ".png";
      write_png(f.image, dir / rel);
      out << frame_to_record(f, rel) << '\n';
    }
    manifest["splits"][kSplitNames[s]] = {{"records", file}, {"frames", splits[s]->size()}};
  }
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';
}

CorpusSplits read_corpus(const std::filesystem::path &dir) {
  std::ifstream min(dir / "manifest.json");
  if (!min) throw LoadError("missing manifest.json in " + dir.string());
  json manifest;
  try {
    manifest = json::parse(min);
  } catch (const json::exception &e) {
    throw LoadError(std::string("malformed manifest: ") + e.what());
  }
  const std::string version = manifest.value("schema_version", "");
  if (version != kCorpusSchemaVersion)
    throw LoadError("schema version mismatch: expected " + std::string(kCorpusSchemaVersion) + ", found '" + version + "'");

  CorpusSplits out;
  std::array<std::vector<LabeledFrame> *, 3> splits{&out.train, &out.dev, &out.test};
  for (int s = 0; s < 3; ++s) {
    const std::string file = manifest["splits"][kSplitNames[s]].value("records", std::string(kSplitNames[s]) + ".jsonl");
    std::ifstream in(dir / file);
    if (!in) throw LoadError("missing record file " + file);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const std::string where = file + ":" + std::to_string(line_no);
      json j;
      try {
        j = json::parse(line);
      } catch (const json::exception &e) {
        throw LoadError(where + ": malformed record: " + e.what());
      }
      splits[s]->push_back(frame_from_json(j, dir, where));
    }
  }
  return out;
}

// ---- OCR ingestion ----

IngestResult ingest_ocr(const std::vector<OcrEntry> &raw, int frame_width, int frame_height) {
  if (frame_width <= 0 || frame_height <= 0) throw ConfigError("frame dimensions must be positive");
  IngestResult out;
  for (size_t i = 0; i < raw.size(); ++i) {
    const auto &e = raw[i];
    if (e.text.empty()) continue;
    OcrRect r;
    if (const auto *rect = std::get_if<OcrRect>(&e.geometry)) {
      r = *rect;
    } else {
      const auto &q = std::get<OcrQuad>(e.geometry);
      r = {q[0][0], q[0][1], q[0][0], q[0][1]};
      for (const auto &p : q) {
        r.x_min = std::min(r.x_min, p[0]);
        r.y_min = std::min(r.y_min, p[1]);
        r.x_max = std::max(r.x_max, p[0]);
        r.y_max = std::max(r.y_max, p[1]);
      }
    }
    BBox b{static_cast<int>(std::floor(r.x_min)), static_cast<int>(std::floor(r.y_min)),
           static_cast<int>(std::ceil(r.x_max)), static_cast<int>(std::ceil(r.y_max))};
    const BBox clamped{std::clamp(b.x_min, 0, frame_width), std::clamp(b.y_min, 0, frame_height),
                       std::clamp(b.x_max, 0, frame_width), std::clamp(b.y_max, 0, frame_height)};
    if (!(clamped == b)) out.warnings.push_back("entry " + std::to_string(i) + ": rect clamped to frame bounds");
    if (!clamped.valid()) {
      out.warnings.push_back("entry " + std::to_string(i) + ": empty rect after clamping, dropped");
      continue;
    }
    BoxRecord box;
    box.box_id = static_cast<int>(out.boxes.size());
    box.text = e.text;
    box.bbox = clamped;
    out.boxes.push_back(std::move(box));
  }
  return out;
}

IngestResult ingest_ocr(const std::vector<OcrEntry> &raw, const Image &frame_image) {
  return ingest_ocr(raw, frame_image.width, frame_image.height);
}

}  // namespace vkie
