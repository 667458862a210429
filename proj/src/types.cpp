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

#include "vkie/types.hpp"

#include <algorithm>
#include <set>
#include <sstream>

namespace vkie {

std::string_view to_string(BoxCategory c) {
  switch (c) {
    case BoxCategory::kTitle: return "Title";
    case BoxCategory::kPersonInfo: return "PersonInfo";
    case BoxCategory::kSubtitle: return "Subtitle";
    case BoxCategory::kMisc: return "Misc";
  }
  return "?";
}

std::string_view to_string(EntityCategory c) {
  return c == EntityCategory::kName ? "Name" : "Identity";
}

BoxCategory parse_box_category(std::string_view s) {
  for (int i = 0; i < kNumBoxCategories; ++i) {
    auto c = static_cast<BoxCategory>(i);
    if (to_string(c) == s) return c;
  }
  throw LoadError("unknown box category '" + std::string(s) + "'");
}

EntityCategory parse_entity_category(std::string_view s) {
  if (s == "Name") return EntityCategory::kName;
  if (s == "Identity") return EntityCategory::kIdentity;
  throw LoadError("unknown entity category '" + std::string(s) + "'");
}

const BoxRecord *LabeledFrame::find_box(int box_id) const {
  for (const auto &b : boxes)
    if (b.box_id == box_id) return &b;
  return nullptr;
}

namespace {

[[noreturn]] void fail(const LabeledFrame &f, const std::string &what) {
  throw LoadError("frame '" + f.frame_id + "': " + what);
}

const EntitySpan *resolve(const LabeledFrame &f, const EntityRef &ref) {
  const BoxRecord *b = f.find_box(ref.box_id);
  if (!b || ref.span_index < 0 || ref.span_index >= static_cast<int>(b->entity_spans.size()))
    return nullptr;
  return &b->entity_spans[ref.span_index];
}

}  // namespace

void validate_frame(const LabeledFrame &frame) {
  std::set<int> ids;
  for (const auto &b : frame.boxes) {
    const std::string who = "box_id " + std::to_string(b.box_id);
    if (!ids.insert(b.box_id).second) fail(frame, "duplicate " + who);
    if (b.bbox.x_min >= b.bbox.x_max) fail(frame, who + ": x_min >= x_max");
    if (b.bbox.y_min >= b.bbox.y_max) fail(frame, who + ": y_min >= y_max");
    if (!frame.image.empty()) {
      if (b.bbox.x_min < 0 || b.bbox.y_min < 0 || b.bbox.x_max > frame.image.width ||
          b.bbox.y_max > frame.image.height)
        fail(frame, who + ": bbox outside frame bounds");
    }
    if (!b.entity_spans.empty() && b.category != BoxCategory::kPersonInfo)
      fail(frame, who + ": entity spans on a non-PersonInfo box");
    const int len = static_cast<int>(utf8::length(b.text));
    auto spans = b.entity_spans;
    std::sort(spans.begin(), spans.end(),
              [](const EntitySpan &a, const EntitySpan &c) { return a.start < c.start; });
    int last_end = 0;
    for (const auto &s : spans) {
      if (s.start < 0 || s.end > len || s.start >= s.end)
        fail(frame, who + ": entity span out of range");
      if (s.start < last_end) fail(frame, who + ": overlapping entity spans");
      last_end = s.end;
    }
  }

  std::set<std::pair<EntityRef, EntityRef>> seen;
  for (const auto &l : frame.links) {
    const EntitySpan *n = resolve(frame, l.name);
    const EntitySpan *i = resolve(frame, l.identity);
    if (!n || !i) fail(frame, "link references a missing span");
    if (n->category != EntityCategory::kName || i->category != EntityCategory::kIdentity)
      fail(frame, "link does not pair a Name with an Identity");
    if (!seen.insert({l.name, l.identity}).second) fail(frame, "duplicate link");
  }
  if (seen.size() != name_identity_pairs(frame).size())
    fail(frame, "link list does not cover every Name x Identity pair");
}

std::vector<std::pair<EntityRef, EntityRef>> name_identity_pairs(const LabeledFrame &frame) {
  std::vector<EntityRef> names, identities;
  for (const auto &b : frame.boxes) {
    for (int k = 0; k < static_cast<int>(b.entity_spans.size()); ++k) {
      if (b.entity_spans[k].category == EntityCategory::kName)
        names.push_back({b.box_id, k});
      else
        identities.push_back({b.box_id, k});
    }
  }
  std::vector<std::pair<EntityRef, EntityRef>> out;
  out.reserve(names.size() * identities.size());
  for (const auto &n : names)
    for (const auto &i : identities) out.emplace_back(n, i);
  return out;
}

namespace utf8 {

std::vector<char32_t> decode(std::string_view s) {
  std::vector<char32_t> out;
  out.reserve(s.size());
  size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    int extra = 0;
    char32_t cp = 0;
    if (c < 0x80) {
      cp = c;
    } else if ((c >> 5) == 0x6) {
      cp = c & 0x1F;
      extra = 1;
    } else if ((c >> 4) == 0xE) {
      cp = c & 0x0F;
      extra = 2;
    } else if ((c >> 3) == 0x1E) {
      cp = c & 0x07;
      extra = 3;
    } else {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    bool ok = true;
    for (int k = 1; k <= extra; ++k) {
      if (i + k >= s.size()) {
        ok = false;
        break;
      }
      const auto cc = static_cast<unsigned char>(s[i + k]);
      if ((cc >> 6) != 0x2) {
        ok = false;
        break;
      }
      cp = (cp << 6) | (cc & 0x3F);
    }
    if (!ok) {
      out.push_back(0xFFFD);
      ++i;
      continue;
    }
    out.push_back(cp);
    i += extra + 1;
  }
  return out;
}

std::string encode(char32_t cp) {
  std::string out;
  if (cp < 0x80) {
    out += static_cast<char>(cp);
  } else if (cp < 0x800) {
    out += static_cast<char>(0xC0 | (cp >> 6));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else if (cp < 0x10000) {
    out += static_cast<char>(0xE0 | (cp >> 12));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  } else {
    out += static_cast<char>(0xF0 | (cp >> 18));
    out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
    out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
    out += static_cast<char>(0x80 | (cp & 0x3F));
  }
  return out;
}

std::string encode(const std::vector<char32_t> &cps) {
  std::string out;
  for (char32_t cp : cps) out += encode(cp);
  return out;
}

size_t length(std::string_view s) { return decode(s).size(); }

std::string substr(std::string_view s, int start, int end) {
  const auto cps = decode(s);
  start = std::clamp(start, 0, static_cast<int>(cps.size()));
  end = std::clamp(end, start, static_cast<int>(cps.size()));
  return encode(std::vector<char32_t>(cps.begin() + start, cps.begin() + end));
}

}  // namespace utf8
}  // namespace vkie
