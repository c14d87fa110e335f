#pragma once

// Viseme inventory, phone-to-viseme mapping and labial duration extension.

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "visage/error.hpp"
#include "visage/text.hpp"
#include "visage/transcript.hpp"

namespace visage {

inline constexpr int kVisemeCount = 20;

struct VisemeClass {
  int id = 0;
  std::string name;
  std::vector<std::string> members;
  bool is_labial = false;
  bool is_labiodental = false;

  /// Lips closed or nearly closed: needs a guaranteed closure frame.
  bool closes_lips() const { return is_labial || is_labiodental; }
};

struct VisemeSegment {
  int viseme_id = 0;
  double start = 0.0;
  double end = 0.0;

  double duration() const { return end - start; }
  friend bool operator==(const VisemeSegment&, const VisemeSegment&) = default;
};

/// Default English table, identical to data/visemes.csv.
inline constexpr std::string_view kDefaultVisemeTable = R"(# class_id,name,flags,member symbols...
0,neutral,-,sil
1,bilabial,labial,b,p,m
2,labiodental,labiodental,f,v
3,dental,-,θ,ð
4,alveolar_stop,-,t,d,n
5,alveolar_fricative,-,s,z
6,postalveolar,-,ʃ,ʒ,tʃ,dʒ
7,velar,-,k,ɡ,ŋ
8,lateral,-,l
9,rhotic,-,ɹ,ɝ
10,labial_glide,-,w
11,palatal_glide,-,j
12,glottal,-,h
13,open_back,-,ɑ,ɔ
14,open_front,-,æ,aɪ,aʊ
15,mid_front,-,ɛ,eɪ
16,close_front,-,i,ɪ
17,mid_central,-,ʌ
18,rounded_mid,-,oʊ,ɔɪ
19,rounded_close,-,u,ʊ
)";

/// Immutable 20-class partition of a phone inventory. The silence symbol
/// must belong to exactly one class, which becomes the neutral class.
class VisemeTable {
 public:
  /// Parses `class_id,name,flags,member...` records. Flags are `-`,
  /// `labial`, `labiodental`, or both joined with '+'.
  static VisemeTable parse(std::string_view content) {
    std::array<std::optional<VisemeClass>, kVisemeCount> slots;
    std::size_t line_no = 0;
    for (auto line : text::lines(content)) {
      ++line_no;
      const auto trimmed = text::trim(line);
      if (trimmed.empty() || trimmed.front() == '#') continue;
      auto fields = text::split(trimmed, ',');
      if (fields.size() < 4) {
        throw Error(ErrorCode::MalformedLine, "expected class_id,name,flags,members...", line_no);
      }
      const auto id = text::parse_int(fields[0]);
      if (!id || *id < 0 || *id >= kVisemeCount) {
        throw Error(ErrorCode::InvalidTable, "class id must be in [0,19]", line_no);
      }
      if (slots[*id]) throw Error(ErrorCode::InvalidTable, "duplicate class id", line_no);
      VisemeClass cls;
      cls.id = static_cast<int>(*id);
      cls.name = std::string(text::trim(fields[1]));
      for (auto flag : text::split(text::trim(fields[2]), '+')) {
        flag = text::trim(flag);
        if (flag == "labial") cls.is_labial = true;
        else if (flag == "labiodental") cls.is_labiodental = true;
        else if (flag != "-" && !flag.empty()) {
          throw Error(ErrorCode::InvalidTable, "unknown flag '" + std::string(flag) + "'", line_no);
        }
      }
      for (std::size_t i = 3; i < fields.size(); ++i) {
        const auto sym = text::trim(fields[i]);
        if (!sym.empty()) cls.members.emplace_back(sym);
      }
      if (cls.members.empty()) throw Error(ErrorCode::InvalidTable, "class has no members", line_no);
      slots[*id] = std::move(cls);
    }
    VisemeTable table;
    for (int id = 0; id < kVisemeCount; ++id) {
      if (!slots[id]) {
        throw Error(ErrorCode::InvalidTable, "missing class " + std::to_string(id));
      }
      table.classes_.push_back(std::move(*slots[id]));
    }
    for (const auto& cls : table.classes_) {
      for (const auto& m : cls.members) {
        if (!table.index_.emplace(m, cls.id).second) {
          throw Error(ErrorCode::InvalidTable, "symbol '" + m + "' is in more than one class");
        }
      }
    }
    const auto sil = table.index_.find(std::string(kSilence));
    if (sil == table.index_.end()) {
      throw Error(ErrorCode::InvalidTable, "no class contains the silence symbol");
    }
    table.neutral_id_ = sil->second;
    return table;
  }

  static const VisemeTable& english() {
    static const VisemeTable table = parse(kDefaultVisemeTable);
    return table;
  }

  bool contains(std::string_view symbol) const {
    return index_.find(symbol) != index_.end();
  }

  const VisemeClass& map_phoneme(std::string_view symbol) const {
    const auto it = index_.find(symbol);
    if (it == index_.end()) {
      throw Error(ErrorCode::UnknownSymbol, "unknown symbol '" + std::string(symbol) + "'");
    }
    return classes_[it->second];
  }

  const VisemeClass& at(int id) const {
    if (id < 0 || id >= kVisemeCount) {
      throw Error(ErrorCode::MissingEntry, "viseme id " + std::to_string(id) + " out of range");
    }
    return classes_[id];
  }

  bool closes_lips(int id) const { return at(id).closes_lips(); }
  int neutral_id() const { return neutral_id_; }
  std::span<const VisemeClass> classes() const { return classes_; }

  /// Every symbol in the inventory, in class order.
  std::vector<std::string> symbols() const {
    std::vector<std::string> out;
    for (const auto& c : classes_) out.insert(out.end(), c.members.begin(), c.members.end());
    return out;
  }

 private:
  VisemeTable() = default;

  std::vector<VisemeClass> classes_;
  std::map<std::string, int, std::less<>> index_;
  int neutral_id_ = 0;
};

/// One viseme segment per phone; contiguous runs of the same class merge.
inline std::vector<VisemeSegment> to_viseme_segments(const Transcript& transcript,
                                                     const VisemeTable& table) {
  std::vector<VisemeSegment> out;
  out.reserve(transcript.segments.size());
  for (const auto& phone : transcript.segments) {
    const int id = table.map_phoneme(phone.symbol).id;
    if (!out.empty() && out.back().viseme_id == id && out.back().end == phone.start) {
      out.back().end = phone.end;
    } else {
      out.push_back({id, phone.start, phone.end});
    }
  }
  return out;
}

struct LabialExtension {
  double max_extension = 0.060;     // seconds
  double min_duration = 1.0 / 30.0;  // seconds
};

/// Stretches every lip-closing segment backwards so that it spans at least
/// max(max_extension, min_duration), eating only preceding silence (neutral
/// segments or gaps). Silence segments that are eaten shrink or disappear;
/// all other segments keep their times. Idempotent.
inline std::vector<VisemeSegment> extend_labials(std::span<const VisemeSegment> segments,
                                                 const VisemeTable& table,
                                                 LabialExtension params = {}) {
  const int neutral = table.neutral_id();
  const double span_target = std::max(params.max_extension, params.min_duration);
  std::vector<VisemeSegment> out;
  out.reserve(segments.size());
  for (const auto& seg : segments) {
    if (!table.closes_lips(seg.viseme_id)) {
      out.push_back(seg);
      continue;
    }
    double floor = 0.0;
    for (auto it = out.rbegin(); it != out.rend(); ++it) {
      if (it->viseme_id != neutral) {
        floor = it->end;
        break;
      }
    }
    const double desired = std::min(seg.start, seg.end - span_target);
    const double new_start = std::max(floor, desired);
    auto extended = seg;
    if (new_start < seg.start) {
      while (!out.empty() && out.back().viseme_id == neutral && out.back().end > new_start) {
        if (out.back().start >= new_start) {
          out.pop_back();
        } else {
          out.back().end = new_start;
          break;
        }
      }
      extended.start = new_start;
    }
    out.push_back(extended);
  }
  return out;
}

}  // namespace visage
