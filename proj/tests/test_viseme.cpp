#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "visage/text.hpp"
#include "visage/viseme.hpp"

namespace visage {
namespace {

const VisemeTable& table() { return VisemeTable::english(); }

TEST(VisemeTable, BilabialsShareOneLabialClass) {
  const auto& b = table().map_phoneme("b");
  EXPECT_EQ(b.id, table().map_phoneme("p").id);
  EXPECT_EQ(b.id, table().map_phoneme("m").id);
  EXPECT_TRUE(b.is_labial);
}

TEST(VisemeTable, LabiodentalsShareOneClass) {
  const auto& f = table().map_phoneme("f");
  EXPECT_EQ(f.id, table().map_phoneme("v").id);
  EXPECT_TRUE(f.is_labiodental);
  EXPECT_NE(f.id, table().map_phoneme("b").id);
}

TEST(VisemeTable, SilenceIsNeutralZero) {
  EXPECT_EQ(table().map_phoneme("sil").id, 0);
  EXPECT_EQ(table().neutral_id(), 0);
}

TEST(VisemeTable, PartitionCoversInventoryWithTwentyClasses) {
  const auto symbols = table().symbols();
  std::set<std::string> unique(symbols.begin(), symbols.end());
  EXPECT_EQ(unique.size(), symbols.size());
  EXPECT_EQ(symbols.size(), 40u);  // 39 phonemes + sil
  std::set<int> ids;
  for (const auto& s : symbols) ids.insert(table().map_phoneme(s).id);
  EXPECT_EQ(ids.size(), 20u);
  std::size_t total = 0;
  for (const auto& c : table().classes()) total += c.members.size();
  EXPECT_EQ(total, symbols.size());
}

TEST(VisemeTable, UnknownSymbolThrows) {
  try {
    table().map_phoneme("zz");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownSymbol);
  }
}

TEST(VisemeTable, ShippedDataFileMatchesBuiltIn) {
  const auto file = VisemeTable::parse(text::read_file(VISAGE_SOURCE_DIR "/data/visemes.csv"));
  for (int id = 0; id < kVisemeCount; ++id) {
    EXPECT_EQ(file.at(id).name, table().at(id).name);
    EXPECT_EQ(file.at(id).members, table().at(id).members);
    EXPECT_EQ(file.at(id).closes_lips(), table().at(id).closes_lips());
  }
}

TEST(VisemeTable, RejectsBrokenTables) {
  auto code = [](std::string_view text) {
    try {
      VisemeTable::parse(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code("0,neutral,-,sil\n"), ErrorCode::InvalidTable);  // 19 missing classes
  std::string dup(kDefaultVisemeTable);
  dup.replace(dup.find("17,mid_central,-,ʌ"), std::string("17,mid_central,-,ʌ").size(), "17,mid_central,-,b");
  EXPECT_EQ(code(dup), ErrorCode::InvalidTable);
  std::string bad_flag(kDefaultVisemeTable);
  bad_flag.replace(bad_flag.find("1,bilabial,labial"), 17, "1,bilabial,closed");
  EXPECT_EQ(code(bad_flag), ErrorCode::InvalidTable);
}

Transcript make(std::initializer_list<PhoneSegment> segs) {
  Transcript t{segs, 0.0};
  if (!t.segments.empty()) t.total_duration = t.segments.back().end;
  return t;
}

TEST(ToVisemeSegments, MergesContiguousSameClass) {
  const auto segs = to_viseme_segments(make({{"b", 0.0, 0.05}, {"p", 0.05, 0.1}}), table());
  ASSERT_EQ(segs.size(), 1u);
  EXPECT_EQ(segs[0], (VisemeSegment{1, 0.0, 0.1}));
}

TEST(ToVisemeSegments, PreservesBoundaries) {
  const auto segs = to_viseme_segments(make({{"m", 0.0, 0.08}, {"ɑ", 0.08, 0.3}}), table());
  ASSERT_EQ(segs.size(), 2u);
  EXPECT_EQ(segs[0], (VisemeSegment{1, 0.0, 0.08}));
  EXPECT_EQ(segs[1], (VisemeSegment{13, 0.08, 0.3}));
}

TEST(ToVisemeSegments, GapPreventsMerge) {
  const auto segs = to_viseme_segments(make({{"b", 0.0, 0.05}, {"p", 0.1, 0.15}}), table());
  EXPECT_EQ(segs.size(), 2u);
}

TEST(ToVisemeSegments, Empty) { EXPECT_TRUE(to_viseme_segments(Transcript{}, table()).empty()); }

TEST(ToVisemeSegments, PropagatesUnknownSymbol) {
  EXPECT_THROW(to_viseme_segments(make({{"zz", 0.0, 0.1}}), table()), Error);
}

TEST(ExtendLabials, EatsPrecedingSilence) {
  const std::vector<VisemeSegment> in = {{0, 0.0, 0.1}, {1, 0.1, 0.105}};
  const auto out = extend_labials(in, table(), {0.06, 1.0 / 30.0});
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(out[1].start, 0.045, 1e-12);
  EXPECT_EQ(out[1].end, 0.105);
  EXPECT_EQ(out[0].start, 0.0);
  EXPECT_NEAR(out[0].end, 0.045, 1e-12);
}

TEST(ExtendLabials, VowelNeighbourBlocksExtension) {
  const std::vector<VisemeSegment> in = {{13, 0.0, 0.1}, {1, 0.1, 0.105}};
  EXPECT_EQ(extend_labials(in, table()), in);
}

TEST(ExtendLabials, NoLabialsIsIdentity) {
  const std::vector<VisemeSegment> in = {{0, 0.0, 0.1}, {13, 0.1, 0.3}, {4, 0.35, 0.4}};
  EXPECT_EQ(extend_labials(in, table()), in);
}

TEST(ExtendLabials, ConsumesGapAndStopsAtPreviousSpeech) {
  // 20 ms gap after the vowel: extension stops at the vowel's end.
  const std::vector<VisemeSegment> in = {{13, 0.0, 0.1}, {2, 0.12, 0.125}};
  const auto out = extend_labials(in, table());
  EXPECT_EQ(out[0], in[0]);
  EXPECT_DOUBLE_EQ(out[1].start, 0.1);
}

TEST(ExtendLabials, SilenceSegmentFullyEatenIsDropped) {
  const std::vector<VisemeSegment> in = {{13, 0.0, 0.1}, {0, 0.1, 0.12}, {1, 0.12, 0.125}};
  const auto out = extend_labials(in, table());
  ASSERT_EQ(out.size(), 2u);
  EXPECT_DOUBLE_EQ(out[1].start, 0.1);
}

TEST(ExtendLabials, LongLabialUntouched) {
  const std::vector<VisemeSegment> in = {{0, 0.0, 0.5}, {1, 0.5, 0.7}};
  EXPECT_EQ(extend_labials(in, table()), in);
}

TEST(ExtendLabials, MinDurationDominatesShortMaxExtension) {
  const std::vector<VisemeSegment> in = {{0, 0.0, 0.5}, {1, 0.5, 0.505}};
  const auto out = extend_labials(in, table(), {0.01, 0.04});
  EXPECT_NEAR(out[1].duration(), 0.04, 1e-12);
}

TEST(ExtendLabialsProperty, NoOverlapNoShrinkIdempotent) {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> cls(0, kVisemeCount - 1), coin(0, 3);
  std::uniform_int_distribution<int> dur_ms(1, 200);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<VisemeSegment> in;
    int ms = 0;
    for (int i = 0; i < 12; ++i) {
      if (coin(rng) == 0) ms += dur_ms(rng);
      const int d = dur_ms(rng);
      int c = coin(rng) == 0 ? 1 : cls(rng);
      if (!in.empty() && in.back().viseme_id == c && in.back().end * 1000 == ms) c = (c + 1) % kVisemeCount;
      in.push_back({c, ms / 1000.0, (ms + d) / 1000.0});
      ms += d;
    }
    const auto out = extend_labials(in, table());
    for (std::size_t i = 1; i < out.size(); ++i) ASSERT_LE(out[i - 1].end, out[i].start);
    for (const auto& o : out) ASSERT_GT(o.end, o.start);
    // Every non-silent input segment survives with at least its duration.
    for (const auto& s : in) {
      if (s.viseme_id == 0) continue;
      const auto it = std::find_if(out.begin(), out.end(),
                                   [&](const VisemeSegment& o) { return o.viseme_id == s.viseme_id && o.end == s.end; });
      ASSERT_NE(it, out.end());
      ASSERT_GE(it->duration(), s.duration() - 1e-15);
      if (!table().closes_lips(s.viseme_id)) ASSERT_EQ(*it, s);
    }
    ASSERT_EQ(extend_labials(out, table()), out);
  }
}

}  // namespace
}  // namespace visage
