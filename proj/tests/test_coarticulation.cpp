#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

namespace visage {
namespace {

const VisemeTable& table() { return VisemeTable::english(); }

bool is_pure(const VisemeWeights& w, int id) {
  for (int v = 0; v < kVisemeCount; ++v) {
    if (w[v] != (v == id ? 1.0 : 0.0)) return false;
  }
  return true;
}

std::size_t count_pure(const VisemeTrack& track, int id) {
  std::size_t n = 0;
  for (const auto& f : track.frames) n += is_pure(f, id);
  return n;
}

std::vector<VisemeSegment> segments_of(std::string_view tsv) {
  return to_viseme_segments(parse_transcript(tsv, table()), table());
}

TEST(SampleTrack, SingleSegmentIsUnity) {
  const std::vector<VisemeSegment> segs = {{5, 0.0, 1.0}};
  const auto track = sample_track(segs, 30.0, {}, 1.0);
  ASSERT_EQ(track.size(), 30u);
  for (const auto& f : track.frames) EXPECT_TRUE(is_pure(f, 5));
}

TEST(SampleTrack, SharedBoundaryIsHalfAndHalf) {
  const std::vector<VisemeSegment> segs = {{4, 0.0, 0.5}, {13, 0.5, 1.0}};
  for (auto shape : {KernelShape::gaussian, KernelShape::triangular}) {
    const auto track = sample_track(segs, 30.0, {shape, 0.03}, 1.0);
    EXPECT_NEAR(track.frames[15][4], 0.5, 1e-12);
    EXPECT_NEAR(track.frames[15][13], 0.5, 1e-12);
  }
}

TEST(SampleTrack, FrameCount) {
  const std::vector<VisemeSegment> segs = {{4, 0.0, 7.0}};
  EXPECT_EQ(sample_track(segs, 30.0, {}, 7.0).size(), 210u);
  EXPECT_EQ(sample_track(segs, 30.0, {}, 7.01).size(), 211u);
  EXPECT_EQ(frame_count(0.1, 30.0), 3u);
  EXPECT_EQ(frame_count(0.0, 30.0), 0u);
}

TEST(SampleTrack, ThreeSegmentsMatchBruteForce) {
  const std::vector<VisemeSegment> segs = {{4, 0.0, 0.12}, {13, 0.12, 0.3}, {5, 0.3, 0.38}};
  const SmoothingKernel k{KernelShape::gaussian, 0.03};
  const auto track = sample_track(segs, 30.0, k, 0.38);
  for (std::size_t i = 0; i < track.size(); ++i) {
    const auto ref = oracle::convolve(segs, 0.38, track.frame_time(i), k);
    for (int v = 0; v < kVisemeCount; ++v) EXPECT_NEAR(track.frames[i][v], ref[v], 1e-4);
  }
}

TEST(SampleTrack, GapsCountAsNeutral) {
  const std::vector<VisemeSegment> segs = {{4, 0.0, 0.1}, {13, 1.0, 1.1}};
  const auto track = sample_track(segs, 30.0, {}, 1.1);
  EXPECT_TRUE(is_pure(track.frames[15], 0));
}

TEST(SampleTrack, TrailingSilenceBeyondLastSegment) {
  const std::vector<VisemeSegment> segs = {{4, 0.0, 0.1}};
  const auto track = sample_track(segs, 30.0, {}, 1.0);
  EXPECT_EQ(track.size(), 30u);
  EXPECT_TRUE(is_pure(track.frames.back(), 0));
}

TEST(SampleTrack, Errors) {
  const std::vector<VisemeSegment> none;
  try {
    sample_track(none, 30.0, {}, 0.0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyTimeline);
  }
  const std::vector<VisemeSegment> one = {{4, 0.0, 0.1}};
  EXPECT_THROW(sample_track(one, 0.0, {}, 0.1), Error);
}

TEST(SampleTrack, ZeroBandwidthIsBasicMode) {
  const std::vector<VisemeSegment> segs = {{1, 0.0, 0.05}, {13, 0.05, 0.2}, {5, 0.25, 0.3}};
  const auto track = sample_track(segs, 30.0, {KernelShape::gaussian, 0.0}, 0.3);
  ASSERT_EQ(track.size(), 9u);
  const int expected[] = {1, 1, 13, 13, 13, 13, 0, 0, 5};
  for (std::size_t i = 0; i < track.size(); ++i) EXPECT_TRUE(is_pure(track.frames[i], expected[i])) << i;
}

TEST(SampleTrackProperty, MatchesOracleOnRandomTimelines) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 40; ++trial) {
    const auto segs = oracle::random_segments(rng, 10, 2.0);
    const double total = segs.back().end;
    const SmoothingKernel k{trial % 2 ? KernelShape::triangular : KernelShape::gaussian, 0.03};
    const auto track = sample_track(segs, 30.0, k, total);
    for (std::size_t i = 0; i < track.size(); ++i) {
      const auto ref = oracle::convolve(segs, total, track.frame_time(i), k);
      for (int v = 0; v < kVisemeCount; ++v) ASSERT_NEAR(track.frames[i][v], ref[v], 1e-4);
    }
  }
}

TEST(SampleTrackProperty, WeightsSumToOneAndStayInRange) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto segs = oracle::random_segments(rng, 10, 2.0);
    const auto track = sample_track(segs, 30.0, {}, segs.back().end + 0.2);
    for (const auto& f : track.frames) {
      double sum = 0.0;
      for (double x : f) {
        ASSERT_TRUE(std::isfinite(x));
        ASSERT_GE(x, 0.0);
        ASSERT_LE(x, 1.0);
        sum += x;
      }
      ASSERT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

// The bound is the Lipschitz constant of a step smoothed by a unit-mass
// gaussian. Near the ends of the timeline the normalizer drops below one and
// amplifies changes, so only frames whose kernel window lies inside the
// timeline are compared.
TEST(SampleTrackProperty, SmoothnessBoundOnInteriorFrames) {
  std::mt19937_64 rng(9);
  const SmoothingKernel k{KernelShape::gaussian, 0.03};
  const double fps = 30.0;
  const double bound = (1.0 / fps) / (k.bandwidth * std::sqrt(2.0 * std::numbers::pi)) + 1e-9;
  double worst = 0.0;
  for (int trial = 0; trial < 300; ++trial) {
    const auto segs = oracle::random_segments(rng, 10, 2.0, false);
    const double total = segs.back().end;
    const auto track = sample_track(segs, fps, k, total);
    for (std::size_t i = 1; i < track.size(); ++i) {
      if (track.frame_time(i - 1) < k.support() || track.frame_time(i) > total - k.support()) continue;
      for (int v = 0; v < kVisemeCount; ++v) {
        worst = std::max(worst, std::abs(track.frames[i][v] - track.frames[i - 1][v]));
      }
    }
  }
  EXPECT_LE(worst, bound);
  EXPECT_GT(worst, 0.0);
}

TEST(LabialClosure, MidpointFrameBecomesPure) {
  // Frames 3, 4, 5 lie inside; 4 is nearest the midpoint.
  const std::vector<VisemeSegment> segs = {{13, 0.0, 0.09}, {1, 0.09, 0.18}, {13, 0.18, 0.4}};
  const auto track = sample_track(segs, 30.0, {KernelShape::gaussian, 0.06}, 0.4);
  ASSERT_FALSE(is_pure(track.frames[4], 1));
  const auto out = enforce_labial_closure(track, segs, table());
  EXPECT_TRUE(is_pure(out.frames[4], 1));
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (i != 4) {
      EXPECT_EQ(out.frames[i], track.frames[i]);
    }
  }
}

TEST(LabialClosure, NoLabialsUnchanged) {
  const std::vector<VisemeSegment> segs = {{13, 0.0, 0.2}, {4, 0.2, 0.4}};
  const auto track = sample_track(segs, 30.0, {}, 0.4);
  EXPECT_EQ(enforce_labial_closure(track, segs, table()), track);
}

TEST(LabialClosure, ShortLabialBetweenVowels) {
  const auto segs = extend_labials(segments_of("ɑ\t0\t200\nm\t200\t205\nɑ\t205\t400\n"), table());
  const auto track = sample_track(segs, 30.0, {}, 0.4);
  EXPECT_EQ(count_pure(track, 1), 0u);
  EXPECT_EQ(count_pure(enforce_labial_closure(track, segs, table()), 1), 1u);
}

TEST(LabialClosure, ShortLabialAfterSilenceIsExtendedFirst) {
  const auto segs = extend_labials(segments_of("sil\t0\t100\nm\t100\t105\nɑ\t105\t300\n"), table());
  ASSERT_NEAR(segs[1].start, 0.045, 1e-12);
  const auto out = enforce_labial_closure(sample_track(segs, 30.0, {}, 0.3), segs, table());
  EXPECT_EQ(count_pure(out, 1), 1u);
  EXPECT_TRUE(is_pure(out.frames[2], 1));
}

TEST(LabialClosure, LabialBetweenFramesUsesNearestFrame) {
  const std::vector<VisemeSegment> segs = {{13, 0.0, 0.201}, {2, 0.201, 0.206}, {13, 0.206, 0.4}};
  const auto out = enforce_labial_closure(sample_track(segs, 30.0, {}, 0.4), segs, table());
  EXPECT_TRUE(is_pure(out.frames[6], 2));
}

TEST(LabialClosure, AdjacentShortLabialsClaimDistinctFrames) {
  const std::vector<VisemeSegment> segs = {{13, 0.0, 0.2}, {1, 0.2, 0.205}, {13, 0.205, 0.21}, {2, 0.21, 0.215}, {13, 0.215, 0.5}};
  const auto out = enforce_labial_closure(sample_track(segs, 30.0, {}, 0.5), segs, table());
  EXPECT_EQ(count_pure(out, 1), 1u);
  EXPECT_EQ(count_pure(out, 2), 1u);
}

TEST(LabialClosureProperty, IdempotentAndTouchesOneFramePerLabial) {
  std::mt19937_64 rng(13);
  for (int trial = 0; trial < 300; ++trial) {
    const auto segs = extend_labials(oracle::random_segments(rng, 10, 2.0), table());
    const auto track = sample_track(segs, 30.0, {}, segs.back().end);
    const auto once = enforce_labial_closure(track, segs, table());
    ASSERT_EQ(enforce_labial_closure(once, segs, table()), once);
    std::size_t labials = 0, changed = 0;
    for (const auto& s : segs) labials += table().closes_lips(s.viseme_id);
    for (std::size_t i = 0; i < track.size(); ++i) changed += once.frames[i] != track.frames[i];
    ASSERT_LE(changed, labials);
  }
}

TEST(TrackIo, RoundTripIsExact) {
  std::mt19937_64 rng(17);
  const auto segs = oracle::random_segments(rng, 10, 2.0);
  const auto track = sample_track(segs, 30.0, {}, segs.back().end);
  const auto text = serialize_track(track);
  EXPECT_EQ(text.substr(0, text.find('\n')), "#track fps=30 classes=20");
  EXPECT_EQ(parse_track(text), track);
  EXPECT_THROW(parse_track("0,1\n"), Error);
}

}  // namespace
}  // namespace visage
