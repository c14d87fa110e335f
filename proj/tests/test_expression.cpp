#include <random>

#include <gtest/gtest.h>

#include "visage/expression.hpp"
#include "visage/text.hpp"

namespace visage {
namespace {

const CompatibilityTable& table() {
  static const auto t = CompatibilityTable::defaults();
  return t;
}

TEST(BlendFrame, ZeroIntensityIsIdentity) {
  VisemeWeights v{};
  v[13] = 0.7;
  v[4] = 0.3;
  const std::vector<ActiveExpression> active = {{Expression::joy, 0.0}, {Expression::anger, 0.0}};
  const auto fb = blend_frame(v, active, table());
  EXPECT_EQ(fb.viseme_weights, v);
  EXPECT_EQ(fb.upper, ExpressionWeights{});
  EXPECT_EQ(fb.lower, ExpressionWeights{});
  EXPECT_FALSE(fb.preblend);
}

TEST(BlendFrame, JoyOnSilenceIsFullTarget) {
  const std::vector<ActiveExpression> active = {{Expression::joy, 1.0}};
  const auto fb = blend_frame(one_hot(0), active, table());
  EXPECT_EQ(fb.upper[index_of(Expression::joy)], 1.0);
  EXPECT_EQ(fb.lower[index_of(Expression::joy)], 1.0);
  EXPECT_EQ(fb.viseme_weights, one_hot(0));
}

TEST(BlendFrame, SurpriseOnLabialUsesPreblend) {
  const std::vector<ActiveExpression> active = {{Expression::surprise, 0.8}};
  const auto fb = blend_frame(one_hot(1), active, table());
  const int j = index_of(Expression::surprise);
  ASSERT_TRUE(fb.preblend);
  EXPECT_EQ(fb.preblend->id, *table().entry(1, Expression::surprise).preblend);
  EXPECT_EQ(fb.preblend->weight, 1.0);
  EXPECT_EQ(fb.lower[j], 0.0);
  EXPECT_EQ(fb.upper[j], std::min(0.8, table().entry(1, Expression::surprise).cap));
  EXPECT_EQ(fb.viseme_weights[1], 0.0);
}

TEST(BlendFrame, PreblendWeightFollowsDominantViseme) {
  VisemeWeights v{};
  v[2] = 0.6;
  v[13] = 0.4;
  const std::vector<ActiveExpression> active = {{Expression::fear, 0.5}};
  const auto fb = blend_frame(v, active, table());
  ASSERT_TRUE(fb.preblend);
  EXPECT_EQ(fb.preblend->weight, 0.6);
  EXPECT_EQ(fb.viseme_weights[13], 0.4);
}

TEST(BlendFrame, JoyCappedOnRoundedVowelLowerFaceOnly) {
  const std::vector<ActiveExpression> active = {{Expression::joy, 0.9}};
  const auto fb = blend_frame(one_hot(18), active, table());
  EXPECT_EQ(fb.lower[index_of(Expression::joy)], 0.3);
  EXPECT_EQ(fb.upper[index_of(Expression::joy)], 0.9);
}

TEST(BlendFrame, AlphaOfStrongestScalesVisemes) {
  auto t = CompatibilityTable::neutral();
  auto text = t.serialize();
  text = text.replace(text.find("13,joy,1,1"), 10, "13,joy,0.5,1");
  const auto scaled = CompatibilityTable::parse(text);
  const std::vector<ActiveExpression> active = {{Expression::joy, 0.9}, {Expression::sadness, 0.2}};
  VisemeWeights v{};
  v[13] = 0.8;
  v[0] = 0.2;
  const auto fb = blend_frame(v, active, scaled);
  EXPECT_DOUBLE_EQ(fb.viseme_weights[13], 0.4);
  EXPECT_DOUBLE_EQ(fb.viseme_weights[0], 0.1);
}

TEST(BlendFrame, DominantTieGoesToLowestId) {
  VisemeWeights v{};
  v[18] = 0.5;
  v[1] = 0.5;
  EXPECT_EQ(dominant_viseme(v), 1);
}

TEST(BlendFrame, MissingEntryPropagates) {
  const auto partial = CompatibilityTable::parse("0,joy,1,1\n");
  const std::vector<ActiveExpression> active = {{Expression::joy, 0.5}};
  EXPECT_NO_THROW(blend_frame(one_hot(0), active, partial));
  EXPECT_THROW(blend_frame(one_hot(4), active, partial), Error);
}

TEST(Compat, Lookups) {
  EXPECT_EQ(lookup_compat(0, Expression::sadness, table()), std::make_pair(1.0, 1.0));
  const int o_class = VisemeTable::english().map_phoneme("oʊ").id;
  EXPECT_LT(lookup_compat(o_class, Expression::joy, table()).second, 1.0);
  try {
    lookup_compat(25, Expression::joy, table());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::MissingEntry);
  }
}

TEST(Compat, DefaultsAreCompleteWithSixPreblends) {
  EXPECT_TRUE(table().complete());
  EXPECT_EQ(table().preblend_ids(), (std::vector<int>{0, 1, 2, 3, 4, 5}));
  for (int v = 0; v < kVisemeCount; ++v) {
    for (auto e : kExpressions) {
      const auto& entry = table().entry(v, e);
      EXPECT_GE(entry.alpha, 0.0);
      EXPECT_LE(entry.alpha, 1.0);
      EXPECT_GE(entry.cap, 0.0);
      EXPECT_LE(entry.cap, 1.0);
      if (entry.preblend) EXPECT_TRUE(VisemeTable::english().closes_lips(v));
    }
  }
}

TEST(Compat, SerializeParseRoundTrip) {
  const auto back = CompatibilityTable::parse(table().serialize());
  for (int v = 0; v < kVisemeCount; ++v) {
    for (auto e : kExpressions) EXPECT_EQ(back.entry(v, e), table().entry(v, e));
  }
}

TEST(Compat, ShippedDataFileMatchesDefaults) {
  const auto file = CompatibilityTable::parse(text::read_file(VISAGE_SOURCE_DIR "/data/compat.csv"));
  EXPECT_TRUE(file.complete());
  for (int v = 0; v < kVisemeCount; ++v) {
    for (auto e : kExpressions) EXPECT_EQ(file.entry(v, e), table().entry(v, e));
  }
}

TEST(Compat, ParseRejectsBadRows) {
  auto code = [](std::string_view text) {
    try {
      CompatibilityTable::parse(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::Io;
  };
  EXPECT_EQ(code("0,joy,1\n"), ErrorCode::MalformedLine);
  EXPECT_EQ(code("0,glee,1,1\n"), ErrorCode::MalformedLine);
  EXPECT_EQ(code("20,joy,1,1\n"), ErrorCode::InvalidTable);
  EXPECT_EQ(code("0,joy,1.5,1\n"), ErrorCode::InvalidTable);
  EXPECT_EQ(code("0,joy,1,1\n0,joy,1,1\n"), ErrorCode::InvalidTable);
}

TEST(Schedule, ConstantIntensity) {
  const std::vector<ExpressionSpec> specs = {{Expression::sadness, 0.5, std::nullopt}};
  const auto frames = expand_expression_schedule(specs, 30.0, 12);
  for (const auto& f : frames) {
    ASSERT_EQ(f.size(), 1u);
    EXPECT_EQ(f[0], (ActiveExpression{Expression::sadness, 0.5}));
  }
}

TEST(Schedule, RampMidpoint) {
  Envelope ramp{{{0.0, 0.0}, {10.0 / 30.0, 1.0}}};
  const std::vector<ExpressionSpec> specs = {{Expression::joy, 1.0, ramp}};
  const auto frames = expand_expression_schedule(specs, 30.0, 20);
  ASSERT_EQ(frames[5].size(), 1u);
  EXPECT_NEAR(frames[5][0].intensity, 0.5, 1e-12);
  EXPECT_TRUE(frames[0].empty());
  EXPECT_TRUE(frames[15].empty());
}

TEST(Schedule, EmptySpecs) {
  const auto frames = expand_expression_schedule({}, 30.0, 5);
  ASSERT_EQ(frames.size(), 5u);
  for (const auto& f : frames) EXPECT_TRUE(f.empty());
}

TEST(EmotionScript, TrapezoidEnvelope) {
  const auto specs = parse_emotion_script("# expr,start,end,peak\njoy,1000,2000,0.8\n");
  ASSERT_EQ(specs.size(), 1u);
  EXPECT_EQ(specs[0].expression, Expression::joy);
  EXPECT_EQ(specs[0].intensity, 0.8);
  const auto& env = *specs[0].envelope;
  EXPECT_EQ(env.at(0.9), 0.0);
  EXPECT_NEAR(env.at(1.075), 0.5, 1e-12);
  EXPECT_EQ(env.at(1.5), 1.0);
  EXPECT_NEAR(env.at(1.925), 0.5, 1e-12);
  EXPECT_EQ(env.at(2.1), 0.0);
}

TEST(EmotionScript, ShortEventScalesRamps) {
  const auto specs = parse_emotion_script("fear,0,100,1\n");
  EXPECT_NEAR(specs[0].envelope->at(0.05), 1.0, 1e-12);
  EXPECT_NEAR(specs[0].envelope->at(0.025), 0.5, 1e-12);
}

TEST(EmotionScript, Errors) {
  EXPECT_THROW(parse_emotion_script("glee,0,100,1\n"), Error);
  EXPECT_THROW(parse_emotion_script("joy,100,100,1\n"), Error);
  EXPECT_THROW(parse_emotion_script("joy,0,100,1.2\n"), Error);
  EXPECT_THROW(parse_emotion_script("joy,0,100\n"), Error);
}

class BlendProperty : public ::testing::Test {
 protected:
  std::mt19937_64 rng{21};
  std::uniform_real_distribution<double> u{0.0, 1.0};

  VisemeWeights random_weights() {
    VisemeWeights w{};
    double sum = 0.0;
    for (auto& x : w) sum += (x = u(rng) < 0.3 ? u(rng) : 0.0);
    if (sum == 0.0) return one_hot(0);
    for (auto& x : w) x /= sum;
    return w;
  }

  std::vector<ActiveExpression> random_active() {
    std::vector<ActiveExpression> out;
    for (auto e : kExpressions) {
      if (u(rng) < 0.4) out.push_back({e, u(rng)});
    }
    return out;
  }
};

TEST_F(BlendProperty, CapRespectAndExclusivity) {
  for (int trial = 0; trial < 5000; ++trial) {
    const auto v = random_weights();
    const auto active = random_active();
    const auto fb = blend_frame(v, active, table());
    const int d = dominant_viseme(v);
    for (auto e : kExpressions) {
      const int j = index_of(e);
      ASSERT_LE(fb.lower[j], table().entry(d, e).cap);
      ASSERT_GE(fb.upper[j], 0.0);
      ASSERT_LE(fb.upper[j], 1.0);
      if (fb.preblend && table().entry(d, e).preblend == fb.preblend->id) ASSERT_EQ(fb.lower[j], 0.0);
    }
    for (double w : fb.viseme_weights) {
      ASSERT_GE(w, 0.0);
      ASSERT_LE(w, 1.0);
    }
  }
}

TEST_F(BlendProperty, MonotoneInRequestedIntensity) {
  for (int trial = 0; trial < 5000; ++trial) {
    const auto v = random_weights();
    const auto e = kExpressions[static_cast<std::size_t>(u(rng) * kExpressionCount) % kExpressionCount];
    const double a = u(rng), b = u(rng);
    const std::vector<ActiveExpression> lo = {{e, std::min(a, b)}}, hi = {{e, std::max(a, b)}};
    const auto f_lo = blend_frame(v, lo, table());
    const auto f_hi = blend_frame(v, hi, table());
    ASSERT_LE(f_lo.upper[index_of(e)], f_hi.upper[index_of(e)]);
    if (!f_lo.preblend && !f_hi.preblend) ASSERT_LE(f_lo.lower[index_of(e)], f_hi.lower[index_of(e)]);
  }
}

TEST_F(BlendProperty, NeutralTableOnSilenceEchoesLambda) {
  const auto neutral = CompatibilityTable::neutral();
  for (int trial = 0; trial < 1000; ++trial) {
    const auto active = random_active();
    const auto fb = blend_frame(one_hot(0), active, neutral);
    for (const auto& a : active) {
      ASSERT_EQ(fb.upper[index_of(a.expression)], a.intensity);
      ASSERT_EQ(fb.lower[index_of(a.expression)], a.intensity);
    }
    ASSERT_EQ(fb.viseme_weights, one_hot(0));
  }
}

}  // namespace
}  // namespace visage
