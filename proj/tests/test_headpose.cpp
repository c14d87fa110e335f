#include <random>

#include <gtest/gtest.h>

#include "visage/headpose.hpp"

namespace visage {
namespace {

TEST(ClampNeck, Examples) {
  const auto zero = clamp_neck(0, 0, 0);
  EXPECT_EQ(zero.pose, (NeckPose{0, 0, 0}));
  EXPECT_FALSE(zero.any_clamped());

  const auto yaw = clamp_neck(90, 0, 0);
  EXPECT_EQ(yaw.pose, (NeckPose{75, 0, 0}));
  EXPECT_TRUE(yaw.yaw_clamped);
  EXPECT_FALSE(yaw.pitch_clamped);
  EXPECT_FALSE(yaw.roll_clamped);

  const auto all = clamp_neck(-80, 20, -20);
  EXPECT_EQ(all.pose, (NeckPose{-75, 15, -15}));
  EXPECT_TRUE(all.yaw_clamped && all.pitch_clamped && all.roll_clamped);
}

TEST(ClampNeck, BoundariesAreNotClamped) {
  const auto edge = clamp_neck(75, -15, 15);
  EXPECT_FALSE(edge.any_clamped());
}

TEST(ClampNeck, NonFinite) {
  try {
    clamp_neck(NAN, 0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteInput);
  }
  EXPECT_THROW(clamp_neck(0, INFINITY, 0), Error);
}

TEST(ClampNeck, FuzzEnvelopeAndIdempotence) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> wide(-400.0, 400.0);
  for (int i = 0; i < 100000; ++i) {
    const double y = wide(rng), p = wide(rng), r = wide(rng);
    const auto c = clamp_neck(y, p, r);
    ASSERT_TRUE(c.pose.within_limits());
    ASSERT_EQ(clamp_neck(c.pose).pose, c.pose);
    ASSERT_FALSE(clamp_neck(c.pose).any_clamped());
    ASSERT_EQ(c.pose.yaw, std::min(75.0, std::max(-75.0, y)));
    ASSERT_EQ(c.yaw_clamped, std::abs(y) > 75.0);
  }
}

TEST(PoseToward, Examples) {
  const Eigen::Vector3d origin(0, 1.4, 0);
  const auto ahead = pose_toward(origin + Eigen::Vector3d(0, 0, 2), origin);
  EXPECT_EQ(ahead.pose, (NeckPose{0, 0, 0}));

  auto at = [&](double deg) -> Eigen::Vector3d {
    const double a = deg * std::numbers::pi / 180.0;
    return origin + Eigen::Vector3d(std::sin(a), 0, std::cos(a));
  };
  const auto p25 = pose_toward(at(25), origin);
  EXPECT_NEAR(p25.pose.yaw, 25.0, 1e-12);
  EXPECT_FALSE(p25.any_clamped());

  const auto p80 = pose_toward(at(80), origin);
  EXPECT_EQ(p80.pose.yaw, 75.0);
  EXPECT_TRUE(p80.yaw_clamped);
  EXPECT_EQ(p80.pose.roll, 0.0);

  EXPECT_THROW(pose_toward(origin, origin), Error);
}

TEST(PoseToward, FuzzNeverLeavesEnvelope) {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  for (int i = 0; i < 20000; ++i) {
    const Eigen::Vector3d o(u(rng), u(rng), u(rng)), t(u(rng), u(rng), u(rng));
    ASSERT_TRUE(pose_toward(t, o).pose.within_limits());
  }
}

}  // namespace
}  // namespace visage
