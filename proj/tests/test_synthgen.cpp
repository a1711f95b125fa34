#include <gtest/gtest.h>

#include <cmath>

#include "demoproc/demolog.hpp"
#include "demoproc/episodes.hpp"
#include "demoproc/error.hpp"
#include "demoproc/gripper.hpp"
#include "demoproc/kinchain.hpp"
#include "demoproc/synthgen.hpp"
#include "demoproc/trajeval.hpp"
#include "support.hpp"

namespace {

using namespace demoproc;
using namespace demoproc::synthgen;
using namespace testing_support;

synthgen::Scenario short_scenario(double duration_s = 10.0) {
  auto s = default_scenario();
  s.duration_s = duration_s;
  s.buttons = {{0.1, demolog::ButtonKind::LongPress},
               {1.0, demolog::ButtonKind::ShortPress},
               {duration_s - 1.0, demolog::ButtonKind::ShortPress},
               {duration_s - 0.1, demolog::ButtonKind::LongPress}};
  return s;
}

trajeval::TrajectoryPair pair_of(const Output& out) {
  return trajeval::associate(demolog::pose_samples(out.log), demolog::pose_samples(out.truth), 0);
}

TEST(Rng, GaussianMoments) {
  Rng rng(5);
  const int n = 200000;
  double sum = 0, sq = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.gaussian();
    sum += x;
    sq += x * x;
  }
  EXPECT_NEAR(sum / n, 0.0, 0.01);
  EXPECT_NEAR(sq / n, 1.0, 0.01);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_NEAR(rng.unit_vector().norm(), 1.0, 1e-15);
  }
}

TEST(Generate, SameSeedIsBitIdentical) {
  auto s = short_scenario();
  s.sigma_t_m = 0.005;
  s.sigma_r_rad = 0.01;
  s.pixel_noise_px = 0.5;
  s.seed = 99;
  const auto a = generate(s);
  const auto b = generate(s);
  EXPECT_EQ(demolog::encode_log(a.log), demolog::encode_log(b.log));
  EXPECT_EQ(demolog::encode_log(a.truth), demolog::encode_log(b.truth));
  s.seed = 100;
  EXPECT_NE(demolog::encode_log(generate(s).log), demolog::encode_log(a.log));
}

TEST(Generate, NoiselessEstimateHasZeroApe) {
  const auto out = generate(short_scenario());
  const auto pair = pair_of(out);
  EXPECT_EQ(pair.association.size(), 301u);
  for (const auto& e : trajeval::ape(pair)) {
    EXPECT_EQ(e.translation, 0.0);
    EXPECT_EQ(e.rotation, 0.0);
  }
}

TEST(Generate, TranslationNoiseRmseIsSigmaRootThree) {
  auto s = default_scenario();
  s.sigma_t_m = 0.005;
  s.seed = 3;
  const auto out = generate(s);
  const auto pair = pair_of(out);
  ASSERT_GE(pair.association.size(), 1000u);
  const auto m = trajeval::magnitudes(trajeval::ape(pair), trajeval::Metric::Translation);
  EXPECT_NEAR(trajeval::stats(m).rmse, 0.005 * std::sqrt(3.0), 0.1 * 0.005 * std::sqrt(3.0));
}

TEST(Generate, RotationNoiseHasRequestedAngle) {
  auto s = default_scenario();
  s.sigma_r_rad = 0.01;
  s.seed = 4;
  const auto out = generate(s);
  const auto m = trajeval::magnitudes(trajeval::ape(pair_of(out)), trajeval::Metric::Rotation);
  // The rotation angle is |N(0, sigma)|, whose RMS is sigma.
  EXPECT_NEAR(trajeval::stats(m).rmse, 0.01, 0.001);
}

TEST(Generate, RecordsAreTimeOrderedAndComplete) {
  const auto out = generate(short_scenario());
  std::uint64_t last = 0;
  for (const auto& r : out.log.records) {
    EXPECT_GE(r.timestamp_ns, last);
    last = r.timestamp_ns;
  }
  EXPECT_NE(demolog::find_intrinsics(out.log), nullptr);
  EXPECT_EQ(demolog::button_events(out.log).size(), 4u);
  EXPECT_EQ(demolog::tag_detections(out.log).size(), 2 * 301u);
  EXPECT_EQ(demolog::frame_metas(out.log).size(), 301u);
  EXPECT_EQ(out.widths.size(), 301u);
  // Round trip through the container.
  EXPECT_EQ(demolog::read_log(demolog::encode_log(out.log)).log, out.log);
}

TEST(Generate, DefaultScheduleYieldsTwoEpisodes) {
  const auto seg = episodes::segment_episodes(generate(default_scenario()).log);
  EXPECT_EQ(seg.episodes.size(), 2u);
  EXPECT_TRUE(seg.warnings.empty());
}

TEST(Generate, NoiselessTagsRecoverScriptedWidths) {
  const auto s = default_scenario();
  const auto out = generate(s);
  const gripper::GripperCalibration cal{s.tags.width_min_m, s.tags.width_max_m};
  const auto stream = gripper::gripper_state_stream(demolog::tag_detections(out.truth), s.intrinsics,
                                                    {s.tags.side_m, s.tags.left_id, s.tags.right_id}, cal);
  ASSERT_EQ(stream.samples.size(), out.widths.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < out.widths.size(); ++i) {
    EXPECT_EQ(stream.samples[i].timestamp_ns, out.widths[i].timestamp_ns);
    worst = std::max(worst, std::abs(stream.samples[i].width_m - out.widths[i].value));
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(Generate, PixelNoiseWidthErrorIsSmall) {
  auto s = default_scenario();
  s.pixel_noise_px = 0.5;
  s.seed = 8;
  const auto out = generate(s);
  const auto stream = gripper::gripper_state_stream(demolog::tag_detections(out.log), s.intrinsics,
                                                    {s.tags.side_m, s.tags.left_id, s.tags.right_id},
                                                    {s.tags.width_min_m, s.tags.width_max_m});
  ASSERT_GE(stream.samples.size(), 1000u);
  double sum = 0.0;
  for (std::size_t i = 0; i < stream.samples.size(); ++i) {
    sum += std::abs(stream.samples[i].width_m - out.widths[i].value);
  }
  EXPECT_LT(sum / static_cast<double>(stream.samples.size()), 0.002);
}

TEST(Generate, JointStreamsReproduceTruthThroughFk) {
  auto s = parse_scenario("duration_s = 5\nchain_urdf = builtin\nchain_tip = tool0\nseed = 1\n");
  ASSERT_TRUE(s.joints.has_value());
  const auto out = generate(s);
  const auto truth = demolog::pose_samples(out.truth);
  const auto cam = kinchain::camera_reference_trajectory(s.joints->chain, demolog::joint_states(out.log),
                                                         s.joints->hand_eye);
  ASSERT_EQ(cam.size(), truth.size());
  for (std::size_t i = 0; i < cam.size(); ++i) {
    EXPECT_EQ(cam[i].timestamp_ns, truth[i].timestamp_ns);
    EXPECT_TRUE(geom::is_approx(cam[i].pose, truth[i].pose, 1e-12));
  }
}

TEST(Scenario, ParseKeysSegmentsAndButtons) {
  const auto s = parse_scenario(
      "# test\nseed = 5\nduration_s = 12\ncamera_rate_hz = 15\nsigma_t_m = 0.001\n"
      "segment 0.1 0 0 0 0 0.2 2\nsegment 0 0 0 0 0 0 1\nbutton 0.5 long\nbutton 1 short\n");
  EXPECT_EQ(s.seed, 5u);
  EXPECT_EQ(s.duration_s, 12.0);
  EXPECT_EQ(s.camera_rate_hz, 15.0);
  EXPECT_EQ(s.sigma_t_m, 0.001);
  ASSERT_EQ(s.script.size(), 2u);
  EXPECT_EQ(s.script[0].translation, Vec3(0.1, 0, 0));
  EXPECT_EQ(s.script[0].duration_s, 2.0);
  ASSERT_EQ(s.buttons.size(), 2u);
  EXPECT_EQ(s.buttons[0].kind, demolog::ButtonKind::LongPress);

  EXPECT_THROW(parse_scenario("colour = red\n"), FormatError);
  EXPECT_THROW(parse_scenario("camera_rate_hz = 0\n"), Error);
  EXPECT_THROW(parse_scenario("sigma_t_m = -1\n"), Error);
  EXPECT_THROW(parse_scenario("button 1 medium\n"), FormatError);
  EXPECT_THROW(parse_scenario("hand_eye = 0 0 0 0 0 0 1\n"), FormatError);
}

TEST(Scenario, ScriptedPoseFollowsSegments) {
  auto s = default_scenario();
  s.start_pose = Pose::identity();
  s.script = {{Vec3(0.1, 0, 0), Vec3::Zero(), 2.0}, {Vec3::Zero(), Vec3(0, 0, 0.4), 2.0}};
  EXPECT_LT((scripted_pose(s, 1.0).translation - Vec3(0.05, 0, 0)).norm(), 1e-15);
  const Pose p = scripted_pose(s, 3.0);
  EXPECT_LT((p.translation - Vec3(0.1, 0, 0)).norm(), 1e-15);
  EXPECT_TRUE(p.rotation.is_approx(Rotation::rz(0.2), 1e-15));
  EXPECT_LT((scripted_pose(s, 5.0).translation - Vec3(0.15, 0, 0)).norm(), 1e-15);
}

TEST(Scenario, DefaultScriptCoversEachAxisBothWays) {
  const auto script = default_script();
  Vec3 t_sum = Vec3::Zero(), r_sum = Vec3::Zero();
  for (const auto& seg : script) {
    t_sum += seg.translation;
    r_sum += seg.rotation;
  }
  EXPECT_LT(t_sum.norm(), 1e-15);
  EXPECT_LT(r_sum.norm(), 1e-15);
  EXPECT_EQ(kPrngName, std::string_view("mt19937_64+box-muller"));
}

}  // namespace
