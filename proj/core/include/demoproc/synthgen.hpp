#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "demoproc/demolog.hpp"
#include "demoproc/geom.hpp"
#include "demoproc/kinchain.hpp"

namespace demoproc::synthgen {

// The generator's random source. std::mt19937_64 output is fixed by the C++
// standard; normal deviates use Box-Muller on 53-bit uniforms so the stream is
// identical across standard libraries.
inline constexpr std::string_view kPrngName = "mt19937_64+box-muller";

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // [0, 1)
  double gaussian();
  geom::Vec3 unit_vector();

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

// One scripted motion. Translation is in the world frame, rotation is a
// body-frame rotation vector; both are spread uniformly over the duration.
struct Segment {
  geom::Vec3 translation = geom::Vec3::Zero();
  geom::Vec3 rotation = geom::Vec3::Zero();
  double duration_s = 1.0;
};

struct ButtonPress {
  double t_s = 0.0;
  demolog::ButtonKind kind = demolog::ButtonKind::ShortPress;
};

// Two tags on the finger slider, seen from the camera. Their centers sit at
// (+-width/2, offset_y, depth) in the camera frame, tilted by tilt_rad about x.
struct TagLayout {
  double side_m = 0.015;
  std::uint32_t left_id = 0;
  std::uint32_t right_id = 1;
  double depth_m = 0.25;
  double offset_y_m = 0.04;
  double tilt_rad = 0.3;
  double width_min_m = 0.01;
  double width_max_m = 0.05;
  double width_period_s = 4.0;

  double width_at(double t_s) const;
  std::pair<geom::Pose, geom::Pose> poses_at(double t_s) const;
};

// Joint-space mode: q_k(t) = center_k + amplitude_k * sin(2 pi f_k t + k).
struct JointMotion {
  kinchain::KinematicChain chain;
  geom::Pose hand_eye;
  std::vector<double> center;
  std::vector<double> amplitude;
  std::vector<double> frequency_hz;

  std::vector<double> at(double t_s) const;
};

struct Scenario {
  std::uint64_t seed = 0;
  double duration_s = 60.0;
  double camera_rate_hz = 30.0;
  geom::Pose start_pose;
  std::vector<Segment> script;  // repeated until duration is covered
  double sigma_t_m = 0.0;
  double sigma_r_rad = 0.0;
  double pixel_noise_px = 0.0;
  bool emit_tags = true;
  bool emit_frames = true;
  TagLayout tags;
  demolog::CameraIntrinsics intrinsics;
  std::vector<ButtonPress> buttons;
  std::optional<JointMotion> joints;

  void validate() const;
};

// +-5 cm along each axis then +-15 deg about each axis, 5 s per move.
std::vector<Segment> default_script();
demolog::CameraIntrinsics default_intrinsics();
// 60 s run with two episodes: long 0.5 s, shorts 1/29/31/59 s, long 59.5 s.
Scenario default_scenario();

// A six-joint arm in URDF, base "base_link", tip "tool0".
std::string_view builtin_arm_urdf();

// key=value lines plus repeatable "segment", "button" lines:
//   segment <dx> <dy> <dz> <rx> <ry> <rz> <duration_s>
//   button <t_s> short|long
// Relative chain_urdf paths resolve against base_dir.
Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir = {});

struct Output {
  demolog::LogFile log;    // noisy poses, tag detections, buttons, joints
  demolog::LogFile truth;  // noiseless poses, noiseless tag detections, buttons
  std::vector<demolog::Stamped<double>> widths;  // scripted gripper widths
};

// Deterministic in the scenario (including seed).
Output generate(const Scenario& scenario);

// Noise-free camera pose at time t from the scripted (world-space) motion.
geom::Pose scripted_pose(const Scenario& scenario, double t_s);

}  // namespace demoproc::synthgen
