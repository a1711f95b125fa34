#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "demoproc/demolog.hpp"
#include "demoproc/error.hpp"
#include "demoproc/geom.hpp"

namespace demoproc::gripper {

struct TagGeometry {
  double side_m = 0.015;
  std::uint32_t left_id = 0;
  std::uint32_t right_id = 1;

  void validate() const;
};

// Tag-center distances at the fully closed and fully open positions.
struct GripperCalibration {
  double w_min_m = 0.0;
  double w_max_m = 0.0;

  void validate() const;
  // Linear map of width onto [0, 1], clamped.
  double normalize(double width_m) const;
};

struct GripperConfig {
  TagGeometry tags;
  GripperCalibration calibration;
};

// key=value text with tag_side_m, tag_id_left, tag_id_right, w_min_m, w_max_m.
// '#' starts a comment. Missing or unknown keys are FormatErrors; invalid
// values are ConfigurationErrors.
GripperConfig parse_gripper_config(std::string_view text);
std::string format_gripper_config(const GripperConfig& config);

struct GripperStateSample {
  std::uint64_t timestamp_ns = 0;
  double width_m = 0.0;
  double state = 0.0;
};

// Pixel <-> normalized image coordinates under the 5-coefficient
// (k1 k2 p1 p2 k3) radial/tangential model.
geom::Vec2 distort_normalized(const geom::Vec2& xy, const std::array<double, 5>& d);
// Fixed-point inverse of distort_normalized: 10 iterations, stops early at 1e-10.
geom::Vec2 undistort_normalized(const geom::Vec2& xy_distorted, const std::array<double, 5>& d);
geom::Vec2 pixel_to_normalized(const geom::Vec2& px, const demolog::CameraIntrinsics& intr);
geom::Vec2 project(const geom::Vec3& p_cam, const demolog::CameraIntrinsics& intr);

// Tag corners in the tag's own frame (z = 0 plane), TL TR BR BL.
std::array<geom::Vec3, 4> tag_corners(double side_m);
std::array<geom::Vec2, 4> project_tag(const geom::Pose& tag_in_camera, double side_m,
                                      const demolog::CameraIntrinsics& intr);

// Planar pose of a square tag in the camera frame from its four corners.
// Throws RankError for degenerate corner sets and BehindCameraError when no
// positive-depth solution exists.
geom::Pose estimate_tag_pose(const std::array<geom::Vec2, 4>& corners,
                             const demolog::CameraIntrinsics& intr, double side_m);

// Distance between the two tag centers.
double gripper_width(const geom::Pose& left, const geom::Pose& right);

struct GripperStream {
  std::vector<GripperStateSample> samples;
  std::size_t missing_frames = 0;  // frames lacking one of the two tags
  std::size_t failed_frames = 0;   // frames whose pose estimate failed
  Warnings warnings;
};

struct GripperOptions {
  bool median_smoothing = false;  // moving median, window 5
};

// Detections sharing a timestamp form one frame.
GripperStream gripper_state_stream(std::span<const demolog::Stamped<demolog::TagDetection>> detections,
                                   const demolog::CameraIntrinsics& intr, const TagGeometry& tags,
                                   const GripperCalibration& calibration,
                                   const GripperOptions& options = {});

}  // namespace demoproc::gripper
