#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "demoproc/demolog.hpp"
#include "demoproc/error.hpp"
#include "demoproc/geom.hpp"

namespace demoproc::calib {

// A: relative end-effector motion between two stations.
// B: relative camera motion between the same two stations.
// A solution X satisfies A X = X B.
struct MotionPair {
  geom::Pose a;
  geom::Pose b;
};

inline constexpr double kOutlierAngleGap = 0.1;      // rad, |angle(A) - angle(B)|
inline constexpr double kMinAxisSeparation = 1e-3;   // rad

struct PairResidual {
  double rotation_rad = 0.0;     // angle of (A X)^-1 (X B)
  double translation_m = 0.0;    // translation norm of the same
  bool outlier = false;
};

struct HandEyeResult {
  geom::Pose x;
  std::vector<PairResidual> residuals;  // one per input pair
  std::size_t used_pairs = 0;
  Warnings warnings;
};

// Closed-form two-stage solve: rotation from the log vectors of R_A and R_B
// (orthogonal Procrustes on alpha_i = R_X beta_i), then translation from the
// stacked system (R_A - I) t_X = R_X t_B - t_A.
HandEyeResult solve_hand_eye(std::span<const MotionPair> pairs);

// Consecutive-station pairs from absolute end-effector and camera poses.
std::vector<MotionPair> motion_pairs_from_stations(std::span<const geom::Pose> ee_poses,
                                                   std::span<const geom::Pose> cam_poses);

// 14 floats per line (A then B, each tx ty tz qx qy qz qw), comma or
// whitespace separated, '#' comments.
std::vector<MotionPair> parse_motion_pairs(std::string_view text);
std::string format_motion_pairs(std::span<const MotionPair> pairs);

enum class AlignMode { None, Rigid, Similarity };

AlignMode parse_align_mode(std::string_view name);  // none | se3 | sim3
std::string_view align_mode_name(AlignMode mode);

struct AlignmentResult {
  geom::Rotation rotation;
  geom::Vec3 translation = geom::Vec3::Zero();
  double scale = 1.0;
  double residual_rmse = 0.0;  // meters, over the input points

  geom::Vec3 apply(const geom::Vec3& p) const { return rotation.rotate(scale * p) + translation; }
};

// Least-squares (s, R, t) minimizing sum |ref_i - (s R est_i + t)|^2.
AlignmentResult umeyama_align(std::span<const geom::Vec3> est, std::span<const geom::Vec3> ref,
                              AlignMode mode);

std::vector<demolog::PoseSample> apply_alignment(std::span<const demolog::PoseSample> traj,
                                                 const AlignmentResult& alignment);

}  // namespace demoproc::calib
