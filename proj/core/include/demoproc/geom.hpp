#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace demoproc::geom {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

/**
 * Unit quaternion rotation stored as (qx, qy, qz, qw).
 *
 * Every constructor renormalizes. A quaternion that is already unit to
 * within a few ulps is kept bit-for-bit, so values survive serialization
 * round trips unchanged. Equality accepts both q and -q.
 */
class Rotation {
 public:
  Rotation() = default;

  // Throws PreconditionError for a zero or non-finite quaternion.
  static Rotation from_quaternion(double qx, double qy, double qz, double qw);
  static Rotation from_quaternion(const Eigen::Quaterniond& q);
  // Projects onto SO(3) first, so slightly non-orthogonal input is accepted.
  static Rotation from_matrix(const Mat3& m);
  static Rotation from_axis_angle(const Vec3& axis, double angle);
  static Rotation from_rotation_vector(const Vec3& rotvec);
  // Fixed-axis XYZ: roll about x, then pitch about y, then yaw about z.
  static Rotation from_rpy(double roll, double pitch, double yaw);

  static Rotation rx(double angle) { return from_axis_angle(Vec3::UnitX(), angle); }
  static Rotation ry(double angle) { return from_axis_angle(Vec3::UnitY(), angle); }
  static Rotation rz(double angle) { return from_axis_angle(Vec3::UnitZ(), angle); }

  double x() const { return q_.x(); }
  double y() const { return q_.y(); }
  double z() const { return q_.z(); }
  double w() const { return q_.w(); }

  const Eigen::Quaterniond& quaternion() const { return q_; }
  Mat3 matrix() const { return q_.toRotationMatrix(); }

  Rotation operator*(const Rotation& other) const;
  Rotation inverse() const;
  Vec3 rotate(const Vec3& v) const { return q_ * v; }

  // Exact coefficient equality up to the double-cover sign.
  bool operator==(const Rotation& other) const;
  // Tolerance is on the angle of the relative rotation.
  bool is_approx(const Rotation& other, double angle_tol) const;

 private:
  explicit Rotation(const Eigen::Quaterniond& unit) : q_(unit) {}

  Eigen::Quaterniond q_{Eigen::Quaterniond::Identity()};
};

// Angle of the axis-angle representation, in [0, pi].
double rotation_angle(const Rotation& r);

struct Pose {
  Rotation rotation;
  Vec3 translation = Vec3::Zero();

  static Pose identity() { return {}; }
  static Pose from_translation(const Vec3& t) { return {Rotation{}, t}; }
  static Pose from_matrix(const Mat4& m);

  Mat4 matrix() const;
  Vec3 transform_point(const Vec3& p) const { return rotation.rotate(p) + translation; }

  bool operator==(const Pose& other) const {
    return rotation == other.rotation && translation == other.translation;
  }
};

// a then b applied in the frame of a, i.e. the homogeneous product a*b.
Pose compose(const Pose& a, const Pose& b);
Pose inverse(const Pose& p);
// inverse(a) * b
Pose relative(const Pose& a, const Pose& b);
// Slerp (shortest arc) on rotation, lerp on translation. s must be in [0, 1].
Pose interpolate(const Pose& a, const Pose& b, double s);

inline Pose operator*(const Pose& a, const Pose& b) { return compose(a, b); }

// Rotation angle of relative(a, b) and norm of its translation.
double rotation_distance(const Pose& a, const Pose& b);
double translation_distance(const Pose& a, const Pose& b);
bool is_approx(const Pose& a, const Pose& b, double tol);

struct Twist {
  Vec3 rotation = Vec3::Zero();     // rotation vector, radians
  Vec3 translation = Vec3::Zero();  // meters
};

// SO(3) logarithm. Throws SingularityError within 1e-6 rad of pi.
Vec3 log(const Rotation& r);
Rotation exp_rotation(const Vec3& rotvec);

// SE(3) logarithm and exponential. log has the same domain as the SO(3) log.
Twist log(const Pose& p);
Pose exp(const Twist& t);

Mat3 skew(const Vec3& v);

}  // namespace demoproc::geom
