#include "demoproc/geom.hpp"

#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <numbers>

#include "demoproc/error.hpp"

namespace demoproc::geom {
namespace {

constexpr double kUnitSlack = 4.0 * std::numeric_limits<double>::epsilon();
constexpr double kSmallAngle = 1e-8;
// Below this angle the Jacobian coefficients use their Taylor series.
constexpr double kSeriesAngle = 2e-2;
constexpr double kLogSingularityMargin = 1e-6;

Eigen::Quaterniond normalized_or_throw(const Eigen::Quaterniond& q) {
  const double n2 = q.squaredNorm();
  if (!std::isfinite(n2) || n2 <= 0.0) {
    throw PreconditionError("quaternion must be finite and non-zero");
  }
  if (std::abs(n2 - 1.0) <= kUnitSlack) return q;
  const double n = std::sqrt(n2);
  return Eigen::Quaterniond(q.w() / n, q.x() / n, q.y() / n, q.z() / n);
}

}  // namespace

Rotation Rotation::from_quaternion(double qx, double qy, double qz, double qw) {
  return Rotation(normalized_or_throw(Eigen::Quaterniond(qw, qx, qy, qz)));
}

Rotation Rotation::from_quaternion(const Eigen::Quaterniond& q) {
  return Rotation(normalized_or_throw(q));
}

Rotation Rotation::from_matrix(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 r = svd.matrixU() * d * svd.matrixV().transpose();
  return Rotation(normalized_or_throw(Eigen::Quaterniond(r)));
}

Rotation Rotation::from_axis_angle(const Vec3& axis, double angle) {
  const double n = axis.norm();
  if (!(n > 0.0) || !std::isfinite(n)) {
    throw PreconditionError("rotation axis must be finite and non-zero");
  }
  return from_rotation_vector(axis / n * angle);
}

Rotation Rotation::from_rotation_vector(const Vec3& rotvec) { return exp_rotation(rotvec); }

Rotation Rotation::from_rpy(double roll, double pitch, double yaw) {
  return rz(yaw) * ry(pitch) * rx(roll);
}

Rotation Rotation::operator*(const Rotation& other) const {
  return Rotation(normalized_or_throw(q_ * other.q_));
}

Rotation Rotation::inverse() const { return Rotation(q_.conjugate()); }

bool Rotation::operator==(const Rotation& other) const {
  return q_.coeffs() == other.q_.coeffs() || q_.coeffs() == -other.q_.coeffs();
}

bool Rotation::is_approx(const Rotation& other, double angle_tol) const {
  return rotation_angle(inverse() * other) <= angle_tol;
}

double rotation_angle(const Rotation& r) {
  const double v = r.quaternion().vec().norm();
  return 2.0 * std::atan2(v, std::abs(r.w()));
}

Pose Pose::from_matrix(const Mat4& m) {
  return {Rotation::from_matrix(m.topLeftCorner<3, 3>()), m.topRightCorner<3, 1>()};
}

Mat4 Pose::matrix() const {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = rotation.matrix();
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Pose compose(const Pose& a, const Pose& b) {
  return {a.rotation * b.rotation, a.translation + a.rotation.rotate(b.translation)};
}

Pose inverse(const Pose& p) {
  const Rotation inv = p.rotation.inverse();
  return {inv, -inv.rotate(p.translation)};
}

Pose relative(const Pose& a, const Pose& b) {
  const Rotation inv = a.rotation.inverse();
  return {inv * b.rotation, inv.rotate(b.translation - a.translation)};
}

Pose interpolate(const Pose& a, const Pose& b, double s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    throw PreconditionError("interpolation fraction outside [0, 1]");
  }
  if (s == 0.0) return a;
  if (s == 1.0) return b;

  const Eigen::Quaterniond& qa = a.rotation.quaternion();
  Eigen::Quaterniond qb = b.rotation.quaternion();
  double dot = qa.coeffs().dot(qb.coeffs());
  if (dot < 0.0) {
    qb.coeffs() = -qb.coeffs();
    dot = -dot;
  }

  Eigen::Quaterniond q;
  if (dot > 1.0 - 1e-12) {
    q.coeffs() = (1.0 - s) * qa.coeffs() + s * qb.coeffs();
  } else {
    const double theta = std::acos(std::min(dot, 1.0));
    const double sin_theta = std::sin(theta);
    const double wa = std::sin((1.0 - s) * theta) / sin_theta;
    const double wb = std::sin(s * theta) / sin_theta;
    q.coeffs() = wa * qa.coeffs() + wb * qb.coeffs();
  }
  return {Rotation::from_quaternion(q), (1.0 - s) * a.translation + s * b.translation};
}

double rotation_distance(const Pose& a, const Pose& b) {
  return rotation_angle(a.rotation.inverse() * b.rotation);
}

double translation_distance(const Pose& a, const Pose& b) {
  return relative(a, b).translation.norm();
}

bool is_approx(const Pose& a, const Pose& b, double tol) {
  return rotation_distance(a, b) <= tol && (a.translation - b.translation).norm() <= tol;
}

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

Vec3 log(const Rotation& r) {
  Eigen::Quaterniond q = r.quaternion();
  if (q.w() < 0.0) q.coeffs() = -q.coeffs();
  const double vn = q.vec().norm();
  const double angle = 2.0 * std::atan2(vn, q.w());
  if (angle >= std::numbers::pi - kLogSingularityMargin) {
    throw SingularityError("rotation logarithm undefined at angle near pi");
  }
  if (vn < kSmallAngle) {
    // 2 atan(v / w) / v to third order.
    const double ratio = vn / q.w();
    return q.vec() * (2.0 / q.w()) * (1.0 - ratio * ratio / 3.0);
  }
  return q.vec() * (angle / vn);
}

Rotation exp_rotation(const Vec3& rotvec) {
  const double angle = rotvec.norm();
  if (!std::isfinite(angle)) throw PreconditionError("rotation vector must be finite");
  if (angle < kSmallAngle) {
    Eigen::Quaterniond q(1.0 - angle * angle / 8.0, 0.5 * rotvec.x(), 0.5 * rotvec.y(),
                         0.5 * rotvec.z());
    return Rotation::from_quaternion(q);
  }
  const double half = 0.5 * angle;
  const Vec3 v = rotvec * (std::sin(half) / angle);
  return Rotation::from_quaternion(Eigen::Quaterniond(std::cos(half), v.x(), v.y(), v.z()));
}

namespace {

// Left Jacobian V of SO(3) and its inverse, used to map between the
// translational twist part and the pose translation.
Mat3 left_jacobian(const Vec3& w) {
  const double theta = w.norm();
  const double t2 = theta * theta;
  const Mat3 W = skew(w);
  double a;
  double b;
  if (theta < kSeriesAngle) {
    a = 0.5 - t2 / 24.0 + t2 * t2 / 720.0;
    b = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0;
  } else {
    const double s = std::sin(0.5 * theta);
    a = 2.0 * s * s / t2;
    b = (theta - std::sin(theta)) / (t2 * theta);
  }
  return Mat3::Identity() + a * W + b * W * W;
}

Mat3 left_jacobian_inverse(const Vec3& w) {
  const double theta = w.norm();
  const double t2 = theta * theta;
  const Mat3 W = skew(w);
  double c;
  if (theta < kSeriesAngle) {
    c = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
  } else {
    const double half = 0.5 * theta;
    c = (1.0 - half * std::cos(half) / std::sin(half)) / t2;
  }
  return Mat3::Identity() - 0.5 * W + c * W * W;
}

}  // namespace

Twist log(const Pose& p) {
  const Vec3 w = log(p.rotation);
  return {w, left_jacobian_inverse(w) * p.translation};
}

Pose exp(const Twist& t) {
  return {exp_rotation(t.rotation), left_jacobian(t.rotation) * t.translation};
}

}  // namespace demoproc::geom
