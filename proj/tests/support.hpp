#pragma once

// Shared test helpers: random generators and an independent homogeneous-matrix
// oracle that never calls into the geometry module's composition code.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "demoproc/demolog.hpp"
#include "demoproc/geom.hpp"

namespace testing_support {

using demoproc::geom::Pose;
using demoproc::geom::Rotation;
using demoproc::geom::Vec3;
using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;

// Rotation matrix from (qx, qy, qz, qw), written out from the textbook formula.
inline Mat3 quat_to_matrix(double x, double y, double z, double w) {
  const double n = std::sqrt(x * x + y * y + z * z + w * w);
  x /= n;
  y /= n;
  z /= n;
  w /= n;
  Mat3 m;
  m << 1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w),
      2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w),
      2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y);
  return m;
}

// Rodrigues' formula.
inline Mat3 axis_angle_matrix(Vec3 axis, double angle) {
  axis.normalize();
  Mat3 k;
  k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  return Mat3::Identity() + std::sin(angle) * k + (1 - std::cos(angle)) * k * k;
}

inline Mat4 homogeneous(const Mat3& r, const Vec3& t) {
  Mat4 m = Mat4::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

inline Mat4 oracle_matrix(const Pose& p) {
  const auto& r = p.rotation;
  return homogeneous(quat_to_matrix(r.x(), r.y(), r.z(), r.w()), p.translation);
}

// Closed-form rigid inverse [R^T, -R^T t].
inline Mat4 rigid_inverse(const Mat4& m) {
  const Mat3 rt = m.topLeftCorner<3, 3>().transpose();
  return homogeneous(rt, -rt * m.topRightCorner<3, 1>());
}

inline double matrix_angle(const Mat3& r) {
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

inline double max_abs_diff(const Mat4& a, const Mat4& b) { return (a - b).cwiseAbs().maxCoeff(); }

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double sigma) { return std::normal_distribution<double>(0.0, sigma)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  std::uint64_t u64() { return rng_(); }

  Vec3 vec(double scale = 1.0) { return {uniform(-scale, scale), uniform(-scale, scale), uniform(-scale, scale)}; }
  Vec3 unit() {
    Vec3 v;
    do {
      v = {normal(1.0), normal(1.0), normal(1.0)};
    } while (v.norm() < 1e-6);
    return v.normalized();
  }
  Rotation rotation(double max_angle = 3.14159) {
    return Rotation::from_axis_angle(unit(), uniform(0.0, max_angle));
  }
  Pose pose(double trans_scale = 2.0, double max_angle = 3.14159) {
    return {rotation(max_angle), vec(trans_scale)};
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Random-walk trajectory with monotone timestamps.
inline std::vector<demoproc::demolog::PoseSample> random_trajectory(Gen& g, std::size_t n,
                                                                    std::uint64_t dt_ns = 33'333'333) {
  std::vector<demoproc::demolog::PoseSample> out;
  Pose p = g.pose();
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back({i * dt_ns, p});
    p = demoproc::geom::compose(p, g.pose(0.05, 0.1));
  }
  return out;
}

// Random container log covering every channel; timestamps non-decreasing.
inline demoproc::demolog::LogFile random_log(Gen& g, std::size_t max_records = 40) {
  namespace dl = demoproc::demolog;
  dl::LogFile log;
  std::uint64_t t = g.u64() % 1000;
  const std::size_t n = static_cast<std::size_t>(g.integer(0, static_cast<int>(max_records)));
  for (std::size_t i = 0; i < n; ++i) {
    t += static_cast<std::uint64_t>(g.integer(0, 50'000'000));
    dl::Record r;
    r.timestamp_ns = t;
    switch (g.integer(0, 6)) {
      case 0:
        r.payload = dl::ButtonEvent{g.integer(0, 1) ? dl::ButtonKind::LongPress : dl::ButtonKind::ShortPress};
        break;
      case 1:
        r.payload = dl::ImuSample{g.vec(20.0), g.vec(5.0)};
        break;
      case 2: {
        dl::JointState js;
        for (int k = g.integer(0, 8); k > 0; --k) js.positions.push_back(g.uniform(-4, 4));
        r.payload = js;
        break;
      }
      case 3: {
        dl::TagDetection d;
        d.tag_id = static_cast<std::uint32_t>(g.u64());
        for (auto& c : d.corners) c = {g.uniform(0, 1280), g.uniform(0, 720)};
        r.payload = d;
        break;
      }
      case 4:
        r.payload = g.pose(10.0);
        break;
      case 5: {
        dl::CameraIntrinsics c;
        c.fx = g.uniform(100, 1000);
        c.fy = g.uniform(100, 1000);
        c.cx = g.uniform(0, 640);
        c.cy = g.uniform(0, 360);
        c.width = static_cast<std::uint32_t>(g.integer(1, 4000));
        c.height = static_cast<std::uint32_t>(g.integer(1, 4000));
        for (auto& d : c.distortion) d = g.normal(0.1);
        c.baseline_m = g.uniform(0, 0.2);
        r.payload = c;
        break;
      }
      default: {
        dl::FrameMeta f;
        f.frame_index = g.u64();
        for (int k = g.integer(0, 24); k > 0; --k) f.path.push_back(static_cast<char>(g.integer('a', 'z')));
        f.path += "/\xc3\xa9.png";
        r.payload = f;
        break;
      }
    }
    log.records.push_back(std::move(r));
  }
  return log;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("demoproc_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace testing_support
