#include "demoproc/gripper.hpp"

#include <Eigen/SVD>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <optional>
#include <string>

namespace demoproc::gripper {

using geom::Mat3;
using geom::Vec2;
using geom::Vec3;

void TagGeometry::validate() const {
  if (!(side_m > 0.0) || !std::isfinite(side_m)) {
    throw ConfigurationError("tag side length must be positive");
  }
  if (left_id == right_id) throw ConfigurationError("left and right tag ids must differ");
}

void GripperCalibration::validate() const {
  if (!std::isfinite(w_min_m) || !std::isfinite(w_max_m) || w_min_m < 0.0) {
    throw ConfigurationError("gripper calibration widths must be finite and non-negative");
  }
  if (!(w_max_m > w_min_m)) {
    throw ConfigurationError(
        fmt::format("gripper calibration requires w_max > w_min (got {} <= {})", w_max_m, w_min_m));
  }
}

double GripperCalibration::normalize(double width_m) const {
  return std::clamp((width_m - w_min_m) / (w_max_m - w_min_m), 0.0, 1.0);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view key, std::string_view value, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw FormatError(fmt::format("gripper config line {}: invalid value '{}' for {}", line, value,
                                  key));
  }
  return v;
}

}  // namespace

GripperConfig parse_gripper_config(std::string_view text) {
  std::map<std::string, std::pair<std::string, std::size_t>, std::less<>> kv;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw FormatError(fmt::format("gripper config line {}: expected key=value", line_no));
    }
    const std::string key(trim(line.substr(0, eq)));
    kv[key] = {std::string(trim(line.substr(eq + 1))), line_no};
  }

  static constexpr std::string_view kKeys[] = {"tag_side_m", "tag_id_left", "tag_id_right",
                                               "w_min_m", "w_max_m"};
  for (const auto& [key, value] : kv) {
    if (std::find(std::begin(kKeys), std::end(kKeys), key) == std::end(kKeys)) {
      throw FormatError(
          fmt::format("gripper config line {}: unknown key '{}'", value.second, key));
    }
  }
  auto get = [&](std::string_view key) -> const std::pair<std::string, std::size_t>& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(fmt::format("gripper config: missing key '{}'", key));
    return it->second;
  };

  GripperConfig c;
  const auto& side = get("tag_side_m");
  c.tags.side_m = parse_number<double>("tag_side_m", side.first, side.second);
  const auto& left = get("tag_id_left");
  c.tags.left_id = parse_number<std::uint32_t>("tag_id_left", left.first, left.second);
  const auto& right = get("tag_id_right");
  c.tags.right_id = parse_number<std::uint32_t>("tag_id_right", right.first, right.second);
  const auto& wmin = get("w_min_m");
  c.calibration.w_min_m = parse_number<double>("w_min_m", wmin.first, wmin.second);
  const auto& wmax = get("w_max_m");
  c.calibration.w_max_m = parse_number<double>("w_max_m", wmax.first, wmax.second);
  c.tags.validate();
  c.calibration.validate();
  return c;
}

std::string format_gripper_config(const GripperConfig& c) {
  return fmt::format("tag_side_m={:.17g}\ntag_id_left={}\ntag_id_right={}\nw_min_m={:.17g}\nw_max_m={:.17g}\n",
                     c.tags.side_m, c.tags.left_id, c.tags.right_id, c.calibration.w_min_m,
                     c.calibration.w_max_m);
}

Vec2 distort_normalized(const Vec2& xy, const std::array<double, 5>& d) {
  const double x = xy.x();
  const double y = xy.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + r2 * (d[0] + r2 * (d[1] + r2 * d[4]));
  return {x * radial + 2.0 * d[2] * x * y + d[3] * (r2 + 2.0 * x * x),
          y * radial + d[2] * (r2 + 2.0 * y * y) + 2.0 * d[3] * x * y};
}

Vec2 undistort_normalized(const Vec2& xy_distorted, const std::array<double, 5>& d) {
  if (std::all_of(d.begin(), d.end(), [](double c) { return c == 0.0; })) return xy_distorted;
  Vec2 xy = xy_distorted;
  for (int iter = 0; iter < 10; ++iter) {
    const double x = xy.x();
    const double y = xy.y();
    const double r2 = x * x + y * y;
    const double radial = 1.0 + r2 * (d[0] + r2 * (d[1] + r2 * d[4]));
    const Vec2 tangential{2.0 * d[2] * x * y + d[3] * (r2 + 2.0 * x * x),
                          d[2] * (r2 + 2.0 * y * y) + 2.0 * d[3] * x * y};
    const Vec2 next = (xy_distorted - tangential) / radial;
    const double step = (next - xy).norm();
    xy = next;
    if (step < 1e-10) break;
  }
  return xy;
}

Vec2 pixel_to_normalized(const Vec2& px, const demolog::CameraIntrinsics& intr) {
  return {(px.x() - intr.cx) / intr.fx, (px.y() - intr.cy) / intr.fy};
}

Vec2 project(const Vec3& p_cam, const demolog::CameraIntrinsics& intr) {
  const Vec2 xy = distort_normalized({p_cam.x() / p_cam.z(), p_cam.y() / p_cam.z()},
                                     intr.distortion);
  return {intr.fx * xy.x() + intr.cx, intr.fy * xy.y() + intr.cy};
}

std::array<Vec3, 4> tag_corners(double side_m) {
  const double h = 0.5 * side_m;
  return {Vec3{-h, -h, 0.0}, Vec3{h, -h, 0.0}, Vec3{h, h, 0.0}, Vec3{-h, h, 0.0}};
}

std::array<Vec2, 4> project_tag(const geom::Pose& tag_in_camera, double side_m,
                                const demolog::CameraIntrinsics& intr) {
  std::array<Vec2, 4> out;
  const auto corners = tag_corners(side_m);
  for (std::size_t i = 0; i < 4; ++i) out[i] = project(tag_in_camera.transform_point(corners[i]), intr);
  return out;
}

namespace {

constexpr int kRefineIterations = 20;

// Similarity transform moving the points to zero mean and mean distance sqrt(2).
Mat3 conditioning(const std::array<Vec2, 4>& pts) {
  Vec2 mean = Vec2::Zero();
  for (const auto& p : pts) mean += p;
  mean /= 4.0;
  double dist = 0.0;
  for (const auto& p : pts) dist += (p - mean).norm();
  dist /= 4.0;
  const double s = std::sqrt(2.0) / dist;
  Mat3 t;
  t << s, 0.0, -s * mean.x(), 0.0, s, -s * mean.y(), 0.0, 0.0, 1.0;
  return t;
}

Vec2 apply(const Mat3& t, const Vec2& p) { return (t * p.homogeneous()).hnormalized(); }

void require_non_degenerate(const std::array<Vec2, 4>& pts) {
  double scale = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (!pts[i].allFinite()) throw RankError("tag corners must be finite");
    for (std::size_t j = i + 1; j < 4; ++j) scale = std::max(scale, (pts[i] - pts[j]).norm());
  }
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = i + 1; j < 4; ++j) {
      if ((pts[i] - pts[j]).norm() <= 1e-12 * std::max(scale, 1e-300)) {
        throw RankError("tag corners are not pairwise distinct");
      }
    }
  }
  static constexpr int kTriples[4][3] = {{0, 1, 2}, {0, 1, 3}, {0, 2, 3}, {1, 2, 3}};
  for (const auto& tri : kTriples) {
    const Vec2 u = pts[tri[1]] - pts[tri[0]];
    const Vec2 v = pts[tri[2]] - pts[tri[0]];
    if (std::abs(u.x() * v.y() - u.y() * v.x()) <= 1e-9 * scale * scale) {
      throw RankError("tag corners are collinear; homography is rank deficient");
    }
  }
}

// Levenberg-Marquardt on the normalized-plane reprojection error, starting
// from the homography pose. Small tags leave the homography's perspective
// terms poorly conditioned, so the closed-form depth alone is noisy.
geom::Pose refine_pose(geom::Pose pose, const std::array<Vec3, 4>& model, const std::array<Vec2, 4>& image) {
  auto cost = [&](const geom::Pose& p) {
    double sum = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
      const Vec3 c = p.transform_point(model[i]);
      sum += (c.head<2>() / c.z() - image[i]).squaredNorm();
    }
    return sum;
  };
  double current = cost(pose);
  double lambda = 1e-3;
  for (int iter = 0; iter < kRefineIterations && current > 0.0; ++iter) {
    Eigen::Matrix<double, 8, 6> jac;
    Eigen::Matrix<double, 8, 1> res;
    for (std::size_t i = 0; i < 4; ++i) {
      const Vec3 rotated = pose.rotation.rotate(model[i]);
      const Vec3 c = rotated + pose.translation;
      const double iz = 1.0 / c.z();
      const auto row = static_cast<Eigen::Index>(2 * i);
      res.segment<2>(row) = c.head<2>() * iz - image[i];
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << iz, 0.0, -c.x() * iz * iz, 0.0, iz, -c.y() * iz * iz;
      // Rotation perturbation applied on the left: d(c) = -[R X]x w + dt.
      jac.block<2, 3>(row, 0) = -dproj * geom::skew(rotated);
      jac.block<2, 3>(row, 3) = dproj;
    }
    const Eigen::Matrix<double, 6, 6> h = jac.transpose() * jac;
    const Eigen::Matrix<double, 6, 1> g = jac.transpose() * res;
    bool improved = false;
    for (int attempt = 0; attempt < 10 && !improved; ++attempt) {
      Eigen::Matrix<double, 6, 6> damped = h;
      damped.diagonal() *= 1.0 + lambda;
      const Eigen::Matrix<double, 6, 1> step = -damped.ldlt().solve(g);
      const geom::Pose trial{geom::exp_rotation(step.head<3>()) * pose.rotation,
                             pose.translation + step.tail<3>()};
      const double c = trial.translation.z() > 0.0 ? cost(trial) : current;
      if (c < current) {
        pose = trial;
        current = c;
        lambda = std::max(lambda * 0.1, 1e-12);
        improved = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!improved) break;
  }
  return pose;
}

}  // namespace

geom::Pose estimate_tag_pose(const std::array<Vec2, 4>& corners,
                             const demolog::CameraIntrinsics& intr, double side_m) {
  intr.validate();
  if (!(side_m > 0.0)) throw ConfigurationError("tag side length must be positive");
  require_non_degenerate(corners);

  std::array<Vec2, 4> image;
  for (std::size_t i = 0; i < 4; ++i) {
    image[i] = undistort_normalized(pixel_to_normalized(corners[i], intr), intr.distortion);
  }
  require_non_degenerate(image);

  std::array<Vec2, 4> plane;
  const auto model = tag_corners(side_m);
  for (std::size_t i = 0; i < 4; ++i) plane[i] = model[i].head<2>();

  const Mat3 src_t = conditioning(plane);
  const Mat3 dst_t = conditioning(image);
  Eigen::Matrix<double, 8, 9> a;
  for (int i = 0; i < 4; ++i) {
    const Vec2 s = apply(src_t, plane[i]);
    const Vec2 d = apply(dst_t, image[i]);
    a.row(2 * i) << -s.x(), -s.y(), -1.0, 0.0, 0.0, 0.0, d.x() * s.x(), d.x() * s.y(), d.x();
    a.row(2 * i + 1) << 0.0, 0.0, 0.0, -s.x(), -s.y(), -1.0, d.y() * s.x(), d.y() * s.y(), d.y();
  }
  Eigen::JacobiSVD<Eigen::Matrix<double, 8, 9>> svd(a, Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (sv(7) <= 1e-12 * sv(0)) throw RankError("homography system is rank deficient");
  const Eigen::Matrix<double, 9, 1> h = svd.matrixV().col(8);
  Mat3 hn;
  hn << h(0), h(1), h(2), h(3), h(4), h(5), h(6), h(7), h(8);
  const Mat3 hom = dst_t.inverse() * hn * src_t;

  Vec3 r1 = hom.col(0);
  Vec3 r2 = hom.col(1);
  const double n1 = r1.norm();
  const double n2 = r2.norm();
  if (!(n1 > 0.0 && n2 > 0.0)) throw RankError("degenerate homography columns");
  Vec3 t = hom.col(2) * (2.0 / (n1 + n2));
  r1 /= n1;
  r2 /= n2;
  if (t.z() < 0.0) {
    r1 = -r1;
    r2 = -r2;
    t = -t;
  }
  Mat3 r;
  r << r1, r2, r1.cross(r2);
  if (!(t.z() > 0.0)) throw BehindCameraError("tag pose has no positive-depth solution");
  const auto rot = geom::Rotation::from_matrix(r);
  const geom::Pose pose = refine_pose({rot, t}, model, image);
  if (!(pose.rotation.matrix().col(2).dot(pose.translation) > 0.0)) {
    throw BehindCameraError("tag is seen from behind (corner winding is reversed)");
  }

  for (const auto& c : model) {
    if (!(pose.transform_point(c).z() > 0.0)) {
      throw BehindCameraError("tag corners lie behind the camera");
    }
  }
  return pose;
}

double gripper_width(const geom::Pose& left, const geom::Pose& right) {
  return (left.translation - right.translation).norm();
}

GripperStream gripper_state_stream(
    std::span<const demolog::Stamped<demolog::TagDetection>> detections,
    const demolog::CameraIntrinsics& intr, const TagGeometry& tags,
    const GripperCalibration& calibration, const GripperOptions& options) {
  calibration.validate();
  tags.validate();
  intr.validate();

  std::vector<demolog::Stamped<demolog::TagDetection>> sorted(detections.begin(), detections.end());
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& x, const auto& y) {
    return x.timestamp_ns < y.timestamp_ns;
  });

  GripperStream out;
  for (std::size_t i = 0; i < sorted.size();) {
    const std::uint64_t t = sorted[i].timestamp_ns;
    const demolog::TagDetection* left = nullptr;
    const demolog::TagDetection* right = nullptr;
    for (; i < sorted.size() && sorted[i].timestamp_ns == t; ++i) {
      const auto& d = sorted[i].value;
      if (d.tag_id == tags.left_id && !left) left = &d;
      if (d.tag_id == tags.right_id && !right) right = &d;
    }
    if (!left || !right) {
      ++out.missing_frames;
      continue;
    }
    try {
      const auto lp = estimate_tag_pose(left->corners, intr, tags.side_m);
      const auto rp = estimate_tag_pose(right->corners, intr, tags.side_m);
      const double w = gripper_width(lp, rp);
      out.samples.push_back({t, w, calibration.normalize(w)});
    } catch (const Error& e) {
      ++out.failed_frames;
      out.warnings.push_back(fmt::format("frame at {} ns skipped: {}", t, e.what()));
    }
  }
  if (out.missing_frames > 0) {
    out.warnings.push_back(
        fmt::format("{} frame(s) without both gripper tags skipped", out.missing_frames));
  }

  if (options.median_smoothing && out.samples.size() > 1) {
    std::vector<double> raw;
    raw.reserve(out.samples.size());
    for (const auto& s : out.samples) raw.push_back(s.width_m);
    const std::ptrdiff_t n = static_cast<std::ptrdiff_t>(raw.size());
    for (std::ptrdiff_t k = 0; k < n; ++k) {
      const std::ptrdiff_t lo = std::max<std::ptrdiff_t>(0, k - 2);
      const std::ptrdiff_t hi = std::min<std::ptrdiff_t>(n, k + 3);
      std::vector<double> win(raw.begin() + lo, raw.begin() + hi);
      std::sort(win.begin(), win.end());
      const std::size_t m = win.size();
      const double med = m % 2 ? win[m / 2] : 0.5 * (win[m / 2 - 1] + win[m / 2]);
      out.samples[static_cast<std::size_t>(k)].width_m = med;
      out.samples[static_cast<std::size_t>(k)].state = calibration.normalize(med);
    }
  }
  return out;
}

}  // namespace demoproc::gripper
