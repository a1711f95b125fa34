#include "demoproc/calib.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <fmt/format.h>

#include <charconv>
#include <cmath>
#include <sstream>

namespace demoproc::calib {

using geom::Mat3;
using geom::Vec3;

namespace {

PairResidual residual_of(const MotionPair& p, const geom::Pose& x) {
  const geom::Pose e = geom::relative(geom::compose(p.a, x), geom::compose(x, p.b));
  return {geom::rotation_angle(e.rotation), e.translation.norm(), false};
}

}  // namespace

HandEyeResult solve_hand_eye(std::span<const MotionPair> pairs) {
  HandEyeResult out;
  out.residuals.resize(pairs.size());

  std::vector<std::size_t> usable;
  std::vector<Vec3> alpha;
  std::vector<Vec3> beta;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double angle_a = geom::rotation_angle(pairs[i].a.rotation);
    const double angle_b = geom::rotation_angle(pairs[i].b.rotation);
    if (std::abs(angle_a - angle_b) >= kOutlierAngleGap) {
      out.residuals[i].outlier = true;
      out.warnings.push_back(fmt::format(
          "pair {} excluded as outlier: rotation angles differ by {:.4f} rad", i,
          std::abs(angle_a - angle_b)));
      continue;
    }
    try {
      alpha.push_back(geom::log(pairs[i].a.rotation));
      beta.push_back(geom::log(pairs[i].b.rotation));
    } catch (const SingularityError&) {
      out.residuals[i].outlier = true;
      out.warnings.push_back(fmt::format("pair {} excluded: rotation angle too close to pi", i));
      continue;
    }
    usable.push_back(i);
  }
  if (usable.size() < 2) {
    throw InsufficientDataError(
        fmt::format("hand-eye calibration needs at least 2 usable motion pairs, got {}",
                    usable.size()));
  }

  // Rotation axes must span more than one direction.
  double max_separation = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    if (alpha[i].norm() < 1e-9) continue;
    for (std::size_t j = i + 1; j < alpha.size(); ++j) {
      if (alpha[j].norm() < 1e-9) continue;
      const Vec3 u = alpha[i].normalized();
      const Vec3 v = alpha[j].normalized();
      max_separation = std::max(max_separation, std::atan2(u.cross(v).norm(), std::abs(u.dot(v))));
    }
  }
  if (max_separation <= kMinAxisSeparation) {
    throw DegenerateError(
        "degenerate motion: all motion-pair rotation axes are parallel (need rotations about at "
        "least two non-parallel axes)");
  }

  Mat3 h = Mat3::Zero();
  for (std::size_t k = 0; k < alpha.size(); ++k) h += beta[k] * alpha[k].transpose();
  Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 d = Mat3::Identity();
  if ((svd.matrixV() * svd.matrixU().transpose()).determinant() < 0.0) d(2, 2) = -1.0;
  const Mat3 rx = svd.matrixV() * d * svd.matrixU().transpose();
  const auto rot_x = geom::Rotation::from_matrix(rx);

  Eigen::MatrixXd c(3 * usable.size(), 3);
  Eigen::VectorXd rhs(3 * usable.size());
  for (std::size_t k = 0; k < usable.size(); ++k) {
    const auto& p = pairs[usable[k]];
    c.block<3, 3>(3 * static_cast<Eigen::Index>(k), 0) = p.a.rotation.matrix() - Mat3::Identity();
    rhs.segment<3>(3 * static_cast<Eigen::Index>(k)) =
        rot_x.rotate(p.b.translation) - p.a.translation;
  }
  const auto qr = c.colPivHouseholderQr();
  if (qr.rank() < 3) throw DegenerateError("degenerate motion: translation system is rank deficient");
  const Vec3 tx = qr.solve(rhs);

  out.x = {rot_x, tx};
  out.used_pairs = usable.size();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const bool outlier = out.residuals[i].outlier;
    out.residuals[i] = residual_of(pairs[i], out.x);
    out.residuals[i].outlier = outlier;
  }
  return out;
}

std::vector<MotionPair> motion_pairs_from_stations(std::span<const geom::Pose> ee_poses,
                                                   std::span<const geom::Pose> cam_poses) {
  if (ee_poses.size() != cam_poses.size()) {
    throw PreconditionError("station lists must have equal length");
  }
  std::vector<MotionPair> out;
  for (std::size_t i = 0; i + 1 < ee_poses.size(); ++i) {
    out.push_back({geom::relative(ee_poses[i], ee_poses[i + 1]),
                   geom::relative(cam_poses[i], cam_poses[i + 1])});
  }
  return out;
}

std::vector<MotionPair> parse_motion_pairs(std::string_view text) {
  std::vector<MotionPair> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string line(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    for (char& ch : line) {
      if (ch == ',' || ch == '\r' || ch == '\t') ch = ' ';
    }
    std::istringstream in(line);
    std::vector<double> v;
    std::string tok;
    while (in >> tok) {
      if (v.empty() && tok.front() == '#') break;
      double d = 0.0;
      auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), d);
      if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(d)) {
        throw FormatError(fmt::format("motion pairs line {}: invalid number '{}'", line_no, tok));
      }
      v.push_back(d);
    }
    if (v.empty()) continue;
    if (v.size() != 14) {
      throw FormatError(
          fmt::format("motion pairs line {}: expected 14 values, found {}", line_no, v.size()));
    }
    auto pose_at = [&](std::size_t o) {
      if (v[o + 3] == 0.0 && v[o + 4] == 0.0 && v[o + 5] == 0.0 && v[o + 6] == 0.0) {
        throw FormatError(fmt::format("motion pairs line {}: zero quaternion", line_no));
      }
      return geom::Pose{geom::Rotation::from_quaternion(v[o + 3], v[o + 4], v[o + 5], v[o + 6]),
                        {v[o], v[o + 1], v[o + 2]}};
    };
    out.push_back({pose_at(0), pose_at(7)});
  }
  return out;
}

std::string format_motion_pairs(std::span<const MotionPair> pairs) {
  std::string out = "# A: tx ty tz qx qy qz qw, B: tx ty tz qx qy qz qw\n";
  auto put = [&](const geom::Pose& p) {
    fmt::format_to(std::back_inserter(out), "{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}",
                   p.translation.x(), p.translation.y(), p.translation.z(), p.rotation.x(),
                   p.rotation.y(), p.rotation.z(), p.rotation.w());
  };
  for (const auto& p : pairs) {
    put(p.a);
    out += ',';
    put(p.b);
    out += '\n';
  }
  return out;
}

AlignMode parse_align_mode(std::string_view name) {
  if (name == "none") return AlignMode::None;
  if (name == "se3" || name == "rigid") return AlignMode::Rigid;
  if (name == "sim3" || name == "similarity") return AlignMode::Similarity;
  throw PreconditionError(fmt::format("unknown alignment mode '{}' (none, se3, sim3)", name));
}

std::string_view align_mode_name(AlignMode mode) {
  switch (mode) {
    case AlignMode::None: return "none";
    case AlignMode::Rigid: return "se3";
    case AlignMode::Similarity: return "sim3";
  }
  return "none";
}

namespace {

double alignment_rmse(std::span<const Vec3> est, std::span<const Vec3> ref,
                      const AlignmentResult& a) {
  double sum = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) sum += (ref[i] - a.apply(est[i])).squaredNorm();
  return std::sqrt(sum / static_cast<double>(est.size()));
}

}  // namespace

AlignmentResult umeyama_align(std::span<const Vec3> est, std::span<const Vec3> ref,
                              AlignMode mode) {
  if (est.size() != ref.size()) {
    throw PreconditionError(
        fmt::format("alignment needs equal point counts ({} vs {})", est.size(), ref.size()));
  }
  if (est.size() < 3) {
    throw InsufficientDataError(
        fmt::format("alignment needs at least 3 points, got {}", est.size()));
  }
  AlignmentResult out;
  if (mode == AlignMode::None) {
    out.residual_rmse = alignment_rmse(est, ref, out);
    return out;
  }

  const double n = static_cast<double>(est.size());
  Vec3 mean_e = Vec3::Zero();
  Vec3 mean_r = Vec3::Zero();
  for (std::size_t i = 0; i < est.size(); ++i) {
    mean_e += est[i];
    mean_r += ref[i];
  }
  mean_e /= n;
  mean_r /= n;

  Mat3 cov = Mat3::Zero();
  Mat3 spread = Mat3::Zero();
  double var_e = 0.0;
  for (std::size_t i = 0; i < est.size(); ++i) {
    const Vec3 de = est[i] - mean_e;
    cov += (ref[i] - mean_r) * de.transpose();
    spread += de * de.transpose();
    var_e += de.squaredNorm();
  }
  cov /= n;
  spread /= n;
  var_e /= n;

  const Eigen::JacobiSVD<Mat3> spread_svd(spread);
  const auto& sv_spread = spread_svd.singularValues();
  if (!(sv_spread(0) > 0.0) || sv_spread(1) <= 1e-12 * sv_spread(0)) {
    throw RankError("alignment points are collinear or coincident; rotation is undetermined");
  }
  Eigen::JacobiSVD<Mat3> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0) || sv(1) <= 1e-12 * sv(0)) {
    throw RankError("alignment cross-covariance is rank deficient");
  }
  Mat3 s = Mat3::Identity();
  if (svd.matrixU().determinant() * svd.matrixV().determinant() < 0.0) s(2, 2) = -1.0;
  const Mat3 r = svd.matrixU() * s * svd.matrixV().transpose();

  out.rotation = geom::Rotation::from_matrix(r);
  out.scale = mode == AlignMode::Similarity ? (sv.asDiagonal() * s).trace() / var_e : 1.0;
  out.translation = mean_r - out.scale * out.rotation.rotate(mean_e);
  out.residual_rmse = alignment_rmse(est, ref, out);
  return out;
}

std::vector<demolog::PoseSample> apply_alignment(std::span<const demolog::PoseSample> traj,
                                                 const AlignmentResult& a) {
  std::vector<demolog::PoseSample> out;
  out.reserve(traj.size());
  for (const auto& p : traj) {
    out.push_back({p.timestamp_ns,
                   {a.rotation * p.pose.rotation, a.apply(p.pose.translation)}});
  }
  return out;
}

}  // namespace demoproc::calib
