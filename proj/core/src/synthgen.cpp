#include "demoproc/synthgen.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "demoproc/gripper.hpp"

namespace demoproc::synthgen {

using geom::Pose;
using geom::Rotation;
using geom::Vec3;

double Rng::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

double Rng::gaussian() {
  if (spare_) {
    const double v = *spare_;
    spare_.reset();
    return v;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double phi = 2.0 * std::numbers::pi * u2;
  spare_ = r * std::sin(phi);
  return r * std::cos(phi);
}

Vec3 Rng::unit_vector() {
  const double z = 2.0 * uniform() - 1.0;
  const double phi = 2.0 * std::numbers::pi * uniform();
  const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {r * std::cos(phi), r * std::sin(phi), z};
}

double TagLayout::width_at(double t_s) const {
  return width_min_m +
         (width_max_m - width_min_m) * 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * t_s / width_period_s));
}

std::pair<Pose, Pose> TagLayout::poses_at(double t_s) const {
  const double half = 0.5 * width_at(t_s);
  const Rotation tilt = Rotation::rx(tilt_rad);
  return {Pose{tilt, {-half, offset_y_m, depth_m}}, Pose{tilt, {half, offset_y_m, depth_m}}};
}

std::vector<double> JointMotion::at(double t_s) const {
  std::vector<double> q(center.size());
  for (std::size_t k = 0; k < q.size(); ++k) {
    q[k] = center[k] +
           amplitude[k] * std::sin(2.0 * std::numbers::pi * frequency_hz[k] * t_s + static_cast<double>(k));
  }
  return q;
}

void Scenario::validate() const {
  if (!(duration_s > 0.0)) throw ConfigurationError("scenario duration must be positive");
  if (!(camera_rate_hz > 0.0)) throw ConfigurationError("camera rate must be positive");
  if (!(sigma_t_m >= 0.0) || !(sigma_r_rad >= 0.0) || !(pixel_noise_px >= 0.0)) {
    throw ConfigurationError("noise levels must be non-negative");
  }
  for (const auto& s : script) {
    if (!(s.duration_s > 0.0)) throw ConfigurationError("segment durations must be positive");
  }
  for (const auto& b : buttons) {
    if (!(b.t_s >= 0.0)) throw ConfigurationError("button times must be non-negative");
  }
  if (emit_tags) {
    if (!(tags.side_m > 0.0) || tags.left_id == tags.right_id) {
      throw ConfigurationError("tag layout needs a positive side and distinct ids");
    }
    if (!(tags.width_period_s > 0.0) || tags.width_min_m < 0.0 || tags.width_max_m < tags.width_min_m) {
      throw ConfigurationError("tag width schedule is invalid");
    }
    if (!(tags.depth_m > 0.0)) throw ConfigurationError("tag depth must be positive");
  }
  intrinsics.validate();
  if (joints) {
    const std::size_t n = joints->chain.actuated_count();
    if (joints->center.size() != n || joints->amplitude.size() != n || joints->frequency_hz.size() != n) {
      throw ConfigurationError(
          fmt::format("joint motion needs {} values per parameter for this chain", n));
    }
  }
}

std::vector<Segment> default_script() {
  constexpr double d = 0.05;
  const double a = 15.0 * std::numbers::pi / 180.0;
  std::vector<Segment> out;
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 v = Vec3::Zero();
    v[axis] = d;
    out.push_back({v, Vec3::Zero(), 5.0});
    out.push_back({-v, Vec3::Zero(), 5.0});
  }
  for (int axis = 0; axis < 3; ++axis) {
    Vec3 w = Vec3::Zero();
    w[axis] = a;
    out.push_back({Vec3::Zero(), w, 5.0});
    out.push_back({Vec3::Zero(), -w, 5.0});
  }
  return out;
}

demolog::CameraIntrinsics default_intrinsics() {
  demolog::CameraIntrinsics c;
  c.fx = 800.0;
  c.fy = 800.0;
  c.cx = 640.0;
  c.cy = 360.0;
  c.width = 1280;
  c.height = 720;
  c.baseline_m = 0.02;
  return c;
}

Scenario default_scenario() {
  Scenario s;
  s.start_pose = {Rotation::from_rpy(0.1, -0.2, 0.3), {0.4, -0.1, 0.3}};
  s.script = default_script();
  s.intrinsics = default_intrinsics();
  using demolog::ButtonKind;
  s.buttons = {{0.5, ButtonKind::LongPress},  {1.0, ButtonKind::ShortPress},
               {29.0, ButtonKind::ShortPress}, {31.0, ButtonKind::ShortPress},
               {59.0, ButtonKind::ShortPress}, {59.5, ButtonKind::LongPress}};
  return s;
}

std::string_view builtin_arm_urdf() {
  return R"(<?xml version="1.0"?>
<robot name="six_axis_arm">
  <link name="base_link"/>
  <link name="shoulder_link"/>
  <link name="upper_arm_link"/>
  <link name="forearm_link"/>
  <link name="wrist_1_link"/>
  <link name="wrist_2_link"/>
  <link name="wrist_3_link"/>
  <link name="tool0"/>
  <joint name="shoulder_pan_joint" type="revolute">
    <parent link="base_link"/><child link="shoulder_link"/>
    <origin xyz="0 0 0.089159" rpy="0 0 0"/><axis xyz="0 0 1"/>
  </joint>
  <joint name="shoulder_lift_joint" type="revolute">
    <parent link="shoulder_link"/><child link="upper_arm_link"/>
    <origin xyz="0 0.13585 0" rpy="0 1.570796325 0"/><axis xyz="0 1 0"/>
  </joint>
  <joint name="elbow_joint" type="revolute">
    <parent link="upper_arm_link"/><child link="forearm_link"/>
    <origin xyz="0 -0.1197 0.425" rpy="0 0 0"/><axis xyz="0 1 0"/>
  </joint>
  <joint name="wrist_1_joint" type="revolute">
    <parent link="forearm_link"/><child link="wrist_1_link"/>
    <origin xyz="0 0 0.39225" rpy="0 1.570796325 0"/><axis xyz="0 1 0"/>
  </joint>
  <joint name="wrist_2_joint" type="revolute">
    <parent link="wrist_1_link"/><child link="wrist_2_link"/>
    <origin xyz="0 0.093 0" rpy="0 0 0"/><axis xyz="0 0 1"/>
  </joint>
  <joint name="wrist_3_joint" type="revolute">
    <parent link="wrist_2_link"/><child link="wrist_3_link"/>
    <origin xyz="0 0 0.09465" rpy="0 0 0"/><axis xyz="0 1 0"/>
  </joint>
  <joint name="tool0_fixed_joint" type="fixed">
    <parent link="wrist_3_link"/><child link="tool0"/>
    <origin xyz="0 0.0823 0" rpy="-1.570796325 0 0"/>
  </joint>
</robot>
)";
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> tokens(std::string_view s) {
  std::istringstream in{std::string(s)};
  std::vector<std::string> out;
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

double to_double(const std::string& tok, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (ec != std::errc{} || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    throw FormatError(fmt::format("scenario line {}: invalid number '{}'", line, tok));
  }
  return v;
}

std::vector<double> to_doubles(std::string_view value, std::size_t line, std::size_t expected = 0) {
  std::vector<double> out;
  for (const auto& t : tokens(value)) out.push_back(to_double(t, line));
  if (expected != 0 && out.size() != expected) {
    throw FormatError(fmt::format("scenario line {}: expected {} values, found {}", line, expected, out.size()));
  }
  return out;
}

Pose to_pose(std::string_view value, std::size_t line) {
  const auto v = to_doubles(value, line, 7);
  return {Rotation::from_quaternion(v[3], v[4], v[5], v[6]), {v[0], v[1], v[2]}};
}

}  // namespace

Scenario parse_scenario(std::string_view text, const std::filesystem::path& base_dir) {
  Scenario s = default_scenario();
  bool script_given = false;
  bool buttons_given = false;
  std::optional<std::string> chain_urdf;
  std::string chain_base = "base_link";
  std::string chain_tip = "tool0";
  std::optional<Pose> hand_eye;
  std::vector<double> joint_center;
  std::vector<double> joint_amplitude;
  std::vector<double> joint_frequency;

  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      const auto tok = tokens(line);
      if (tok.front() == "segment") {
        if (tok.size() != 8) {
          throw FormatError(fmt::format("scenario line {}: segment needs 7 values", line_no));
        }
        if (!script_given) s.script.clear();
        script_given = true;
        Segment seg;
        for (int k = 0; k < 3; ++k) seg.translation[k] = to_double(tok[1 + k], line_no);
        for (int k = 0; k < 3; ++k) seg.rotation[k] = to_double(tok[4 + k], line_no);
        seg.duration_s = to_double(tok[7], line_no);
        s.script.push_back(seg);
      } else if (tok.front() == "button") {
        if (tok.size() != 3 || (tok[2] != "short" && tok[2] != "long")) {
          throw FormatError(fmt::format("scenario line {}: expected 'button <t_s> short|long'", line_no));
        }
        if (!buttons_given) s.buttons.clear();
        buttons_given = true;
        s.buttons.push_back({to_double(tok[1], line_no), tok[2] == "long" ? demolog::ButtonKind::LongPress
                                                                          : demolog::ButtonKind::ShortPress});
      } else {
        throw FormatError(fmt::format("scenario line {}: unrecognized line", line_no));
      }
      continue;
    }

    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    auto num = [&] { return to_doubles(value, line_no, 1).front(); };
    auto flag = [&] {
      if (value == "1" || value == "true") return true;
      if (value == "0" || value == "false") return false;
      throw FormatError(fmt::format("scenario line {}: expected 0/1 for {}", line_no, key));
    };
    auto uint = [&] {
      const double v = num();
      if (v < 0.0 || v != std::floor(v) || v > 4294967295.0) {
        throw FormatError(fmt::format("scenario line {}: {} must be a non-negative integer", line_no, key));
      }
      return static_cast<std::uint32_t>(v);
    };

    if (key == "seed") {
      std::uint64_t v = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc{} || ptr != value.data() + value.size()) {
        throw FormatError(fmt::format("scenario line {}: invalid seed", line_no));
      }
      s.seed = v;
    } else if (key == "duration_s") { s.duration_s = num();
    } else if (key == "camera_rate_hz") { s.camera_rate_hz = num();
    } else if (key == "start_pose") { s.start_pose = to_pose(value, line_no);
    } else if (key == "sigma_t_m") { s.sigma_t_m = num();
    } else if (key == "sigma_r_rad") { s.sigma_r_rad = num();
    } else if (key == "pixel_noise_px") { s.pixel_noise_px = num();
    } else if (key == "emit_tags") { s.emit_tags = flag();
    } else if (key == "emit_frames") { s.emit_frames = flag();
    } else if (key == "tag_side_m") { s.tags.side_m = num();
    } else if (key == "tag_id_left") { s.tags.left_id = uint();
    } else if (key == "tag_id_right") { s.tags.right_id = uint();
    } else if (key == "tag_depth_m") { s.tags.depth_m = num();
    } else if (key == "tag_offset_y_m") { s.tags.offset_y_m = num();
    } else if (key == "tag_tilt_rad") { s.tags.tilt_rad = num();
    } else if (key == "width_min_m") { s.tags.width_min_m = num();
    } else if (key == "width_max_m") { s.tags.width_max_m = num();
    } else if (key == "width_period_s") { s.tags.width_period_s = num();
    } else if (key == "fx") { s.intrinsics.fx = num();
    } else if (key == "fy") { s.intrinsics.fy = num();
    } else if (key == "cx") { s.intrinsics.cx = num();
    } else if (key == "cy") { s.intrinsics.cy = num();
    } else if (key == "image_width") { s.intrinsics.width = uint();
    } else if (key == "image_height") { s.intrinsics.height = uint();
    } else if (key == "distortion") {
      const auto d = to_doubles(value, line_no, 5);
      std::copy(d.begin(), d.end(), s.intrinsics.distortion.begin());
    } else if (key == "baseline_m") { s.intrinsics.baseline_m = num();
    } else if (key == "chain_urdf") { chain_urdf = std::string(value);
    } else if (key == "chain_base") { chain_base = std::string(value);
    } else if (key == "chain_tip") { chain_tip = std::string(value);
    } else if (key == "hand_eye") { hand_eye = to_pose(value, line_no);
    } else if (key == "joint_center") { joint_center = to_doubles(value, line_no);
    } else if (key == "joint_amplitude") { joint_amplitude = to_doubles(value, line_no);
    } else if (key == "joint_frequency_hz") { joint_frequency = to_doubles(value, line_no);
    } else {
      throw FormatError(fmt::format("scenario line {}: unknown key '{}'", line_no, key));
    }
  }

  if (chain_urdf) {
    std::string xml;
    if (*chain_urdf == "builtin") {
      xml = std::string(builtin_arm_urdf());
    } else {
      std::filesystem::path p(*chain_urdf);
      if (p.is_relative()) p = base_dir / p;
      xml = demolog::read_text_file(p);
    }
    JointMotion m;
    m.chain = kinchain::parse_chain(xml, chain_base, chain_tip).chain;
    const std::size_t n = m.chain.actuated_count();
    m.hand_eye = hand_eye.value_or(Pose{Rotation::from_rpy(0.1, -0.2, 0.3), {0.03, -0.05, 0.08}});
    m.center = joint_center.empty() ? std::vector<double>(n, 0.3) : joint_center;
    m.amplitude = joint_amplitude.empty() ? std::vector<double>(n, 0.3) : joint_amplitude;
    if (joint_frequency.empty()) {
      for (std::size_t k = 0; k < n; ++k) joint_frequency.push_back(0.05 + 0.01 * static_cast<double>(k));
    }
    m.frequency_hz = joint_frequency;
    s.joints = std::move(m);
  } else if (hand_eye || !joint_center.empty() || !joint_amplitude.empty() || !joint_frequency.empty()) {
    throw FormatError("scenario: joint motion keys require chain_urdf");
  }
  s.validate();
  return s;
}

Pose scripted_pose(const Scenario& scenario, double t_s) {
  Pose pose = scenario.start_pose;
  if (scenario.script.empty()) return pose;
  double remaining = t_s;
  for (std::size_t k = 0; remaining > 0.0; k = (k + 1) % scenario.script.size()) {
    const Segment& seg = scenario.script[k];
    const double f = std::min(1.0, remaining / seg.duration_s);
    pose.translation += f * seg.translation;
    pose.rotation = pose.rotation * geom::exp_rotation(f * seg.rotation);
    remaining -= seg.duration_s;
  }
  return pose;
}

Output generate(const Scenario& scenario) {
  scenario.validate();
  Rng rng(scenario.seed);
  Output out;

  auto both = [&](std::uint64_t t, demolog::Payload p) {
    out.log.records.push_back({t, p});
    out.truth.records.push_back({t, std::move(p)});
  };

  both(0, scenario.intrinsics);
  for (const auto& b : scenario.buttons) {
    both(static_cast<std::uint64_t>(std::llround(b.t_s * 1e9)), demolog::ButtonEvent{b.kind});
  }

  const double period_ns = 1e9 / scenario.camera_rate_hz;
  const double end_ns = scenario.duration_s * 1e9;
  for (std::uint64_t k = 0;; ++k) {
    const double t_exact = static_cast<double>(k) * period_ns;
    if (t_exact > end_ns) break;
    const auto t_ns = static_cast<std::uint64_t>(std::llround(t_exact));
    const double t_s = static_cast<double>(t_ns) * 1e-9;

    Pose truth;
    std::optional<std::vector<double>> q;
    if (scenario.joints) {
      q = scenario.joints->at(t_s);
      truth = geom::compose(kinchain::forward_kinematics(scenario.joints->chain, *q), scenario.joints->hand_eye);
    } else {
      truth = scripted_pose(scenario, t_s);
    }

    const Vec3 dt{rng.gaussian(), rng.gaussian(), rng.gaussian()};
    const double angle = rng.gaussian();
    const Vec3 axis = rng.unit_vector();
    const Pose noisy{geom::exp_rotation(axis * (scenario.sigma_r_rad * angle)) * truth.rotation,
                     truth.translation + scenario.sigma_t_m * dt};
    out.log.records.push_back({t_ns, noisy});
    out.truth.records.push_back({t_ns, truth});

    if (scenario.emit_tags) {
      const auto [left, right] = scenario.tags.poses_at(t_s);
      const std::pair<std::uint32_t, const Pose*> tags[] = {{scenario.tags.left_id, &left},
                                                            {scenario.tags.right_id, &right}};
      for (const auto& [id, pose] : tags) {
        demolog::TagDetection exact{id, gripper::project_tag(*pose, scenario.tags.side_m, scenario.intrinsics)};
        demolog::TagDetection measured = exact;
        for (auto& c : measured.corners) {
          const double nu = rng.gaussian();
          const double nv = rng.gaussian();
          c += scenario.pixel_noise_px * geom::Vec2{nu, nv};
        }
        out.log.records.push_back({t_ns, measured});
        out.truth.records.push_back({t_ns, exact});
      }
      out.widths.push_back({t_ns, scenario.tags.width_at(t_s)});
    }
    if (q) both(t_ns, demolog::JointState{*q});
    if (scenario.emit_frames) both(t_ns, demolog::FrameMeta{k, fmt::format("frames/{:06d}.png", k)});
  }

  auto by_time = [](const demolog::Record& a, const demolog::Record& b) {
    return a.timestamp_ns < b.timestamp_ns;
  };
  std::stable_sort(out.log.records.begin(), out.log.records.end(), by_time);
  std::stable_sort(out.truth.records.begin(), out.truth.records.end(), by_time);
  return out;
}

}  // namespace demoproc::synthgen
