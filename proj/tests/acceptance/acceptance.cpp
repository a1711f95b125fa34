// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "cli.hpp"
#include "demoproc/calib.hpp"
#include "demoproc/demolog.hpp"
#include "demoproc/episodes.hpp"
#include "demoproc/error.hpp"
#include "demoproc/exporter.hpp"
#include "demoproc/gripper.hpp"
#include "demoproc/kinchain.hpp"
#include "demoproc/synthgen.hpp"
#include "demoproc/trajeval.hpp"
#include "../support.hpp"

namespace fs = std::filesystem;
using namespace demoproc;
using namespace testing_support;

namespace {

// Empty on success, otherwise the first violated check.
using Outcome = std::optional<std::string>;

#define CHECK(cond, ...)                                     \
  do {                                                       \
    if (!(cond)) return fmt::format(__VA_ARGS__);            \
  } while (0)

trajeval::TrajectoryPair identity_pair(std::vector<demolog::PoseSample> est,
                                       std::vector<demolog::PoseSample> ref) {
  trajeval::TrajectoryPair p{std::move(est), std::move(ref), {}};
  for (std::size_t i = 0; i < p.est.size(); ++i) p.association.emplace_back(i, i);
  return p;
}

int cli_run(std::vector<std::string> args, std::string* out = nullptr) {
  std::ostringstream o;
  std::ostringstream e;
  const int code = cli::run(args, o, e);
  if (out) *out = o.str() + e.str();
  return code;
}

// ---------------------------------------------------------------- 1

Outcome published_average() {
  const double ape_rmse[] = {0.00788, 0.00736, 0.00771, 0.00738, 0.01012, 0.00748, 0.00776, 0.00751};
  std::vector<trajeval::RunMetrics> runs;
  for (int i = 0; i < 8; ++i) {
    trajeval::RunMetrics r;
    r.label = fmt::format("run{}", i + 1);
    r.ape.rmse = ape_rmse[i];
    runs.push_back(r);
  }
  // Through the CLI: the kv file feeds `eval --metrics`.
  const auto dir = fresh_dir("acc_published");
  demolog::write_text_file(dir / "published.kv", trajeval::report_key_values(runs));
  std::string table;
  const int code = cli_run({"eval", "--metrics", (dir / "published.kv").string()}, &table);
  CHECK(code == 0, "eval exited {}: {}", code, table);
  std::istringstream in(table);
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("Average", 0) != 0) continue;
    std::istringstream cells(line.substr(7));
    std::string first;
    cells >> first;
    CHECK(first == "0.00790", "Average APE RMSE rendered as '{}'", first);
    return std::nullopt;
  }
  return "no Average row in table";
}

// ---------------------------------------------------------------- 2

Outcome metric_oracle() {
  Gen g(2001);
  for (int trial = 0; trial < 100; ++trial) {
    const auto est = random_trajectory(g, 200);
    const auto ref = random_trajectory(g, 200);
    const auto pair = identity_pair(est, ref);
    const auto a = trajeval::ape(pair);
    CHECK(a.size() == 200, "ape returned {} samples", a.size());
    for (std::size_t i = 0; i < 200; ++i) {
      const Mat4 e = rigid_inverse(oracle_matrix(est[i].pose)) * oracle_matrix(ref[i].pose);
      const double d = max_abs_diff(oracle_matrix(a[i].error), e);
      CHECK(d <= 1e-12, "APE trial {} sample {} differs by {:.3e}", trial, i, d);
      const double dt = std::abs(a[i].translation - e.topRightCorner<3, 1>().norm());
      CHECK(dt <= 1e-12, "APE trial {} sample {} translation differs by {:.3e}", trial, i, dt);
    }
    const std::size_t delta = static_cast<std::size_t>(g.integer(1, 10));
    const auto r = trajeval::rpe(pair, delta);
    CHECK(r.size() == 200 - delta, "rpe returned {} samples", r.size());
    for (std::size_t i = 0; i + delta < 200; ++i) {
      const std::size_t j = i + delta;
      const Mat4 dr = rigid_inverse(oracle_matrix(ref[i].pose)) * oracle_matrix(ref[j].pose);
      const Mat4 de = rigid_inverse(oracle_matrix(est[i].pose)) * oracle_matrix(est[j].pose);
      const Mat4 e = rigid_inverse(dr) * de;
      const double d = max_abs_diff(oracle_matrix(r[i].error), e);
      CHECK(d <= 1e-12, "RPE trial {} sample {} differs by {:.3e}", trial, i, d);
      const double dt = std::abs(r[i].translation - e.topRightCorner<3, 1>().norm());
      CHECK(dt <= 1e-12, "RPE trial {} sample {} translation differs by {:.3e}", trial, i, dt);
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- 3

Outcome invariances() {
  Gen g(3001);
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = random_trajectory(g, 100);
    for (const auto& e : trajeval::ape(identity_pair(x, x))) {
      CHECK(e.translation == 0.0 && e.rotation == 0.0, "APE(x, x) = {} / {}", e.translation, e.rotation);
    }

    const auto est = random_trajectory(g, 100);
    const Pose left = g.pose(5.0);
    auto est_l = est;
    auto ref_l = x;
    for (auto& s : est_l) s.pose = left * s.pose;
    for (auto& s : ref_l) s.pose = left * s.pose;
    const auto r0 = trajeval::rpe(identity_pair(est, x), 3);
    const auto r1 = trajeval::rpe(identity_pair(est_l, ref_l), 3);
    for (std::size_t i = 0; i < r0.size(); ++i) {
      const double d = max_abs_diff(oracle_matrix(r0[i].error), oracle_matrix(r1[i].error));
      CHECK(d <= 1e-12, "RPE changed by {:.3e} under a common left transform", d);
    }

    const Pose offset = g.pose(0.5);
    auto est_d = x;
    for (auto& s : est_d) s.pose = s.pose * offset;
    for (const auto& e : trajeval::ape(identity_pair(est_d, x))) {
      const double d = std::abs(e.translation - offset.translation.norm());
      CHECK(d <= 1e-12, "right offset: |t| differs from |t_D| by {:.3e}", d);
    }

    std::vector<double> v(static_cast<std::size_t>(g.integer(1, 500)));
    for (auto& s : v) s = std::abs(g.normal(0.01));
    const auto st = trajeval::stats(v);
    const double d = std::abs(st.rmse * st.rmse - (st.mean * st.mean + st.std * st.std));
    CHECK(d <= 1e-12, "rmse^2 - (mean^2 + std^2) = {:.3e}", d);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- 4

std::vector<calib::MotionPair> pairs_from_x(Gen& g, const Pose& x, int n) {
  std::vector<calib::MotionPair> out;
  for (int i = 0; i < n; ++i) {
    const Pose a = g.pose(0.5, 1.5);
    out.push_back({a, geom::inverse(x) * a * x});
  }
  return out;
}

Outcome solver_recovery() {
  {
    Gen g(4001);
    const Pose x = g.pose(0.5);
    const auto r = calib::solve_hand_eye(pairs_from_x(g, x, 20));
    const double dr = geom::rotation_distance(r.x, x);
    const double dt = (r.x.translation - x.translation).norm();
    CHECK(dr <= 1e-9 && dt <= 1e-9, "noiseless hand-eye error {:.3e} rad / {:.3e} m", dr, dt);
  }
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Gen g(4100 + seed);
    const Pose x = g.pose(0.3);
    auto pairs = pairs_from_x(g, x, 20);
    for (auto& p : pairs) {
      p.b = p.b * Pose{Rotation::from_rotation_vector({g.normal(1e-3), g.normal(1e-3), g.normal(1e-3)}),
                       {g.normal(1e-3), g.normal(1e-3), g.normal(1e-3)}};
    }
    const auto r = calib::solve_hand_eye(pairs);
    const double dr = geom::rotation_distance(r.x, x);
    const double dt = (r.x.translation - x.translation).norm();
    CHECK(dr <= 1e-2 && dt <= 1e-2, "noisy hand-eye seed {} error {:.3e} rad / {:.3e} m", seed, dr, dt);
  }
  {
    Gen g(4200);
    std::vector<Vec3> est(100), ref;
    for (auto& p : est) p = g.vec();
    const Rotation rot = g.rotation();
    const Vec3 t = g.vec(3.0);
    const double s = g.uniform(0.2, 5.0);
    for (const auto& p : est) ref.push_back(s * rot.rotate(p) + t);
    const auto r = calib::umeyama_align(est, ref, calib::AlignMode::Similarity);
    CHECK(r.residual_rmse < 1e-12, "Umeyama residual {:.3e}", r.residual_rmse);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- 5

Mat4 origin_matrix(const Vec3& xyz, const Vec3& rpy) {
  return homogeneous(axis_angle_matrix(Vec3::UnitZ(), rpy.z()) * axis_angle_matrix(Vec3::UnitY(), rpy.y()) *
                         axis_angle_matrix(Vec3::UnitX(), rpy.x()),
                     xyz);
}

Outcome fk_oracle() {
  Gen g(5001);
  for (int trial = 0; trial < 1000; ++trial) {
    std::string body;
    Mat4 oracle = Mat4::Identity();
    std::vector<double> q(6);
    for (int k = 0; k < 6; ++k) {
      const bool prismatic = g.integer(0, 3) == 0;
      const Vec3 xyz = g.vec(0.5);
      const Vec3 rpy(g.uniform(-3, 3), g.uniform(-1.5, 1.5), g.uniform(-3, 3));
      const Vec3 axis = g.unit();
      q[static_cast<std::size_t>(k)] = prismatic ? g.uniform(-0.5, 0.5) : g.uniform(-3.1, 3.1);
      body += fmt::format(
          R"(<joint name="j{0}" type="{1}"><parent link="l{0}"/><child link="l{2}"/>)"
          R"(<origin xyz="{3:.17g} {4:.17g} {5:.17g}" rpy="{6:.17g} {7:.17g} {8:.17g}"/>)"
          R"(<axis xyz="{9:.17g} {10:.17g} {11:.17g}"/></joint>)",
          k, prismatic ? "prismatic" : "revolute", k + 1, xyz.x(), xyz.y(), xyz.z(), rpy.x(), rpy.y(), rpy.z(),
          axis.x(), axis.y(), axis.z());
      oracle = oracle * origin_matrix(xyz, rpy);
      const double v = q[static_cast<std::size_t>(k)];
      oracle = oracle * (prismatic ? homogeneous(Mat3::Identity(), axis * v)
                                   : homogeneous(axis_angle_matrix(axis, v), Vec3::Zero()));
    }
    const auto chain = kinchain::parse_chain("<robot name=\"r\">" + body + "</robot>", "l0", "l6").chain;
    const double d = max_abs_diff(oracle_matrix(kinchain::forward_kinematics(chain, q)), oracle);
    CHECK(d <= 1e-12, "chain {} differs from the matrix product by {:.3e}", trial, d);
  }

  const auto chain = kinchain::parse_chain(synthgen::builtin_arm_urdf(), "base_link", "tool0").chain;
  std::vector<demolog::Stamped<demolog::JointState>> stream;
  for (std::uint64_t k = 0; k < 200; ++k) {
    demolog::JointState js;
    for (int i = 0; i < 6; ++i) js.positions.push_back(g.uniform(-2.5, 2.5));
    stream.push_back({k * 33'333'333, js});
  }
  const Pose x = g.pose(0.2);
  const auto ee = kinchain::camera_reference_trajectory(chain, stream, Pose::identity());
  const auto cam = kinchain::camera_reference_trajectory(chain, stream, x);
  for (std::size_t i = 0; i + 1 < stream.size(); ++i) {
    const Pose a = geom::relative(ee[i].pose, ee[i + 1].pose);
    const Pose b = geom::relative(cam[i].pose, cam[i + 1].pose);
    const double d = max_abs_diff(oracle_matrix(a * x), oracle_matrix(x * b));
    CHECK(d <= 1e-9, "AX = XB violated by {:.3e} at step {}", d, i);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- 6

// synth -> segment -> eval through the CLI; returns the worst per-episode
// APE RMSE deviation from `expected` (relative) or an error message.
std::variant<std::vector<double>, std::string> pipeline_rmse(const std::string& name, const std::string& sigma) {
  const auto dir = fresh_dir(name);
  std::string log;
  if (int c = cli_run({"synth", "--seed", "2024", "--sigma-t", sigma, "--out", (dir / "run").string()}, &log)) {
    return fmt::format("synth exited {}: {}", c, log);
  }
  if (int c = cli_run({"segment", (dir / "run" / "recording.log").string(), "--out", (dir / "eps").string()},
                      &log)) {
    return fmt::format("segment exited {}: {}", c, log);
  }
  std::vector<double> rmse;
  for (const auto& e : fs::directory_iterator(dir / "eps")) {
    if (e.path().extension() != ".log") continue;
    const auto kv = dir / (e.path().stem().string() + ".kv");
    if (int c = cli_run({"eval", "--est", e.path().string(), "--ref", (dir / "run" / "truth.log").string(),
                         "--align", "none", "--kv", kv.string()},
                        &log)) {
      return fmt::format("eval exited {}: {}", c, log);
    }
    for (const auto& r : trajeval::parse_key_values(demolog::read_text_file(kv))) rmse.push_back(r.ape.rmse);
  }
  if (rmse.empty()) return std::string("segment produced no episodes");
  return rmse;
}

Outcome end_to_end() {
  const double expected = 0.005 * std::sqrt(3.0);
  const auto noisy = pipeline_rmse("acc_e2e_noisy", "0.005");
  if (auto* msg = std::get_if<std::string>(&noisy)) return *msg;
  for (double r : std::get<std::vector<double>>(noisy)) {
    CHECK(std::abs(r - expected) <= 0.1 * expected, "APE RMSE {:.5f} m, expected {:.5f} m +-10%", r, expected);
  }
  const auto clean = pipeline_rmse("acc_e2e_clean", "0");
  if (auto* msg = std::get_if<std::string>(&clean)) return *msg;
  for (double r : std::get<std::vector<double>>(clean)) CHECK(r == 0.0, "noiseless APE RMSE {:.3e}", r);
  return std::nullopt;
}

// ---------------------------------------------------------------- 7

Outcome gripper_chain() {
  auto s = synthgen::default_scenario();
  const gripper::TagGeometry tags{s.tags.side_m, s.tags.left_id, s.tags.right_id};
  const gripper::GripperCalibration cal{s.tags.width_min_m, s.tags.width_max_m};
  {
    const auto out = synthgen::generate(s);
    const auto stream = gripper::gripper_state_stream(demolog::tag_detections(out.truth), s.intrinsics, tags, cal);
    CHECK(stream.samples.size() == out.widths.size(), "{} widths for {} frames", stream.samples.size(),
          out.widths.size());
    for (std::size_t i = 0; i < out.widths.size(); ++i) {
      const double d = std::abs(stream.samples[i].width_m - out.widths[i].value);
      CHECK(d <= 1e-9, "noiseless width error {:.3e} m at frame {}", d, i);
    }
  }
  s.pixel_noise_px = 0.5;
  s.seed = 7007;
  const auto out = synthgen::generate(s);
  const auto stream = gripper::gripper_state_stream(demolog::tag_detections(out.log), s.intrinsics, tags, cal);
  CHECK(stream.samples.size() >= 1000, "only {} frames", stream.samples.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < 1000; ++i) sum += std::abs(stream.samples[i].width_m - out.widths[i].value);
  const double mean = sum / 1000.0;
  CHECK(mean < 0.002, "mean |width error| {:.5f} m with 0.5 px noise", mean);
  return std::nullopt;
}

// ---------------------------------------------------------------- 8

Outcome formats() {
  Gen g(8001);
  for (int i = 0; i < 1000; ++i) {
    const auto log = random_log(g);
    const auto back = demolog::read_log(demolog::encode_log(log));
    CHECK(back.log == log && back.warnings.empty(), "container round trip {} is lossy", i);
  }

  for (int i = 0; i < 50; ++i) {
    auto traj = random_trajectory(g, 100);
    for (auto& s : traj) s.timestamp_ns = g.u64() % 5'000'000'000'000'000'000ULL;
    const auto back = demolog::import_tum(demolog::export_tum(traj));
    CHECK(back.size() == traj.size(), "TUM round trip changed length");
    for (std::size_t k = 0; k < traj.size(); ++k) {
      const double dt = std::abs(static_cast<double>(back[k].timestamp_ns) -
                                 static_cast<double>(traj[k].timestamp_ns)) * 1e-9;
      CHECK(dt <= 1e-9, "TUM timestamp drift {:.3e} s", dt);
      const auto& a = back[k].pose;
      const auto& b = traj[k].pose;
      const double d = std::max({(a.translation - b.translation).cwiseAbs().maxCoeff(),
                                 std::abs(a.rotation.x() - b.rotation.x()), std::abs(a.rotation.y() - b.rotation.y()),
                                 std::abs(a.rotation.z() - b.rotation.z()), std::abs(a.rotation.w() - b.rotation.w())});
      CHECK(d <= 1e-12, "TUM element drift {:.3e}", d);
    }
  }

  {
    const auto dir = fresh_dir("acc_formats");
    std::string log;
    if (int c = cli_run({"synth", "--seed", "88", "--out", (dir / "run").string()}, &log)) {
      return fmt::format("synth exited {}: {}", c, log);
    }
    if (int c = cli_run({"export", "--log", (dir / "run" / "recording.log").string(), "--config",
                         (dir / "run" / "gripper.cfg").string(), "--out", (dir / "dataset").string()},
                        &log)) {
      return fmt::format("export exited {}: {}", c, log);
    }
    const auto report = exporter::validate_dataset(dir / "dataset");
    CHECK(report.ok() && report.error_count() == 0 && !report.episodes.empty(),
          "exported dataset has {} validation errors over {} episodes", report.error_count(),
          report.episodes.size());
  }

  for (int i = 0; i < 10'000; ++i) {
    auto bytes = demolog::encode_log(random_log(g, 8));
    for (int k = g.integer(1, 6); k > 0; --k) {
      switch (g.integer(0, 3)) {
        case 0:
          if (!bytes.empty()) bytes[g.u64() % bytes.size()] = static_cast<std::uint8_t>(g.u64());
          break;
        case 1:
          bytes.resize(g.u64() % (bytes.size() + 1));
          break;
        case 2:
          for (int n = g.integer(1, 20); n > 0; --n) bytes.push_back(static_cast<std::uint8_t>(g.u64()));
          break;
        default:
          if (bytes.size() > demolog::kHeaderSize) {
            bytes[demolog::kHeaderSize + g.u64() % (bytes.size() - demolog::kHeaderSize)] ^= 0xFF;
          }
      }
    }
    try {
      demolog::read_log(bytes);
    } catch (const Error&) {
    } catch (const std::exception& e) {
      return fmt::format("fuzz case {} raised an untyped exception: {}", i, e.what());
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- 9

demolog::LogFile presses(std::initializer_list<std::pair<int, char>> schedule) {
  demolog::LogFile log;
  for (auto [t, kind] : schedule) {
    log.records.push_back({static_cast<std::uint64_t>(t) * 1'000'000'000ULL,
                           demolog::ButtonEvent{kind == 'L' ? demolog::ButtonKind::LongPress
                                                            : demolog::ButtonKind::ShortPress}});
  }
  return log;
}

Outcome segmentation() {
  using Window = std::pair<std::uint64_t, std::uint64_t>;
  struct Case {
    demolog::LogFile log;
    std::vector<Window> episodes;
    std::vector<std::string> warnings;  // substrings, one per expected warning
  };
  constexpr std::uint64_t s = 1'000'000'000ULL;
  const std::vector<Case> cases{
      {presses({{0, 'L'}, {10, 'S'}, {20, 'S'}, {30, 'L'}}), {{10 * s, 20 * s}}, {}},
      {presses({{0, 'L'}, {10, 'S'}, {20, 'S'}, {30, 'S'}, {40, 'S'}, {50, 'L'}}),
       {{10 * s, 20 * s}, {30 * s, 40 * s}},
       {}},
      {presses({{0, 'L'}, {10, 'S'}, {20, 'S'}, {30, 'S'}, {40, 'L'}}), {{10 * s, 20 * s}}, {"unpaired"}},
  };
  for (std::size_t c = 0; c < cases.size(); ++c) {
    const auto seg = episodes::segment_episodes(cases[c].log);
    std::vector<Window> got;
    for (const auto& e : seg.episodes) got.emplace_back(e.start_ns, e.end_ns);
    CHECK(got == cases[c].episodes, "schedule {}: {} episodes differ from the expected set", c + 1, got.size());
    CHECK(seg.warnings.size() == cases[c].warnings.size(), "schedule {}: {} warnings, expected {}", c + 1,
          seg.warnings.size(), cases[c].warnings.size());
    for (std::size_t w = 0; w < seg.warnings.size(); ++w) {
      CHECK(seg.warnings[w].find(cases[c].warnings[w]) != std::string::npos, "schedule {}: warning '{}'", c + 1,
            seg.warnings[w]);
    }
  }
  return std::nullopt;
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;  // 0: no runtime limit
  std::function<Outcome()> run;
};

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "published per-run APE RMSE average renders 0.00790", 1.0, published_average},
      {2, "APE/RPE match the 4x4 matrix oracle", 10.0, metric_oracle},
      {3, "metric invariances", 0.0, invariances},
      {4, "hand-eye and Umeyama recovery", 10.0, solver_recovery},
      {5, "forward kinematics oracle and AX = XB", 0.0, fk_oracle},
      {6, "synth -> segment -> eval APE RMSE", 30.0, end_to_end},
      {7, "gripper width from tag projections", 0.0, gripper_chain},
      {8, "container, TUM and dataset formats", 0.0, formats},
      {9, "button-schedule segmentation", 0.0, segmentation},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = fmt::format("unexpected exception: {}", e.what());
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!outcome && c.limit_s > 0.0 && elapsed > c.limit_s) {
      outcome = fmt::format("runtime {:.2f} s exceeds {:.0f} s", elapsed, c.limit_s);
    }
    const std::string limit = c.limit_s > 0.0 ? fmt::format(" (limit {:.0f} s)", c.limit_s) : std::string();
    if (outcome) {
      ++failures;
      fmt::print("FAIL  {}  {}  [{:.2f} s{}]: {}\n", c.id, c.name, elapsed, limit, *outcome);
    } else {
      fmt::print("PASS  {}  {}  [{:.2f} s{}]\n", c.id, c.name, elapsed, limit);
    }
  }
  fmt::print("{} of {} criteria passed\n", criteria.size() - static_cast<std::size_t>(failures), criteria.size());
  return failures == 0 ? 0 : 1;
}
