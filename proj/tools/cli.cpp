#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <atomic>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <thread>

#include "demoproc/calib.hpp"
#include "demoproc/demolog.hpp"
#include "demoproc/episodes.hpp"
#include "demoproc/error.hpp"
#include "demoproc/exporter.hpp"
#include "demoproc/gripper.hpp"
#include "demoproc/kinchain.hpp"
#include "demoproc/synthgen.hpp"
#include "demoproc/trajeval.hpp"

namespace demoproc::cli {
namespace {

namespace fs = std::filesystem;

bool looks_like_log(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  char magic[8] = {};
  in.read(magic, sizeof magic);
  return in.gcount() == 8 && std::memcmp(magic, demolog::kMagic.data(), 8) == 0;
}

void print_warnings(std::ostream& err, const Warnings& warnings) {
  for (const auto& w : warnings) fmt::print(err, "warning: {}\n", w);
}

// A trajectory file is either a TUM text file or a container log.
std::vector<demolog::PoseSample> load_trajectory(const fs::path& path, std::ostream& err) {
  if (looks_like_log(path)) {
    auto read = demolog::read_log_file(path);
    print_warnings(err, read.warnings);
    return demolog::pose_samples(read.log);
  }
  return demolog::read_tum_file(path);
}

geom::Pose parse_pose_text(std::string text) {
  std::replace(text.begin(), text.end(), ',', ' ');
  std::istringstream in(text);
  std::vector<double> v;
  double d = 0.0;
  while (in >> d) v.push_back(d);
  if (!in.eof() || v.size() != 7) {
    throw FormatError("pose must be 7 numbers: tx ty tz qx qy qz qw");
  }
  return {geom::Rotation::from_quaternion(v[3], v[4], v[5], v[6]), {v[0], v[1], v[2]}};
}

std::string format_pose(const geom::Pose& p) {
  return fmt::format("{:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g}", p.translation.x(),
                     p.translation.y(), p.translation.z(), p.rotation.x(), p.rotation.y(),
                     p.rotation.z(), p.rotation.w());
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  const unsigned workers = static_cast<unsigned>(std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1)));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex m;
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(m);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------- inspect

struct InspectArgs {
  std::string log;
};

void cmd_inspect(const InspectArgs& a, std::ostream& out, std::ostream& err) {
  const auto read = demolog::read_log_file(a.log);
  print_warnings(err, read.warnings);
  struct Span {
    std::size_t count = 0;
    std::uint64_t first = 0;
    std::uint64_t last = 0;
  };
  std::map<std::uint8_t, Span> spans;
  std::optional<std::uint64_t> lo;
  std::optional<std::uint64_t> hi;
  for (const auto& r : read.log.records) {
    auto& s = spans[static_cast<std::uint8_t>(r.channel())];
    if (s.count == 0 || r.timestamp_ns < s.first) s.first = r.timestamp_ns;
    if (s.count == 0 || r.timestamp_ns > s.last) s.last = r.timestamp_ns;
    ++s.count;
    lo = lo ? std::min(*lo, r.timestamp_ns) : r.timestamp_ns;
    hi = hi ? std::max(*hi, r.timestamp_ns) : r.timestamp_ns;
  }
  fmt::print(out, "log: {}\nversion: {}\nrecords: {}\n", a.log, read.log.version, read.log.records.size());
  fmt::print(out, "{:<20}{:>10}{:>16}{:>16}\n", "channel", "count", "first (s)", "last (s)");
  for (const auto& [tag, s] : spans) {
    fmt::print(out, "{:<20}{:>10}{:>16.6f}{:>16.6f}\n", demolog::channel_name(static_cast<demolog::Channel>(tag)),
               s.count, static_cast<double>(s.first) * 1e-9, static_cast<double>(s.last) * 1e-9);
  }
  if (lo) {
    fmt::print(out, "time span: {:.9f} s .. {:.9f} s ({:.9f} s)\n", static_cast<double>(*lo) * 1e-9,
               static_cast<double>(*hi) * 1e-9, static_cast<double>(*hi - *lo) * 1e-9);
  } else {
    fmt::print(out, "time span: empty\n");
  }
}

// ---------------------------------------------------------------- segment

struct SegmentArgs {
  std::string log;
  std::string out_dir;
  unsigned jobs = 1;
};

void cmd_segment(const SegmentArgs& a, std::ostream& out, std::ostream& err) {
  const auto read = demolog::read_log_file(a.log);
  auto seg = episodes::segment_episodes(read.log);
  Warnings warnings = read.warnings;
  warnings.insert(warnings.end(), seg.warnings.begin(), seg.warnings.end());
  print_warnings(err, warnings);

  fs::create_directories(a.out_dir);
  parallel_for(seg.episodes.size(), a.jobs, [&](std::size_t i) {
    const auto& e = seg.episodes[i];
    demolog::write_log_file(episodes::slice_log(read.log, e.start_ns, e.end_ns),
                            fs::path(a.out_dir) / fmt::format("episode_{:04d}.log", i));
  });
  std::string summary;
  for (std::size_t i = 0; i < seg.episodes.size(); ++i) {
    const auto& e = seg.episodes[i];
    summary += fmt::format("episode_{:04d} {} {} {}\n", i, e.start_ns, e.end_ns, e.poses.size());
  }
  demolog::write_text_file(fs::path(a.out_dir) / "episodes.txt",
                           "# name start_ns end_ns pose_count\n" + summary);
  fmt::print(out, "{} episodes, {} warnings\n", seg.episodes.size(), warnings.size());
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  std::string est;
  std::string ref;
  std::string align;
  std::size_t rpe_delta = 1;
  double tolerance_ms = 50.0;
  bool rotation = false;
  std::string label = "run1";
  std::string out_path;
  std::string kv_path;
  std::vector<std::string> metrics;
};

void cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const auto metric = a.rotation ? trajeval::Metric::Rotation : trajeval::Metric::Translation;
  std::vector<trajeval::RunMetrics> runs;
  for (const auto& path : a.metrics) {
    auto parsed = trajeval::parse_key_values(demolog::read_text_file(path));
    runs.insert(runs.end(), parsed.begin(), parsed.end());
  }

  if (!a.est.empty()) {
    if (a.align.empty()) throw PreconditionError("--align is required with --est/--ref");
    const auto mode = calib::parse_align_mode(a.align);
    if (!(a.tolerance_ms >= 0.0)) throw PreconditionError("--tolerance-ms must be non-negative");
    const auto tol = static_cast<std::uint64_t>(std::llround(a.tolerance_ms * 1e6));
    auto pair = trajeval::associate(load_trajectory(a.est, err), load_trajectory(a.ref, err), tol);
    if (pair.association.empty()) {
      throw InsufficientDataError("no estimated pose lies within tolerance of a reference pose");
    }
    const auto alignment = trajeval::align_pair(pair, mode);
    const auto ape = trajeval::ape(pair, alignment);
    pair.est = calib::apply_alignment(pair.est, alignment);
    const auto rpe = trajeval::rpe(pair, a.rpe_delta);

    const auto ape_mag = trajeval::magnitudes(ape, metric);
    const auto rpe_mag = trajeval::magnitudes(rpe, metric);
    runs.push_back({a.label, trajeval::stats(ape_mag), trajeval::stats(rpe_mag)});
    fmt::print(err, "{}: {} associated poses, alignment {} (scale {:.9g}, residual {:.6g} m)\n", a.label,
               pair.association.size(), calib::align_mode_name(mode), alignment.scale,
               alignment.residual_rmse);
  }
  if (runs.empty()) throw PreconditionError("nothing to evaluate: give --est/--ref or --metrics");

  const std::string table = trajeval::report_table(runs, metric);
  if (!a.out_path.empty()) demolog::write_text_file(a.out_path, table);
  if (!a.kv_path.empty()) demolog::write_text_file(a.kv_path, trajeval::report_key_values(runs));
  out << table;
}

// ---------------------------------------------------------------- handeye

struct HandEyeArgs {
  std::string pairs;
  std::string out_path;
};

void cmd_handeye(const HandEyeArgs& a, std::ostream& out, std::ostream& err) {
  const auto pairs = calib::parse_motion_pairs(demolog::read_text_file(a.pairs));
  const auto result = calib::solve_hand_eye(pairs);
  print_warnings(err, result.warnings);
  const std::string pose = format_pose(result.x);
  if (!a.out_path.empty()) demolog::write_text_file(a.out_path, pose + "\n");
  fmt::print(out, "X: {}\nused pairs: {} of {}\n", pose, result.used_pairs, pairs.size());
  fmt::print(out, "{:>6}{:>16}{:>16}{:>9}\n", "pair", "rot (rad)", "trans (m)", "outlier");
  for (std::size_t i = 0; i < result.residuals.size(); ++i) {
    const auto& r = result.residuals[i];
    fmt::print(out, "{:>6}{:>16.3e}{:>16.3e}{:>9}\n", i, r.rotation_rad, r.translation_m,
               r.outlier ? "yes" : "no");
  }
}

// ---------------------------------------------------------------- fk

struct FkArgs {
  std::string chain;
  std::string base;
  std::string tip;
  std::string joints;
  std::string hand_eye;
  std::string out_path;
};

void cmd_fk(const FkArgs& a, std::ostream& out, std::ostream& err) {
  const auto parsed = kinchain::parse_chain(demolog::read_text_file(a.chain), a.base, a.tip);
  print_warnings(err, parsed.warnings);
  std::vector<demolog::Stamped<demolog::JointState>> joints;
  if (looks_like_log(a.joints)) {
    const auto read = demolog::read_log_file(a.joints);
    print_warnings(err, read.warnings);
    joints = demolog::joint_states(read.log);
  } else {
    joints = kinchain::parse_joint_csv(demolog::read_text_file(a.joints));
  }
  geom::Pose x;
  if (!a.hand_eye.empty()) {
    x = parse_pose_text(fs::exists(a.hand_eye) ? demolog::read_text_file(a.hand_eye) : a.hand_eye);
  }
  const auto traj = kinchain::camera_reference_trajectory(parsed.chain, joints, x);
  const std::string tum = demolog::export_tum(traj);
  if (!a.out_path.empty()) {
    demolog::write_text_file(a.out_path, tum);
    fmt::print(out, "{} poses, {} actuated joints\n", traj.size(), parsed.chain.actuated_count());
  } else {
    out << tum;
  }
}

// ---------------------------------------------------------------- gripper

struct GripperArgs {
  std::string log;
  std::string config;
  bool smooth = false;
  std::string out_path;
};

const demolog::CameraIntrinsics& require_intrinsics(const demolog::LogFile& log) {
  const auto* intr = demolog::find_intrinsics(log);
  if (!intr) throw FormatError("log has no camera intrinsics record");
  return *intr;
}

void cmd_gripper(const GripperArgs& a, std::ostream& out, std::ostream& err) {
  const auto cfg = gripper::parse_gripper_config(demolog::read_text_file(a.config));
  const auto read = demolog::read_log_file(a.log);
  print_warnings(err, read.warnings);
  const auto tags = demolog::tag_detections(read.log);
  const auto stream = gripper::gripper_state_stream(tags, require_intrinsics(read.log), cfg.tags,
                                                    cfg.calibration, {a.smooth});
  print_warnings(err, stream.warnings);
  std::string csv = "t_ns,width_m,state\n";
  for (const auto& s : stream.samples) {
    csv += fmt::format("{},{:.17g},{:.17g}\n", s.timestamp_ns, s.width_m, s.state);
  }
  if (!a.out_path.empty()) {
    demolog::write_text_file(a.out_path, csv);
  } else {
    out << csv;
  }
  fmt::print(a.out_path.empty() ? err : out, "{} samples, {} missing frames, {} failed frames\n",
             stream.samples.size(), stream.missing_frames, stream.failed_frames);
}

// ---------------------------------------------------------------- export

struct ExportArgs {
  std::vector<std::string> logs;
  std::string config;
  std::string out_dir;
  double rate_hz = episodes::kDefaultRateHz;
  double tolerance_ms = 50.0;
  bool smooth = false;
  unsigned jobs = 1;
};

void cmd_export(const ExportArgs& a, std::ostream& out, std::ostream& err) {
  const auto cfg = gripper::parse_gripper_config(demolog::read_text_file(a.config));
  if (!(a.tolerance_ms >= 0.0)) throw PreconditionError("--tolerance-ms must be non-negative");
  const auto tol = static_cast<std::uint64_t>(std::llround(a.tolerance_ms * 1e6));

  std::vector<exporter::ExportEpisode> eps;
  Warnings warnings;
  for (const auto& path : a.logs) {
    const auto read = demolog::read_log_file(path);
    warnings.insert(warnings.end(), read.warnings.begin(), read.warnings.end());
    const auto seg = episodes::segment_episodes(read.log);
    warnings.insert(warnings.end(), seg.warnings.begin(), seg.warnings.end());
    const auto* intr = demolog::find_intrinsics(read.log);
    const std::string source = fs::path(path).filename().string();

    std::vector<exporter::ExportEpisode> local(seg.episodes.size());
    std::vector<Warnings> local_warnings(seg.episodes.size());
    parallel_for(seg.episodes.size(), a.jobs, [&](std::size_t i) {
      const auto& e = seg.episodes[i];
      auto& x = local[i];
      x.source_log = source;
      x.start_ns = e.start_ns;
      x.end_ns = e.end_ns;
      x.frames = e.frames;
      if (e.poses.size() < 2) {
        local_warnings[i].push_back(fmt::format("{} episode {}: fewer than 2 poses", source, i));
        return;
      }
      const auto poses = episodes::resample_poses(e.poses, a.rate_hz);
      std::vector<gripper::GripperStateSample> grip;
      if (intr) {
        auto stream = gripper::gripper_state_stream(e.tags, *intr, cfg.tags, cfg.calibration, {a.smooth});
        x.gripper_missing_frames = stream.missing_frames;
        for (auto& w : stream.warnings) local_warnings[i].push_back(fmt::format("{} episode {}: {}", source, i, w));
        grip = std::move(stream.samples);
      } else {
        local_warnings[i].push_back(fmt::format("{}: no camera intrinsics; gripper state unavailable", source));
      }
      x.samples = episodes::synchronize(poses, grip, tol);
    });
    for (std::size_t i = 0; i < local.size(); ++i) {
      warnings.insert(warnings.end(), local_warnings[i].begin(), local_warnings[i].end());
      eps.push_back(std::move(local[i]));
    }
  }

  exporter::ExportOptions opts;
  opts.sample_rate_hz = a.rate_hz;
  opts.calibration = cfg.calibration;
  opts.jobs = a.jobs;
  const auto result = exporter::export_dataset(eps, a.out_dir, opts);
  warnings.insert(warnings.end(), result.warnings.begin(), result.warnings.end());
  print_warnings(err, warnings);
  fmt::print(out, "{} episodes exported, {} skipped, {} warnings\n", result.manifest.episode_count,
             result.manifest.skipped_episodes, warnings.size());
}

// ---------------------------------------------------------------- validate

struct ValidateArgs {
  std::string dir;
};

int cmd_validate(const ValidateArgs& a, std::ostream& out) {
  const auto report = exporter::validate_dataset(a.dir);
  for (const auto& e : report.errors) fmt::print(out, "dataset: FAIL {}\n", e);
  for (const auto& ep : report.episodes) {
    if (ep.ok) {
      fmt::print(out, "{}: PASS\n", ep.name);
    } else {
      for (const auto& r : ep.reasons) fmt::print(out, "{}: FAIL {}\n", ep.name, r);
    }
  }
  fmt::print(out, "{} episodes checked, {} errors\n", report.episodes.size(), report.error_count());
  return report.ok() ? 0 : 2;
}

// ---------------------------------------------------------------- synth

struct SynthArgs {
  std::string scenario;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::optional<double> sigma_t;
  std::optional<double> sigma_r;
  std::optional<double> pixel_noise;
};

void cmd_synth(const SynthArgs& a, std::ostream& out) {
  synthgen::Scenario s = synthgen::default_scenario();
  if (!a.scenario.empty()) {
    s = synthgen::parse_scenario(demolog::read_text_file(a.scenario), fs::path(a.scenario).parent_path());
  }
  s.seed = a.seed;
  if (a.sigma_t) s.sigma_t_m = *a.sigma_t;
  if (a.sigma_r) s.sigma_r_rad = *a.sigma_r;
  if (a.pixel_noise) s.pixel_noise_px = *a.pixel_noise;
  s.validate();

  const auto gen = synthgen::generate(s);
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  demolog::write_log_file(gen.log, dir / "recording.log");
  demolog::write_log_file(gen.truth, dir / "truth.log");
  demolog::write_tum_file(demolog::pose_samples(gen.log), dir / "est.tum");
  demolog::write_tum_file(demolog::pose_samples(gen.truth), dir / "truth.tum");

  std::string widths = "t_ns,width_m\n";
  for (const auto& w : gen.widths) widths += fmt::format("{},{:.17g}\n", w.timestamp_ns, w.value);
  demolog::write_text_file(dir / "truth_widths.csv", widths);

  gripper::GripperConfig grip{{s.tags.side_m, s.tags.left_id, s.tags.right_id},
                              {s.tags.width_min_m, s.tags.width_max_m}};
  if (grip.calibration.w_max_m > grip.calibration.w_min_m) {
    demolog::write_text_file(dir / "gripper.cfg", gripper::format_gripper_config(grip));
  }
  if (s.joints) {
    demolog::write_text_file(dir / "handeye.txt", format_pose(s.joints->hand_eye) + "\n");
  }
  demolog::write_text_file(dir / "synth_manifest.txt",
                           fmt::format("prng={}\nseed={}\nduration_s={:.17g}\ncamera_rate_hz={:.17g}\n"
                                       "sigma_t_m={:.17g}\nsigma_r_rad={:.17g}\npixel_noise_px={:.17g}\n",
                                       synthgen::kPrngName, s.seed, s.duration_s, s.camera_rate_hz,
                                       s.sigma_t_m, s.sigma_r_rad, s.pixel_noise_px));
  fmt::print(out, "{} records ({} poses) written to {}\n", gen.log.records.size(),
             demolog::pose_samples(gen.log).size(), dir.string());
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Handheld demonstration post-processing and trajectory evaluation", "demoproc"};
  app.require_subcommand(1);
  app.fallthrough(false);

  InspectArgs inspect;
  auto* inspect_cmd = app.add_subcommand("inspect", "Per-channel record counts and time span of a log");
  inspect_cmd->add_option("log", inspect.log, "Recording log")->required()->check(CLI::ExistingFile);

  SegmentArgs segment;
  auto* segment_cmd = app.add_subcommand("segment", "Split a log into per-episode sub-logs");
  segment_cmd->add_option("log", segment.log, "Recording log")->required()->check(CLI::ExistingFile);
  segment_cmd->add_option("--out", segment.out_dir, "Output directory")->required();
  segment_cmd->add_option("--jobs", segment.jobs, "Worker threads")->check(CLI::PositiveNumber);

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "APE/RPE of an estimated against a reference trajectory");
  auto* est_opt = eval_cmd->add_option("--est", eval.est, "Estimated trajectory (TUM or log)")->check(CLI::ExistingFile);
  auto* ref_opt = eval_cmd->add_option("--ref", eval.ref, "Reference trajectory (TUM or log)")->check(CLI::ExistingFile);
  est_opt->needs(ref_opt);
  ref_opt->needs(est_opt);
  auto* align_opt = eval_cmd->add_option("--align", eval.align, "Alignment before APE: none | se3 | sim3")
                        ->check(CLI::IsMember({"none", "se3", "sim3"}));
  est_opt->needs(align_opt);
  eval_cmd->add_option("--rpe-delta", eval.rpe_delta, "RPE index gap")->check(CLI::PositiveNumber);
  eval_cmd->add_option("--tolerance-ms", eval.tolerance_ms, "Association tolerance");
  eval_cmd->add_flag("--rotation", eval.rotation, "Report rotation magnitudes (rad) instead of translation");
  eval_cmd->add_option("--label", eval.label, "Run label");
  eval_cmd->add_option("--out", eval.out_path, "Write the table to this file");
  eval_cmd->add_option("--kv", eval.kv_path, "Write key=value metrics to this file");
  eval_cmd->add_option("--metrics", eval.metrics, "Include runs from key=value metric files")
      ->check(CLI::ExistingFile);

  HandEyeArgs handeye;
  auto* handeye_cmd = app.add_subcommand("handeye", "Solve AX = XB from motion pairs");
  handeye_cmd->add_option("--pairs", handeye.pairs, "Motion pair CSV")->required()->check(CLI::ExistingFile);
  handeye_cmd->add_option("--out", handeye.out_path, "Write X (tx ty tz qx qy qz qw) to this file");

  FkArgs fk;
  auto* fk_cmd = app.add_subcommand("fk", "Camera reference trajectory from joint states");
  fk_cmd->add_option("--chain", fk.chain, "URDF file")->required()->check(CLI::ExistingFile);
  fk_cmd->add_option("--base", fk.base, "Base link")->required();
  fk_cmd->add_option("--tip", fk.tip, "Tip link")->required();
  fk_cmd->add_option("--joints", fk.joints, "Joint CSV or log")->required()->check(CLI::ExistingFile);
  fk_cmd->add_option("--handeye", fk.hand_eye, "Camera pose in tip frame: file or 'tx ty tz qx qy qz qw'");
  fk_cmd->add_option("--out", fk.out_path, "Output TUM file");

  GripperArgs grip;
  auto* grip_cmd = app.add_subcommand("gripper", "Gripper opening per frame from tag detections");
  grip_cmd->add_option("--log", grip.log, "Recording log")->required()->check(CLI::ExistingFile);
  grip_cmd->add_option("--config", grip.config, "Gripper config (key=value)")->required()->check(CLI::ExistingFile);
  grip_cmd->add_flag("--smooth", grip.smooth, "Moving median over 5 samples");
  grip_cmd->add_option("--out", grip.out_path, "Output CSV");

  ExportArgs exp;
  auto* export_cmd = app.add_subcommand("export", "Build an episode dataset from recording logs");
  export_cmd->add_option("--log", exp.logs, "Recording log (repeatable)")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--config", exp.config, "Gripper config (key=value)")->required()->check(CLI::ExistingFile);
  export_cmd->add_option("--out", exp.out_dir, "Dataset directory")->required();
  export_cmd->add_option("--rate", exp.rate_hz, "Resample rate (Hz)")->check(CLI::PositiveNumber);
  export_cmd->add_option("--tolerance-ms", exp.tolerance_ms, "Pose/gripper association tolerance");
  export_cmd->add_flag("--smooth", exp.smooth, "Moving median over 5 gripper samples");
  export_cmd->add_option("--jobs", exp.jobs, "Worker threads")->check(CLI::PositiveNumber);

  ValidateArgs validate;
  auto* validate_cmd = app.add_subcommand("validate", "Check an exported dataset");
  validate_cmd->add_option("dir", validate.dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic recording with ground truth");
  synth_cmd->add_option("--scenario", synth.scenario, "Scenario file")->check(CLI::ExistingFile);
  synth_cmd->add_option("--seed", synth.seed, "PRNG seed")->required();
  synth_cmd->add_option("--out", synth.out_dir, "Output directory")->required();
  synth_cmd->add_option("--sigma-t", synth.sigma_t, "Override translation noise (m)");
  synth_cmd->add_option("--sigma-r", synth.sigma_r, "Override rotation noise (rad)");
  synth_cmd->add_option("--pixel-noise", synth.pixel_noise, "Override corner noise (px)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    fmt::print(err, "demoproc: usage error: {}\n", e.what());
    return 1;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    if (*inspect_cmd) cmd_inspect(inspect, out, err);
    if (*segment_cmd) cmd_segment(segment, out, err);
    if (*eval_cmd) cmd_eval(eval, out, err);
    if (*handeye_cmd) cmd_handeye(handeye, out, err);
    if (*fk_cmd) cmd_fk(fk, out, err);
    if (*grip_cmd) cmd_gripper(grip, out, err);
    if (*export_cmd) cmd_export(exp, out, err);
    if (*validate_cmd) return cmd_validate(validate, out);
    if (*synth_cmd) cmd_synth(synth, out);
  } catch (const PreconditionError& e) {
    fmt::print(err, "demoproc {}: error: {}\n", name, e.what());
    return 1;
  } catch (const Error& e) {
    fmt::print(err, "demoproc {}: error: {}\n", name, e.what());
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    fmt::print(err, "demoproc {}: error: {}\n", name, e.what());
    return 2;
  }
  return 0;
}

}  // namespace demoproc::cli
