#include "demoproc/exporter.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <atomic>
#include <charconv>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace demoproc::exporter {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::string_view kFrameConvention =
    "camera poses relative to the first pose of each episode: T_first^-1 * T_t; "
    "translation in meters, quaternion (qx,qy,qz,qw); gripper state 0=closed 1=open";

std::string episode_dir_name(std::size_t index) { return fmt::format("episode_{:04d}", index); }

// A CSV row as written, without any renormalization.
struct RawRow {
  std::uint64_t timestamp_ns = 0;
  std::array<double, 8> v{};  // x y z qx qy qz qw gripper
};

std::vector<RawRow> parse_raw_csv(std::string_view text) {
  std::vector<RawRow> rows;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!header_seen) {
      if (line != kCsvHeader) {
        throw FormatError(fmt::format("trajectory.csv: expected header \"{}\"", kCsvHeader));
      }
      header_seen = true;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string_view> fields;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      fields.push_back(line.substr(pos, comma - pos));
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (fields.size() != 9) {
      throw FormatError(
          fmt::format("trajectory.csv line {}: expected 9 fields, found {}", line_no, fields.size()));
    }
    RawRow row;
    auto [p0, e0] = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), row.timestamp_ns);
    if (e0 != std::errc{} || p0 != fields[0].data() + fields[0].size()) {
      throw FormatError(fmt::format("trajectory.csv line {}: invalid timestamp", line_no));
    }
    for (std::size_t k = 0; k < 8; ++k) {
      const auto f = fields[k + 1];
      auto [p, e] = std::from_chars(f.data(), f.data() + f.size(), row.v[k]);
      if (e != std::errc{} || p != f.data() + f.size() || !std::isfinite(row.v[k])) {
        throw FormatError(fmt::format("trajectory.csv line {}: invalid number '{}'", line_no, f));
      }
    }
    rows.push_back(row);
  }
  if (!header_seen) throw FormatError("trajectory.csv is empty");
  return rows;
}

json read_json(const fs::path& path) {
  try {
    return json::parse(demolog::read_text_file(path));
  } catch (const json::exception& e) {
    throw FormatError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

}  // namespace

std::optional<std::vector<EpisodeRow>> episode_rows(std::span<const episodes::SyncedSample> samples) {
  std::vector<std::size_t> observed;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].gripper_state) observed.push_back(i);
  }
  if (samples.empty() || observed.empty()) return std::nullopt;

  std::vector<EpisodeRow> rows;
  rows.reserve(samples.size());
  const geom::Pose& first = samples.front().pose;
  std::size_t next = 0;  // first observed index >= i
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EpisodeRow row;
    row.timestamp_ns = samples[i].timestamp_ns;
    row.pose = i == 0 ? geom::Pose::identity() : geom::relative(first, samples[i].pose);
    if (samples[i].gripper_state) {
      row.gripper = *samples[i].gripper_state;
    } else {
      while (next < observed.size() && observed[next] < i) ++next;
      std::size_t pick;
      if (next == observed.size()) {
        pick = observed.back();
      } else if (next == 0) {
        pick = observed.front();
      } else {
        const std::size_t before = observed[next - 1];
        const std::size_t after = observed[next];
        const auto dt_before = samples[i].timestamp_ns - samples[before].timestamp_ns;
        const auto dt_after = samples[after].timestamp_ns - samples[i].timestamp_ns;
        pick = dt_after < dt_before ? after : before;
      }
      row.gripper = *samples[pick].gripper_state;
    }
    rows.push_back(row);
  }
  return rows;
}

std::string format_trajectory_csv(std::span<const EpisodeRow> rows) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& r : rows) {
    const auto& t = r.pose.translation;
    const auto& q = r.pose.rotation;
    fmt::format_to(std::back_inserter(out),
                   "{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n",
                   r.timestamp_ns, t.x(), t.y(), t.z(), q.x(), q.y(), q.z(), q.w(), r.gripper);
  }
  return out;
}

std::vector<EpisodeRow> parse_trajectory_csv(std::string_view text) {
  std::vector<EpisodeRow> out;
  for (const auto& raw : parse_raw_csv(text)) {
    const auto& v = raw.v;
    if (v[3] == 0.0 && v[4] == 0.0 && v[5] == 0.0 && v[6] == 0.0) {
      throw FormatError("trajectory.csv: zero quaternion");
    }
    out.push_back({raw.timestamp_ns,
                   {geom::Rotation::from_quaternion(v[3], v[4], v[5], v[6]), {v[0], v[1], v[2]}},
                   v[7]});
  }
  return out;
}

ExportResult export_dataset(std::span<const ExportEpisode> episodes, const fs::path& destination,
                            const ExportOptions& options) {
  options.calibration.validate();
  ExportResult result;
  auto& manifest = result.manifest;
  manifest.sample_rate_hz = options.sample_rate_hz;
  manifest.frame_convention = std::string(kFrameConvention);
  manifest.calibration = options.calibration;

  struct Job {
    std::size_t source_index;
    std::string dir;
    std::vector<EpisodeRow> rows;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    const auto& ep = episodes[i];
    if (!ep.source_log.empty() &&
        std::find(manifest.source_logs.begin(), manifest.source_logs.end(), ep.source_log) ==
            manifest.source_logs.end()) {
      manifest.source_logs.push_back(ep.source_log);
    }
    if (ep.samples.size() < 2) {
      result.warnings.push_back(
          fmt::format("episode {} skipped: {} synced sample(s), need at least 2", i, ep.samples.size()));
      ++manifest.skipped_episodes;
      continue;
    }
    auto rows = episode_rows(ep.samples);
    if (!rows) {
      result.warnings.push_back(fmt::format("episode {} skipped: no gripper observations", i));
      ++manifest.skipped_episodes;
      continue;
    }
    jobs.push_back({i, episode_dir_name(jobs.size()), std::move(*rows)});
  }

  std::error_code ec;
  fs::create_directories(destination, ec);
  if (ec) {
    throw IoError(fmt::format("cannot create {}: {}", destination.string(), ec.message()));
  }

  auto write_one = [&](const Job& job) {
    const auto& ep = episodes[job.source_index];
    const fs::path dir = destination / job.dir;
    std::error_code dir_ec;
    fs::create_directories(dir, dir_ec);
    if (dir_ec) throw IoError(fmt::format("cannot create {}: {}", dir.string(), dir_ec.message()));
    demolog::write_text_file(dir / "trajectory.csv", format_trajectory_csv(job.rows));

    json frames = json::array();
    for (const auto& f : ep.frames) {
      frames.push_back({{"t_ns", f.timestamp_ns}, {"frame_index", f.value.frame_index}, {"path", f.value.path}});
    }
    json meta = {{"episode", job.dir},
                 {"source_log", ep.source_log},
                 {"start_ns", ep.start_ns},
                 {"end_ns", ep.end_ns},
                 {"sample_count", job.rows.size()},
                 {"gripper_missing_frames", ep.gripper_missing_frames},
                 {"frames", std::move(frames)}};
    demolog::write_text_file(dir / "meta.json", meta.dump(2) + "\n");
  };

  const unsigned workers = std::clamp<unsigned>(options.jobs, 1, std::max<std::size_t>(jobs.size(), 1));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      try {
        write_one(jobs[k]);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  manifest.episode_count = jobs.size();
  for (const auto& j : jobs) manifest.episode_dirs.push_back(j.dir);

  const json doc = {{"format_version", manifest.format_version},
                    {"episode_count", manifest.episode_count},
                    {"skipped_episodes", manifest.skipped_episodes},
                    {"sample_rate_hz", manifest.sample_rate_hz},
                    {"frame_convention", manifest.frame_convention},
                    {"csv_header", kCsvHeader},
                    {"source_logs", manifest.source_logs},
                    {"gripper_calibration",
                     {{"w_min_m", manifest.calibration.w_min_m}, {"w_max_m", manifest.calibration.w_max_m}}},
                    {"episodes", manifest.episode_dirs}};
  demolog::write_text_file(destination / "manifest.json", doc.dump(2) + "\n");
  return result;
}

bool ValidationReport::ok() const { return error_count() == 0; }

std::size_t ValidationReport::error_count() const {
  std::size_t n = errors.size();
  for (const auto& e : episodes) n += e.reasons.size();
  return n;
}

namespace {

EpisodeCheck check_episode(const fs::path& dir) {
  EpisodeCheck check{dir.filename().string(), true, {}};
  auto fail = [&](std::string reason) {
    check.ok = false;
    check.reasons.push_back(std::move(reason));
  };
  std::vector<RawRow> rows;
  try {
    rows = parse_raw_csv(demolog::read_text_file(dir / "trajectory.csv"));
  } catch (const Error& e) {
    fail(e.what());
    return check;
  }
  if (rows.size() < 2) fail(fmt::format("only {} row(s)", rows.size()));

  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& v = rows[k].v;
    const double qn = std::sqrt(v[3] * v[3] + v[4] * v[4] + v[5] * v[5] + v[6] * v[6]);
    if (std::abs(qn - 1.0) > 1e-6) fail(fmt::format("quaternion norm {:.6g} at row {}", qn, k));
    if (!(v[7] >= 0.0 && v[7] <= 1.0)) fail(fmt::format("gripper state {} outside [0,1] at row {}", v[7], k));
    if (k > 0 && rows[k].timestamp_ns <= rows[k - 1].timestamp_ns) {
      fail(fmt::format("timestamps not strictly increasing at row {}", k));
    }
  }
  if (!rows.empty()) {
    const auto& v = rows.front().v;
    const double t_err = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    const double q_err = std::sqrt(v[3] * v[3] + v[4] * v[4] + v[5] * v[5]) + (1.0 - std::abs(v[6]));
    if (t_err > 1e-9 || std::abs(q_err) > 1e-9) fail("first pose is not identity");
  }

  try {
    const json meta = read_json(dir / "meta.json");
    if (!meta.contains("sample_count") || meta["sample_count"].get<std::size_t>() != rows.size()) {
      fail("meta.json sample_count does not match trajectory.csv");
    }
  } catch (const Error& e) {
    fail(e.what());
  } catch (const json::exception& e) {
    fail(fmt::format("meta.json: {}", e.what()));
  }
  return check;
}

}  // namespace

ValidationReport validate_dataset(const fs::path& directory) {
  const fs::path manifest_path = directory / "manifest.json";
  if (!fs::exists(manifest_path)) {
    throw FormatError(fmt::format("{} not found", manifest_path.string()));
  }
  const json manifest = read_json(manifest_path);

  ValidationReport report;
  std::vector<std::string> on_disk;
  for (const auto& entry : fs::directory_iterator(directory)) {
    const auto name = entry.path().filename().string();
    if (entry.is_directory() && name.rfind("episode_", 0) == 0) on_disk.push_back(name);
  }
  std::sort(on_disk.begin(), on_disk.end());

  try {
    if (manifest.at("format_version").get<int>() != kFormatVersion) {
      report.errors.push_back("unsupported manifest format_version");
    }
    const auto count = manifest.at("episode_count").get<std::size_t>();
    if (count != on_disk.size()) {
      report.errors.push_back(fmt::format(
          "manifest mismatch: manifest lists {} episode(s), found {} episode directories", count,
          on_disk.size()));
    }
    for (const auto& name : manifest.at("episodes")) {
      const auto s = name.get<std::string>();
      if (!std::binary_search(on_disk.begin(), on_disk.end(), s)) {
        report.errors.push_back(fmt::format("manifest mismatch: {} listed but missing", s));
      }
    }
    const auto& cal = manifest.at("gripper_calibration");
    gripper::GripperCalibration c{cal.at("w_min_m").get<double>(), cal.at("w_max_m").get<double>()};
    try {
      c.validate();
    } catch (const Error& e) {
      report.errors.push_back(e.what());
    }
  } catch (const json::exception& e) {
    report.errors.push_back(fmt::format("manifest.json: {}", e.what()));
  }

  for (const auto& name : on_disk) report.episodes.push_back(check_episode(directory / name));
  return report;
}

}  // namespace demoproc::exporter
