#include "demoproc/episodes.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace demoproc::episodes {
namespace {

double seconds(std::uint64_t ns) { return static_cast<double>(ns) * 1e-9; }

template <typename T>
void keep_window(std::vector<T>& items, std::uint64_t start, std::uint64_t end) {
  std::erase_if(items, [&](const T& s) { return s.timestamp_ns < start || s.timestamp_ns > end; });
  std::stable_sort(items.begin(), items.end(), [](const T& x, const T& y) {
    return x.timestamp_ns < y.timestamp_ns;
  });
}

template <typename Sequence>
bool is_sorted_ns(const Sequence& ts) {
  return std::is_sorted(ts.begin(), ts.end());
}

}  // namespace

Segmentation segment_episodes(const demolog::LogFile& log) {
  using demolog::ButtonKind;
  auto presses = demolog::button_events(log);
  std::stable_sort(presses.begin(), presses.end(), [](const auto& x, const auto& y) {
    if (x.timestamp_ns != y.timestamp_ns) return x.timestamp_ns < y.timestamp_ns;
    return x.value.kind < y.value.kind;
  });

  Segmentation out;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> windows;

  bool in_session = false;
  std::uint64_t session_start = 0;
  std::vector<std::uint64_t> shorts;

  auto close_session = [&](std::optional<std::uint64_t> stop) {
    if (stop) {
      // A short press sharing the stop timestamp is outside the session.
      while (!shorts.empty() && shorts.back() >= *stop) {
        out.warnings.push_back(fmt::format(
            "short press at {:.9f} s coincides with session stop; ignored", seconds(shorts.back())));
        shorts.pop_back();
      }
    }
    std::size_t i = 0;
    for (; i + 1 < shorts.size(); i += 2) {
      if (shorts[i] == shorts[i + 1]) {
        out.warnings.push_back(fmt::format("zero-length episode at {:.9f} s dropped",
                                           seconds(shorts[i])));
        continue;
      }
      windows.emplace_back(shorts[i], shorts[i + 1]);
    }
    if (i < shorts.size()) {
      out.warnings.push_back(fmt::format("unpaired short press at {:.9f} s dropped",
                                         seconds(shorts[i])));
    }
    shorts.clear();
    in_session = false;
  };

  for (const auto& press : presses) {
    const std::uint64_t t = press.timestamp_ns;
    if (press.value.kind == ButtonKind::LongPress) {
      if (in_session) {
        close_session(t);
      } else {
        in_session = true;
        session_start = t;
      }
      continue;
    }
    if (!in_session || t == session_start) {
      out.warnings.push_back(
          fmt::format("short press at {:.9f} s outside a recording session; ignored", seconds(t)));
      continue;
    }
    shorts.push_back(t);
  }
  if (in_session) {
    out.warnings.push_back(fmt::format(
        "recording session started at {:.9f} s was never stopped; closed at end of log",
        seconds(session_start)));
    close_session(std::nullopt);
  }

  const auto poses = demolog::pose_samples(log);
  const auto tags = demolog::tag_detections(log);
  const auto joints = demolog::joint_states(log);
  const auto frames = demolog::frame_metas(log);
  for (const auto& [start, end] : windows) {
    Episode e;
    e.start_ns = start;
    e.end_ns = end;
    e.poses = poses;
    e.tags = tags;
    e.joints = joints;
    e.frames = frames;
    keep_window(e.poses, start, end);
    keep_window(e.tags, start, end);
    keep_window(e.joints, start, end);
    keep_window(e.frames, start, end);
    out.episodes.push_back(std::move(e));
  }
  return out;
}

demolog::LogFile slice_log(const demolog::LogFile& log, std::uint64_t start_ns,
                           std::uint64_t end_ns) {
  demolog::LogFile out;
  out.version = log.version;
  for (const auto& r : log.records) {
    const bool in_window = r.timestamp_ns >= start_ns && r.timestamp_ns <= end_ns;
    if (in_window || r.channel() == demolog::Channel::CameraIntrinsics) out.records.push_back(r);
  }
  return out;
}

std::vector<Match> associate_nearest(std::span<const std::uint64_t> a,
                                     std::span<const std::uint64_t> b,
                                     std::uint64_t tolerance_ns) {
  if (!is_sorted_ns(a) || !is_sorted_ns(b)) {
    throw PreconditionError("association requires timestamp-sorted streams");
  }
  std::vector<Match> out;
  out.reserve(a.size());
  auto lo = b.begin();
  for (std::size_t i = 0; i < a.size(); ++i) {
    const std::uint64_t t = a[i];
    lo = std::lower_bound(lo, b.end(), t);
    Match m{i, std::nullopt};
    std::uint64_t best = 0;
    // The earlier neighbour is checked first so ties resolve to it.
    if (lo != b.begin()) {
      // First of any run of equal timestamps, so duplicates resolve to the earliest.
      const auto prev = std::lower_bound(b.begin(), lo, *std::prev(lo));
      best = t - *prev;
      m.b = static_cast<std::size_t>(prev - b.begin());
    }
    if (lo != b.end()) {
      const std::uint64_t d = *lo - t;
      if (!m.b || d < best) {
        best = d;
        m.b = static_cast<std::size_t>(lo - b.begin());
      }
    }
    if (m.b && best > tolerance_ns) m.b.reset();
    // lower_bound may have passed the previous element; step back one so
    // the next query still sees it.
    if (m.b) {
      lo = b.begin() + static_cast<std::ptrdiff_t>(*m.b);
    } else if (lo != b.begin()) {
      --lo;
    }
    out.push_back(m);
  }
  return out;
}

std::vector<demolog::PoseSample> resample_poses(std::span<const demolog::PoseSample> poses,
                                                double rate_hz) {
  if (poses.size() < 2) throw InsufficientDataError("resampling needs at least 2 pose samples");
  if (!(rate_hz > 0.0) || !std::isfinite(rate_hz)) {
    throw PreconditionError("resample rate must be positive");
  }
  const auto ts = timestamps(poses);
  if (!is_sorted_ns(ts)) throw PreconditionError("resampling requires timestamp-sorted poses");

  const std::uint64_t t0 = ts.front();
  const std::uint64_t t_last = ts.back();
  const double period_ns = 1e9 / rate_hz;

  std::vector<demolog::PoseSample> out;
  std::size_t j = 0;
  for (std::uint64_t k = 0;; ++k) {
    const std::uint64_t t = t0 + static_cast<std::uint64_t>(std::llround(static_cast<double>(k) * period_ns));
    if (t > t_last) break;
    while (j + 1 < ts.size() && ts[j + 1] <= t) ++j;
    if (ts[j] == t || j + 1 == ts.size()) {
      out.push_back({t, poses[j].pose});
      continue;
    }
    const double s = static_cast<double>(t - ts[j]) / static_cast<double>(ts[j + 1] - ts[j]);
    out.push_back({t, geom::interpolate(poses[j].pose, poses[j + 1].pose, s)});
  }
  return out;
}

std::vector<SyncedSample> synchronize(std::span<const demolog::PoseSample> poses,
                                      std::span<const gripper::GripperStateSample> gripper,
                                      std::uint64_t tolerance_ns) {
  const auto pose_ts = timestamps(poses);
  const auto grip_ts = timestamps(gripper);
  const auto matches = associate_nearest(pose_ts, grip_ts, tolerance_ns);
  std::vector<SyncedSample> out;
  out.reserve(poses.size());
  for (const auto& m : matches) {
    SyncedSample s{poses[m.a].timestamp_ns, poses[m.a].pose, std::nullopt, std::nullopt};
    if (m.b) {
      s.gripper_width_m = gripper[*m.b].width_m;
      s.gripper_state = gripper[*m.b].state;
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace demoproc::episodes
