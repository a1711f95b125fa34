#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "demoproc/demolog.hpp"
#include "demoproc/error.hpp"
#include "demoproc/gripper.hpp"

namespace demoproc::episodes {

inline constexpr std::uint64_t kDefaultToleranceNs = 50'000'000;  // 1.5 frames at 30 FPS
inline constexpr double kDefaultRateHz = 30.0;

struct Episode {
  std::uint64_t start_ns = 0;
  std::uint64_t end_ns = 0;
  std::vector<demolog::PoseSample> poses;
  std::vector<demolog::Stamped<demolog::TagDetection>> tags;
  std::vector<demolog::Stamped<demolog::JointState>> joints;
  std::vector<demolog::Stamped<demolog::FrameMeta>> frames;
};

struct Segmentation {
  std::vector<Episode> episodes;
  Warnings warnings;
};

// Long presses toggle a recording session; inside a session consecutive
// short presses pair up as (start, end). Session bounds exclude the long
// presses themselves. Stray and unpaired presses produce warnings.
Segmentation segment_episodes(const demolog::LogFile& log);

// Records with timestamps in [start, end] plus every camera-intrinsics record.
demolog::LogFile slice_log(const demolog::LogFile& log, std::uint64_t start_ns,
                           std::uint64_t end_ns);

struct Match {
  std::size_t a = 0;
  std::optional<std::size_t> b;  // empty when nothing lies within tolerance
};

// Nearest B for every A; ties go to the earlier B. Both inputs must be
// sorted, otherwise PreconditionError.
std::vector<Match> associate_nearest(std::span<const std::uint64_t> a,
                                     std::span<const std::uint64_t> b, std::uint64_t tolerance_ns);

// Uniform grid from the first to the last timestamp inclusive.
std::vector<demolog::PoseSample> resample_poses(std::span<const demolog::PoseSample> poses,
                                                double rate_hz);

struct SyncedSample {
  std::uint64_t timestamp_ns = 0;
  geom::Pose pose;
  std::optional<double> gripper_width_m;
  std::optional<double> gripper_state;
};

// Attaches the nearest gripper sample within tolerance to each pose.
std::vector<SyncedSample> synchronize(std::span<const demolog::PoseSample> poses,
                                      std::span<const gripper::GripperStateSample> gripper,
                                      std::uint64_t tolerance_ns = kDefaultToleranceNs);

template <typename T>
std::vector<std::uint64_t> timestamps(std::span<const T> items) {
  std::vector<std::uint64_t> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(item.timestamp_ns);
  return out;
}

}  // namespace demoproc::episodes
