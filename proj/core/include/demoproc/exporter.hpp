#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "demoproc/demolog.hpp"
#include "demoproc/episodes.hpp"
#include "demoproc/gripper.hpp"

namespace demoproc::exporter {

inline constexpr int kFormatVersion = 1;
inline constexpr std::string_view kCsvHeader = "t_ns,x,y,z,qx,qy,qz,qw,gripper";

struct ExportEpisode {
  std::string source_log;
  std::uint64_t start_ns = 0;
  std::uint64_t end_ns = 0;
  std::vector<episodes::SyncedSample> samples;  // synced and resampled
  std::vector<demolog::Stamped<demolog::FrameMeta>> frames;
  std::size_t gripper_missing_frames = 0;
};

struct ExportOptions {
  double sample_rate_hz = episodes::kDefaultRateHz;
  gripper::GripperCalibration calibration;
  unsigned jobs = 1;
};

struct DatasetManifest {
  int format_version = kFormatVersion;
  std::size_t episode_count = 0;
  std::size_t skipped_episodes = 0;
  double sample_rate_hz = 0.0;
  std::string frame_convention;
  std::vector<std::string> source_logs;
  gripper::GripperCalibration calibration;
  std::vector<std::string> episode_dirs;
};

struct ExportResult {
  DatasetManifest manifest;
  Warnings warnings;
};

struct EpisodeRow {
  std::uint64_t timestamp_ns = 0;
  geom::Pose pose;  // relative to the episode's first pose
  double gripper = 0.0;
};

// Re-bases poses on the first sample and fills gripper gaps from the
// nearest observed state. Returns nothing if the episode has no gripper
// observation at all.
std::optional<std::vector<EpisodeRow>> episode_rows(std::span<const episodes::SyncedSample> samples);

std::string format_trajectory_csv(std::span<const EpisodeRow> rows);
// Throws FormatError on a bad header or row.
std::vector<EpisodeRow> parse_trajectory_csv(std::string_view text);

// Writes manifest.json and episode_%04d/{trajectory.csv,meta.json}. Episodes
// with fewer than 2 samples or no gripper data are skipped with a warning.
// Output bytes do not depend on options.jobs.
ExportResult export_dataset(std::span<const ExportEpisode> episodes,
                            const std::filesystem::path& destination, const ExportOptions& options);

struct EpisodeCheck {
  std::string name;
  bool ok = true;
  std::vector<std::string> reasons;
};

struct ValidationReport {
  std::vector<std::string> errors;  // dataset-level
  std::vector<EpisodeCheck> episodes;

  bool ok() const;
  std::size_t error_count() const;
};

// Throws FormatError if manifest.json is missing or unreadable.
ValidationReport validate_dataset(const std::filesystem::path& directory);

}  // namespace demoproc::exporter
