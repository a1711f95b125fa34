#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "demoproc/calib.hpp"
#include "demoproc/demolog.hpp"
#include "demoproc/geom.hpp"

namespace demoproc::trajeval {

struct TrajectoryPair {
  std::vector<demolog::PoseSample> est;
  std::vector<demolog::PoseSample> ref;
  // (est index, ref index), in est order.
  std::vector<std::pair<std::size_t, std::size_t>> association;

  // Throws PreconditionError if an index is out of range.
  void validate() const;
};

// Pairs every est sample with its nearest ref sample within tolerance;
// unmatched est samples are dropped.
TrajectoryPair associate(std::vector<demolog::PoseSample> est,
                         std::vector<demolog::PoseSample> ref, std::uint64_t tolerance_ns);

struct ErrorSample {
  std::size_t i = 0;
  std::size_t j = 0;  // == i for APE
  geom::Pose error;
  double translation = 0.0;  // m
  double rotation = 0.0;     // rad
};

// E_i = P_est,i^-1 P_ref,i after the alignment is applied to est.
std::vector<ErrorSample> ape(const TrajectoryPair& pair, const calib::AlignmentResult& alignment);
inline std::vector<ErrorSample> ape(const TrajectoryPair& pair) {
  return ape(pair, calib::AlignmentResult{});
}

// E_ij = (P_ref,i^-1 P_ref,j)^-1 (P_est,i^-1 P_est,j) with j = i + delta.
std::vector<ErrorSample> rpe(const TrajectoryPair& pair, std::size_t delta = 1);

// Aligns est onto ref using the associated positions.
calib::AlignmentResult align_pair(const TrajectoryPair& pair, calib::AlignMode mode);

enum class Metric { Translation, Rotation };

std::vector<double> magnitudes(std::span<const ErrorSample> samples, Metric metric);

struct ErrorStats {
  double rmse = 0.0;
  double mean = 0.0;
  double median = 0.0;
  double std = 0.0;  // population
};

ErrorStats stats(std::span<const double> samples);

struct RunMetrics {
  std::string label;
  ErrorStats ape;
  ErrorStats rpe;
};

// Fixed-width table with APE and RPE column groups and an Average row.
std::string report_table(std::span<const RunMetrics> runs, Metric metric = Metric::Translation);

// One "label.group.metric=value" line per metric, 17 significant digits.
std::string report_key_values(std::span<const RunMetrics> runs);
// Inverse of report_key_values; runs come back in first-appearance order.
std::vector<RunMetrics> parse_key_values(std::string_view text);

}  // namespace demoproc::trajeval
