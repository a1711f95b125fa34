#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "demoproc/error.hpp"
#include "demoproc/geom.hpp"

namespace demoproc::demolog {

// Container layout, all little-endian:
//   magic "SROILOG1" (8 bytes), version u16 = 1,
//   then records: channel u8, timestamp_ns u64, payload_len u32, payload.
inline constexpr std::string_view kMagic = "SROILOG1";
inline constexpr std::uint16_t kVersion = 1;
inline constexpr std::size_t kHeaderSize = 10;
inline constexpr std::size_t kRecordHeaderSize = 13;

enum class Channel : std::uint8_t {
  Button = 0x01,
  Imu = 0x02,
  JointState = 0x03,
  TagDetection = 0x04,
  Pose = 0x05,
  CameraIntrinsics = 0x06,
  FrameMeta = 0x07,
};

std::string_view channel_name(Channel c);

enum class ButtonKind : std::uint8_t { ShortPress = 0, LongPress = 1 };

struct ButtonEvent {
  ButtonKind kind = ButtonKind::ShortPress;
  bool operator==(const ButtonEvent&) const = default;
};

struct ImuSample {
  geom::Vec3 accel = geom::Vec3::Zero();  // m/s^2
  geom::Vec3 gyro = geom::Vec3::Zero();   // rad/s
  bool operator==(const ImuSample& o) const { return accel == o.accel && gyro == o.gyro; }
};

struct JointState {
  std::vector<double> positions;  // rad or m, chain order
  bool operator==(const JointState&) const = default;
};

// Corners ordered top-left, top-right, bottom-right, bottom-left in the tag frame.
struct TagDetection {
  std::uint32_t tag_id = 0;
  std::array<geom::Vec2, 4> corners{geom::Vec2::Zero(), geom::Vec2::Zero(), geom::Vec2::Zero(),
                                    geom::Vec2::Zero()};
  bool operator==(const TagDetection& o) const {
    return tag_id == o.tag_id && corners[0] == o.corners[0] && corners[1] == o.corners[1] &&
           corners[2] == o.corners[2] && corners[3] == o.corners[3];
  }
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  std::uint32_t width = 1;
  std::uint32_t height = 1;
  std::array<double, 5> distortion{};  // k1 k2 p1 p2 k3
  double baseline_m = 0.0;
  bool operator==(const CameraIntrinsics&) const = default;

  // Throws ConfigurationError unless fx, fy, width and height are positive.
  void validate() const;
};

struct FrameMeta {
  std::uint64_t frame_index = 0;
  std::string path;
  bool operator==(const FrameMeta&) const = default;
};

using Payload = std::variant<ButtonEvent, ImuSample, JointState, TagDetection, geom::Pose,
                             CameraIntrinsics, FrameMeta>;

struct Record {
  std::uint64_t timestamp_ns = 0;
  Payload payload;

  Channel channel() const;
  bool operator==(const Record&) const = default;
};

struct LogFile {
  std::uint16_t version = kVersion;
  std::vector<Record> records;
  bool operator==(const LogFile&) const = default;
};

struct PoseSample {
  std::uint64_t timestamp_ns = 0;
  geom::Pose pose;
  bool operator==(const PoseSample&) const = default;
};

template <typename T>
struct Stamped {
  std::uint64_t timestamp_ns = 0;
  T value;
};

// Typed channel views, in log order.
std::vector<PoseSample> pose_samples(const LogFile& log);
std::vector<Stamped<ButtonEvent>> button_events(const LogFile& log);
std::vector<Stamped<TagDetection>> tag_detections(const LogFile& log);
std::vector<Stamped<JointState>> joint_states(const LogFile& log);
std::vector<Stamped<FrameMeta>> frame_metas(const LogFile& log);
// Last intrinsics record, if any.
const CameraIntrinsics* find_intrinsics(const LogFile& log);

std::size_t encoded_size(const LogFile& log);
std::vector<std::uint8_t> encode_log(const LogFile& log);
// Returns the number of bytes written. Throws IoError if the sink fails.
std::size_t write_log(const LogFile& log, std::ostream& out);
void write_log_file(const LogFile& log, const std::filesystem::path& path);

struct ReadResult {
  LogFile log;
  Warnings warnings;
};

// Throws FormatError on a bad header or malformed payload and
// TruncationError when a record runs past the end of the input. Unknown
// channels are skipped with a warning; so are timestamp regressions.
ReadResult read_log(std::span<const std::uint8_t> bytes);
ReadResult read_log(std::istream& in);
ReadResult read_log_file(const std::filesystem::path& path);

// TUM trajectory text: "t tx ty tz qx qy qz qw" per line, t in seconds,
// '#' starts a comment line.
std::vector<PoseSample> import_tum(std::string_view text);
std::string export_tum(std::span<const PoseSample> samples);
std::vector<PoseSample> read_tum_file(const std::filesystem::path& path);
void write_tum_file(std::span<const PoseSample> samples, const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace demoproc::demolog
