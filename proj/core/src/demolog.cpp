#include "demoproc/demolog.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cctype>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace demoproc::demolog {
namespace {

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { little_endian(v, 2); }
  void u32(std::uint32_t v) { little_endian(v, 4); }
  void u64(std::uint64_t v) { little_endian(v, 8); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void vec(const Eigen::Ref<const Eigen::VectorXd>& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) f64(v[i]);
  }
  void bytes(std::string_view s) { out_.insert(out_.end(), s.begin(), s.end()); }

 private:
  void little_endian(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }

  std::vector<std::uint8_t>& out_;
};

// Bounded reader over one payload. Reads past the end are format errors;
// truncation of the stream itself is detected before a payload is sliced.
class PayloadReader {
 public:
  PayloadReader(std::span<const std::uint8_t> data, std::size_t base_offset, Channel channel)
      : data_(data), base_(base_offset), channel_(channel) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(take(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(take(4)); }
  std::uint64_t u64() { return take(8); }
  double f64() { return std::bit_cast<double>(take(8)); }
  double finite_f64() {
    const double v = f64();
    if (!std::isfinite(v)) fail("non-finite value");
    return v;
  }
  std::string text(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  void expect_consumed() const {
    if (pos_ != data_.size()) fail("payload length mismatch");
  }

  [[noreturn]] void fail(std::string_view why) const {
    throw FormatError(fmt::format("{} record at byte offset {}: {}", channel_name(channel_),
                                  base_, why));
  }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) fail("payload length mismatch");
  }
  std::uint64_t take(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= std::uint64_t{data_[pos_ + i]} << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }

  std::span<const std::uint8_t> data_;
  std::size_t base_;
  Channel channel_;
  std::size_t pos_ = 0;
};

struct PayloadSize {
  std::size_t operator()(const ButtonEvent&) const { return 1; }
  std::size_t operator()(const ImuSample&) const { return 6 * 8; }
  std::size_t operator()(const JointState& j) const { return 2 + 8 * j.positions.size(); }
  std::size_t operator()(const TagDetection&) const { return 4 + 8 * 8; }
  std::size_t operator()(const geom::Pose&) const { return 7 * 8; }
  std::size_t operator()(const CameraIntrinsics&) const { return 4 * 8 + 4 + 4 + 5 * 8 + 8; }
  std::size_t operator()(const FrameMeta& f) const { return 8 + 2 + f.path.size(); }
};

struct PayloadEncoder {
  ByteWriter& w;

  void operator()(const ButtonEvent& b) const { w.u8(static_cast<std::uint8_t>(b.kind)); }
  void operator()(const ImuSample& s) const {
    w.vec(s.accel);
    w.vec(s.gyro);
  }
  void operator()(const JointState& j) const {
    w.u16(static_cast<std::uint16_t>(j.positions.size()));
    for (double q : j.positions) w.f64(q);
  }
  void operator()(const TagDetection& t) const {
    w.u32(t.tag_id);
    for (const auto& c : t.corners) w.vec(c);
  }
  void operator()(const geom::Pose& p) const {
    w.vec(p.translation);
    w.f64(p.rotation.x());
    w.f64(p.rotation.y());
    w.f64(p.rotation.z());
    w.f64(p.rotation.w());
  }
  void operator()(const CameraIntrinsics& c) const {
    w.f64(c.fx);
    w.f64(c.fy);
    w.f64(c.cx);
    w.f64(c.cy);
    w.u32(c.width);
    w.u32(c.height);
    for (double d : c.distortion) w.f64(d);
    w.f64(c.baseline_m);
  }
  void operator()(const FrameMeta& f) const {
    w.u64(f.frame_index);
    w.u16(static_cast<std::uint16_t>(f.path.size()));
    w.bytes(f.path);
  }
};

void check_encodable(const Record& r) {
  if (const auto* j = std::get_if<JointState>(&r.payload);
      j && j->positions.size() > 0xFFFF) {
    throw PreconditionError("joint state has more than 65535 positions");
  }
  if (const auto* f = std::get_if<FrameMeta>(&r.payload); f && f->path.size() > 0xFFFF) {
    throw PreconditionError("frame path longer than 65535 bytes");
  }
}

geom::Vec3 read_vec3(PayloadReader& r) {
  const double x = r.finite_f64();
  const double y = r.finite_f64();
  const double z = r.finite_f64();
  return {x, y, z};
}

Payload decode_payload(Channel channel, PayloadReader& r) {
  switch (channel) {
    case Channel::Button: {
      const std::uint8_t kind = r.u8();
      if (kind > 1) r.fail(fmt::format("invalid button kind {}", kind));
      return ButtonEvent{static_cast<ButtonKind>(kind)};
    }
    case Channel::Imu: {
      ImuSample s;
      s.accel = read_vec3(r);
      s.gyro = read_vec3(r);
      return s;
    }
    case Channel::JointState: {
      JointState j;
      const std::uint16_t n = r.u16();
      j.positions.reserve(n);
      for (std::uint16_t i = 0; i < n; ++i) j.positions.push_back(r.finite_f64());
      return j;
    }
    case Channel::TagDetection: {
      TagDetection t;
      t.tag_id = r.u32();
      for (auto& c : t.corners) {
        const double u = r.finite_f64();
        const double v = r.finite_f64();
        c = {u, v};
      }
      return t;
    }
    case Channel::Pose: {
      const geom::Vec3 t = read_vec3(r);
      const double qx = r.finite_f64();
      const double qy = r.finite_f64();
      const double qz = r.finite_f64();
      const double qw = r.finite_f64();
      const double n = std::sqrt(qx * qx + qy * qy + qz * qz + qw * qw);
      if (!(n > 0.0)) r.fail("zero quaternion");
      return geom::Pose{geom::Rotation::from_quaternion(qx, qy, qz, qw), t};
    }
    case Channel::CameraIntrinsics: {
      CameraIntrinsics c;
      c.fx = r.finite_f64();
      c.fy = r.finite_f64();
      c.cx = r.finite_f64();
      c.cy = r.finite_f64();
      c.width = r.u32();
      c.height = r.u32();
      for (double& d : c.distortion) d = r.finite_f64();
      c.baseline_m = r.finite_f64();
      return c;
    }
    case Channel::FrameMeta: {
      FrameMeta f;
      f.frame_index = r.u64();
      const std::uint16_t len = r.u16();
      f.path = r.text(len);
      return f;
    }
  }
  r.fail("unknown channel");
}

bool known_channel(std::uint8_t tag) { return tag >= 0x01 && tag <= 0x07; }

template <typename T>
std::vector<Stamped<T>> collect(const LogFile& log) {
  std::vector<Stamped<T>> out;
  for (const auto& r : log.records) {
    if (const auto* v = std::get_if<T>(&r.payload)) out.push_back({r.timestamp_ns, *v});
  }
  return out;
}

}  // namespace

std::string_view channel_name(Channel c) {
  switch (c) {
    case Channel::Button: return "button";
    case Channel::Imu: return "imu";
    case Channel::JointState: return "joint_state";
    case Channel::TagDetection: return "tag_detection";
    case Channel::Pose: return "pose";
    case Channel::CameraIntrinsics: return "camera_intrinsics";
    case Channel::FrameMeta: return "frame_meta";
  }
  return "unknown";
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0 && fy > 0.0)) throw ConfigurationError("focal lengths must be positive");
  if (width == 0 || height == 0) throw ConfigurationError("image size must be positive");
}

Channel Record::channel() const { return static_cast<Channel>(payload.index() + 1); }

std::vector<PoseSample> pose_samples(const LogFile& log) {
  std::vector<PoseSample> out;
  for (const auto& r : log.records) {
    if (const auto* p = std::get_if<geom::Pose>(&r.payload)) out.push_back({r.timestamp_ns, *p});
  }
  return out;
}

std::vector<Stamped<ButtonEvent>> button_events(const LogFile& log) {
  return collect<ButtonEvent>(log);
}
std::vector<Stamped<TagDetection>> tag_detections(const LogFile& log) {
  return collect<TagDetection>(log);
}
std::vector<Stamped<JointState>> joint_states(const LogFile& log) {
  return collect<JointState>(log);
}
std::vector<Stamped<FrameMeta>> frame_metas(const LogFile& log) {
  return collect<FrameMeta>(log);
}

const CameraIntrinsics* find_intrinsics(const LogFile& log) {
  const CameraIntrinsics* found = nullptr;
  for (const auto& r : log.records) {
    if (const auto* c = std::get_if<CameraIntrinsics>(&r.payload)) found = c;
  }
  return found;
}

std::size_t encoded_size(const LogFile& log) {
  std::size_t n = kHeaderSize;
  for (const auto& r : log.records) n += kRecordHeaderSize + std::visit(PayloadSize{}, r.payload);
  return n;
}

std::vector<std::uint8_t> encode_log(const LogFile& log) {
  std::vector<std::uint8_t> out;
  out.reserve(encoded_size(log));
  ByteWriter w(out);
  w.bytes(kMagic);
  w.u16(log.version);
  for (const auto& r : log.records) {
    check_encodable(r);
    w.u8(static_cast<std::uint8_t>(r.channel()));
    w.u64(r.timestamp_ns);
    w.u32(static_cast<std::uint32_t>(std::visit(PayloadSize{}, r.payload)));
    std::visit(PayloadEncoder{w}, r.payload);
  }
  return out;
}

std::size_t write_log(const LogFile& log, std::ostream& out) {
  const auto bytes = encode_log(log);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed to write log stream");
  return bytes.size();
}

void write_log_file(const LogFile& log, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  write_log(log, out);
  out.close();
  if (!out) throw IoError(fmt::format("failed to write {}", path.string()));
}

ReadResult read_log(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kMagic.size() ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0) {
    throw FormatError(fmt::format("bad magic: expected \"{}\"", kMagic));
  }
  if (bytes.size() < kHeaderSize) {
    throw TruncationError("truncated header at byte offset 8", 8, 0);
  }
  ReadResult result;
  result.log.version = static_cast<std::uint16_t>(bytes[8] | (bytes[9] << 8));
  if (result.log.version != kVersion) {
    throw FormatError(fmt::format("unsupported version {} (expected {})", result.log.version,
                                  kVersion));
  }

  std::map<std::uint8_t, std::uint64_t> last_time;
  std::size_t pos = kHeaderSize;
  while (pos < bytes.size()) {
    const std::size_t record_start = pos;
    const std::uint8_t tag = bytes[pos];
    if (bytes.size() - pos < kRecordHeaderSize) {
      throw TruncationError(
          fmt::format("truncated record header at byte offset {} (channel 0x{:02x})",
                      record_start, tag),
          record_start, tag);
    }
    PayloadReader header(bytes.subspan(pos + 1, 12), record_start, static_cast<Channel>(tag));
    const std::uint64_t timestamp = header.u64();
    const std::uint32_t len = header.u32();
    pos += kRecordHeaderSize;
    if (bytes.size() - pos < len) {
      throw TruncationError(
          fmt::format("truncated payload at byte offset {} (channel 0x{:02x}): need {} bytes, "
                      "{} available",
                      pos, tag, len, bytes.size() - pos),
          pos, tag);
    }
    const auto payload = bytes.subspan(pos, len);
    pos += len;

    if (!known_channel(tag)) {
      result.warnings.push_back(fmt::format(
          "skipped record with unknown channel 0x{:02x} at byte offset {}", tag, record_start));
      continue;
    }
    const auto channel = static_cast<Channel>(tag);
    PayloadReader reader(payload, record_start, channel);
    Record record{timestamp, decode_payload(channel, reader)};
    reader.expect_consumed();

    auto [it, inserted] = last_time.try_emplace(tag, timestamp);
    if (!inserted) {
      if (timestamp < it->second) {
        result.warnings.push_back(
            fmt::format("{} timestamp decreases at byte offset {} ({} < {})",
                        channel_name(channel), record_start, timestamp, it->second));
      }
      it->second = timestamp;
    }
    result.log.records.push_back(std::move(record));
  }
  return result;
}

ReadResult read_log(std::istream& in) {
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed to read log stream");
  return read_log(std::span<const std::uint8_t>(bytes));
}

ReadResult read_log_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  return read_log(in);
}

namespace {

[[noreturn]] void tum_fail(std::size_t line, std::string_view why) {
  throw FormatError(fmt::format("TUM line {}: {}", line, why));
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    const std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

double parse_double(std::string_view token, std::size_t line) {
  double v = 0.0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (ec != std::errc{} || ptr != end) tum_fail(line, fmt::format("invalid number '{}'", token));
  if (!std::isfinite(v)) tum_fail(line, fmt::format("non-finite value '{}'", token));
  return v;
}

// Plain decimal seconds are converted digit-exactly so nanosecond stamps
// survive a round trip; anything else goes through double.
std::uint64_t parse_seconds(std::string_view token, std::size_t line) {
  const bool plain = !token.empty() && token.find_first_not_of("0123456789.") ==
                                           std::string_view::npos &&
                     std::count(token.begin(), token.end(), '.') <= 1 && token != ".";
  if (!plain) {
    const double s = parse_double(token, line);
    if (s < 0.0) tum_fail(line, "negative timestamp");
    const double ns = std::round(s * 1e9);
    if (ns >= 18446744073709551615.0) tum_fail(line, "timestamp out of range");
    return static_cast<std::uint64_t>(ns);
  }
  const auto dot = token.find('.');
  const std::string_view whole = token.substr(0, dot);
  std::string_view frac = dot == std::string_view::npos ? std::string_view{} : token.substr(dot + 1);
  std::uint64_t sec = 0;
  if (!whole.empty()) {
    auto [ptr, ec] = std::from_chars(whole.data(), whole.data() + whole.size(), sec);
    if (ec != std::errc{} || sec > 18'000'000'000ULL) tum_fail(line, "timestamp out of range");
  }
  std::uint64_t ns = 0;
  for (std::size_t i = 0; i < 9; ++i) {
    ns = ns * 10 + (i < frac.size() ? static_cast<std::uint64_t>(frac[i] - '0') : 0);
  }
  if (frac.size() > 9) {
    // Round half up on the remaining digits.
    if (frac[9] >= '5') ++ns;
  }
  return sec * 1'000'000'000ULL + ns;
}

}  // namespace

std::vector<PoseSample> import_tum(std::string_view text) {
  std::vector<PoseSample> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto fields = split_ws(line);
    if (fields.empty() || fields.front().front() == '#') continue;
    if (fields.size() != 8) {
      tum_fail(line_no, fmt::format("expected 8 fields, found {}", fields.size()));
    }
    PoseSample s;
    s.timestamp_ns = parse_seconds(fields[0], line_no);
    double v[7];
    for (int i = 0; i < 7; ++i) v[i] = parse_double(fields[i + 1], line_no);
    if (v[3] == 0.0 && v[4] == 0.0 && v[5] == 0.0 && v[6] == 0.0) {
      tum_fail(line_no, "zero quaternion");
    }
    s.pose = {geom::Rotation::from_quaternion(v[3], v[4], v[5], v[6]), {v[0], v[1], v[2]}};
    out.push_back(s);
  }
  return out;
}

std::string export_tum(std::span<const PoseSample> samples) {
  std::string out;
  for (const auto& s : samples) {
    const auto& t = s.pose.translation;
    const auto& r = s.pose.rotation;
    fmt::format_to(std::back_inserter(out), "{}.{:09d} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g} {:.17g}\n",
                   s.timestamp_ns / 1'000'000'000ULL, s.timestamp_ns % 1'000'000'000ULL, t.x(),
                   t.y(), t.z(), r.x(), r.y(), r.z(), r.w());
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open {}", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError(fmt::format("failed to read {}", path.string()));
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(fmt::format("cannot open {} for writing", path.string()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.close();
  if (!out) throw IoError(fmt::format("failed to write {}", path.string()));
}

std::vector<PoseSample> read_tum_file(const std::filesystem::path& path) {
  return import_tum(read_text_file(path));
}

void write_tum_file(std::span<const PoseSample> samples, const std::filesystem::path& path) {
  write_text_file(path, export_tum(samples));
}

}  // namespace demoproc::demolog
