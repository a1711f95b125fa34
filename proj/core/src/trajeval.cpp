#include "demoproc/trajeval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>

#include "demoproc/episodes.hpp"

namespace demoproc::trajeval {

void TrajectoryPair::validate() const {
  for (const auto& [e, r] : association) {
    if (e >= est.size() || r >= ref.size()) {
      throw PreconditionError("trajectory association index out of range");
    }
  }
}

TrajectoryPair associate(std::vector<demolog::PoseSample> est,
                         std::vector<demolog::PoseSample> ref, std::uint64_t tolerance_ns) {
  TrajectoryPair pair{std::move(est), std::move(ref), {}};
  const auto est_ts = episodes::timestamps(std::span<const demolog::PoseSample>(pair.est));
  const auto ref_ts = episodes::timestamps(std::span<const demolog::PoseSample>(pair.ref));
  for (const auto& m : episodes::associate_nearest(est_ts, ref_ts, tolerance_ns)) {
    if (m.b) pair.association.emplace_back(m.a, *m.b);
  }
  return pair;
}

std::vector<ErrorSample> ape(const TrajectoryPair& pair, const calib::AlignmentResult& alignment) {
  pair.validate();
  if (pair.association.empty()) throw InsufficientDataError("APE needs at least one associated pose pair");
  std::vector<ErrorSample> out;
  out.reserve(pair.association.size());
  for (std::size_t k = 0; k < pair.association.size(); ++k) {
    const auto& [e, r] = pair.association[k];
    const geom::Pose& est = pair.est[e].pose;
    const geom::Pose aligned{alignment.rotation * est.rotation, alignment.apply(est.translation)};
    ErrorSample s;
    s.i = s.j = k;
    s.error = geom::relative(aligned, pair.ref[r].pose);
    s.translation = s.error.translation.norm();
    s.rotation = geom::rotation_angle(s.error.rotation);
    out.push_back(s);
  }
  return out;
}

std::vector<ErrorSample> rpe(const TrajectoryPair& pair, std::size_t delta) {
  pair.validate();
  if (delta == 0) throw PreconditionError("RPE delta must be at least 1");
  const std::size_t n = pair.association.size();
  if (n <= delta) {
    throw InsufficientDataError(
        fmt::format("RPE with delta {} needs more than {} associated pairs, got {}", delta, delta, n));
  }
  std::vector<ErrorSample> out;
  out.reserve(n - delta);
  for (std::size_t i = 0; i + delta < n; ++i) {
    const std::size_t j = i + delta;
    const auto& [ei, ri] = pair.association[i];
    const auto& [ej, rj] = pair.association[j];
    const geom::Pose delta_ref = geom::relative(pair.ref[ri].pose, pair.ref[rj].pose);
    const geom::Pose delta_est = geom::relative(pair.est[ei].pose, pair.est[ej].pose);
    ErrorSample s;
    s.i = i;
    s.j = j;
    s.error = geom::relative(delta_ref, delta_est);
    s.translation = s.error.translation.norm();
    s.rotation = geom::rotation_angle(s.error.rotation);
    out.push_back(s);
  }
  return out;
}

calib::AlignmentResult align_pair(const TrajectoryPair& pair, calib::AlignMode mode) {
  pair.validate();
  std::vector<geom::Vec3> est;
  std::vector<geom::Vec3> ref;
  est.reserve(pair.association.size());
  ref.reserve(pair.association.size());
  for (const auto& [e, r] : pair.association) {
    est.push_back(pair.est[e].pose.translation);
    ref.push_back(pair.ref[r].pose.translation);
  }
  return calib::umeyama_align(est, ref, mode);
}

std::vector<double> magnitudes(std::span<const ErrorSample> samples, Metric metric) {
  std::vector<double> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(metric == Metric::Translation ? s.translation : s.rotation);
  return out;
}

ErrorStats stats(std::span<const double> samples) {
  if (samples.empty()) throw InsufficientDataError("statistics need at least one sample");
  const double n = static_cast<double>(samples.size());
  double sum = 0.0;
  double sum_sq = 0.0;
  for (double v : samples) {
    sum += v;
    sum_sq += v * v;
  }
  ErrorStats s;
  s.mean = sum / n;
  s.rmse = std::sqrt(sum_sq / n);
  double var = 0.0;
  for (double v : samples) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / n);

  std::vector<double> sorted(samples.begin(), samples.end());
  const std::size_t mid = sorted.size() / 2;
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid), sorted.end());
  s.median = sorted[mid];
  if (sorted.size() % 2 == 0) {
    const double lower = *std::max_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(mid));
    s.median = 0.5 * (lower + s.median);
  }
  return s;
}

namespace {

constexpr int kCol = 11;

std::string stats_cells(const ErrorStats& s) {
  return fmt::format("{:>{}.5f}{:>{}.5f}{:>{}.5f}{:>{}.5f}", s.rmse, kCol, s.mean, kCol, s.median,
                     kCol, s.std, kCol);
}

std::string sanitize(std::string_view label) {
  std::string out(label);
  for (char& c : out) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '=') c = '_';
  }
  return out.empty() ? std::string("run") : out;
}

}  // namespace

std::string report_table(std::span<const RunMetrics> runs, Metric metric) {
  std::size_t label_w = std::string_view("Average").size();
  for (const auto& r : runs) label_w = std::max(label_w, r.label.size());
  label_w += 2;

  const char* unit = metric == Metric::Translation ? "(m)" : "(rad)";
  const std::size_t group_w = 4 * kCol;
  const std::string sep = " |";
  const std::size_t total = label_w + 2 * group_w + sep.size();

  std::string out;
  auto rule = [&] { out += std::string(total, '-') + '\n'; };
  auto centered = [](std::string_view s, std::size_t w) {
    const std::size_t left = (w - s.size()) / 2;
    return std::string(left, ' ') + std::string(s) + std::string(w - left - s.size(), ' ');
  };

  rule();
  out += std::string(label_w, ' ') + centered("APE", group_w) + sep + centered("RPE", group_w);
  while (!out.empty() && out.back() == ' ') out.pop_back();
  out += '\n';
  std::string header = fmt::format("{:<{}}", "Run", label_w);
  std::string cols;
  for (const char* name : {"RMSE", "Mean", "Median", "Std"}) {
    cols += fmt::format("{:>{}}", fmt::format("{} {}", name, unit), kCol);
  }
  out += header + cols + sep + cols + '\n';
  rule();

  ErrorStats ape_avg;
  ErrorStats rpe_avg;
  for (const auto& r : runs) {
    out += fmt::format("{:<{}}", r.label, label_w) + stats_cells(r.ape) + sep + stats_cells(r.rpe) + '\n';
    ape_avg.rmse += r.ape.rmse;
    ape_avg.mean += r.ape.mean;
    ape_avg.median += r.ape.median;
    ape_avg.std += r.ape.std;
    rpe_avg.rmse += r.rpe.rmse;
    rpe_avg.mean += r.rpe.mean;
    rpe_avg.median += r.rpe.median;
    rpe_avg.std += r.rpe.std;
  }
  if (!runs.empty()) {
    const double n = static_cast<double>(runs.size());
    for (ErrorStats* s : {&ape_avg, &rpe_avg}) {
      s->rmse /= n;
      s->mean /= n;
      s->median /= n;
      s->std /= n;
    }
    rule();
    out += fmt::format("{:<{}}", "Average", label_w) + stats_cells(ape_avg) + sep +
           stats_cells(rpe_avg) + '\n';
  }
  rule();
  return out;
}

std::string report_key_values(std::span<const RunMetrics> runs) {
  std::string out;
  for (const auto& r : runs) {
    const std::string key = sanitize(r.label);
    for (const auto& [group, s] : {std::pair{"ape", r.ape}, std::pair{"rpe", r.rpe}}) {
      fmt::format_to(std::back_inserter(out),
                     "{0}.{1}.rmse={2:.17g}\n{0}.{1}.mean={3:.17g}\n{0}.{1}.median={4:.17g}\n"
                     "{0}.{1}.std={5:.17g}\n",
                     key, group, s.rmse, s.mean, s.median, s.std);
    }
  }
  return out;
}

std::vector<RunMetrics> parse_key_values(std::string_view text) {
  std::vector<RunMetrics> runs;
  std::vector<unsigned> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    const auto fail = [&](std::string_view why) {
      return FormatError(fmt::format("metrics line {}: {}", line_no, why));
    };
    if (eq == std::string_view::npos) throw fail("expected key=value");
    const std::string_view key = line.substr(0, eq);
    const std::string_view value = line.substr(eq + 1);
    const auto d2 = key.rfind('.');
    const auto d1 = d2 == std::string_view::npos || d2 == 0 ? std::string_view::npos : key.rfind('.', d2 - 1);
    if (d1 == std::string_view::npos || d1 == 0) throw fail("key must be label.group.metric");
    const std::string_view label = key.substr(0, d1);
    const std::string_view group = key.substr(d1 + 1, d2 - d1 - 1);
    const std::string_view metric = key.substr(d2 + 1);

    double v = 0.0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(v)) {
      throw fail(fmt::format("invalid value '{}'", value));
    }

    auto it = std::find_if(runs.begin(), runs.end(), [&](const RunMetrics& r) { return r.label == label; });
    if (it == runs.end()) {
      runs.push_back({std::string(label), {}, {}});
      seen.push_back(0);
      it = std::prev(runs.end());
    }
    const auto idx = static_cast<std::size_t>(it - runs.begin());
    ErrorStats* s = nullptr;
    unsigned base = 0;
    if (group == "ape") {
      s = &it->ape;
    } else if (group == "rpe") {
      s = &it->rpe;
      base = 4;
    } else {
      throw fail(fmt::format("unknown metric group '{}'", group));
    }
    unsigned bit = 0;
    if (metric == "rmse") {
      s->rmse = v;
      bit = 0;
    } else if (metric == "mean") {
      s->mean = v;
      bit = 1;
    } else if (metric == "median") {
      s->median = v;
      bit = 2;
    } else if (metric == "std") {
      s->std = v;
      bit = 3;
    } else {
      throw fail(fmt::format("unknown metric '{}'", metric));
    }
    seen[idx] |= 1u << (base + bit);
  }
  for (std::size_t i = 0; i < runs.size(); ++i) {
    if (seen[i] != 0xFFu) {
      throw FormatError(fmt::format("metrics for run '{}' are incomplete", runs[i].label));
    }
  }
  return runs;
}

}  // namespace demoproc::trajeval
