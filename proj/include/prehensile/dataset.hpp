#pragma once

// Trial logs: 250 Hz object pose plus three 6-axis wrench channels
// (finger1, finger2, pusher), stored as CSV with a JSON metadata sidecar.

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "prehensile/rigid.hpp"

namespace prehensile::data {

enum Channel { kFinger1 = 0, kFinger2 = 1, kPusher = 2 };
inline constexpr int kChannels = 3;
inline constexpr std::array<const char*, kChannels> kChannelPrefix = {"f1", "f2", "p"};
inline constexpr std::array<const char*, 6> kWrenchSuffix = {"fx", "fy", "fz", "tx", "ty", "tz"};

class SchemaError : public std::runtime_error {
 public:
  SchemaError(const std::string& what, int line)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class MetadataMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct FrameRecord {
  double t = 0.0;
  Vec3 position = Vec3::Zero();
  // Stored verbatim (not normalized) so files round-trip exactly.
  Eigen::Vector4d quaternion{1.0, 0.0, 0.0, 0.0};  // w, x, y, z
  bool pose_valid = true;
  std::array<Vec6, kChannels> wrench{Vec6::Zero(), Vec6::Zero(), Vec6::Zero()};
  std::array<bool, kChannels> valid{true, true, true};

  Pose pose() const {
    return Pose(position, Quat(quaternion[0], quaternion[1], quaternion[2], quaternion[3]));
  }
  void set_pose(const Pose& p) {
    position = p.translation();
    const Quat& q = p.rotation();
    quaternion = Eigen::Vector4d(q.w(), q.x(), q.y(), q.z());
    pose_valid = true;
  }
};

struct TrialMetadata {
  std::string primitive;
  std::string object;
  double grip_N = 0.0;
  double speed = 0.0;           // mm/s, or deg/s for pivoting
  double geometry_param = 0.0;  // slope (deg), pusher offset (mm), or 0
  int run = 0;

  bool same_parameters(const TrialMetadata& o) const {
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-9 * (1.0 + std::abs(a)); };
    return primitive == o.primitive && object == o.object && close(grip_N, o.grip_N) &&
           close(speed, o.speed) && close(geometry_param, o.geometry_param);
  }
};

// 1-sigma sensor uncertainty per channel.
struct SensorUncertainty {
  double finger_N = 0.25;
  double pusher_x_N = 0.75;
};

struct TrialLog {
  TrialMetadata meta;
  std::vector<FrameRecord> frames;
  SensorUncertainty uncertainty;

  double duration() const { return frames.empty() ? 0.0 : frames.back().t - frames.front().t; }
};

inline nlohmann::json to_json(const TrialMetadata& m) {
  return nlohmann::json{{"primitive", m.primitive}, {"object", m.object},
                        {"grip_N", m.grip_N},       {"speed", m.speed},
                        {"geometry_param", m.geometry_param}, {"run", m.run}};
}

inline TrialMetadata metadata_from_json(const nlohmann::json& j) {
  TrialMetadata m;
  try {
    m.primitive = j.at("primitive").get<std::string>();
    m.object = j.at("object").get<std::string>();
    m.grip_N = j.at("grip_N").get<double>();
    m.speed = j.at("speed").get<double>();
    m.geometry_param = j.at("geometry_param").get<double>();
    m.run = j.value("run", 0);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("metadata sidecar: ") + e.what(), 0);
  }
  return m;
}

// ---------------------------------------------------------------------------
// CSV schema

struct Column {
  std::string name;
  std::string unit;
};

inline const std::vector<Column>& log_columns() {
  static const std::vector<Column> cols = [] {
    std::vector<Column> c = {{"t", "s"},  {"px", "m"}, {"py", "m"}, {"pz", "m"},
                             {"qw", "1"}, {"qx", "1"}, {"qy", "1"}, {"qz", "1"}};
    for (const char* ch : kChannelPrefix) {
      for (int k = 0; k < 6; ++k) {
        c.push_back({std::string(ch) + "_" + kWrenchSuffix[k], k < 3 ? "N" : "N*m"});
      }
    }
    return c;
  }();
  return cols;
}

inline std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline std::string serialize(const TrialLog& log) {
  const auto& cols = log_columns();
  std::string out;
  for (size_t i = 0; i < cols.size(); ++i) {
    if (i) out += ',';
    out += cols[i].name;
  }
  out += '\n';
  for (const FrameRecord& f : log.frames) {
    out += format_number(f.t);
    for (int k = 0; k < 3; ++k) {
      out += ',';
      if (f.pose_valid) out += format_number(f.position[k]);
    }
    for (int k = 0; k < 4; ++k) {
      out += ',';
      if (f.pose_valid) out += format_number(f.quaternion[k]);
    }
    for (int ch = 0; ch < kChannels; ++ch) {
      for (int k = 0; k < 6; ++k) {
        out += ',';
        if (f.valid[ch]) out += format_number(f.wrench[ch][k]);
      }
    }
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  size_t start = 0;
  while (true) {
    const size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

inline std::optional<double> parse_cell(std::string_view s, int line, const std::string& col) {
  if (s.empty()) return std::nullopt;
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw SchemaError("column '" + col + "': not a finite number: '" + std::string(s) + "'",
                      line);
  }
  return v;
}

inline void check_header(std::string_view header) {
  const auto& cols = log_columns();
  const auto names = split(header, ',');
  if (names.size() != cols.size()) {
    throw SchemaError("header has " + std::to_string(names.size()) + " columns, expected " +
                          std::to_string(cols.size()),
                      1);
  }
  for (size_t i = 0; i < cols.size(); ++i) {
    std::string_view name = names[i];
    std::string_view unit;
    const size_t br = name.find('[');
    if (br != std::string_view::npos) {
      if (name.back() != ']') throw SchemaError("malformed unit in header column " + std::string(name), 1);
      unit = name.substr(br + 1, name.size() - br - 2);
      name = name.substr(0, br);
    }
    if (name != cols[i].name) {
      throw SchemaError("header column " + std::to_string(i + 1) + " is '" + std::string(name) +
                            "', expected '" + cols[i].name + "'",
                        1);
    }
    if (!unit.empty() && unit != cols[i].unit) {
      throw SchemaError("unit mismatch for '" + cols[i].name + "': got '" + std::string(unit) +
                            "', expected '" + cols[i].unit + "'",
                        1);
    }
  }
}

}  // namespace detail

// Parses the CSV body. Metadata is not part of the CSV; see read_log.
inline TrialLog parse_log(std::string_view doc) {
  TrialLog log;
  const auto& cols = log_columns();
  int line_no = 0;
  size_t pos = 0;
  bool header_seen = false;
  while (pos < doc.size()) {
    size_t end = doc.find('\n', pos);
    if (end == std::string_view::npos) end = doc.size();
    std::string_view line = doc.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') {
      throw SchemaError("CRLF line ending (LF required)", line_no);
    }
    if (!header_seen) {
      detail::check_header(line);
      header_seen = true;
      continue;
    }
    if (line.empty()) {
      if (pos >= doc.size()) break;
      throw SchemaError("empty row", line_no);
    }
    const auto cells = detail::split(line, ',');
    if (cells.size() != cols.size()) {
      throw SchemaError("row has " + std::to_string(cells.size()) + " cells, expected " +
                            std::to_string(cols.size()),
                        line_no);
    }
    FrameRecord f;
    const auto t = detail::parse_cell(cells[0], line_no, "t");
    if (!t) throw SchemaError("missing time stamp", line_no);
    f.t = *t;
    if (!log.frames.empty() && !(f.t > log.frames.back().t)) {
      throw SchemaError("time not strictly increasing (" + format_number(f.t) + " after " +
                            format_number(log.frames.back().t) + ")",
                        line_no);
    }
    // A group of cells is either all present or all empty.
    auto group = [&](int first, int count, double* dst) {
      int present = 0;
      for (int k = 0; k < count; ++k) {
        const auto v = detail::parse_cell(cells[first + k], line_no, cols[first + k].name);
        if (v) {
          dst[k] = *v;
          ++present;
        }
      }
      if (present != 0 && present != count) {
        throw SchemaError("partially empty group starting at column '" + cols[first].name + "'",
                          line_no);
      }
      return present == count;
    };
    double pose[7] = {0, 0, 0, 1, 0, 0, 0};
    f.pose_valid = group(1, 7, pose);
    f.position = Vec3(pose[0], pose[1], pose[2]);
    f.quaternion = Eigen::Vector4d(pose[3], pose[4], pose[5], pose[6]);
    for (int ch = 0; ch < kChannels; ++ch) {
      double w[6] = {0, 0, 0, 0, 0, 0};
      f.valid[ch] = group(8 + 6 * ch, 6, w);
      for (int k = 0; k < 6; ++k) f.wrench[ch][k] = w[k];
    }
    log.frames.push_back(f);
  }
  if (!header_seen) throw SchemaError("empty document", 0);
  return log;
}

inline std::filesystem::path sidecar_path(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p.replace_extension(".json");
  return p;
}

inline void write_log(const std::filesystem::path& csv, const TrialLog& log) {
  {
    std::ofstream f(csv, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + csv.string());
    f << serialize(log);
  }
  std::ofstream j(sidecar_path(csv), std::ios::binary);
  if (!j) throw std::runtime_error("cannot write " + sidecar_path(csv).string());
  j << to_json(log.meta).dump(2) << '\n';
}

inline TrialLog read_log(const std::filesystem::path& csv) {
  std::ifstream f(csv, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + csv.string());
  std::stringstream ss;
  ss << f.rdbuf();
  TrialLog log = parse_log(ss.str());
  const auto side = sidecar_path(csv);
  std::ifstream j(side);
  if (!j) throw SchemaError("missing metadata sidecar " + side.string(), 0);
  try {
    log.meta = metadata_from_json(nlohmann::json::parse(j));
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError("metadata sidecar: " + std::string(e.what()), 0);
  }
  return log;
}

// ---------------------------------------------------------------------------
// Calibration and analysis

// Subtracts the per-channel mean over the first `window_s` seconds.
inline TrialLog remove_offsets(const TrialLog& log, double window_s) {
  if (log.frames.empty() || !(window_s > 0.0) || window_s > log.duration()) {
    throw std::invalid_argument("remove_offsets: baseline window outside the log");
  }
  const double t_end = log.frames.front().t + window_s;
  int count = 0;
  while (count < static_cast<int>(log.frames.size()) && log.frames[count].t <= t_end) ++count;
  if (count < 25) {
    throw std::invalid_argument("remove_offsets: baseline window holds " + std::to_string(count) +
                                " frames, need >= 25");
  }
  TrialLog out = log;
  for (int ch = 0; ch < kChannels; ++ch) {
    Vec6 sum = Vec6::Zero();
    int n = 0;
    for (int i = 0; i < count; ++i) {
      if (!log.frames[i].valid[ch]) continue;
      sum += log.frames[i].wrench[ch];
      ++n;
    }
    if (n == 0) continue;
    const Vec6 mean = sum / n;
    for (FrameRecord& f : out.frames) {
      if (f.valid[ch]) f.wrench[ch] -= mean;
    }
  }
  return out;
}

// Where a channel's sensor frame sits: pose relative to the object's centre
// of mass with world-aligned axes. `reaction` marks sensors reporting the
// force the object exerts on them rather than the force they apply.
struct SensorMount {
  Pose pose;
  bool reaction = false;
};

struct NetWrenchModel {
  double mass = 0.0;
  Vec3 gravity = Vec3(0.0, 0.0, -9.81);
  std::array<SensorMount, kChannels> mounts;
};

class MissingChannel : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Gravity plus all contact wrenches, in world axes about the object COM.
inline Wrench net_wrench(const TrialLog& log, int index, const NetWrenchModel& model) {
  if (index < 0 || index >= static_cast<int>(log.frames.size())) {
    throw std::out_of_range("net_wrench: frame index out of range");
  }
  const FrameRecord& f = log.frames[index];
  const FrameId com("com");
  Wrench total{model.mass * model.gravity, Vec3::Zero(), com};
  for (int ch = 0; ch < kChannels; ++ch) {
    if (!f.valid[ch]) {
      throw MissingChannel(std::string("net_wrench: channel ") + kChannelPrefix[ch] +
                           " invalid at frame " + std::to_string(index));
    }
    const FrameId sensor(kChannelPrefix[ch]);
    Wrench w{f.wrench[ch].head<3>(), f.wrench[ch].tail<3>(), sensor};
    if (model.mounts[ch].reaction) {
      w.force = -w.force;
      w.torque = -w.torque;
    }
    total = total + transform_wrench(w, Frame{sensor, model.mounts[ch].pose},
                                     Frame{com, Pose::identity()});
  }
  return total;
}

struct ChannelSpread {
  std::string name;
  double max_spread = 0.0;    // largest pointwise max - min
  double max_std = 0.0;       // largest pointwise standard deviation
  double peak_force = 0.0;    // peak |mean| over time
  double peak_fraction = 0.0; // max_spread / peak_force (0 if the channel is flat zero)
};

struct VariabilityReport {
  int logs = 0;
  int frames = 0;  // frames compared (shortest log)
  std::vector<ChannelSpread> channels;
  double max_peak_fraction = 0.0;
};

inline std::string channel_name(int ch, int k) {
  return std::string(kChannelPrefix[ch]) + "_" + kWrenchSuffix[k];
}

// Pointwise spread across repeated trials, aligned by frame index.
inline VariabilityReport variability_stats(std::span<const TrialLog> logs) {
  if (logs.size() < 2) throw std::invalid_argument("variability_stats: need at least 2 logs");
  for (const TrialLog& l : logs) {
    if (!l.meta.same_parameters(logs[0].meta)) {
      throw MetadataMismatch("variability_stats: logs have different metadata parameters");
    }
  }
  VariabilityReport r;
  r.logs = static_cast<int>(logs.size());
  size_t n = logs[0].frames.size();
  for (const TrialLog& l : logs) n = std::min(n, l.frames.size());
  r.frames = static_cast<int>(n);
  for (int ch = 0; ch < kChannels; ++ch) {
    for (int k = 0; k < 6; ++k) {
      ChannelSpread s;
      s.name = channel_name(ch, k);
      for (size_t i = 0; i < n; ++i) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        double sum = 0.0, sq = 0.0;
        int m = 0;
        for (const TrialLog& l : logs) {
          const FrameRecord& f = l.frames[i];
          if (!f.valid[ch]) continue;
          const double v = f.wrench[ch][k];
          lo = std::min(lo, v);
          hi = std::max(hi, v);
          sum += v;
          sq += v * v;
          ++m;
        }
        if (m == 0) continue;
        const double mean = sum / m;
        s.max_spread = std::max(s.max_spread, hi - lo);
        s.max_std = std::max(s.max_std, std::sqrt(std::max(0.0, sq / m - mean * mean)));
        s.peak_force = std::max(s.peak_force, std::abs(mean));
      }
      s.peak_fraction = s.peak_force > 0.0 ? s.max_spread / s.peak_force : 0.0;
      r.max_peak_fraction = std::max(r.max_peak_fraction, s.peak_fraction);
      r.channels.push_back(s);
    }
  }
  return r;
}

enum class Motion { kStick, kSlip };

inline const char* to_string(Motion m) { return m == Motion::kStick ? "stick" : "slip"; }

struct MotionInterval {
  double t_begin = 0.0;
  double t_end = 0.0;
  Motion label = Motion::kStick;
};

struct StickSlipOptions {
  double enter_slip = 0.5e-3;  // m/s
  double exit_slip = 0.2e-3;   // m/s
  int window = 5;              // frames, centred difference span
};

// Segments object speed relative to a reference (e.g. the gripper) into
// stick and slip intervals. An empty `reference` means a fixed reference.
inline std::vector<MotionInterval> detect_stick_slip(const TrialLog& log,
                                                     const StickSlipOptions& opt = {},
                                                     std::span<const Vec3> reference = {}) {
  const int n = static_cast<int>(log.frames.size());
  if (opt.window < 3 || opt.window % 2 == 0) {
    throw std::invalid_argument("detect_stick_slip: window must be odd and >= 3");
  }
  if (n < opt.window) throw std::invalid_argument("detect_stick_slip: log shorter than window");
  if (!reference.empty() && static_cast<int>(reference.size()) != n) {
    throw std::invalid_argument("detect_stick_slip: reference length differs from log");
  }
  if (!(opt.exit_slip < opt.enter_slip)) {
    throw std::invalid_argument("detect_stick_slip: exit threshold must be below entry");
  }
  auto rel = [&](int i) {
    if (!log.frames[i].pose_valid) {
      throw MissingChannel("detect_stick_slip: pose invalid at frame " + std::to_string(i));
    }
    Vec3 p = log.frames[i].position;
    if (!reference.empty()) p -= reference[i];
    return p;
  };
  const int h = opt.window / 2;
  std::vector<MotionInterval> out;
  Motion state = Motion::kStick;
  double start = log.frames.front().t;
  for (int i = 0; i < n; ++i) {
    const int a = std::max(0, i - h);
    const int b = std::min(n - 1, i + h);
    const double speed = (rel(b) - rel(a)).norm() / (log.frames[b].t - log.frames[a].t);
    Motion next = state;
    if (state == Motion::kStick && speed > opt.enter_slip) next = Motion::kSlip;
    if (state == Motion::kSlip && speed < opt.exit_slip) next = Motion::kStick;
    if (next != state) {
      out.push_back({start, log.frames[i].t, state});
      start = log.frames[i].t;
      state = next;
    }
  }
  out.push_back({start, log.frames.back().t, state});
  // Drop the zero-length leading interval when motion starts at frame 0.
  if (out.size() > 1 && out.front().t_end == out.front().t_begin) out.erase(out.begin());
  return out;
}

// ---------------------------------------------------------------------------
// Comparison

struct ChannelError {
  std::string name;
  double rms = 0.0;
  double peak = 0.0;
};

struct ComparisonReport {
  double timing_offset = 0.0;  // s; exp(t + offset) aligns with sim(t)
  double overlap = 0.0;        // s of overlapping, aligned data
  int samples = 0;
  std::vector<ChannelError> channels;
  double slide_down_sim_mm = 0.0;
  double slide_down_exp_mm = 0.0;
  double slide_down_delta_mm = 0.0;
  double rotation_sim_rad = 0.0;
  double rotation_exp_rad = 0.0;
  double rotation_delta_rad = 0.0;
  double max_rms = 0.0;

  nlohmann::json to_json() const {
    nlohmann::json ch = nlohmann::json::array();
    for (const ChannelError& c : channels) {
      ch.push_back({{"channel", c.name}, {"rms", c.rms}, {"peak", c.peak}});
    }
    return {{"timing_offset_s", timing_offset},
            {"overlap_s", overlap},
            {"samples", samples},
            {"channels", ch},
            {"slide_down_mm", {{"sim", slide_down_sim_mm}, {"exp", slide_down_exp_mm},
                               {"delta", slide_down_delta_mm}}},
            {"rotation_rad", {{"sim", rotation_sim_rad}, {"exp", rotation_exp_rad},
                              {"delta", rotation_delta_rad}}},
            {"max_rms", max_rms}};
  }
};

// Downward displacement of the object over the log (mm).
inline double slide_down_mm(const TrialLog& log) {
  const FrameRecord* first = nullptr;
  const FrameRecord* last = nullptr;
  for (const FrameRecord& f : log.frames) {
    if (!f.pose_valid) continue;
    if (first == nullptr) first = &f;
    last = &f;
  }
  if (first == nullptr) return 0.0;
  return 1000.0 * (first->position.z() - last->position.z());
}

inline double final_rotation_rad(const TrialLog& log) {
  const FrameRecord* first = nullptr;
  const FrameRecord* last = nullptr;
  for (const FrameRecord& f : log.frames) {
    if (!f.pose_valid) continue;
    if (first == nullptr) first = &f;
    last = &f;
  }
  if (first == nullptr) return 0.0;
  return rotation_distance(first->pose().rotation(), last->pose().rotation());
}

namespace detail {

// Linear interpolation of a channel component at time t; nullopt outside the
// log or across invalid frames.
inline std::optional<double> sample(const TrialLog& log, int ch, int k, double t) {
  const auto& fr = log.frames;
  if (fr.empty() || t < fr.front().t || t > fr.back().t) return std::nullopt;
  const auto it = std::lower_bound(fr.begin(), fr.end(), t,
                                   [](const FrameRecord& f, double v) { return f.t < v; });
  const size_t j = static_cast<size_t>(it - fr.begin());
  if (fr[j].t == t) {
    if (!fr[j].valid[ch]) return std::nullopt;
    return fr[j].wrench[ch][k];
  }
  const FrameRecord& a = fr[j - 1];
  const FrameRecord& b = fr[j];
  if (!a.valid[ch] || !b.valid[ch]) return std::nullopt;
  const double s = (t - a.t) / (b.t - a.t);
  return (1.0 - s) * a.wrench[ch][k] + s * b.wrench[ch][k];
}

inline bool channel_valid(const TrialLog& log, int ch) {
  return std::all_of(log.frames.begin(), log.frames.end(),
                     [ch](const FrameRecord& f) { return f.valid[ch]; });
}

}  // namespace detail

inline double median_spacing(const TrialLog& log) {
  if (log.frames.size() < 2) return 0.0;
  std::vector<double> d;
  for (size_t i = 1; i < log.frames.size(); ++i) d.push_back(log.frames[i].t - log.frames[i - 1].t);
  std::nth_element(d.begin(), d.begin() + d.size() / 2, d.end());
  return d[d.size() / 2];
}

// Aligns `exp` to `sim` by the cross-correlation of a force channel (pusher x
// when both logs carry it, finger1 x otherwise), then reports errors over the
// overlapping window.
inline ComparisonReport compare(const TrialLog& sim, const TrialLog& exp,
                                double max_shift_s = 0.5) {
  if (!sim.meta.same_parameters(exp.meta)) {
    throw MetadataMismatch("compare: incompatible metadata (" + sim.meta.primitive + "/" +
                           sim.meta.object + " vs " + exp.meta.primitive + "/" + exp.meta.object +
                           ")");
  }
  if (sim.frames.size() < 2 || exp.frames.size() < 2) {
    throw std::invalid_argument("compare: logs need at least 2 frames");
  }
  const double h = median_spacing(sim);
  int ref_ch = kPusher;
  if (!detail::channel_valid(sim, kPusher) || !detail::channel_valid(exp, kPusher)) ref_ch = kFinger1;

  auto overlap_pairs = [&](double shift, int ch, int k) {
    std::vector<std::pair<double, double>> v;
    for (const FrameRecord& f : sim.frames) {
      if (!f.valid[ch]) continue;
      if (auto e = detail::sample(exp, ch, k, f.t + shift)) v.emplace_back(f.wrench[ch][k], *e);
    }
    return v;
  };

  double best_shift = 0.0;
  double best_score = -std::numeric_limits<double>::infinity();
  const int max_j = static_cast<int>(std::floor(max_shift_s / h + 1e-9));
  for (int j = -max_j; j <= max_j; ++j) {
    const double shift = j * h;
    const auto v = overlap_pairs(shift, ref_ch, 0);
    if (v.size() < 2) continue;
    double ma = 0.0, mb = 0.0;
    for (const auto& [a, b] : v) {
      ma += a;
      mb += b;
    }
    ma /= v.size();
    mb /= v.size();
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (const auto& [a, b] : v) {
      sab += (a - ma) * (b - mb);
      saa += (a - ma) * (a - ma);
      sbb += (b - mb) * (b - mb);
    }
    // Normalized correlation; flat signals carry no timing information.
    const double score = (saa > 0.0 && sbb > 0.0) ? sab / std::sqrt(saa * sbb) : 0.0;
    if (score > best_score + 1e-12 ||
        (std::abs(score - best_score) <= 1e-12 && std::abs(shift) < std::abs(best_shift))) {
      best_score = score;
      best_shift = shift;
    }
  }

  ComparisonReport r;
  r.timing_offset = best_shift;
  double t_lo = std::numeric_limits<double>::infinity(), t_hi = -t_lo;
  for (int ch = 0; ch < kChannels; ++ch) {
    for (int k = 0; k < 6; ++k) {
      ChannelError e;
      e.name = channel_name(ch, k);
      int m = 0;
      double sq = 0.0;
      for (const FrameRecord& f : sim.frames) {
        if (!f.valid[ch]) continue;
        const auto v = detail::sample(exp, ch, k, f.t + best_shift);
        if (!v) continue;
        const double d = std::abs(f.wrench[ch][k] - *v);
        sq += d * d;
        e.peak = std::max(e.peak, d);
        ++m;
        t_lo = std::min(t_lo, f.t);
        t_hi = std::max(t_hi, f.t);
      }
      if (m == 0) continue;
      e.rms = std::sqrt(sq / m);
      r.samples = std::max(r.samples, m);
      r.max_rms = std::max(r.max_rms, e.rms);
      r.channels.push_back(e);
    }
  }
  r.overlap = t_hi > t_lo ? t_hi - t_lo : 0.0;
  r.slide_down_sim_mm = slide_down_mm(sim);
  r.slide_down_exp_mm = slide_down_mm(exp);
  r.slide_down_delta_mm = r.slide_down_exp_mm - r.slide_down_sim_mm;
  r.rotation_sim_rad = final_rotation_rad(sim);
  r.rotation_exp_rad = final_rotation_rad(exp);
  r.rotation_delta_rad = r.rotation_exp_rad - r.rotation_sim_rad;
  return r;
}

}  // namespace prehensile::data
