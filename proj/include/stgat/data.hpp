#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "stgat/errors.hpp"
#include "stgat/rng.hpp"
#include "stgat/tensor.hpp"
#include "stgat/window.hpp"

namespace stgat {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kGravityKms2 = 0.00980665;

struct FighterState {
  double t = 0.0;             // s
  double x = 0.0, y = 0.0, z = 0.0;  // km, z is altitude
  double roll = 0.0, pitch = 0.0, yaw = 0.0;  // rad
  double speed = 0.0;         // km/s
};

struct FighterTrack {
  int fighter_id = 0;
  std::string team;  // "blue" or "red"
  std::vector<FighterState> states;
};

// One air battle: n fighters sampled on a shared uniform clock.
struct Engagement {
  std::string id;
  int n_blue = 0, n_red = 0;
  double sample_rate_hz = 2.0;
  std::vector<FighterTrack> fighters;

  std::size_t length() const {
    return fighters.empty() ? 0 : fighters.front().states.size();
  }
  std::string scenario_label() const {
    return std::to_string(n_blue) + "v" + std::to_string(n_red);
  }

  // Shared, uniform timestamps across all fighters (within 1e-9 s).
  void validate() const {
    if (fighters.empty()) throw config_error("engagement " + id + ": no fighters");
    const std::size_t len = fighters.front().states.size();
    if (len < 2) throw config_error("engagement " + id + ": too short");
    for (const FighterTrack& f : fighters) {
      if (f.states.size() != len) {
        throw config_error("engagement " + id + ": fighter " +
                           std::to_string(f.fighter_id) +
                           " has mismatched length");
      }
      for (std::size_t k = 0; k < len; ++k) {
        if (std::abs(f.states[k].t - fighters.front().states[k].t) > 1e-9) {
          throw config_error("engagement " + id +
                             ": timestamps differ across fighters");
        }
      }
    }
    const double dt = 1.0 / sample_rate_hz;
    for (std::size_t k = 0; k + 1 < len; ++k) {
      const double step =
          fighters.front().states[k + 1].t - fighters.front().states[k].t;
      if (std::abs(step - dt) > 1e-9) {
        throw config_error("engagement " + id +
                           ": non-uniform timestep at index " +
                           std::to_string(k));
      }
    }
  }
};

// ---------------------------------------------------------------------------
// Synthetic engagement generation. Blue fighters fly scripted maneuver
// primitives; red fighters fly bounded-turn-rate pure pursuit onto assigned
// blue targets. Substitute for recorded air-combat captures.

struct ManeuverSegment {
  std::string kind;               // straight | turn | climb | descend | break_turn
  double duration_s = 10.0;
  double turn_rate_rad_s = 0.0;   // signed, for turn/break_turn
  double path_angle_rad = 0.0;    // for climb/descend
};

struct EngagementSpec {
  std::string id = "eng";
  int n_blue = 1;
  int n_red = 1;
  double duration_s = 60.0;
  double sample_rate_hz = 2.0;
  std::uint64_t seed = 0;
  double noise_sigma_km = 0.0;
  double blue_speed_kms = 0.24;
  double red_speed_kms = 0.27;
  double max_speed_kms = 0.35;
  // One script per blue fighter; empty = auto-generated from the seed.
  std::vector<std::vector<ManeuverSegment>> scripts;

  void validate() const {
    if (n_blue < 1 || n_red < 0) throw config_error("spec: need n_blue >= 1, n_red >= 0");
    if (!(duration_s > 0.0) || !(sample_rate_hz > 0.0)) {
      throw config_error("spec: duration and rate must be positive");
    }
    if (duration_s * sample_rate_hz < 2.0) {
      throw config_error("spec: fewer than 2 samples");
    }
    if (noise_sigma_km < 0.0) throw config_error("spec: negative noise");
    if (!(blue_speed_kms > 0.0) || !(red_speed_kms > 0.0)) {
      throw config_error("spec: speeds must be positive");
    }
    if (std::max(blue_speed_kms, red_speed_kms) * 1.2 > max_speed_kms) {
      throw config_error("spec: max_speed_kms too low for configured speeds");
    }
    for (const auto& script : scripts) {
      for (const ManeuverSegment& seg : script) {
        if (!(seg.duration_s > 0.0)) throw config_error("spec: segment duration must be positive");
        if (seg.kind != "straight" && seg.kind != "turn" && seg.kind != "climb" &&
            seg.kind != "descend" && seg.kind != "break_turn") {
          throw config_error("spec: unknown maneuver '" + seg.kind + "'");
        }
      }
    }
  }
};

namespace detail {

struct FlightState {
  double x = 0, y = 0, z = 0;
  double heading = 0;     // rad, in the horizontal x-y plane
  double path_angle = 0;  // rad, positive climbs
  double speed = 0;       // km/s
};

// Advances one sample at constant turn rate, speed and path angle. Constant
// turn rate is integrated in closed form, so a level turn traces an exact
// circle of radius speed*cos(path_angle)/omega.
inline void advance(FlightState& s, double omega, double dt) {
  const double vh = s.speed * std::cos(s.path_angle);
  if (std::abs(omega) > 1e-12) {
    const double h2 = s.heading + omega * dt;
    s.x += vh / omega * (std::sin(h2) - std::sin(s.heading));
    s.y += vh / omega * (-std::cos(h2) + std::cos(s.heading));
    s.heading = h2;
  } else {
    s.x += vh * std::cos(s.heading) * dt;
    s.y += vh * std::sin(s.heading) * dt;
  }
  s.z += s.speed * std::sin(s.path_angle) * dt;
}

inline double wrap_angle(double a) {
  while (a > kPi) a -= 2.0 * kPi;
  while (a < -kPi) a += 2.0 * kPi;
  return a;
}

inline FighterState record_state(const FlightState& s, double t, double omega) {
  FighterState r;
  r.t = t;
  r.x = s.x;
  r.y = s.y;
  r.z = s.z;
  r.yaw = s.heading;
  r.pitch = s.path_angle;
  r.roll = std::atan2(s.speed * omega, kGravityKms2);  // coordinated bank
  r.speed = s.speed;
  return r;
}

inline std::vector<ManeuverSegment> auto_script(double duration_s, Rng& rng) {
  std::vector<ManeuverSegment> script;
  double total = 0.0;
  const double deg = kPi / 180.0;
  while (total < duration_s) {
    ManeuverSegment seg;
    seg.duration_s = rng.uniform(6.0, 14.0);
    const double pick = rng.uniform();
    if (pick < 0.30) {
      seg.kind = "straight";
    } else if (pick < 0.60) {
      seg.kind = "turn";
      seg.turn_rate_rad_s =
          (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(3.0, 9.0) * deg;
    } else if (pick < 0.75) {
      seg.kind = "climb";
      seg.path_angle_rad = rng.uniform(5.0, 10.0) * deg;
    } else if (pick < 0.90) {
      seg.kind = "descend";
      seg.path_angle_rad = -rng.uniform(5.0, 10.0) * deg;
    } else {
      seg.kind = "break_turn";
      seg.turn_rate_rad_s =
          (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(14.0, 20.0) * deg;
    }
    total += seg.duration_s;
    script.push_back(seg);
  }
  return script;
}

// Gaussian position noise with the vector norm clamped to 2 sigma, which
// bounds any per-step noise contribution to displacement by 4 sigma.
inline std::array<double, 3> clamped_noise(double sigma, Rng& rng) {
  std::array<double, 3> n{rng.normal(0.0, sigma), rng.normal(0.0, sigma),
                          rng.normal(0.0, sigma)};
  if (sigma <= 0.0) return {0.0, 0.0, 0.0};
  const double norm = std::sqrt(n[0] * n[0] + n[1] * n[1] + n[2] * n[2]);
  const double cap = 2.0 * sigma;
  if (norm > cap) {
    const double f = cap / norm;
    n = {n[0] * f, n[1] * f, n[2] * f};
  }
  return n;
}

}  // namespace detail

inline Engagement generate_engagement(const EngagementSpec& spec) {
  spec.validate();
  const std::size_t steps =
      static_cast<std::size_t>(std::llround(spec.duration_s * spec.sample_rate_hz));
  const double dt = 1.0 / spec.sample_rate_hz;
  Rng rng(spec.seed);

  // Blue initial states: line abreast around the origin heading +x, with a
  // little per-fighter variation.
  std::vector<detail::FlightState> blue(spec.n_blue);
  for (int i = 0; i < spec.n_blue; ++i) {
    blue[i].x = rng.uniform(-0.5, 0.5);
    blue[i].y = 1.5 * (i - 0.5 * (spec.n_blue - 1)) + rng.uniform(-0.2, 0.2);
    blue[i].z = rng.uniform(4.0, 6.0);
    blue[i].heading = rng.uniform(-0.2, 0.2);
    blue[i].speed = spec.blue_speed_kms * rng.uniform(0.9, 1.1);
  }
  std::vector<std::vector<ManeuverSegment>> scripts = spec.scripts;
  scripts.resize(spec.n_blue);
  for (int i = 0; i < spec.n_blue; ++i) {
    if (scripts[i].empty()) {
      scripts[i] = detail::auto_script(spec.duration_s, rng);
    }
  }

  // Red initial states: behind the blue formation, pointed at it.
  std::vector<detail::FlightState> red(spec.n_red);
  for (int i = 0; i < spec.n_red; ++i) {
    const double bearing = kPi + rng.uniform(-0.5, 0.5);
    const double dist = rng.uniform(8.0, 12.0);
    red[i].x = dist * std::cos(bearing);
    red[i].y = dist * std::sin(bearing) +
               1.5 * (i - 0.5 * (spec.n_red - 1));
    red[i].z = rng.uniform(3.5, 6.5);
    red[i].heading = std::atan2(-red[i].y, -red[i].x);
    red[i].speed = spec.red_speed_kms * rng.uniform(0.9, 1.1);
  }

  Engagement e;
  e.id = spec.id;
  e.n_blue = spec.n_blue;
  e.n_red = spec.n_red;
  e.sample_rate_hz = spec.sample_rate_hz;
  e.fighters.resize(spec.n_blue + spec.n_red);
  for (int i = 0; i < spec.n_blue; ++i) {
    e.fighters[i].fighter_id = i;
    e.fighters[i].team = "blue";
  }
  for (int i = 0; i < spec.n_red; ++i) {
    e.fighters[spec.n_blue + i].fighter_id = spec.n_blue + i;
    e.fighters[spec.n_blue + i].team = "red";
  }

  std::vector<std::size_t> seg_index(spec.n_blue, 0);
  std::vector<double> seg_elapsed(spec.n_blue, 0.0);
  const double red_max_turn = 12.0 * kPi / 180.0;
  const double red_max_path = 15.0 * kPi / 180.0;
  const double red_path_rate = 5.0 * kPi / 180.0;

  for (std::size_t k = 0; k < steps; ++k) {
    const double t = static_cast<double>(k) / spec.sample_rate_hz;

    // Record, then advance everyone to the next sample.
    std::vector<double> blue_omega(spec.n_blue, 0.0);
    for (int i = 0; i < spec.n_blue; ++i) {
      const auto& script = scripts[i];
      const ManeuverSegment& seg =
          script[std::min(seg_index[i], script.size() - 1)];
      double omega = 0.0;
      double path = 0.0;
      if (seg.kind == "turn" || seg.kind == "break_turn") {
        omega = seg.turn_rate_rad_s;
      } else if (seg.kind == "climb" || seg.kind == "descend") {
        path = seg.path_angle_rad;
      }
      blue[i].path_angle = path;
      if (blue[i].z < 0.8) blue[i].path_angle = std::max(path, 0.0);
      blue_omega[i] = omega;
      e.fighters[i].states.push_back(detail::record_state(blue[i], t, omega));
    }
    for (int i = 0; i < spec.n_red; ++i) {
      detail::FlightState& r = red[i];
      const detail::FlightState& target = blue[i % spec.n_blue];
      const double dx = target.x - r.x, dy = target.y - r.y,
                   dz = target.z - r.z;
      const double want_heading = std::atan2(dy, dx);
      const double err = detail::wrap_angle(want_heading - r.heading);
      const double omega =
          std::clamp(err / dt, -red_max_turn, red_max_turn);
      const double horiz = std::hypot(dx, dy);
      const double want_path = std::clamp(std::atan2(dz, std::max(horiz, 1e-6)),
                                          -red_max_path, red_max_path);
      const double dpath = std::clamp(want_path - r.path_angle,
                                      -red_path_rate * dt, red_path_rate * dt);
      r.path_angle += dpath;
      if (r.z < 0.8) r.path_angle = std::max(r.path_angle, 0.0);
      e.fighters[spec.n_blue + i].states.push_back(
          detail::record_state(r, t, omega));
      detail::advance(r, omega, dt);
    }
    for (int i = 0; i < spec.n_blue; ++i) {
      detail::advance(blue[i], blue_omega[i], dt);
      seg_elapsed[i] += dt;
      if (seg_index[i] < scripts[i].size() &&
          seg_elapsed[i] >= scripts[i][seg_index[i]].duration_s) {
        seg_elapsed[i] = 0.0;
        ++seg_index[i];
      }
    }
  }

  if (spec.noise_sigma_km > 0.0) {
    for (FighterTrack& f : e.fighters) {
      for (FighterState& s : f.states) {
        const auto n = detail::clamped_noise(spec.noise_sigma_km, rng);
        s.x += n[0];
        s.y += n[1];
        s.z += n[2];
      }
    }
  }
  e.validate();
  return e;
}

// ---------------------------------------------------------------------------
// Preprocessing.

// Zero-phase centered moving average of odd width on x, y, z. Edges shrink
// the window symmetrically; timestamps and attitude fields are untouched.
inline Engagement low_pass_filter(const Engagement& e, std::size_t window) {
  if (window % 2 == 0 || window < 1) {
    throw config_error("low_pass_filter: window must be odd and >= 1, got " +
                       std::to_string(window));
  }
  if (window > e.length()) {
    throw config_error("low_pass_filter: window " + std::to_string(window) +
                       " exceeds sequence length " +
                       std::to_string(e.length()));
  }
  Engagement out = e;
  const std::size_t half = window / 2;
  const std::size_t len = e.length();
  for (std::size_t fi = 0; fi < e.fighters.size(); ++fi) {
    const auto& src = e.fighters[fi].states;
    auto& dst = out.fighters[fi].states;
    for (std::size_t k = 0; k < len; ++k) {
      const std::size_t h = std::min({half, k, len - 1 - k});
      double sx = 0, sy = 0, sz = 0;
      for (std::size_t j = k - h; j <= k + h; ++j) {
        sx += src[j].x;
        sy += src[j].y;
        sz += src[j].z;
      }
      const double inv = 1.0 / static_cast<double>(2 * h + 1);
      dst[k].x = sx * inv;
      dst[k].y = sy * inv;
      dst[k].z = sz * inv;
    }
  }
  return out;
}

// Stride-1 sliding windows: history [s, s+l), target at s+l, one sample per
// valid start. Positions are normalized per window.
inline std::vector<WindowSample> windowize(const Engagement& e, std::size_t l,
                                           double norm_scale_km = 1.0) {
  const std::size_t len = e.length();
  if (len < l + 1) {
    throw config_error("windowize: engagement " + e.id + " has " +
                       std::to_string(len) + " steps, need at least " +
                       std::to_string(l + 1));
  }
  const std::size_t n = e.fighters.size();
  std::vector<WindowSample> out;
  out.reserve(len - l);
  for (std::size_t s = 0; s + l < len; ++s) {
    Tensor raw = Tensor::zeros({l, n, 3});
    double* pr = raw.values_mut().data();
    for (std::size_t t = 0; t < l; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        const FighterState& st = e.fighters[i].states[s + t];
        pr[(t * n + i) * 3 + 0] = st.x;
        pr[(t * n + i) * 3 + 1] = st.y;
        pr[(t * n + i) * 3 + 2] = st.z;
      }
    }
    WindowSample sample;
    auto [hist, rec] = normalize_window(raw, norm_scale_km);
    sample.history = std::move(hist);
    sample.norm = std::move(rec);

    Tensor target = Tensor::zeros({n, 3});
    double* pt = target.values_mut().data();
    const double* off = sample.norm.offsets.values().data();
    for (std::size_t i = 0; i < n; ++i) {
      const FighterState& st = e.fighters[i].states[s + l];
      pt[i * 3 + 0] = (st.x - off[i * 3 + 0]) / norm_scale_km;
      pt[i * 3 + 1] = (st.y - off[i * 3 + 1]) / norm_scale_km;
      pt[i * 3 + 2] = (st.z - off[i * 3 + 2]) / norm_scale_km;
    }
    sample.target = std::move(target);
    sample.engagement_id = e.id;
    sample.scenario = e.scenario_label();
    sample.start = s;
    out.push_back(std::move(sample));
  }
  return out;
}

struct DatasetSplit {
  std::vector<Engagement> train;
  std::vector<Engagement> test;
};

// Engagement-level 4:1 split after a seeded shuffle; rounding favors train,
// but the test side always keeps at least one engagement.
inline DatasetSplit split_dataset(const std::vector<Engagement>& engagements,
                                  std::uint64_t seed) {
  if (engagements.size() < 2) {
    throw config_error("split_dataset: need at least 2 engagements, got " +
                       std::to_string(engagements.size()));
  }
  std::vector<std::size_t> order(engagements.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  const std::size_t n_test = std::max<std::size_t>(1, engagements.size() / 5);
  DatasetSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i < order.size() - n_test) {
      split.train.push_back(engagements[order[i]]);
    } else {
      split.test.push_back(engagements[order[i]]);
    }
  }
  return split;
}

// ---------------------------------------------------------------------------
// CSV I/O. One engagement per file, header mandatory, time-major rows.

inline constexpr const char* kCsvHeader =
    "scenario_id,t_s,fighter_id,team,x_km,y_km,z_km,roll_rad,pitch_rad,"
    "yaw_rad,speed_kms";

namespace detail {
inline std::string fmt_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

inline void write_csv(const Engagement& e, const std::string& path) {
  e.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out << kCsvHeader << '\n';
  const std::size_t len = e.length();
  for (std::size_t k = 0; k < len; ++k) {
    for (const FighterTrack& f : e.fighters) {
      const FighterState& s = f.states[k];
      out << e.id << ',' << detail::fmt_g17(s.t) << ',' << f.fighter_id << ','
          << f.team << ',' << detail::fmt_g17(s.x) << ','
          << detail::fmt_g17(s.y) << ',' << detail::fmt_g17(s.z) << ','
          << detail::fmt_g17(s.roll) << ',' << detail::fmt_g17(s.pitch) << ','
          << detail::fmt_g17(s.yaw) << ',' << detail::fmt_g17(s.speed)
          << '\n';
    }
  }
  if (!out) throw io_error("failed writing " + path);
}

inline Engagement read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw io_error(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  const std::vector<std::string> expected = {
      "scenario_id", "t_s",      "fighter_id", "team",
      "x_km",        "y_km",     "z_km",       "roll_rad",
      "pitch_rad",   "yaw_rad",  "speed_kms"};
  {
    std::vector<std::string> got;
    std::stringstream hs(line);
    std::string col;
    while (std::getline(hs, col, ',')) got.push_back(col);
    for (const std::string& want : expected) {
      if (std::find(got.begin(), got.end(), want) == got.end()) {
        throw config_error(path + ": missing column '" + want + "'");
      }
    }
    if (got != expected) {
      throw config_error(path + ": columns must be exactly: " +
                         std::string(kCsvHeader));
    }
  }

  struct Row {
    std::string scenario;
    int fighter_id;
    std::string team;
    FighterState state;
  };
  std::vector<Row> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != expected.size()) {
      throw config_error(path + ": line " + std::to_string(line_no) + ": got " +
                         std::to_string(cells.size()) + " fields, expected " +
                         std::to_string(expected.size()));
    }
    Row r;
    try {
      r.scenario = cells[0];
      r.state.t = std::stod(cells[1]);
      r.fighter_id = std::stoi(cells[2]);
      r.team = cells[3];
      r.state.x = std::stod(cells[4]);
      r.state.y = std::stod(cells[5]);
      r.state.z = std::stod(cells[6]);
      r.state.roll = std::stod(cells[7]);
      r.state.pitch = std::stod(cells[8]);
      r.state.yaw = std::stod(cells[9]);
      r.state.speed = std::stod(cells[10]);
    } catch (const std::exception&) {
      throw config_error(path + ": line " + std::to_string(line_no) +
                         ": malformed numeric field");
    }
    if (r.team != "blue" && r.team != "red") {
      throw config_error(path + ": line " + std::to_string(line_no) +
                         ": team must be blue or red");
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw config_error(path + ": no data rows");

  Engagement e;
  e.id = rows.front().scenario;
  std::map<int, FighterTrack> tracks;
  for (const Row& r : rows) {
    if (r.scenario != e.id) {
      throw config_error(path + ": multiple scenario ids in one file");
    }
    FighterTrack& f = tracks[r.fighter_id];
    f.fighter_id = r.fighter_id;
    if (f.states.empty()) {
      f.team = r.team;
    } else if (f.team != r.team) {
      throw config_error(path + ": fighter " + std::to_string(r.fighter_id) +
                         " changes team");
    }
    f.states.push_back(r.state);
  }
  for (auto& [fid, track] : tracks) {
    if (track.team == "blue") ++e.n_blue;
    else ++e.n_red;
    e.fighters.push_back(std::move(track));
  }
  if (e.length() < 2) throw config_error(path + ": needs at least 2 samples");
  const double dt = e.fighters.front().states[1].t - e.fighters.front().states[0].t;
  if (!(dt > 0.0)) throw config_error(path + ": non-increasing timestamps");
  e.sample_rate_hz = 1.0 / dt;
  e.validate();
  return e;
}

// ---------------------------------------------------------------------------
// Dataset-level generation spec (JSON file for the CLI).

struct ScenarioGroupSpec {
  std::size_t count = 1;
  int blue = 1;
  int red = 1;
  double duration_s = 60.0;
};

struct GeneratorSpec {
  std::uint64_t seed = 42;
  double sample_rate_hz = 2.0;
  double noise_sigma_km = 0.002;
  std::vector<ScenarioGroupSpec> scenarios;
};

inline void from_json(const nlohmann::json& j, ScenarioGroupSpec& s) {
  ScenarioGroupSpec d;
  s.count = j.value("count", d.count);
  s.blue = j.value("blue", d.blue);
  s.red = j.value("red", d.red);
  s.duration_s = j.value("duration_s", d.duration_s);
}

inline void to_json(nlohmann::json& j, const ScenarioGroupSpec& s) {
  j = nlohmann::json{{"count", s.count},
                     {"blue", s.blue},
                     {"red", s.red},
                     {"duration_s", s.duration_s}};
}

inline void from_json(const nlohmann::json& j, GeneratorSpec& s) {
  GeneratorSpec d;
  s.seed = j.value("seed", d.seed);
  s.sample_rate_hz = j.value("sample_rate_hz", d.sample_rate_hz);
  s.noise_sigma_km = j.value("noise_sigma_km", d.noise_sigma_km);
  if (j.contains("scenarios")) {
    s.scenarios = j.at("scenarios").get<std::vector<ScenarioGroupSpec>>();
  }
}

inline void to_json(nlohmann::json& j, const GeneratorSpec& s) {
  j = nlohmann::json{{"seed", s.seed},
                     {"sample_rate_hz", s.sample_rate_hz},
                     {"noise_sigma_km", s.noise_sigma_km},
                     {"scenarios", s.scenarios}};
}

// Thirty battles: eight 4v4, twelve 2v2, ten 1v1.
inline GeneratorSpec default_generator_spec() {
  GeneratorSpec s;
  s.scenarios = {{8, 4, 4, 60.0}, {12, 2, 2, 60.0}, {10, 1, 1, 60.0}};
  return s;
}

inline std::vector<Engagement> generate_dataset(const GeneratorSpec& spec) {
  if (spec.scenarios.empty()) {
    throw config_error("generator spec: no scenarios");
  }
  std::vector<Engagement> out;
  std::size_t index = 0;
  for (const ScenarioGroupSpec& group : spec.scenarios) {
    for (std::size_t c = 0; c < group.count; ++c, ++index) {
      EngagementSpec es;
      char idbuf[64];
      std::snprintf(idbuf, sizeof(idbuf), "eng_%03zu_%dv%d", index,
                    group.blue, group.red);
      es.id = idbuf;
      es.n_blue = group.blue;
      es.n_red = group.red;
      es.duration_s = group.duration_s;
      es.sample_rate_hz = spec.sample_rate_hz;
      es.noise_sigma_km = spec.noise_sigma_km;
      es.seed = Rng::derive_seed(spec.seed, index);
      out.push_back(generate_engagement(es));
    }
  }
  return out;
}

// Keeps every `factor`-th sample (decimation to a lower rate). Used by the
// sampling-frequency experiment to produce a matched low-rate view of the
// same battle.
inline Engagement decimate(const Engagement& e, std::size_t factor) {
  if (factor < 1) throw config_error("decimate: factor must be >= 1");
  Engagement out;
  out.id = e.id;
  out.n_blue = e.n_blue;
  out.n_red = e.n_red;
  out.sample_rate_hz = e.sample_rate_hz / static_cast<double>(factor);
  out.fighters.reserve(e.fighters.size());
  for (const FighterTrack& f : e.fighters) {
    FighterTrack g;
    g.fighter_id = f.fighter_id;
    g.team = f.team;
    for (std::size_t k = 0; k < f.states.size(); k += factor) {
      g.states.push_back(f.states[k]);
    }
    out.fighters.push_back(std::move(g));
  }
  out.validate();
  return out;
}

}  // namespace stgat
