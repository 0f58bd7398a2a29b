#include "lsmr/config.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>
#include <vector>

namespace lsmr {

std::string_view to_string(Scenario s) {
  switch (s) {
    case Scenario::NoNmpc: return "no-nmpc";
    case Scenario::SdnnOnly: return "sdnn-only";
    case Scenario::FullRsdnn: return "full-rsdnn";
  }
  return "?";
}

std::string_view to_string(TerrainKind k) { return k == TerrainKind::Asphalt ? "asphalt" : "soft-soil"; }

Scenario parse_scenario(std::string_view name) {
  for (Scenario s : {Scenario::NoNmpc, Scenario::SdnnOnly, Scenario::FullRsdnn}) {
    if (name == to_string(s)) return s;
  }
  throw ConfigError(fmt::format("unknown scenario '{}' (expected no-nmpc, sdnn-only or full-rsdnn)", name));
}

TerrainKind parse_terrain(std::string_view name) {
  if (name == "asphalt") return TerrainKind::Asphalt;
  if (name == "soft-soil") return TerrainKind::SoftSoil;
  throw ConfigError(fmt::format("unknown terrain '{}' (expected asphalt or soft-soil)", name));
}

void RateSchedule::validate() const {
  if (low_level_hz <= 0 || pose_hz <= 0 || high_level_hz <= 0 || low_level_hz % pose_hz != 0 ||
      low_level_hz % high_level_hz != 0) {
    throw ConfigError("rates: low-level rate must be a positive multiple of the pose and high-level rates");
  }
  if (1000 % low_level_hz != 0) throw ConfigError("rates: low-level period must be a whole number of milliseconds");
}

DisturbanceProfile DisturbanceConfig::profile(std::uint64_t seed) const {
  DisturbanceProfile d;
  d.band_amplitude = band_amplitude;
  d.band_frequency = band_frequency;
  d.seed = seed;
  if (load_step_magnitude != 0.0) d.steps.push_back({load_step_time, load_step_magnitude, true, true});
  return d;
}

void RunConfig::validate() const {
  rates.validate();
  if (!(run_duration() > 0.0) || post_stop < 0.0) throw ConfigError("run: duration must be positive");
  if (!plant.geometry.valid()) throw ConfigError("geometry: wheel radius and half track must be positive");
  try {
    plant.right.validate();
    plant.left.validate();
    reference.validate();
    ocp.validate();
    gains.validate();
    safety.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (sensors.pose_noise_xy < 0.0 || sensors.pose_noise_yaw < 0.0 || sensors.wheel_noise < 0.0) {
    throw ConfigError("sensors: noise levels must be non-negative");
  }
  if (disturbance.band_amplitude < 0.0 || !(disturbance.band_frequency > 0.0)) {
    throw ConfigError("disturbance: amplitude must be non-negative and frequency positive");
  }
  if (nmpc_iterations < 1 || nmpc_cold_iterations < 1) throw ConfigError("nmpc: iteration budgets must be >= 1");
  if ((error_weights.array() < 0.0).any()) throw ConfigError("rsdnn: error weights must be non-negative");
  if (sdnn.protocol.leg_duration <= 0.0 || sdnn.protocol.log_rate <= 0.0 || sdnn.protocol.median_taps < 1 ||
      sdnn.protocol.median_taps % 2 == 0 || sdnn.protocol.dead_zone < 0.0) {
    throw ConfigError("sdnn: invalid ramp protocol");
  }
  if (sdnn.train.max_epochs < 1 || sdnn.train.hidden.empty()) throw ConfigError("sdnn: invalid training options");
  if (!(step.duration > 0.0) || step.held_error < 0.0 || step.held_error >= safety.bound) {
    throw ConfigError("step: duration must be positive and the held error below the safety bound");
  }
  if (lowlevel_decimation < 1) throw ConfigError("telemetry: decimation must be >= 1");
}

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(std::string_view v) {
  v = trim(v);
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(fmt::format("'{}' is not a number", v));
  }
  return out;
}

template <class Int>
Int parse_int(std::string_view v) {
  v = trim(v);
  Int out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    throw ConfigError(fmt::format("'{}' is not an integer", v));
  }
  return out;
}

std::vector<std::string_view> split_list(std::string_view v) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= v.size(); ++i) {
    if (i == v.size() || v[i] == ',') {
      const auto part = trim(v.substr(start, i - start));
      if (!part.empty()) parts.push_back(part);
      start = i + 1;
    }
  }
  return parts;
}

template <int N>
Eigen::Matrix<double, N, 1> parse_vec(std::string_view v) {
  const auto parts = split_list(v);
  if (static_cast<int>(parts.size()) != N) throw ConfigError(fmt::format("expected {} comma-separated numbers", N));
  Eigen::Matrix<double, N, 1> out;
  for (int i = 0; i < N; ++i) out[i] = parse_double(parts[static_cast<std::size_t>(i)]);
  return out;
}

std::string fmt_double(double x) { return fmt::format("{}", x); }

template <class Vec>
std::string fmt_vec(const Vec& v) {
  std::string s;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? ", " : "") + fmt_double(v[i]);
  return s;
}

struct Entry {
  std::string section;
  std::string key;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

// Each accessor maps a mutable config to the field it owns.
template <class F>
Entry real(std::string sec, std::string key, F f) {
  return {std::move(sec), std::move(key), [f](RunConfig& c, std::string_view v) { f(c) = parse_double(v); },
          [f](const RunConfig& c) { return fmt_double(f(const_cast<RunConfig&>(c))); }};
}

template <class F>
Entry integer(std::string sec, std::string key, F f) {
  using T = std::remove_reference_t<decltype(f(std::declval<RunConfig&>()))>;
  return {std::move(sec), std::move(key), [f](RunConfig& c, std::string_view v) { f(c) = parse_int<T>(v); },
          [f](const RunConfig& c) { return fmt::format("{}", f(const_cast<RunConfig&>(c))); }};
}

template <int N, class F>
Entry vec(std::string sec, std::string key, F f) {
  return {std::move(sec), std::move(key), [f](RunConfig& c, std::string_view v) { f(c) = parse_vec<N>(v); },
          [f](const RunConfig& c) { return fmt_vec(f(const_cast<RunConfig&>(c))); }};
}

void add_actuation(std::vector<Entry>& t, const std::string& sec, ActuationParams& (*side)(RunConfig&)) {
  t.push_back(real(sec, "inertia", [side](RunConfig& c) -> double& { return side(c).inertia; }));
  t.push_back(real(sec, "viscous", [side](RunConfig& c) -> double& { return side(c).viscous; }));
  t.push_back(real(sec, "coulomb", [side](RunConfig& c) -> double& { return side(c).coulomb; }));
  t.push_back(real(sec, "coulomb_speed", [side](RunConfig& c) -> double& { return side(c).coulomb_speed; }));
  t.push_back(real(sec, "gain", [side](RunConfig& c) -> double& { return side(c).gain; }));
  t.push_back(real(sec, "u_rated", [side](RunConfig& c) -> double& { return side(c).u_rated; }));
  t.push_back(real(sec, "deadband", [side](RunConfig& c) -> double& { return side(c).deadband; }));
  t.push_back(real(sec, "softening", [side](RunConfig& c) -> double& { return side(c).softening; }));
  t.push_back(real(sec, "lag_tau", [side](RunConfig& c) -> double& { return side(c).lag_tau; }));
  t.push_back(integer(sec, "substeps", [side](RunConfig& c) -> int& { return side(c).substeps; }));
}

const std::vector<Entry>& table() {
  static const std::vector<Entry> entries = [] {
    std::vector<Entry> t;
    t.push_back({"run", "scenario", [](RunConfig& c, std::string_view v) { c.scenario = parse_scenario(trim(v)); },
                 [](const RunConfig& c) { return std::string(to_string(c.scenario)); }});
    t.push_back({"run", "terrain", [](RunConfig& c, std::string_view v) { c.terrain = parse_terrain(trim(v)); },
                 [](const RunConfig& c) { return std::string(to_string(c.terrain)); }});
    t.push_back(integer("run", "seed", [](RunConfig& c) -> std::uint64_t& { return c.seed; }));
    t.push_back(real("run", "duration", [](RunConfig& c) -> double& { return c.duration; }));
    t.push_back(real("run", "post_stop", [](RunConfig& c) -> double& { return c.post_stop; }));

    t.push_back(integer("rates", "low_level", [](RunConfig& c) -> int& { return c.rates.low_level_hz; }));
    t.push_back(integer("rates", "pose", [](RunConfig& c) -> int& { return c.rates.pose_hz; }));
    t.push_back(integer("rates", "high_level", [](RunConfig& c) -> int& { return c.rates.high_level_hz; }));

    t.push_back(real("geometry", "wheel_radius", [](RunConfig& c) -> double& { return c.plant.geometry.wheel_radius; }));
    t.push_back(real("geometry", "half_track", [](RunConfig& c) -> double& { return c.plant.geometry.half_track; }));
    add_actuation(t, "plant.right", [](RunConfig& c) -> ActuationParams& { return c.plant.right; });
    add_actuation(t, "plant.left", [](RunConfig& c) -> ActuationParams& { return c.plant.left; });

    t.push_back(real("sensors", "pose_noise_xy", [](RunConfig& c) -> double& { return c.sensors.pose_noise_xy; }));
    t.push_back(real("sensors", "pose_noise_yaw", [](RunConfig& c) -> double& { return c.sensors.pose_noise_yaw; }));
    t.push_back(real("sensors", "wheel_noise", [](RunConfig& c) -> double& { return c.sensors.wheel_noise; }));

    t.push_back(real("disturbance", "band_amplitude", [](RunConfig& c) -> double& { return c.disturbance.band_amplitude; }));
    t.push_back(real("disturbance", "band_frequency", [](RunConfig& c) -> double& { return c.disturbance.band_frequency; }));
    t.push_back(real("disturbance", "load_step_time", [](RunConfig& c) -> double& { return c.disturbance.load_step_time; }));
    t.push_back(real("disturbance", "load_step_magnitude",
                     [](RunConfig& c) -> double& { return c.disturbance.load_step_magnitude; }));

    t.push_back(real("terrain", "base_slip", [](RunConfig& c) -> double& { return c.terrain_overrides.base_slip; }));
    t.push_back(real("terrain", "texture", [](RunConfig& c) -> double& { return c.terrain_overrides.texture; }));
    t.push_back(real("terrain", "patch_slip", [](RunConfig& c) -> double& { return c.terrain_overrides.patch_slip; }));
    t.push_back(real("terrain", "patch_radius", [](RunConfig& c) -> double& { return c.terrain_overrides.patch_radius; }));
    t.push_back(real("terrain", "turn_resistance",
                     [](RunConfig& c) -> double& { return c.terrain_overrides.turn_resistance; }));

    t.push_back(real("reference", "length", [](RunConfig& c) -> double& { return c.reference.length; }));
    t.push_back(real("reference", "width", [](RunConfig& c) -> double& { return c.reference.width; }));
    t.push_back(real("reference", "period", [](RunConfig& c) -> double& { return c.reference.period; }));
    t.push_back(real("reference", "center_x", [](RunConfig& c) -> double& { return c.reference.center_x; }));
    t.push_back(real("reference", "center_y", [](RunConfig& c) -> double& { return c.reference.center_y; }));

    t.push_back(integer("nmpc", "horizon", [](RunConfig& c) -> int& { return c.ocp.horizon; }));
    t.push_back(real("nmpc", "dt", [](RunConfig& c) -> double& { return c.ocp.dt; }));
    t.push_back(vec<3>("nmpc", "q_x", [](RunConfig& c) -> Eigen::Vector3d& { return c.ocp.q_x; }));
    t.push_back(vec<3>("nmpc", "q_xdot", [](RunConfig& c) -> Eigen::Vector3d& { return c.ocp.q_xdot; }));
    t.push_back(vec<3>("nmpc", "q_xN", [](RunConfig& c) -> Eigen::Vector3d& { return c.ocp.q_xN; }));
    t.push_back(vec<3>("nmpc", "q_xdotN", [](RunConfig& c) -> Eigen::Vector3d& { return c.ocp.q_xdotN; }));
    t.push_back(vec<2>("nmpc", "r_bar", [](RunConfig& c) -> Eigen::Vector2d& { return c.ocp.r_bar; }));
    t.push_back(vec<3>("nmpc", "x_min", [](RunConfig& c) -> Eigen::Vector3d& { return c.ocp.x_min; }));
    t.push_back(vec<3>("nmpc", "x_max", [](RunConfig& c) -> Eigen::Vector3d& { return c.ocp.x_max; }));
    t.push_back(vec<2>("nmpc", "rate_min", [](RunConfig& c) -> Eigen::Vector2d& { return c.ocp.rate_min; }));
    t.push_back(vec<2>("nmpc", "rate_max", [](RunConfig& c) -> Eigen::Vector2d& { return c.ocp.rate_max; }));
    t.push_back(vec<2>("nmpc", "accel_min", [](RunConfig& c) -> Eigen::Vector2d& { return c.ocp.accel_min; }));
    t.push_back(vec<2>("nmpc", "accel_max", [](RunConfig& c) -> Eigen::Vector2d& { return c.ocp.accel_max; }));
    t.push_back({"nmpc", "integrator",
                 [](RunConfig& c, std::string_view v) {
                   v = trim(v);
                   if (v == "rk4") {
                     c.ocp.integrator = Integrator::RK4;
                   } else if (v == "euler") {
                     c.ocp.integrator = Integrator::Euler;
                   } else {
                     throw ConfigError(fmt::format("unknown integrator '{}' (expected rk4 or euler)", v));
                   }
                 },
                 [](const RunConfig& c) { return std::string(c.ocp.integrator == Integrator::RK4 ? "rk4" : "euler"); }});
    t.push_back(integer("nmpc", "iterations", [](RunConfig& c) -> int& { return c.nmpc_iterations; }));
    t.push_back(integer("nmpc", "cold_iterations", [](RunConfig& c) -> int& { return c.nmpc_cold_iterations; }));

    t.push_back(real("rsdnn", "epsilon", [](RunConfig& c) -> double& { return c.gains.epsilon; }));
    t.push_back(real("rsdnn", "gamma", [](RunConfig& c) -> double& { return c.gains.gamma; }));
    t.push_back(real("rsdnn", "delta", [](RunConfig& c) -> double& { return c.gains.delta; }));
    t.push_back(real("rsdnn", "chi0", [](RunConfig& c) -> double& { return c.gains.chi0; }));
    t.push_back(vec<3>("rsdnn", "error_weights", [](RunConfig& c) -> Eigen::Vector3d& { return c.error_weights; }));

    t.push_back(real("safety", "bound", [](RunConfig& c) -> double& { return c.safety.bound; }));
    t.push_back(real("safety", "margin", [](RunConfig& c) -> double& { return c.safety.margin; }));
    t.push_back(real("safety", "taper_start", [](RunConfig& c) -> double& { return c.safety.taper_start; }));
    t.push_back(real("safety", "cap_floor", [](RunConfig& c) -> double& { return c.safety.cap_floor; }));
    t.push_back(real("safety", "brake_decel", [](RunConfig& c) -> double& { return c.safety.brake_decel; }));
    t.push_back(real("safety", "recover_fraction", [](RunConfig& c) -> double& { return c.safety.recover_fraction; }));

    t.push_back({"sdnn", "model", [](RunConfig& c, std::string_view v) { c.sdnn.model_path = std::string(trim(v)); },
                 [](const RunConfig& c) { return c.sdnn.model_path; }});
    t.push_back({"sdnn", "hidden",
                 [](RunConfig& c, std::string_view v) {
                   std::vector<int> h;
                   for (auto p : split_list(v)) h.push_back(parse_int<int>(p));
                   if (h.empty()) throw ConfigError("hidden: at least one layer required");
                   c.sdnn.train.hidden = h;
                 },
                 [](const RunConfig& c) {
                   std::string s;
                   for (std::size_t i = 0; i < c.sdnn.train.hidden.size(); ++i) {
                     s += (i ? ", " : "") + std::to_string(c.sdnn.train.hidden[i]);
                   }
                   return s;
                 }});
    t.push_back(real("sdnn", "target_mse", [](RunConfig& c) -> double& { return c.sdnn.train.target_mse; }));
    t.push_back(real("sdnn", "min_grad", [](RunConfig& c) -> double& { return c.sdnn.train.min_grad; }));
    t.push_back(integer("sdnn", "max_epochs", [](RunConfig& c) -> int& { return c.sdnn.train.max_epochs; }));
    t.push_back(integer("sdnn", "max_val_fail", [](RunConfig& c) -> int& { return c.sdnn.train.max_val_fail; }));
    t.push_back(real("sdnn", "mu_init", [](RunConfig& c) -> double& { return c.sdnn.train.mu_init; }));
    t.push_back(real("sdnn", "beta", [](RunConfig& c) -> double& { return c.sdnn.train.beta; }));
    t.push_back(real("sdnn", "mu_max", [](RunConfig& c) -> double& { return c.sdnn.train.mu_max; }));
    t.push_back(integer("sdnn", "train_seed", [](RunConfig& c) -> std::uint64_t& { return c.sdnn.train.seed; }));
    t.push_back(integer("sdnn", "data_seed", [](RunConfig& c) -> std::uint64_t& { return c.sdnn.data_seed; }));
    t.push_back(real("sdnn", "ramp_leg", [](RunConfig& c) -> double& { return c.sdnn.protocol.leg_duration; }));
    t.push_back(real("sdnn", "ramp_amplitude", [](RunConfig& c) -> double& { return c.sdnn.protocol.amplitude; }));
    t.push_back(real("sdnn", "ramp_log_rate", [](RunConfig& c) -> double& { return c.sdnn.protocol.log_rate; }));
    t.push_back(integer("sdnn", "median_taps", [](RunConfig& c) -> int& { return c.sdnn.protocol.median_taps; }));
    t.push_back(real("sdnn", "dead_zone", [](RunConfig& c) -> double& { return c.sdnn.protocol.dead_zone; }));

    t.push_back(real("step", "reference", [](RunConfig& c) -> double& { return c.step.reference; }));
    t.push_back(real("step", "duration", [](RunConfig& c) -> double& { return c.step.duration; }));
    t.push_back(real("step", "load", [](RunConfig& c) -> double& { return c.step.load; }));
    t.push_back(real("step", "load_start", [](RunConfig& c) -> double& { return c.step.load_start; }));
    t.push_back(real("step", "held_error", [](RunConfig& c) -> double& { return c.step.held_error; }));

    t.push_back(integer("telemetry", "lowlevel_decimation", [](RunConfig& c) -> int& { return c.lowlevel_decimation; }));
    return t;
  }();
  return entries;
}

}  // namespace

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::string section;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(fmt::format("line {}: malformed section header", line_no));
      section = std::string(trim(line.substr(1, line.size() - 2)));
      bool known = false;
      for (const Entry& e : table()) known = known || e.section == section;
      if (!known) throw ConfigError(fmt::format("line {}: unknown section [{}]", line_no, section));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(fmt::format("line {}: expected key = value", line_no));
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    const Entry* match = nullptr;
    for (const Entry& e : table()) {
      if (e.section == section && e.key == key) match = &e;
    }
    if (!match) {
      throw ConfigError(section.empty() ? fmt::format("line {}: key '{}' outside any section", line_no, key)
                                        : fmt::format("line {}: unknown key '{}' in [{}]", line_no, key, section));
    }
    try {
      match->set(base, value);
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}: {}", line_no, key, e.what()));
    }
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

std::string to_text(const RunConfig& cfg) {
  std::string out;
  std::string section;
  for (const Entry& e : table()) {
    if (e.section != section) {
      if (!section.empty()) out += '\n';
      section = e.section;
      out += fmt::format("[{}]\n", section);
    }
    out += fmt::format("{} = {}\n", e.key, e.get(cfg));
  }
  return out;
}

std::string fingerprint(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : text) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return fmt::format("{:016x}", h);
}

}  // namespace lsmr
