#include "lsmr/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace lsmr {

Normalizer Normalizer::fit(const Eigen::RowVectorXd& values) {
  if (values.size() == 0) throw std::invalid_argument("normalizer: empty data");
  Normalizer n{values.minCoeff(), values.maxCoeff()};
  if (!(n.max > n.min)) {
    // Degenerate range: widen symmetrically so the map stays invertible.
    n.min -= 1.0;
    n.max += 1.0;
  }
  return n;
}

double Normalizer::normalize(double x) const { return 2.0 * (x - min) / (max - min) - 1.0; }

double Normalizer::denormalize(double y) const { return min + 0.5 * (y + 1.0) * (max - min); }

Eigen::RowVectorXd Normalizer::normalize(const Eigen::RowVectorXd& x) const {
  return (2.0 / (max - min)) * (x.array() - min).matrix() - Eigen::RowVectorXd::Ones(x.size());
}

Eigen::RowVectorXd Normalizer::denormalize(const Eigen::RowVectorXd& y) const {
  return (min + 0.5 * (max - min) * (y.array() + 1.0)).matrix();
}

namespace {

double ramp_value(double t, double leg, double amp) {
  const int k = std::min(static_cast<int>(t / leg), 3);
  const double frac = std::clamp((t - k * leg) / leg, 0.0, 1.0);
  switch (k) {
    case 0: return amp * frac;
    case 1: return amp * (1.0 - frac);
    case 2: return -amp * frac;
    default: return -amp * (1.0 - frac);
  }
}

}  // namespace

std::vector<RampSample> run_ramp_protocol(const PlantConfig& plant, const SensorConfig& sensors,
                                          const RampProtocol& protocol) {
  if (!(protocol.leg_duration > 0.0) || !(protocol.log_rate > 0.0) || !(protocol.sim_dt > 0.0)) {
    throw std::invalid_argument("ramp protocol: durations and rates must be positive");
  }
  std::vector<RampSample> log;
  const long long steps = std::llround(4.0 * protocol.leg_duration / protocol.sim_dt);
  const long long log_every = std::max<long long>(1, std::llround(1.0 / (protocol.log_rate * protocol.sim_dt)));
  for (Side side : {Side::Right, Side::Left}) {
    const ActuationParams& p = side == Side::Right ? plant.right : plant.left;
    const double amp = protocol.amplitude > 0.0 ? protocol.amplitude : p.u_rated;
    SensorConfig sc = sensors;
    sc.seed = sensors.seed + (side == Side::Right ? 0 : 1);
    WheelSensor sensor(sc);
    ActuationState state = equilibrium_state(p, 0.0);
    WheelRates last{};
    for (long long k = 0; k <= steps; ++k) {
      const double t = static_cast<double>(k) * protocol.sim_dt;
      const double u = ramp_value(t, protocol.leg_duration, amp);
      const WheelRates truth{state.rate, state.rate};
      if (auto m = sensor.sample(truth, t)) last = *m;
      if (k % log_every == 0) log.push_back({t, side, u, last.right});
      state = step_actuation(state, p, u, protocol.sim_dt);
    }
  }
  return log;
}

std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> Dataset::normalized(const std::vector<int>& idx) const {
  Eigen::RowVectorXd in(static_cast<Eigen::Index>(idx.size()));
  Eigen::RowVectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    in[static_cast<Eigen::Index>(k)] = input_norm.normalize(inputs[idx[k]]);
    out[static_cast<Eigen::Index>(k)] = output_norm.normalize(targets[idx[k]]);
  }
  return {in, out};
}

void split_and_normalize(Dataset& ds, std::uint64_t seed, double train_frac, double val_frac) {
  const int n = static_cast<int>(ds.size());
  if (n < 3) throw std::invalid_argument("dataset too small to split");
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with an explicit draw so the permutation is identical across standard libraries.
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }
  const int n_train = static_cast<int>(std::lround(train_frac * n));
  const int n_val = static_cast<int>(std::lround(val_frac * n));
  ds.train.assign(order.begin(), order.begin() + n_train);
  ds.val.assign(order.begin() + n_train, order.begin() + n_train + n_val);
  ds.test.assign(order.begin() + n_train + n_val, order.end());
  std::sort(ds.train.begin(), ds.train.end());
  std::sort(ds.val.begin(), ds.val.end());
  std::sort(ds.test.begin(), ds.test.end());

  Eigen::RowVectorXd tin(n_train);
  Eigen::RowVectorXd tout(n_train);
  for (int k = 0; k < n_train; ++k) {
    tin[k] = ds.inputs[ds.train[static_cast<std::size_t>(k)]];
    tout[k] = ds.targets[ds.train[static_cast<std::size_t>(k)]];
  }
  ds.input_norm = Normalizer::fit(tin);
  ds.output_norm = Normalizer::fit(tout);
}

std::vector<double> median_filter(const std::vector<double>& x, int taps) {
  if (taps < 1 || taps % 2 == 0) throw std::invalid_argument("median filter needs an odd tap count");
  const int half = taps / 2;
  const int n = static_cast<int>(x.size());
  std::vector<double> out(x.size());
  std::vector<double> win;
  for (int i = 0; i < n; ++i) {
    const int h = std::min({half, i, n - 1 - i});
    win.assign(x.begin() + (i - h), x.begin() + (i + h + 1));
    std::nth_element(win.begin(), win.begin() + h, win.end());
    out[static_cast<std::size_t>(i)] = win[static_cast<std::size_t>(h)];
  }
  return out;
}

Dataset build_dataset(const std::vector<RampSample>& log, Side side, double wheel_radius, int median_taps,
                      std::uint64_t seed, double dead_zone) {
  if (dead_zone < 0.0) throw std::invalid_argument("dead zone must be non-negative");
  // Timestamp join: the last command and the last measurement seen at each logged time.
  std::map<long long, std::pair<double, double>> joined;
  for (const RampSample& s : log) {
    if (s.side != side || !std::isfinite(s.u_cmd) || !std::isfinite(s.wheel_rate)) continue;
    joined[std::llround(s.t * 1e6)] = {s.u_cmd, s.wheel_rate};
  }
  std::vector<double> u;
  std::vector<double> rate;
  u.reserve(joined.size());
  rate.reserve(joined.size());
  for (const auto& [key, row] : joined) {
    u.push_back(row.first);
    rate.push_back(row.second);
  }
  rate = median_filter(rate, median_taps);

  std::vector<double> v_keep;
  std::vector<double> u_keep;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double v = wheel_radius * rate[i];
    if (dead_zone > 0.0 && std::abs(v) < dead_zone) continue;
    v_keep.push_back(v);
    u_keep.push_back(u[i]);
  }

  Dataset ds;
  const auto n = static_cast<Eigen::Index>(u_keep.size());
  ds.inputs = Eigen::Map<const Eigen::RowVectorXd>(v_keep.data(), n);
  ds.targets = Eigen::Map<const Eigen::RowVectorXd>(u_keep.data(), n);
  split_and_normalize(ds, seed);
  return ds;
}

Dataset collect_ramp_dataset(const PlantConfig& plant, const SensorConfig& sensors, const RampProtocol& protocol,
                             Side side, std::uint64_t seed) {
  return build_dataset(run_ramp_protocol(plant, sensors, protocol), side, plant.geometry.wheel_radius,
                       protocol.median_taps, seed, protocol.dead_zone);
}

void write_ramp_csv(std::ostream& os, const std::vector<RampSample>& log) {
  os << "t_s,side,u_cmd,wheel_rate_meas\n";
  for (const RampSample& s : log) {
    os << fmt::format("{:.6f},{},{:.12g},{:.12g}\n", s.t, s.side == Side::Right ? 'R' : 'L', s.u_cmd,
                      s.wheel_rate);
  }
}

std::vector<RampSample> read_ramp_csv(std::istream& is) {
  std::vector<RampSample> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || (lineno == 1 && line.rfind("t_s", 0) == 0)) continue;
    std::stringstream ss(line);
    std::string f[4];
    for (auto& field : f) {
      if (!std::getline(ss, field, ',')) throw std::runtime_error(fmt::format("ramp csv line {}: too few columns", lineno));
    }
    RampSample s;
    try {
      s.t = std::stod(f[0]);
      s.u_cmd = std::stod(f[2]);
      s.wheel_rate = std::stod(f[3]);
    } catch (const std::exception&) {
      throw std::runtime_error(fmt::format("ramp csv line {}: bad number", lineno));
    }
    if (f[1] == "R") {
      s.side = Side::Right;
    } else if (f[1] == "L") {
      s.side = Side::Left;
    } else {
      throw std::runtime_error(fmt::format("ramp csv line {}: side must be R or L", lineno));
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace lsmr
