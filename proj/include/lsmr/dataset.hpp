#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "lsmr/plant.hpp"

namespace lsmr {

/// Affine map of [min, max] onto [-1, 1].
struct Normalizer {
  double min = -1.0;
  double max = 1.0;

  static Normalizer fit(const Eigen::RowVectorXd& values);
  double normalize(double x) const;
  double denormalize(double y) const;
  Eigen::RowVectorXd normalize(const Eigen::RowVectorXd& x) const;
  Eigen::RowVectorXd denormalize(const Eigen::RowVectorXd& y) const;
};

/// One logged row of the ramp protocol.
struct RampSample {
  double t = 0.0;
  Side side = Side::Right;
  double u_cmd = 0.0;
  double wheel_rate = 0.0;
};

/// Slow bidirectional ramps 0 -> +U -> 0 -> -U -> 0, each leg lasting leg_duration.
struct RampProtocol {
  double leg_duration = 50.0;
  double amplitude = 0.0;  // 0 means the side's rated u
  double log_rate = 50.0;  // Hz
  double sim_dt = 1e-3;
  int median_taps = 5;
  // Samples with |v| below this (m/s) sit inside the actuator dead zone, where many u give the same v;
  // the inverse map is not identifiable there, so they are dropped and the fit bridges the gap.
  double dead_zone = 0.0;
};

/// Raw (u, measured rate) log for both sides. Each side runs on its own actuator from rest.
std::vector<RampSample> run_ramp_protocol(const PlantConfig& plant, const SensorConfig& sensors,
                                          const RampProtocol& protocol);

struct Dataset {
  Eigen::RowVectorXd inputs;   // v = r * rate, m/s
  Eigen::RowVectorXd targets;  // u, kRPM
  std::vector<int> train;
  std::vector<int> val;
  std::vector<int> test;
  Normalizer input_norm;
  Normalizer output_norm;

  Eigen::Index size() const { return inputs.size(); }
  /// Normalized (inputs, targets) restricted to an index set.
  std::pair<Eigen::RowVectorXd, Eigen::RowVectorXd> normalized(const std::vector<int>& idx) const;
};

/// Seeded random split by count (0.70/0.15/0.15) and normalizers fitted on the training part.
void split_and_normalize(Dataset& ds, std::uint64_t seed, double train_frac = 0.70, double val_frac = 0.15);

/// Median de-spike of the measured rates, timestamp join of u and rate, swap to (v -> u).
Dataset build_dataset(const std::vector<RampSample>& log, Side side, double wheel_radius, int median_taps,
                      std::uint64_t seed, double dead_zone = 0.0);

Dataset collect_ramp_dataset(const PlantConfig& plant, const SensorConfig& sensors, const RampProtocol& protocol,
                             Side side, std::uint64_t seed);

/// Centered running median; the window shrinks at the ends.
std::vector<double> median_filter(const std::vector<double>& x, int taps);

void write_ramp_csv(std::ostream& os, const std::vector<RampSample>& log);
std::vector<RampSample> read_ramp_csv(std::istream& is);

}  // namespace lsmr
