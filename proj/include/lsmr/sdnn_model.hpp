#pragma once

#include <iosfwd>
#include <string>

#include "lsmr/dataset.hpp"
#include "lsmr/mlp.hpp"

namespace lsmr {

/// One side's trained surrogate with its normalization maps: v (m/s) -> u (kRPM).
struct SideModel {
  MlpParams net;
  Normalizer input_norm;
  Normalizer output_norm;

  double operator()(double v) const;
};

/// Both sides of the actuation surrogate. Immutable after loading, safe to share across threads.
struct SdnnModel {
  SideModel right;
  SideModel left;
  double wheel_radius = 1.0;
  std::string fingerprint;  // identifies the plant and training setup the model came from

  const SideModel& side(Side s) const { return s == Side::Right ? right : left; }
  /// u_SDNN for a wheel-rate command (rad/s).
  double u_for_rate(Side s, double rate) const { return side(s)(wheel_radius * rate); }
};

inline constexpr int kModelFormatVersion = 1;

void save_model(std::ostream& os, const SdnnModel& model);
SdnnModel load_model(std::istream& is);
void save_model_file(const std::string& path, const SdnnModel& model);
SdnnModel load_model_file(const std::string& path);

}  // namespace lsmr
