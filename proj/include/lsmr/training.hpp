#pragma once

#include <iosfwd>
#include <string>

#include "lsmr/config.hpp"
#include "lsmr/sdnn_model.hpp"

namespace lsmr {

struct SideTrainingReport {
  std::size_t samples = 0;
  TrainReport report;
};

struct TrainingOutcome {
  SdnnModel model;
  SideTrainingReport right;
  SideTrainingReport left;
};

/// Digest of everything that shapes the trained surrogate (plant, sensor noise, protocol, LM options).
std::string model_fingerprint(const RunConfig& cfg);

/// Runs the ramp protocol on each side of the configured plant and trains one network per side.
TrainingOutcome train_sdnn(const RunConfig& cfg, std::ostream* log = nullptr);

/// Loads cfg.sdnn.model_path when its fingerprint matches, otherwise trains and writes it there.
SdnnModel ensure_model(const RunConfig& cfg, std::ostream* log = nullptr);

}  // namespace lsmr
