#include "lsmr/training.hpp"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <unistd.h>

#include <filesystem>
#include <ostream>

namespace lsmr {

std::string model_fingerprint(const RunConfig& cfg) {
  RunConfig relevant;
  relevant.plant = cfg.plant;
  relevant.sensors.pose_noise_xy = cfg.sensors.pose_noise_xy;
  relevant.sensors.pose_noise_yaw = cfg.sensors.pose_noise_yaw;
  relevant.sensors.wheel_noise = cfg.sensors.wheel_noise;
  relevant.sdnn = cfg.sdnn;
  relevant.sdnn.model_path.clear();
  return fingerprint(to_text(relevant));
}

namespace {

SideTrainingReport train_side(const RunConfig& cfg, Side side, SideModel& out, std::ostream* log) {
  SensorConfig sensors = cfg.sensors;
  sensors.seed = cfg.sdnn.data_seed;
  const Dataset ds = collect_ramp_dataset(cfg.plant, sensors, cfg.sdnn.protocol, side, cfg.sdnn.data_seed);
  const TrainResult res = train(ds, cfg.sdnn.train);
  out.net = res.net;
  out.input_norm = ds.input_norm;
  out.output_norm = ds.output_norm;
  if (log) {
    fmt::print(*log, "side {}: {} samples, {} epochs, train mse {:.3e}, val {:.3e}, test {:.3e} ({})\n",
               side == Side::Right ? "R" : "L", ds.size(), res.report.epochs, res.report.train_mse,
               res.report.val_mse, res.report.test_mse, res.report.stop_reason);
  }
  return {static_cast<std::size_t>(ds.size()), res.report};
}

}  // namespace

TrainingOutcome train_sdnn(const RunConfig& cfg, std::ostream* log) {
  TrainingOutcome out;
  out.model.wheel_radius = cfg.plant.geometry.wheel_radius;
  out.model.fingerprint = model_fingerprint(cfg);
  out.right = train_side(cfg, Side::Right, out.model.right, log);
  out.left = train_side(cfg, Side::Left, out.model.left, log);
  return out;
}

SdnnModel ensure_model(const RunConfig& cfg, std::ostream* log) {
  const std::string& path = cfg.sdnn.model_path;
  const std::string want = model_fingerprint(cfg);
  if (!path.empty() && std::filesystem::exists(path)) {
    SdnnModel m = load_model_file(path);
    if (m.fingerprint == want) return m;
    if (log) fmt::print(*log, "model {} was trained for a different setup; retraining\n", path);
  }
  if (log) fmt::print(*log, "training SDNN surrogate (cached at {})\n", path.empty() ? "<memory>" : path);
  TrainingOutcome t = train_sdnn(cfg, log);
  if (!path.empty()) {
    const auto parent = std::filesystem::path(path).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    // Write then rename so concurrent runs never read a half-written cache.
    const std::string tmp = fmt::format("{}.{}.partial", path, ::getpid());
    save_model_file(tmp, t.model);
    std::filesystem::rename(tmp, path);
  }
  return t.model;
}

}  // namespace lsmr
