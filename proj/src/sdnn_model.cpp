#include "lsmr/sdnn_model.hpp"

#include <fstream>
#include <stdexcept>

#include "json.hpp"

namespace lsmr {

using nlohmann::json;

double SideModel::operator()(double v) const {
  return output_norm.denormalize(forward(net, input_norm.normalize(v)));
}

namespace {

json side_to_json(const SideModel& m) {
  json layers = json::array();
  for (const DenseLayer& l : m.net.layers) {
    std::vector<double> w;
    w.reserve(static_cast<std::size_t>(l.weights.size()));
    for (Eigen::Index i = 0; i < l.weights.rows(); ++i) {
      for (Eigen::Index j = 0; j < l.weights.cols(); ++j) w.push_back(l.weights(i, j));
    }
    layers.push_back({{"rows", l.weights.rows()},
                      {"cols", l.weights.cols()},
                      {"weights", w},
                      {"bias", std::vector<double>(l.bias.data(), l.bias.data() + l.bias.size())}});
  }
  return {{"layers", layers},
          {"input_norm", {{"min", m.input_norm.min}, {"max", m.input_norm.max}}},
          {"output_norm", {{"min", m.output_norm.min}, {"max", m.output_norm.max}}}};
}

SideModel side_from_json(const json& j) {
  SideModel m;
  Eigen::Index prev_rows = 1;
  for (const json& lj : j.at("layers")) {
    const auto rows = lj.at("rows").get<Eigen::Index>();
    const auto cols = lj.at("cols").get<Eigen::Index>();
    const auto w = lj.at("weights").get<std::vector<double>>();
    const auto b = lj.at("bias").get<std::vector<double>>();
    if (rows < 1 || cols != prev_rows || static_cast<Eigen::Index>(w.size()) != rows * cols ||
        static_cast<Eigen::Index>(b.size()) != rows) {
      throw std::runtime_error("model file: inconsistent layer shapes");
    }
    DenseLayer l{Eigen::MatrixXd(rows, cols), Eigen::VectorXd(rows)};
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index c = 0; c < cols; ++c) l.weights(i, c) = w[static_cast<std::size_t>(i * cols + c)];
      l.bias[i] = b[static_cast<std::size_t>(i)];
    }
    if (!l.weights.allFinite() || !l.bias.allFinite()) throw std::runtime_error("model file: non-finite parameter");
    m.net.layers.push_back(std::move(l));
    prev_rows = rows;
  }
  if (m.net.layers.empty() || prev_rows != 1) throw std::runtime_error("model file: network must map 1 -> 1");
  m.input_norm = {j.at("input_norm").at("min").get<double>(), j.at("input_norm").at("max").get<double>()};
  m.output_norm = {j.at("output_norm").at("min").get<double>(), j.at("output_norm").at("max").get<double>()};
  return m;
}

}  // namespace

void save_model(std::ostream& os, const SdnnModel& model) {
  json j{{"version", kModelFormatVersion},
         {"wheel_radius", model.wheel_radius},
         {"fingerprint", model.fingerprint},
         {"sides", {{"R", side_to_json(model.right)}, {"L", side_to_json(model.left)}}}};
  os << j.dump(1) << '\n';
}

SdnnModel load_model(std::istream& is) {
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("model file: ") + e.what());
  }
  try {
    if (j.at("version").get<int>() != kModelFormatVersion) throw std::runtime_error("model file: unsupported version");
    SdnnModel m;
    m.wheel_radius = j.value("wheel_radius", 1.0);
    m.fingerprint = j.value("fingerprint", std::string());
    m.right = side_from_json(j.at("sides").at("R"));
    m.left = side_from_json(j.at("sides").at("L"));
    return m;
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("model file: ") + e.what());
  }
}

void save_model_file(const std::string& path, const SdnnModel& model) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write model file " + path);
  save_model(os, model);
}

SdnnModel load_model_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read model file " + path);
  return load_model(is);
}

}  // namespace lsmr
