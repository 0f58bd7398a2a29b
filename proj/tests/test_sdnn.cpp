#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <cmath>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "lsmr/dataset.hpp"
#include "lsmr/lm.hpp"
#include "lsmr/mlp.hpp"
#include "lsmr/sdnn_model.hpp"

using namespace lsmr;
using doctest::Approx;

namespace {

Eigen::RowVectorXd random_row(int n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> d(lo, hi);
  Eigen::RowVectorXd r(n);
  for (int i = 0; i < n; ++i) r[i] = d(rng);
  return r;
}

// Central differences of the batch output w.r.t. every flattened parameter.
Eigen::MatrixXd fd_jacobian(const MlpParams& net, const Eigen::RowVectorXd& in, double h) {
  const Eigen::VectorXd w0 = net.flatten();
  Eigen::MatrixXd j(in.size(), w0.size());
  MlpParams probe = net;
  for (Eigen::Index k = 0; k < w0.size(); ++k) {
    Eigen::VectorXd w = w0;
    w[k] += h;
    probe.unflatten(w);
    const Eigen::RowVectorXd fp = forward(probe, in);
    w[k] -= 2 * h;
    probe.unflatten(w);
    const Eigen::RowVectorXd fm = forward(probe, in);
    j.col(k) = (fp - fm).transpose() / (2 * h);
  }
  return j;
}

double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& oracle) {
  return (a - oracle).cwiseAbs().maxCoeff() / std::max(oracle.cwiseAbs().maxCoeff(), 1e-12);
}

}  // namespace

TEST_CASE("forward examples") {
  const MlpParams zero = MlpParams::zeros({35, 20, 12, 10, 8});
  CHECK(forward(zero, 0.7) == 0.0);
  CHECK(forward(zero, -123.0) == 0.0);

  MlpParams lin = MlpParams::zeros({});
  lin.layers[0].weights(0, 0) = 2.0;
  lin.layers[0].bias[0] = 1.0;
  CHECK(forward(lin, 3.0) == 7.0);

  const MlpParams net = MlpParams::random({6, 4}, 3);
  const Eigen::RowVectorXd in = random_row(5, 4);
  const Eigen::RowVectorXd out = forward(net, in);
  REQUIRE(out.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(out[i] == Approx(forward(net, in[i])).epsilon(1e-15));

  CHECK_THROWS_AS(forward(net, std::nan("")), std::invalid_argument);
  CHECK_THROWS_AS(forward(net, INFINITY), std::invalid_argument);
}

TEST_CASE("parameter count and flatten order") {
  CHECK(parameter_count({1, 35, 20, 12, 10, 8, 1}) == 1269);
  const MlpParams net = MlpParams::random({35, 20, 12, 10, 8}, 1);
  CHECK(net.parameter_count() == 1269);
  const Eigen::VectorXd w = net.flatten();
  CHECK(w.size() == 1269);
  // First layer is 35x1 weights then 35 biases; second layer starts with W(0, 0..34).
  CHECK(w[0] == net.layers[0].weights(0, 0));
  CHECK(w[35] == net.layers[0].bias[0]);
  CHECK(w[70] == net.layers[1].weights(0, 0));
  CHECK(w[71] == net.layers[1].weights(0, 1));
  MlpParams copy = MlpParams::zeros({35, 20, 12, 10, 8});
  copy.unflatten(w);
  CHECK(copy.flatten() == w);
  CHECK_THROWS(copy.unflatten(Eigen::VectorXd::Zero(10)));
  for (const auto& l : net.layers) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.weights.cols()));
    CHECK(l.weights.cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("jacobian matches central finite differences") {
  const std::vector<std::vector<int>> archs{{}, {3}, {5, 4}, {8, 6, 4}, {35, 20, 12, 10, 8}};
  std::uint64_t seed = 10;
  for (const auto& arch : archs) {
    for (int rep = 0; rep < 3; ++rep) {
      const MlpParams net = MlpParams::random(arch, ++seed);
      const Eigen::RowVectorXd in = random_row(7, ++seed);
      const Eigen::MatrixXd j = jacobian(net, in);
      CHECK(rel_err(j, fd_jacobian(net, in, 1e-6)) <= 1e-5);
    }
  }
}

TEST_CASE("linear network jacobian is parameter independent") {
  const Eigen::RowVectorXd in = random_row(9, 2);
  const Eigen::MatrixXd j1 = jacobian(MlpParams::random({}, 1), in);
  const Eigen::MatrixXd j2 = jacobian(MlpParams::random({}, 2), in);
  CHECK((j1 - j2).norm() == 0.0);
}

TEST_CASE("gradient identity (2/P) J^T xi") {
  const MlpParams net = MlpParams::random({6, 5}, 7);
  const Batch b{random_row(40, 8), random_row(40, 9)};
  const Linearization lin = linearize(net, b);
  const Eigen::VectorXd g = lin.gradient();
  const Eigen::VectorXd w0 = net.flatten();
  Eigen::VectorXd fd(w0.size());
  MlpParams probe = net;
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < w0.size(); ++k) {
    Eigen::VectorXd w = w0;
    w[k] += h;
    probe.unflatten(w);
    const double ep = mse(probe, b);
    w[k] -= 2 * h;
    probe.unflatten(w);
    fd[k] = (ep - mse(probe, b)) / (2 * h);
  }
  CHECK(rel_err(g, fd) <= 1e-5);
  CHECK(lin.mse == Approx(mse(net, b)));
}

TEST_CASE("lm_step limits") {
  // Targets from a nearby teacher network keep the problem close to its quadratic model.
  const MlpParams net = MlpParams::random({1}, 2);
  MlpParams teacher = net;
  teacher.unflatten(net.flatten() + 0.05 * random_row(4, 14).transpose());
  const Eigen::RowVectorXd in = random_row(200, 13, -2.0, 2.0);
  const Eigen::RowVectorXd tg = forward(teacher, in) + 0.01 * random_row(200, 15);
  const Batch b{in, tg};
  const Linearization lin = linearize(net, b);
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lin.jtj);
    REQUIRE(es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff() < 1e6);
  }

  SUBCASE("huge damping points down the gradient") {
    LmState st;
    st.net = net;
    st.mu = 1e9;
    const LmState next = lm_step(st, b, lin);
    const Eigen::VectorXd g = lin.gradient();
    const double cosang = -next.last_step.dot(g) / (next.last_step.norm() * g.norm());
    CHECK(std::acos(std::min(1.0, cosang)) * 180.0 / std::numbers::pi < 1.0);
  }
  SUBCASE("zero damping is the Gauss-Newton step") {
    LmState st;
    st.net = net;
    st.mu = 0.0;
    const LmState next = lm_step(st, b, lin);
    const Eigen::MatrixXd j = jacobian(net, in);
    const Eigen::VectorXd xi = (forward(net, in) - tg).transpose();
    const Eigen::VectorXd gn = -j.colPivHouseholderQr().solve(xi);
    CHECK((next.last_step - gn).norm() / gn.norm() <= 1e-8);
  }
  SUBCASE("accept lowers mu, reject keeps parameters and raises mu") {
    LmState st;
    st.net = net;
    st.mu = 1e-2;
    const LmState acc = lm_step(st, b, lin);
    REQUIRE(acc.last_accepted);
    CHECK(acc.mu == Approx(1e-3));
    CHECK(acc.train_mse < lin.mse);

    // A linearization with a flipped gradient yields an uphill step.
    Linearization bad = lin;
    bad.jte = -bad.jte;
    const LmState rej = lm_step(st, b, bad);
    CHECK_FALSE(rej.last_accepted);
    CHECK(rej.mu == Approx(1e-1));
    CHECK(rej.net.flatten() == net.flatten());
  }
}

TEST_CASE("single Gauss-Newton step solves linear least squares") {
  const Eigen::RowVectorXd in = random_row(50, 21);
  Eigen::RowVectorXd tg = 2.5 * in;
  tg.array() += 0.3;
  tg += 0.05 * random_row(50, 22);
  LmState st;
  st.net = MlpParams::random({}, 3);
  st.mu = 0.0;
  const Batch b{in, tg};
  const LmState next = lm_step(st, b);
  // Closed-form ordinary least squares.
  Eigen::MatrixXd a(50, 2);
  a.col(0) = in.transpose();
  a.col(1).setOnes();
  const Eigen::Vector2d ols = a.colPivHouseholderQr().solve(tg.transpose());
  CHECK(next.net.layers[0].weights(0, 0) == Approx(ols[0]).epsilon(1e-12));
  CHECK(next.net.layers[0].bias[0] == Approx(ols[1]).epsilon(1e-12));
  CHECK(linearize(next.net, b).gradient().norm() < 1e-12);
}

TEST_CASE("normalizer round trip and range") {
  const Eigen::RowVectorXd x = random_row(100, 30, -3.0, 11.0);
  const Normalizer n = Normalizer::fit(x);
  const Eigen::RowVectorXd y = n.normalize(x);
  CHECK(y.minCoeff() == Approx(-1.0));
  CHECK(y.maxCoeff() == Approx(1.0));
  CHECK((n.denormalize(y) - x).cwiseAbs().maxCoeff() <= 1e-12);
  for (int i = 0; i < 100; ++i) CHECK(std::abs(n.denormalize(n.normalize(x[i])) - x[i]) <= 1e-12);
}

TEST_CASE("split fractions") {
  for (int n : {20, 101, 1000, 10001}) {
    Dataset ds;
    ds.inputs = random_row(n, 1);
    ds.targets = random_row(n, 2);
    split_and_normalize(ds, 5);
    CHECK(std::abs(static_cast<double>(ds.train.size()) - 0.70 * n) <= 1.0);
    CHECK(std::abs(static_cast<double>(ds.val.size()) - 0.15 * n) <= 1.0);
    CHECK(std::abs(static_cast<double>(ds.test.size()) - 0.15 * n) <= 1.0);
    std::vector<int> all = ds.train;
    all.insert(all.end(), ds.val.begin(), ds.val.end());
    all.insert(all.end(), ds.test.begin(), ds.test.end());
    std::sort(all.begin(), all.end());
    for (int i = 0; i < n; ++i) CHECK(all[static_cast<std::size_t>(i)] == i);
    const auto [tin, tout] = ds.normalized(ds.train);
    CHECK(tin.minCoeff() == Approx(-1.0));
    CHECK(tout.maxCoeff() == Approx(1.0));
  }
}

TEST_CASE("median filter removes isolated spikes") {
  std::vector<double> x{1, 2, 3, 50, 5, 6, 7, -40, 9, 10};
  const auto y = median_filter(x, 5);
  CHECK(y[3] == 5.0);
  CHECK(y[7] == 7.0);
  CHECK(y[0] == 1.0);
  CHECK(y[9] == 10.0);
  CHECK_THROWS(median_filter(x, 4));
}

TEST_CASE("train on a linear plant reaches test MSE 1e-6") {
  Dataset ds;
  ds.inputs = random_row(500, 40, -0.8, 0.8);
  ds.targets = 1.7 * ds.inputs;
  ds.targets.array() += 0.2;
  split_and_normalize(ds, 41);
  TrainOptions opts;
  opts.hidden = {};
  opts.target_mse = 1e-12;
  const TrainResult r = train(ds, opts);
  CHECK(r.report.test_mse <= 1e-6);
  CHECK(r.report.converged);

  opts.hidden = {4};
  opts.target_mse = 1e-9;
  const TrainResult r2 = train(ds, opts);
  CHECK(r2.report.test_mse <= 1e-6);
}

TEST_CASE("training is deterministic and accepted MSE strictly decreases") {
  Dataset ds;
  ds.inputs = random_row(400, 50, -1.0, 1.0);
  ds.targets.resize(400);
  for (int i = 0; i < 400; ++i) ds.targets[i] = std::tanh(2.0 * ds.inputs[i]) + 0.3 * ds.inputs[i] * ds.inputs[i];
  split_and_normalize(ds, 51);
  TrainOptions opts;
  opts.hidden = {8, 6};
  opts.target_mse = 1e-7;
  opts.max_epochs = 60;
  const TrainResult a = train(ds, opts);
  const TrainResult b = train(ds, opts);
  CHECK(a.net.flatten() == b.net.flatten());
  CHECK(a.report.accepted_mse == b.report.accepted_mse);
  CHECK(a.report.mu_history == b.report.mu_history);
  for (std::size_t i = 1; i < a.report.accepted_mse.size(); ++i) {
    CHECK(a.report.accepted_mse[i] < a.report.accepted_mse[i - 1]);
  }
  for (double mu : a.report.mu_history) CHECK(mu > 0.0);
  CHECK(a.report.epochs > 0);
  CHECK(a.report.epochs <= 60);
}

TEST_CASE("slow ramps approach the steady-state map") {
  PlantConfig plant;
  SensorConfig sensors;
  sensors.wheel_noise = 0.0;
  auto residual = [&](double leg) {
    RampProtocol proto;
    proto.leg_duration = leg;
    proto.log_rate = 2.0;
    const auto log = run_ramp_protocol(plant, sensors, proto);
    double worst = 0.0;
    for (const RampSample& s : log) {
      if (s.side != Side::Right) continue;
      worst = std::max(worst, std::abs(plant.right.drive(s.u_cmd) + plant.right.friction(s.wheel_rate)));
    }
    return worst;
  };
  const double r1 = residual(100.0);
  const double r2 = residual(800.0);
  CHECK(r2 < 0.2 * r1);
  CHECK(r2 < 2e-3);
}

TEST_CASE("ramp dataset: size, monotone legs, csv round trip") {
  PlantConfig plant;
  SensorConfig sensors;
  sensors.wheel_noise = 0.0;
  RampProtocol proto;
  const auto log = run_ramp_protocol(plant, sensors, proto);
  const Dataset ds = build_dataset(log, Side::Right, plant.geometry.wheel_radius, 5, 1);
  CHECK(ds.size() >= 9000);
  CHECK(ds.size() <= 11000);
  // Rising leg: both the applied u and the measured v are non-decreasing.
  const Eigen::Index leg = ds.size() / 4;
  for (Eigen::Index i = 1; i < leg; ++i) {
    CHECK(ds.targets[i] >= ds.targets[i - 1]);
    CHECK(ds.inputs[i] >= ds.inputs[i - 1] - 1e-12);
  }

  const Dataset trimmed = build_dataset(log, Side::Right, plant.geometry.wheel_radius, 5, 1, 0.005);
  CHECK(trimmed.size() < ds.size());
  CHECK(trimmed.inputs.cwiseAbs().minCoeff() >= 0.005);
  CHECK_THROWS(build_dataset(log, Side::Right, 1.0, 5, 1, -1.0));

  std::stringstream ss;
  write_ramp_csv(ss, log);
  const auto back = read_ramp_csv(ss);
  REQUIRE(back.size() == log.size());
  CHECK(back[123].u_cmd == Approx(log[123].u_cmd).epsilon(1e-11));
  CHECK(back.back().side == Side::Left);

  std::stringstream bad("t_s,side,u_cmd,wheel_rate_meas\n0.0,X,1,2\n");
  CHECK_THROWS(read_ramp_csv(bad));
}

TEST_CASE("model file round trip") {
  SdnnModel m;
  m.right.net = MlpParams::random({5, 3}, 1);
  m.left.net = MlpParams::random({5, 3}, 2);
  m.right.input_norm = {-0.1, 0.9};
  m.right.output_norm = {-1.5, 1.5};
  m.left.input_norm = {-0.2, 0.8};
  m.left.output_norm = {-1.4, 1.6};
  std::stringstream ss;
  save_model(ss, m);
  const SdnnModel back = load_model(ss);
  CHECK(back.right.net.flatten() == m.right.net.flatten());
  CHECK(back.left.net.flatten() == m.left.net.flatten());
  CHECK(back.left.output_norm.max == 1.6);
  CHECK(back.u_for_rate(Side::Right, 0.4) == m.u_for_rate(Side::Right, 0.4));

  std::stringstream broken(R"({"version": 99, "sides": {}})");
  CHECK_THROWS(load_model(broken));
}
