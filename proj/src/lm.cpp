#include "lsmr/lm.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <stdexcept>

namespace lsmr {

double mse(const MlpParams& net, const Batch& batch) {
  if (batch.inputs.size() == 0) return 0.0;
  return (forward(net, batch.inputs) - batch.targets).squaredNorm() / static_cast<double>(batch.inputs.size());
}

Linearization linearize(const MlpParams& net, const Batch& batch) {
  const Eigen::MatrixXd jac = jacobian(net, batch.inputs);
  const Eigen::VectorXd xi = (forward(net, batch.inputs) - batch.targets).transpose();
  Linearization lin;
  lin.samples = batch.inputs.size();
  lin.jtj = Eigen::MatrixXd::Zero(jac.cols(), jac.cols());
  lin.jtj.selfadjointView<Eigen::Lower>().rankUpdate(jac.transpose());
  lin.jtj.triangularView<Eigen::StrictlyUpper>() = lin.jtj.transpose();
  lin.jte = jac.transpose() * xi;
  lin.mse = xi.squaredNorm() / static_cast<double>(lin.samples);
  return lin;
}

Eigen::VectorXd damped_step(const Linearization& lin, double& mu, double beta, int max_retries, int* retries) {
  Eigen::MatrixXd a = lin.jtj;
  for (int attempt = 0; attempt <= max_retries; ++attempt) {
    if (retries) *retries = attempt;
    a.diagonal() = lin.jtj.diagonal().array() + mu;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() == Eigen::Success) {
      Eigen::VectorXd step = llt.solve(-lin.jte);
      if (step.allFinite()) return step;
    }
    mu = mu > 0.0 ? mu * beta : 1e-12;
  }
  throw std::runtime_error("lm: damped normal equations stayed singular");
}

LmState lm_step(const LmState& state, const Batch& batch, const Linearization& lin) {
  if (state.mu < 0.0) throw std::invalid_argument("lm_step: damping must be non-negative");
  LmState next = state;
  next.last_step = damped_step(lin, next.mu, next.beta, 20, &next.solve_retries);

  MlpParams candidate = state.net;
  candidate.unflatten(state.net.flatten() + next.last_step);
  const double cand_mse = mse(candidate, batch);
  if (std::isfinite(cand_mse) && cand_mse < lin.mse) {
    next.net = std::move(candidate);
    next.train_mse = cand_mse;
    next.mu /= next.beta;
    next.last_accepted = true;
  } else {
    next.train_mse = lin.mse;
    next.mu *= next.beta;
    next.last_accepted = false;
  }
  return next;
}

LmState lm_step(const LmState& state, const Batch& batch) {
  return lm_step(state, batch, linearize(state.net, batch));
}

namespace {

Batch make_batch(const Dataset& ds, const std::vector<int>& idx) {
  auto [in, out] = ds.normalized(idx);
  return {std::move(in), std::move(out)};
}

}  // namespace

TrainResult train(const Dataset& ds, const TrainOptions& opts) {
  if (ds.train.empty() || ds.val.empty()) throw std::invalid_argument("train: dataset is not split");
  if (!(opts.mu_init > 0.0) || !(opts.beta > 1.0)) throw std::invalid_argument("train: need mu > 0 and beta > 1");
  const Batch tr = make_batch(ds, ds.train);
  const Batch va = make_batch(ds, ds.val);
  const Batch te = make_batch(ds, ds.test);

  LmState st;
  st.net = MlpParams::random(opts.hidden, opts.seed);
  st.mu = opts.mu_init;
  st.beta = opts.beta;

  TrainResult res;
  TrainReport& rep = res.report;
  Linearization lin = linearize(st.net, tr);
  st.train_mse = lin.mse;
  st.best_val_mse = mse(st.net, va);
  res.net = st.net;
  int val_fail = 0;

  while (true) {
    if (lin.mse <= opts.target_mse) {
      rep.converged = true;
      rep.stop_reason = "target_mse";
      break;
    }
    if (lin.gradient().norm() <= opts.min_grad) {
      rep.converged = true;
      rep.stop_reason = "min_grad";
      break;
    }
    if (st.epoch >= opts.max_epochs) {
      rep.stop_reason = "max_epochs";
      break;
    }
    // Raise mu until a step is accepted.
    bool accepted = false;
    while (st.mu <= opts.mu_max) {
      rep.mu_history.push_back(st.mu);
      st = lm_step(st, tr, lin);
      if (st.last_accepted) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      rep.stop_reason = "mu_max";
      break;
    }
    ++st.epoch;
    rep.accepted_mse.push_back(st.train_mse);
    lin = linearize(st.net, tr);

    const double val = mse(st.net, va);
    if (val < st.best_val_mse) {
      st.best_val_mse = val;
      res.net = st.net;
      val_fail = 0;
    } else if (++val_fail >= opts.max_val_fail) {
      rep.stop_reason = "validation";
      break;
    }
  }
  // The final iterate wins when it already met the target, even if validation did not improve on it.
  if (rep.converged) res.net = st.net;

  rep.epochs = st.epoch;
  rep.train_mse = mse(res.net, tr);
  rep.val_mse = mse(res.net, va);
  rep.test_mse = te.inputs.size() > 0 ? mse(res.net, te) : 0.0;
  if (!rep.converged && rep.train_mse <= opts.target_mse) rep.converged = true;
  return res;
}

}  // namespace lsmr
