//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ebm/rfm.hpp"

#include <cmath>
#include <limits>

#include "ebm/errors.hpp"

namespace ebm {

using ad::Mat;
using ad::Tape;
using ad::Var;

void ObjectiveConfig::check() const {
  if (!(gamma > 0.0)) throw config_error("objective: gamma must be > 0");
  if (lambda_reg < 0.0) throw config_error("objective: lambda_reg must be >= 0");
}

void TrainConfig::check() const {
  if (steps < 0) throw config_error("objective: steps must be >= 0");
  if (batch_size < 1) throw config_error("objective: batch_size must be >= 1");
  if (!(lr > 0.0)) throw config_error("objective: lr must be > 0");
  if (ema_decay < 0.0 || ema_decay > 1.0)
    throw config_error("objective: ema_decay must be in [0, 1]");
  if (divergence_patience < 1) throw config_error("objective: divergence_patience must be >= 1");
}

MixedState interpolate(const MixedState& x0, const MixedState& x1_aligned, double t) {
  if (t < -1.0 || t > 1.0) throw std::invalid_argument("interpolate: t must be in [-1, 1]");
  MixedState out;
  out.coords = x0.coords + t * (x1_aligned.coords - x0.coords);
  out.types = x0.types + std::abs(t) * (x1_aligned.types - x0.types);
  out.centered = false;
  return out;
}

namespace {

double sign0(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

}  // namespace

void restoring_targets(const MixedState& x0, const MixedState& x1_aligned, double t,
                       const ObjectiveConfig& cfg, Coords& u_coords, Eigen::MatrixXd& u_types) {
  if (t < -1.0 || t > 1.0) throw std::invalid_argument("restoring_targets: t must be in [-1, 1]");
  if (cfg.kind == ObjectiveKind::kRfm) {
    const double b = std::tanh(cfg.gamma * std::abs(t));
    u_coords = b * sign0(t) * (x0.coords - x1_aligned.coords);
    u_types = b * (x0.types - x1_aligned.types);
  } else {
    // Flow-matching ablations: unscaled restoring direction on t in [0, 1].
    u_coords = x0.coords - x1_aligned.coords;
    u_types = x0.types - x1_aligned.types;
  }
}

InterpolantBatchItem make_interpolant(const MixedState& x0, const MixedState& x1,
                                      const ObjectiveConfig& cfg, RandomStream& rng) {
  if (x1.n_atoms() != x0.n_atoms())
    throw std::invalid_argument("make_interpolant: prior sample must match the data atom count");

  MixedState aligned = x1;
  if (cfg.kind != ObjectiveKind::kPlainFm) {
    const OtAlignment ot = ot_align(x1.coords, x0.coords);
    aligned.coords = ot.coords;
    // Atoms permute as wholes: types rows follow the coordinate assignment.
    for (int i = 0; i < x1.n_atoms(); ++i)
      aligned.types.row(i) = x1.types.row(ot.perm[static_cast<size_t>(i)]);
  }

  InterpolantBatchItem item;
  item.t = rng.uniform(cfg.t_lo(), 1.0);
  item.x_t = interpolate(x0, aligned, item.t);
  restoring_targets(x0, aligned, item.t, cfg, item.u_coords, item.u_types);
  item.x0_ref = x0;
  return item;
}

RfmLossValue rfm_loss(const EnergyModel& model, const std::vector<InterpolantBatchItem>& batch,
                      const ObjectiveConfig& cfg) {
  if (batch.empty()) throw std::invalid_argument("rfm_loss: empty batch");
  RfmLossValue v;
  for (const InterpolantBatchItem& item : batch) {
    const EnergyEval et = model.grad_input(item.x_t);
    v.l_rfm += (-et.grad_coords - item.u_coords).squaredNorm() +
               (-et.grad_types - item.u_types).squaredNorm();
    const EnergyEval e0 = model.forward(item.x0_ref);
    v.l_reg += e0.per_atom.squaredNorm() / static_cast<double>(e0.per_atom.size());
  }
  v.l_rfm /= static_cast<double>(batch.size());
  v.l_reg /= static_cast<double>(batch.size());
  v.total = v.l_rfm + cfg.lambda_reg * v.l_reg;
  if (!std::isfinite(v.total)) throw numerical_error("rfm_loss: non-finite loss");
  return v;
}

namespace {

/// Squared Frobenius distance between a tape value and a constant, as a
/// 1x1 tape node.
Var squared_error(Tape& t, Var value, const Mat& target) {
  const Var diff = t.sub(value, t.constant(target));
  return t.sum_all(t.mul(diff, diff));
}

}  // namespace

RfmLossValue rfm_loss_param_grad(const EnergyModel& model,
                                 const std::vector<InterpolantBatchItem>& batch,
                                 const ObjectiveConfig& cfg, std::vector<Mat>& grads) {
  if (batch.empty()) throw std::invalid_argument("rfm_loss: empty batch");
  Tape t;

  // Shared parameter leaves so adjoints accumulate across the batch.
  std::vector<Var> params;
  const_cast<EnergyModel&>(model).visit_params(
      [&](const std::string&, Mat& m) { params.push_back(t.input(m)); });

  Var l_rfm_sum, l_reg_sum;
  bool first = true;
  for (const InterpolantBatchItem& item : batch) {
    const EnergyGraph gt = model.build_graph(t, item.x_t, &params);
    // v = -grad_x E(x_t); the reverse pass is recorded as tape nodes so the
    // parameter gradient below differentiates through it.
    const std::vector<Var> gx = t.backward_graph(gt.total, {gt.coords, gt.types});
    const Var vc = t.scale(gx[0], -1.0);
    const Var vp = t.scale(gx[1], -1.0);
    const Var err = t.add(squared_error(t, vc, item.u_coords), squared_error(t, vp, item.u_types));

    const EnergyGraph g0 = model.build_graph(t, item.x0_ref, &params);
    const Var reg = t.scale(t.sum_all(t.mul(g0.per_atom, g0.per_atom)),
                            1.0 / static_cast<double>(item.x0_ref.n_atoms()));

    if (first) {
      l_rfm_sum = err;
      l_reg_sum = reg;
      first = false;
    } else {
      l_rfm_sum = t.add(l_rfm_sum, err);
      l_reg_sum = t.add(l_reg_sum, reg);
    }
  }

  const double inv_b = 1.0 / static_cast<double>(batch.size());
  const Var l_rfm = t.scale(l_rfm_sum, inv_b);
  const Var l_reg = t.scale(l_reg_sum, inv_b);
  const Var loss = t.add(l_rfm, t.scale(l_reg, cfg.lambda_reg));

  grads = t.backward_values(loss, params);

  RfmLossValue v;
  v.l_rfm = t.value(l_rfm)(0, 0);
  v.l_reg = t.value(l_reg)(0, 0);
  v.total = t.value(loss)(0, 0);
  if (!std::isfinite(v.total)) throw numerical_error("rfm_loss: non-finite loss");
  return v;
}

TrainResult train(const EnergyModel& initial, const Dataset& data, const PriorSpec& prior,
                  const ObjectiveConfig& objective, const TrainConfig& tc, RandomStream& rng) {
  objective.check();
  tc.check();
  if (data.empty()) throw config_error("train: dataset is empty");
  prior.check();

  TrainResult res;
  res.model = initial;
  res.ema = initial;
  if (tc.steps == 0) return res;

  std::vector<Mat*> params = res.model.param_ptrs();
  std::vector<Mat> m1, m2;
  m1.reserve(params.size());
  m2.reserve(params.size());
  for (Mat* p : params) {
    m1.push_back(Mat::Zero(p->rows(), p->cols()));
    m2.push_back(Mat::Zero(p->rows(), p->cols()));
  }

  const int k = res.model.config().n_types;
  int divergent_streak = 0;

  for (int step = 0; step < tc.steps; ++step) {
    std::vector<InterpolantBatchItem> batch;
    batch.reserve(static_cast<size_t>(tc.batch_size));
    for (int b = 0; b < tc.batch_size; ++b) {
      const MixedState& x0 =
          data[static_cast<size_t>(rng.uniform_int(0, static_cast<std::int64_t>(data.size()) - 1))];
      const MixedState x1 = sample_prior(prior, x0.n_atoms(), k, rng);
      batch.push_back(make_interpolant(x0, x1, objective, rng));
    }

    std::vector<Mat> grads;
    RfmLossValue lv;
    bool divergent = false;
    try {
      lv = rfm_loss_param_grad(res.model, batch, objective, grads);
    } catch (const numerical_error&) {
      divergent = true;
      lv.l_rfm = lv.l_reg = lv.total = std::numeric_limits<double>::quiet_NaN();
    }
    if (!divergent && lv.total > tc.divergence_bound) divergent = true;

    if (divergent) {
      if (++divergent_streak > tc.divergence_patience)
        throw numerical_error("train: loss divergent for " + std::to_string(divergent_streak) +
                              " consecutive steps at step " + std::to_string(step));
      // Skip the update; record the step so histories stay aligned.
      res.history.push_back({step, lv.l_rfm, lv.l_reg, lv.total, 0.0});
      continue;
    }
    divergent_streak = 0;

    double sq = 0.0;
    for (const Mat& g : grads) sq += g.squaredNorm();
    const double gnorm = std::sqrt(sq);
    if (tc.clip_norm > 0.0 && gnorm > tc.clip_norm) {
      const double s = tc.clip_norm / gnorm;
      for (Mat& g : grads) g *= s;
    }

    const double lr_t = tc.schedule == LrSchedule::kLinear
                            ? tc.lr * (1.0 - static_cast<double>(step) / tc.steps)
                            : tc.lr;
    const double bc1 = 1.0 - std::pow(tc.adam_beta1, step + 1);
    const double bc2 = 1.0 - std::pow(tc.adam_beta2, step + 1);
    for (size_t i = 0; i < params.size(); ++i) {
      m1[i] = tc.adam_beta1 * m1[i] + (1.0 - tc.adam_beta1) * grads[i];
      m2[i] = tc.adam_beta2 * m2[i] + (1.0 - tc.adam_beta2) * grads[i].cwiseProduct(grads[i]);
      const Mat mhat = m1[i] / bc1;
      const Mat vhat = m2[i] / bc2;
      *params[i] -= lr_t * mhat.cwiseQuotient(vhat.cwiseSqrt() + Mat::Constant(vhat.rows(), vhat.cols(), tc.adam_eps));
    }

    ema_update(res.ema, res.model, tc.ema_decay);
    res.history.push_back({step, lv.l_rfm, lv.l_reg, lv.total, gnorm});
  }
  return res;
}

}  // namespace ebm
