//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_RFM_HPP
#define EBM_RFM_HPP

#include <vector>

#include "ebm/dataset.hpp"
#include "ebm/energy.hpp"
#include "ebm/ot.hpp"
#include "ebm/prior.hpp"
#include "ebm/rng.hpp"
#include "ebm/state.hpp"

namespace ebm {

enum class ObjectiveKind {
  kRfm,      // extended interpolant on t in [-1,1], tanh-smoothed targets
  kOtfm,     // OT-coupled flow matching, t in [0,1], unscaled targets
  kPlainFm,  // flow matching without OT alignment
};

struct ObjectiveConfig {
  ObjectiveKind kind = ObjectiveKind::kRfm;
  double gamma = 25.0;       // smoothing sharpness of b(s) = tanh(gamma * s)
  double lambda_reg = 1e-3;  // weight of the clean-data energy anchor

  void check() const;  // gamma > 0, lambda_reg >= 0
  /// [-1, 1] for the extended interpolant, [0, 1] otherwise.
  double t_lo() const { return kind == ObjectiveKind::kRfm ? -1.0 : 0.0; }
};

/// One training triple: the interpolated state, its restoring targets, and
/// the clean sample anchoring the regularizer.
struct InterpolantBatchItem {
  MixedState x_t;
  double t = 0.0;
  Coords u_coords;
  Eigen::MatrixXd u_types;
  MixedState x0_ref;
};

/// Linear coordinate path (extrapolating past the data for t < 0) and
/// reflected type path p_t = p0 + |t| (p1 - p0), which stays on the simplex.
/// x1 must already be OT-aligned onto x0. Requires t in [-1, 1].
MixedState interpolate(const MixedState& x0, const MixedState& x1_aligned, double t);

/// Smoothed restoring targets
///   u_c = b(|t|) sign(t) (c0 - c1),   u_p = b(|t|) (p0 - p1),
/// with b(s) = tanh(gamma s) and sign(0) := 0.
void restoring_targets(const MixedState& x0, const MixedState& x1_aligned, double t,
                       const ObjectiveConfig& cfg, Coords& u_coords, Eigen::MatrixXd& u_types);

/// Draws t, builds the interpolant and targets for one (data, prior) pair,
/// applying the objective's coupling (OT permutation acts jointly on coords
/// and types).
InterpolantBatchItem make_interpolant(const MixedState& x0, const MixedState& x1,
                                      const ObjectiveConfig& cfg, RandomStream& rng);

struct RfmLossValue {
  double total = 0.0;
  double l_rfm = 0.0;
  double l_reg = 0.0;
};

/// Mean over the batch of ||v - u||^2 with v = -grad E(x_t), plus
/// lambda_reg times the mean per-atom squared clean energy. Gradient-free
/// evaluation used for reporting and tests.
RfmLossValue rfm_loss(const EnergyModel& model, const std::vector<InterpolantBatchItem>& batch,
                      const ObjectiveConfig& cfg);

/// Same loss recorded on a tape; returns the loss value plus d/d(theta).
RfmLossValue rfm_loss_param_grad(const EnergyModel& model,
                                 const std::vector<InterpolantBatchItem>& batch,
                                 const ObjectiveConfig& cfg, std::vector<ad::Mat>& grads);

enum class LrSchedule { kConstant, kLinear };

struct TrainConfig {
  int steps = 2000;
  int batch_size = 16;
  double lr = 5e-5;
  LrSchedule schedule = LrSchedule::kLinear;
  double clip_norm = 1.0;      // global-norm gradient clip; <= 0 disables
  double ema_decay = 0.999;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double divergence_bound = 1e6;  // abort when the loss exceeds this ...
  int divergence_patience = 20;   // ... for this many consecutive steps

  void check() const;
};

struct TrainRecord {
  int step = 0;
  double l_rfm = 0.0;
  double l_reg = 0.0;
  double total = 0.0;
  double grad_norm = 0.0;  // pre-clip global norm
};

struct TrainResult {
  EnergyModel model;
  EnergyModel ema;
  std::vector<TrainRecord> history;
};

/// Algorithm: per step sample a data/prior pair batch, OT-align, build the
/// interpolants, take an Adam step on the full loss, update the EMA copy.
/// Deterministic given the rng stream. Throws numerical_error after
/// `divergence_patience` consecutive divergent steps.
TrainResult train(const EnergyModel& initial, const Dataset& data, const PriorSpec& prior,
                  const ObjectiveConfig& objective, const TrainConfig& tc, RandomStream& rng);

}  // namespace ebm

#endif  // EBM_RFM_HPP
