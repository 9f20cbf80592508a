//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_MLA_HPP
#define EBM_MLA_HPP

#include <vector>

#include "ebm/energy.hpp"
#include "ebm/rng.hpp"
#include "ebm/state.hpp"

namespace ebm {

/// Single-chain sampler knobs. The noise actually injected per step is
/// sqrt(2 eta tau) * sigma (both factors kept as separate knobs so reported
/// hyperparameter values carry over directly).
struct SamplerConfig {
  double eta = 0.05;    // step size (0 allowed: null update)
  double tau = 1.0;     // temperature
  double sigma_c = 0.6; // coordinate noise scale
  double sigma_p = 0.6; // type noise scale
  double eps = 0.0015;  // simplex floor: p is clamped >= eps before each update
  double grad_clip = 0.0;  // optional global-norm clip of the step gradient; <= 0 off
  // A chain flags divergence when |E| exceeds divergence_factor times the
  // running median of |E| (floored to avoid zero-median false positives).
  double divergence_factor = 1e3;
  double divergence_floor = 1.0;

  void check(int n_types) const;  // throws config_error (needs eps * K < 1)
};

struct StepReport {
  double energy_before = 0.0;
  double energy_after = 0.0;
  double grad_norm_c = 0.0;
  double grad_norm_p = 0.0;
  bool diverged = false;
};

/// One Mirror-Langevin update: Euclidean Langevin plus centering on the
/// coordinates, negative-entropy mirror update (clamp, dual step, softmax)
/// on the types. Frozen atoms pass through bitwise; centering is skipped
/// whenever a mask is present so the frozen fragment anchors the frame.
/// Steering potentials enter by passing a composed EnergyFn.
/// divergence_bound <= 0 disables the energy bound (NaN still flags).
std::pair<MixedState, StepReport> mla_step(const MixedState& s, const EnergyFn& energy,
                                           const SamplerConfig& cfg, RandomStream& rng,
                                           const AtomMask* mask = nullptr,
                                           double divergence_bound = 0.0);

/// Running median of |E| over a bounded window, used for divergence bounds.
class MedianTracker {
 public:
  explicit MedianTracker(int window = 101) : window_(window) {}
  void push(double abs_energy);
  double median() const;  // 0 while empty
  bool empty() const { return buf_.empty(); }

 private:
  int window_;
  size_t next_ = 0;
  std::vector<double> buf_;
};

struct ChainResult {
  MixedState state;
  bool diverged = false;
  long nfe = 0;                 // gradient evaluations
  double last_energy = 0.0;     // energy at the last evaluated state
  std::vector<StepReport> trace;  // filled only when tracing is on
};

/// Chain loop with a lagged divergence check: each state's gradient
/// evaluation doubles as its energy probe, so S steps cost exactly S
/// gradient evaluations. tau_schedule (one entry per step) overrides
/// cfg.tau when given; `median` persists the divergence tracker across
/// calls (tempering rounds share one per replica).
ChainResult run_chain(const MixedState& start, const EnergyFn& energy, int steps,
                      const SamplerConfig& cfg, const std::vector<double>* tau_schedule,
                      RandomStream& rng, const AtomMask* mask = nullptr, bool trace = false,
                      MedianTracker* median = nullptr);

/// Forward-Euler deterministic flow: repeated mla_step at tau = 0 with
/// noise off. Stops early on divergence.
ChainResult fwde_run(const MixedState& s, const EnergyFn& energy, int steps, double eta,
                     const SamplerConfig& cfg, const AtomMask* mask = nullptr,
                     bool trace = false);

/// Annealed Langevin: mla_step with a nonincreasing temperature schedule
/// (one entry per step). Throws config_error if the schedule increases.
ChainResult ald_run(const MixedState& s, const EnergyFn& energy,
                    const std::vector<double>& tau_schedule, const SamplerConfig& cfg,
                    RandomStream& rng, const AtomMask* mask = nullptr, bool trace = false);

/// Short deterministic descent applied to harvested samples.
ChainResult relax(const MixedState& s, const EnergyFn& energy, int steps = 50, double eta = 0.01,
                  const SamplerConfig& cfg = SamplerConfig{}, const AtomMask* mask = nullptr);

/// Geometric decay from tau_max to tau_min over `steps` entries.
std::vector<double> geometric_schedule(double tau_max, double tau_min, int steps);

/// Per-row argmax labels; ties break toward the lowest index.
LabeledCloud discretize(const MixedState& s);

}  // namespace ebm

#endif  // EBM_MLA_HPP
