//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ebm/mla.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ebm/errors.hpp"

namespace ebm {

void SamplerConfig::check(int n_types) const {
  if (eta < 0.0) throw config_error("sampler: eta must be >= 0");
  if (tau < 0.0) throw config_error("sampler: tau must be >= 0");
  if (sigma_c < 0.0 || sigma_p < 0.0) throw config_error("sampler: sigma must be >= 0");
  if (!(eps > 0.0) || !(eps * n_types < 1.0))
    throw config_error("sampler: eps must satisfy 0 < eps < 1/K");
  if (divergence_factor <= 0.0) throw config_error("sampler: divergence_factor must be > 0");
}

namespace {

// Core update given the gradient at the current state. Noise is drawn only
// when its coefficient is nonzero, atom by atom in index order.
MixedState apply_update(const MixedState& s, const EnergyEval& eval, const SamplerConfig& cfg,
                        double tau, RandomStream& rng, const AtomMask* mask) {
  const int n = s.n_atoms();
  const int k = s.n_types();

  Coords gc = eval.grad_coords;
  Eigen::MatrixXd gp = eval.grad_types;
  if (cfg.grad_clip > 0.0) {
    const double norm = std::sqrt(gc.squaredNorm() + gp.squaredNorm());
    if (norm > cfg.grad_clip) {
      const double sc = cfg.grad_clip / norm;
      gc *= sc;
      gp *= sc;
    }
  }

  const double noise = std::sqrt(2.0 * cfg.eta * tau);
  const double amp_c = noise * cfg.sigma_c;
  const double amp_p = noise * cfg.sigma_p;

  MixedState out = s;
  out.centered = false;

  for (int i = 0; i < n; ++i) {
    if (mask != nullptr && mask->frozen(i)) continue;
    Eigen::RowVector3d step = -cfg.eta * gc.row(i);
    if (amp_c > 0.0)
      for (int a = 0; a < 3; ++a) step[a] += amp_c * rng.normal();
    out.coords.row(i) += step;
  }

  for (int i = 0; i < n; ++i) {
    if (mask != nullptr && mask->frozen(i)) continue;
    // Mirror update in logit space; the clamp keeps log p finite and the
    // 1/sqrt(p) factor is the metric correction of the entropic mirror map.
    Eigen::RowVectorXd p_tilde = s.types.row(i).cwiseMax(cfg.eps);
    Eigen::RowVectorXd y = p_tilde.array().log().matrix() - cfg.eta * gp.row(i);
    if (amp_p > 0.0)
      for (int t = 0; t < k; ++t) y[t] += amp_p / std::sqrt(p_tilde[t]) * rng.normal();
    const double m = y.maxCoeff();
    Eigen::RowVectorXd ex = (y.array() - m).exp();
    out.types.row(i) = ex / ex.sum();
  }

  if (mask == nullptr) return center(out);
  return out;
}

double total_grad_norm_c(const EnergyEval& e) { return e.grad_coords.norm(); }
double total_grad_norm_p(const EnergyEval& e) { return e.grad_types.norm(); }

}  // namespace

std::pair<MixedState, StepReport> mla_step(const MixedState& s, const EnergyFn& energy,
                                           const SamplerConfig& cfg, RandomStream& rng,
                                           const AtomMask* mask, double divergence_bound) {
  cfg.check(s.n_types());
  if (mask != nullptr && mask->size() != s.n_atoms())
    throw std::invalid_argument("mla_step: mask length must equal the atom count");

  StepReport rep;
  EnergyEval eval;
  try {
    eval = energy.eval_grad(s);
  } catch (const numerical_error&) {
    rep.energy_before = rep.energy_after = std::numeric_limits<double>::quiet_NaN();
    rep.diverged = true;
    return {s, rep};
  }
  rep.energy_before = eval.total;
  rep.grad_norm_c = total_grad_norm_c(eval);
  rep.grad_norm_p = total_grad_norm_p(eval);

  const MixedState next = apply_update(s, eval, cfg, cfg.tau, rng, mask);

  try {
    rep.energy_after = energy.eval(next).total;
  } catch (const numerical_error&) {
    rep.energy_after = std::numeric_limits<double>::quiet_NaN();
    rep.diverged = true;
    return {next, rep};
  }
  if (!std::isfinite(rep.energy_after) ||
      (divergence_bound > 0.0 && std::abs(rep.energy_after) > divergence_bound))
    rep.diverged = true;
  return {next, rep};
}

void MedianTracker::push(double abs_energy) {
  if (buf_.size() < static_cast<size_t>(window_)) {
    buf_.push_back(abs_energy);
  } else {
    buf_[next_] = abs_energy;
    next_ = (next_ + 1) % buf_.size();
  }
}

double MedianTracker::median() const {
  if (buf_.empty()) return 0.0;
  std::vector<double> tmp = buf_;
  const size_t mid = tmp.size() / 2;
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<long>(mid), tmp.end());
  return tmp[mid];
}

ChainResult run_chain(const MixedState& start, const EnergyFn& energy, int steps,
                      const SamplerConfig& cfg, const std::vector<double>* tau_schedule,
                      RandomStream& rng, const AtomMask* mask, bool trace,
                      MedianTracker* median) {
  cfg.check(start.n_types());
  ChainResult res;
  res.state = start;
  MedianTracker local;
  MedianTracker& med = median != nullptr ? *median : local;

  for (int k = 0; k < steps; ++k) {
    EnergyEval eval;
    try {
      eval = energy.eval_grad(res.state);
    } catch (const numerical_error&) {
      res.diverged = true;
      ++res.nfe;
      break;
    }
    ++res.nfe;
    res.last_energy = eval.total;

    const double bound = cfg.divergence_factor * std::max(cfg.divergence_floor, med.median());
    if (!std::isfinite(eval.total) || std::abs(eval.total) > bound) {
      res.diverged = true;
      break;
    }
    med.push(std::abs(eval.total));

    const double tau = tau_schedule != nullptr ? (*tau_schedule)[static_cast<size_t>(k)] : cfg.tau;
    MixedState next = apply_update(res.state, eval, cfg, tau, rng, mask);
    if (!next.coords.allFinite() || !next.types.allFinite()) {
      res.diverged = true;
      break;
    }
    if (trace) {
      StepReport rep;
      rep.energy_before = eval.total;
      rep.energy_after = std::numeric_limits<double>::quiet_NaN();  // lagged
      rep.grad_norm_c = total_grad_norm_c(eval);
      rep.grad_norm_p = total_grad_norm_p(eval);
      res.trace.push_back(rep);
    }
    res.state = std::move(next);
  }
  return res;
}

ChainResult fwde_run(const MixedState& s, const EnergyFn& energy, int steps, double eta,
                     const SamplerConfig& cfg, const AtomMask* mask, bool trace) {
  SamplerConfig det = cfg;
  det.eta = eta;
  det.tau = 0.0;
  det.sigma_c = 0.0;
  det.sigma_p = 0.0;
  RandomStream unused(0);
  return run_chain(s, energy, steps, det, nullptr, unused, mask, trace);
}

ChainResult ald_run(const MixedState& s, const EnergyFn& energy,
                    const std::vector<double>& tau_schedule, const SamplerConfig& cfg,
                    RandomStream& rng, const AtomMask* mask, bool trace) {
  for (size_t i = 0; i + 1 < tau_schedule.size(); ++i)
    if (tau_schedule[i + 1] > tau_schedule[i])
      throw config_error("ald: temperature schedule must be nonincreasing");
  if (!tau_schedule.empty() && tau_schedule.back() < 0.0)
    throw config_error("ald: temperatures must be >= 0");
  return run_chain(s, energy, static_cast<int>(tau_schedule.size()), cfg, &tau_schedule, rng, mask,
                   trace);
}

ChainResult relax(const MixedState& s, const EnergyFn& energy, int steps, double eta,
                  const SamplerConfig& cfg, const AtomMask* mask) {
  return fwde_run(s, energy, steps, eta, cfg, mask, false);
}

std::vector<double> geometric_schedule(double tau_max, double tau_min, int steps) {
  if (steps < 1) throw config_error("schedule: steps must be >= 1");
  if (!(tau_max > 0.0) || !(tau_min > 0.0) || tau_min > tau_max)
    throw config_error("schedule: need tau_max >= tau_min > 0");
  std::vector<double> out(static_cast<size_t>(steps));
  if (steps == 1) {
    out[0] = tau_max;
    return out;
  }
  const double ratio = tau_min / tau_max;
  for (int k = 0; k < steps; ++k)
    out[static_cast<size_t>(k)] = tau_max * std::pow(ratio, static_cast<double>(k) / (steps - 1));
  return out;
}

LabeledCloud discretize(const MixedState& s) {
  LabeledCloud out;
  out.coords = s.coords;
  out.labels.resize(static_cast<size_t>(s.n_atoms()));
  for (int i = 0; i < s.n_atoms(); ++i) {
    int best = 0;
    for (int k = 1; k < s.n_types(); ++k)
      if (s.types(i, k) > s.types(i, best)) best = k;
    out.labels[static_cast<size_t>(i)] = best;
  }
  return out;
}

}  // namespace ebm
