//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_EVAL_HPP
#define EBM_EVAL_HPP

#include <vector>

#include "ebm/dataset.hpp"
#include "ebm/energy.hpp"
#include "ebm/mla.hpp"
#include "ebm/prior.hpp"
#include "ebm/rng.hpp"

namespace ebm {

// Landscape diagnostics: deterministic relaxation from data, gradient
// magnitude/cosine profiles along interpolation paths, and the energy
// response to Gaussian coordinate noise.

struct RelaxationRow {
  double e_before = 0.0;
  double e_after = 0.0;
  double delta_e = 0.0;           // per molecule
  double delta_e_per_atom = 0.0;  // per atom
  double rmsd = 0.0;              // after optimal rigid alignment
  bool diverged = false;
};

struct RelaxationReport {
  std::vector<RelaxationRow> rows;
  double median_delta_e = 0.0;
  double median_delta_e_per_atom = 0.0;
  double mean_rmsd = 0.0;
  int diverged = 0;
};

/// Deterministic gradient descent (tau = 0) from every molecule; records the
/// energy change and the RMSD between the relaxed state and the input after
/// optimal rigid alignment. Divergent relaxations keep their last finite
/// state and are flagged.
RelaxationReport relaxation_test(const EnergyFn& energy, const Dataset& data, int steps = 500,
                                 double eta = 0.01, const SamplerConfig& cfg = SamplerConfig{},
                                 int threads = 1);

/// RMSD between two clouds after centering and optimal proper rotation.
double aligned_rmsd(const Coords& a, const Coords& b);

struct ProfilePoint {
  double t = 0.0;
  double grad_mean = 0.0;
  double grad_std = 0.0;
  double cos_mean = 0.0;
  double cos_std = 0.0;
  int n = 0;          // molecules contributing to grad stats
  int cos_excluded = 0;  // samples with a near-zero vector at this t
};

/// Per t on the grid: mean/std of ||grad_c E(x_t)|| and of the cosine
/// between grad_c E(x_t) and the unsmoothed restoring direction
/// sign(t)(c0 - c1), over OT-aligned (data, prior) pairs. The grid needs at
/// least {-1, 0, 1}.
std::vector<ProfilePoint> gradient_profile(const EnergyFn& energy, const Dataset& data,
                                           const PriorSpec& prior,
                                           const std::vector<double>& t_grid, int n_molecules,
                                           RandomStream& rng, int threads = 1);

struct NoisePoint {
  double sigma = 0.0;
  double e_mean = 0.0;
  double e_std = 0.0;
  int n = 0;
};

/// Mean/std of E(c + noise, p) over molecules and draws per sigma.
std::vector<NoisePoint> energy_vs_noise(const EnergyFn& energy, const Dataset& data,
                                        const std::vector<double>& sigma_grid, int n_molecules,
                                        int draws_per_sigma, RandomStream& rng, int threads = 1);

/// Exact 1-D Wasserstein-2 distance between the pairwise interatomic
/// distance distributions of two sample sets, restricted to [lo, hi].
/// Throws config_error naming the side whose band is empty.
double w2_pairwise_distance(const std::vector<LabeledCloud>& samples,
                            const std::vector<LabeledCloud>& reference, double lo, double hi);

/// W2 between two raw 1-D samples via sorted-quantile coupling.
double w2_1d(std::vector<double> a, std::vector<double> b);

/// Pairwise distances of a cloud set restricted to a band.
std::vector<double> banded_distances(const std::vector<LabeledCloud>& set, double lo, double hi);

/// Fraction of distinct canonical keys: (sorted type multiset, sorted
/// pairwise-distance multiset quantized to `quantum`). Rigid motions map to
/// the same key.
double uniqueness_proxy(const std::vector<LabeledCloud>& samples, double quantum = 0.05);

}  // namespace ebm

#endif  // EBM_EVAL_HPP
