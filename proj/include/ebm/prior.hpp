//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_PRIOR_HPP
#define EBM_PRIOR_HPP

#include "ebm/dataset.hpp"
#include "ebm/rng.hpp"
#include "ebm/state.hpp"

namespace ebm {

/// Position prior plus the fixed Dirichlet(1/K) type prior. The PCA-matched
/// variant copies the per-axis variances from a dataset molecule with the
/// nearest atom count, giving prior samples a data-dependent shape bias.
struct PriorSpec {
  enum class Position { kIsotropic, kPcaMatched };

  Position position = Position::kIsotropic;
  double sigma = 1.0;               // isotropic stddev per axis
  const Dataset* dataset = nullptr; // donor source for kPcaMatched

  void check() const;  // throws config_error on inconsistencies
};

/// Coords from the diagonal Gaussian position prior, then centered; type
/// rows i.i.d. Dirichlet(1/K). Requires n_atoms >= 1, n_types >= 1.
MixedState sample_prior(const PriorSpec& spec, int n_atoms, int n_types, RandomStream& rng);

/// One Dirichlet(1/K,...,1/K) row.
Eigen::RowVectorXd sample_dirichlet(int n_types, RandomStream& rng);

/// Eigenvalues of the 3x3 population covariance of centered coords,
/// sorted descending and clamped at zero.
Eigen::Vector3d pca_eigenvalues(const Coords& coords);

}  // namespace ebm

#endif  // EBM_PRIOR_HPP
