//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ebm/prior.hpp"

#include <Eigen/Eigenvalues>

#include "ebm/errors.hpp"

namespace ebm {

void PriorSpec::check() const {
  if (position == Position::kIsotropic && sigma < 0.0)
    throw config_error("prior: isotropic sigma must be >= 0");
  if (position == Position::kPcaMatched && (dataset == nullptr || dataset->empty()))
    throw config_error("prior: pca_matched requires a non-empty dataset");
}

Eigen::RowVectorXd sample_dirichlet(int n_types, RandomStream& rng) {
  const double alpha = 1.0 / n_types;
  Eigen::RowVectorXd row(n_types);
  double sum = 0.0;
  for (int k = 0; k < n_types; ++k) {
    row[k] = rng.gamma(alpha);
    sum += row[k];
  }
  if (sum < 1e-300) {
    row.setConstant(1.0 / n_types);  // all-underflow draw, astronomically rare
    return row;
  }
  return row / sum;
}

Eigen::Vector3d pca_eigenvalues(const Coords& coords) {
  Coords c = coords;
  c.rowwise() -= coords.colwise().mean().eval();
  const Eigen::Matrix3d cov = c.transpose() * c / static_cast<double>(coords.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  Eigen::Vector3d ev = es.eigenvalues();  // ascending
  Eigen::Vector3d out(ev[2], ev[1], ev[0]);
  return out.cwiseMax(0.0);
}

MixedState sample_prior(const PriorSpec& spec, int n_atoms, int n_types, RandomStream& rng) {
  if (n_atoms < 1) throw std::invalid_argument("sample_prior: n_atoms must be >= 1");
  if (n_types < 1) throw std::invalid_argument("sample_prior: n_types must be >= 1");
  spec.check();

  Eigen::Vector3d stddev;
  if (spec.position == PriorSpec::Position::kIsotropic) {
    stddev.setConstant(spec.sigma);
  } else {
    const MixedState& donor = spec.dataset->donor_for_size(n_atoms);
    stddev = pca_eigenvalues(donor.coords).cwiseSqrt();
  }

  MixedState s;
  s.coords.resize(n_atoms, 3);
  for (int i = 0; i < n_atoms; ++i)
    for (int a = 0; a < 3; ++a) s.coords(i, a) = stddev[a] * rng.normal();
  s.types.resize(n_atoms, n_types);
  for (int i = 0; i < n_atoms; ++i) s.types.row(i) = sample_dirichlet(n_types, rng);
  return center(s);
}

}  // namespace ebm
