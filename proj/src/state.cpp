//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ebm/state.hpp"

#include <cmath>
#include <stdexcept>

namespace ebm {

bool is_valid(const MixedState& s, double tol) {
  if (s.coords.rows() < 1) return false;
  if (s.types.rows() != s.coords.rows() || s.types.cols() < 1) return false;
  if (!s.coords.allFinite() || !s.types.allFinite()) return false;
  for (Eigen::Index i = 0; i < s.types.rows(); ++i) {
    if (s.types.row(i).minCoeff() < -tol) return false;
    if (std::abs(s.types.row(i).sum() - 1.0) > tol) return false;
  }
  if (s.centered) {
    const Eigen::RowVector3d mean = s.coords.colwise().mean();
    if (mean.cwiseAbs().maxCoeff() > tol) return false;
  }
  return true;
}

void validate(const MixedState& s, double tol) {
  if (s.coords.rows() < 1) throw std::invalid_argument("MixedState: need at least one atom");
  if (s.types.rows() != s.coords.rows())
    throw std::invalid_argument("MixedState: coords/types row count mismatch");
  if (s.types.cols() < 1) throw std::invalid_argument("MixedState: need at least one type");
  if (!s.coords.allFinite()) throw std::invalid_argument("MixedState: non-finite coords");
  if (!s.types.allFinite()) throw std::invalid_argument("MixedState: non-finite types");
  for (Eigen::Index i = 0; i < s.types.rows(); ++i) {
    if (s.types.row(i).minCoeff() < -tol)
      throw std::invalid_argument("MixedState: negative type weight in row " + std::to_string(i));
    if (std::abs(s.types.row(i).sum() - 1.0) > tol)
      throw std::invalid_argument("MixedState: type row " + std::to_string(i) +
                                  " does not sum to 1");
  }
  if (s.centered) {
    const Eigen::RowVector3d mean = s.coords.colwise().mean();
    if (mean.cwiseAbs().maxCoeff() > tol)
      throw std::invalid_argument("MixedState: centered flag set but coords mean is nonzero");
  }
}

MixedState center(const MixedState& s) {
  MixedState out = s;
  const Eigen::RowVector3d mean = s.coords.colwise().mean();
  // Skip the subtraction at float-noise level so centering is bitwise
  // idempotent: one pass leaves a residual mean of order eps * scale.
  const double scale = std::max(1.0, s.coords.cwiseAbs().maxCoeff());
  if (mean.cwiseAbs().maxCoeff() > 1e-12 * scale) out.coords.rowwise() -= mean;
  out.centered = true;
  return out;
}

int AtomMask::n_free() const {
  int n = 0;
  for (char f : fixed)
    if (!f) ++n;
  return n;
}

}  // namespace ebm
