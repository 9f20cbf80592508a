//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_STATE_HPP
#define EBM_STATE_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

namespace ebm {

using Coords = Eigen::Matrix<double, Eigen::Dynamic, 3>;

/// Joint state of a point cloud: N coordinates in R^3 plus N rows on the
/// (K-1)-simplex holding relaxed categorical type assignments.
struct MixedState {
  Coords coords;           // N x 3
  Eigen::MatrixXd types;   // N x K, each row on the simplex
  bool centered = false;   // set when coords are known to have zero mean

  int n_atoms() const { return static_cast<int>(coords.rows()); }
  int n_types() const { return static_cast<int>(types.cols()); }
};

/// Tolerance on simplex row sums; survives ~1e6 accumulated softmax/clamp
/// round trips in double precision.
inline constexpr double kSimplexTol = 1e-9;

/// Throws std::invalid_argument if the state violates its invariants
/// (finite coords, simplex rows, zero-mean coords when `centered` is set).
void validate(const MixedState& s, double tol = kSimplexTol);

/// True when coords and types are all finite and rows lie on the simplex.
bool is_valid(const MixedState& s, double tol = kSimplexTol);

/// Shift coords to zero mean per axis; types untouched. Idempotent.
MixedState center(const MixedState& s);

/// Subset of atoms frozen during conditional sampling.
struct AtomMask {
  std::vector<char> fixed;  // length N, nonzero = frozen

  int size() const { return static_cast<int>(fixed.size()); }
  int n_free() const;
  bool frozen(int i) const { return fixed[static_cast<size_t>(i)] != 0; }
};

/// Hard-labeled point cloud, the discretized form of a MixedState.
struct LabeledCloud {
  Coords coords;
  std::vector<int> labels;

  int n_atoms() const { return static_cast<int>(coords.rows()); }
};

}  // namespace ebm

#endif  // EBM_STATE_HPP
