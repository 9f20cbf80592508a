//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_OT_HPP
#define EBM_OT_HPP

#include <vector>

#include <Eigen/Core>

#include "ebm/state.hpp"

namespace ebm {

/// Result of aligning a source cloud onto a target: coords = rot * (perm
/// applied to source), with perm[i] = source row placed at slot i.
struct OtAlignment {
  Coords coords;
  std::vector<int> perm;
  Eigen::Matrix3d rotation;
  double cost = 0.0;  // sum of squared distances to the target
};

/// Minimum-cost assignment of an n x n cost matrix (O(n^3) shortest
/// augmenting path). Returns assignment[row] = column.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

/// Proper rotation (determinant +1) minimizing ||src * R^T - dst||_F for
/// centered clouds.
Eigen::Matrix3d kabsch_rotation(const Coords& src, const Coords& dst);

/// Equivariant OT coupling: alternates Hungarian assignment (squared
/// distance cost) and Kabsch rotation until the cost is stationary or the
/// round cap is hit. Both inputs must be centered with equal N. The output
/// cost never exceeds the unaligned cost.
OtAlignment ot_align(const Coords& source, const Coords& target, int max_rounds = 10,
                     double tol = 1e-10);

}  // namespace ebm

#endif  // EBM_OT_HPP
