//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ebm/ot.hpp"

#include <limits>
#include <stdexcept>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace ebm {

// Jonker-Volgenant style shortest augmenting path with potentials.
std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("hungarian: cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();

  // 1-based internal arrays; job[j] = row assigned to column j.
  std::vector<double> u(static_cast<size_t>(n) + 1, 0.0), v(static_cast<size_t>(n) + 1, 0.0);
  std::vector<int> job(static_cast<size_t>(n) + 1, 0);

  for (int i = 1; i <= n; ++i) {
    std::vector<double> minv(static_cast<size_t>(n) + 1, inf);
    std::vector<char> used(static_cast<size_t>(n) + 1, 0);
    std::vector<int> prev(static_cast<size_t>(n) + 1, 0);
    int j0 = 0;
    job[0] = i;
    do {
      used[static_cast<size_t>(j0)] = 1;
      const int i0 = job[static_cast<size_t>(j0)];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
        if (cur < minv[static_cast<size_t>(j)]) {
          minv[static_cast<size_t>(j)] = cur;
          prev[static_cast<size_t>(j)] = j0;
        }
        if (minv[static_cast<size_t>(j)] < delta) {
          delta = minv[static_cast<size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<size_t>(j)]) {
          u[static_cast<size_t>(job[static_cast<size_t>(j)])] += delta;
          v[static_cast<size_t>(j)] -= delta;
        } else {
          minv[static_cast<size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (job[static_cast<size_t>(j0)] != 0);
    // Augment along the path.
    while (j0 != 0) {
      const int j1 = prev[static_cast<size_t>(j0)];
      job[static_cast<size_t>(j0)] = job[static_cast<size_t>(j1)];
      j0 = j1;
    }
  }

  std::vector<int> assignment(static_cast<size_t>(n), -1);
  for (int j = 1; j <= n; ++j)
    if (job[static_cast<size_t>(j)] > 0) assignment[static_cast<size_t>(job[static_cast<size_t>(j)]) - 1] = j - 1;
  return assignment;
}

Eigen::Matrix3d kabsch_rotation(const Coords& src, const Coords& dst) {
  const Eigen::Matrix3d h = src.transpose() * dst;
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d u = svd.matrixU();
  const Eigen::Matrix3d v = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, 1.0);
  d[2] = (v * u.transpose()).determinant() > 0 ? 1.0 : -1.0;
  return v * d.asDiagonal() * u.transpose();
}

OtAlignment ot_align(const Coords& source, const Coords& target, int max_rounds, double tol) {
  const int n = static_cast<int>(source.rows());
  if (target.rows() != n) throw std::invalid_argument("ot_align: clouds must have equal N");

  OtAlignment best;
  best.coords = source;
  best.perm.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) best.perm[static_cast<size_t>(i)] = i;
  best.rotation.setIdentity();
  best.cost = (source - target).squaredNorm();

  Coords cur = source;
  std::vector<int> perm = best.perm;
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();

  for (int round = 0; round < max_rounds; ++round) {
    // Assignment: place source row j at target slot i.
    Eigen::MatrixXd cost(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) cost(i, j) = (target.row(i) - cur.row(j)).squaredNorm();
    const std::vector<int> a = hungarian(cost);
    Coords permuted(n, 3);
    std::vector<int> new_perm(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      permuted.row(i) = cur.row(a[static_cast<size_t>(i)]);
      new_perm[static_cast<size_t>(i)] = perm[static_cast<size_t>(a[static_cast<size_t>(i)])];
    }

    // Rotation for the fixed pairing.
    const Eigen::Matrix3d r = kabsch_rotation(permuted, target);
    cur = permuted * r.transpose();
    rot = r * rot;
    perm = std::move(new_perm);

    const double c = (cur - target).squaredNorm();
    if (c < best.cost - 0.0) {
      best.coords = cur;
      best.perm = perm;
      best.rotation = rot;
      const bool converged = best.cost - c < tol;
      best.cost = c;
      if (converged) break;
    } else {
      break;  // stationary
    }
  }
  return best;
}

}  // namespace ebm
