//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ebm/dataset.hpp"

#include <cmath>
#include <limits>

#include "ebm/errors.hpp"

namespace ebm {

double Template::min_distance() const {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    for (Eigen::Index j = i + 1; j < coords.rows(); ++j)
      best = std::min(best, (coords.row(i) - coords.row(j)).norm());
  return best;
}

namespace {

Template finish(std::string name, std::vector<Eigen::RowVector3d> pts, std::vector<int> labels,
                int n_types) {
  Template t;
  t.name = std::move(name);
  t.coords.resize(static_cast<Eigen::Index>(pts.size()), 3);
  for (size_t i = 0; i < pts.size(); ++i) t.coords.row(static_cast<Eigen::Index>(i)) = pts[i];
  t.coords.rowwise() -= t.coords.colwise().mean().eval();
  t.labels.reserve(labels.size());
  for (int l : labels) t.labels.push_back(l % n_types);
  return t;
}

// Equilateral triangle with unit side in the xy plane, centroid (cx, 0, 0),
// one vertex pointing along dir (+1 or -1) on the x axis.
std::vector<Eigen::RowVector3d> triangle_xy(double cx, double dir) {
  const double r = 1.0 / std::sqrt(3.0);
  std::vector<Eigen::RowVector3d> pts;
  pts.emplace_back(cx + dir * r, 0.0, 0.0);
  pts.emplace_back(cx - dir * r / 2.0, 0.5, 0.0);
  pts.emplace_back(cx - dir * r / 2.0, -0.5, 0.0);
  return pts;
}

}  // namespace

Template make_template(const std::string& name, int n_types) {
  if (n_types < 1) throw config_error("template '" + name + "': n_types must be >= 1");
  std::vector<Eigen::RowVector3d> pts;
  std::vector<int> labels;

  if (name.rfind("chain", 0) == 0) {
    const int n = std::atoi(name.c_str() + 5);
    if (n < 2 || n > 32) throw config_error("unknown template '" + name + "'");
    for (int i = 0; i < n; ++i) {
      pts.emplace_back(static_cast<double>(i), 0.0, 0.0);
      labels.push_back(i);
    }
  } else if (name == "triangle") {
    pts = triangle_xy(0.0, 1.0);
    labels = {0, 1, 2};
  } else if (name == "square") {
    pts = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}};
    labels = {0, 1, 0, 1};
  } else if (name == "tetra") {
    // Regular tetrahedron, unit edge.
    const double s = 1.0 / std::sqrt(2.0);
    pts = {{s, 0, -s / std::sqrt(2.0)}, {-s, 0, -s / std::sqrt(2.0)},
           {0, s, s / std::sqrt(2.0)},  {0, -s, s / std::sqrt(2.0)}};
    // Rescale to unit edge: current edge = 2s = sqrt(2).
    for (auto& p : pts) p /= std::sqrt(2.0);
    labels = {0, 1, 2, 3};
  } else if (name == "dumbbell") {
    // Two unit triangles with centroids at x = -/+2, inner vertices facing
    // the origin, joined by a 2-atom bridge. Consecutive gaps along the
    // vertex-bridge-vertex chain are all (2 - 1/sqrt(3)) / 3 * 2 ~ 0.95,
    // while the clusters sit ~2.85 apart.
    auto a = triangle_xy(-2.0, 1.0);
    auto b = triangle_xy(2.0, -1.0);
    pts.insert(pts.end(), a.begin(), a.end());
    pts.insert(pts.end(), b.begin(), b.end());
    const double d = (2.0 - 1.0 / std::sqrt(3.0)) / 3.0;
    pts.emplace_back(-d, 0.0, 0.0);
    pts.emplace_back(d, 0.0, 0.0);
    labels = {0, 0, 0, 1, 1, 1, 2, 2};
  } else {
    throw config_error("unknown template '" + name + "'");
  }
  return finish(name, std::move(pts), std::move(labels), n_types);
}

Dataset::Dataset(std::vector<MixedState> mols) : mols_(std::move(mols)) {}

int Dataset::sample_size(RandomStream& rng) const {
  if (mols_.empty()) throw config_error("dataset is empty");
  const size_t i = static_cast<size_t>(rng.uniform_int(0, static_cast<std::int64_t>(mols_.size()) - 1));
  return mols_[i].n_atoms();
}

const MixedState& Dataset::donor_for_size(int n) const {
  if (mols_.empty()) throw config_error("pca_matched prior requires a non-empty dataset");
  const MixedState* best = nullptr;
  int best_gap = std::numeric_limits<int>::max();
  for (const MixedState& m : mols_) {
    const int gap = std::abs(m.n_atoms() - n);
    // Nearest atom count; ties broken toward smaller N.
    if (gap < best_gap || (gap == best_gap && best && m.n_atoms() < best->n_atoms())) {
      best = &m;
      best_gap = gap;
    }
  }
  return *best;
}

Dataset generate_toy_dataset(const ToyDatasetConfig& cfg, int count, RandomStream& rng) {
  if (count < 1) throw config_error("dataset: count must be >= 1");
  if (cfg.templates.empty()) throw config_error("dataset: no templates configured");
  if (cfg.jitter < 0.0) throw config_error("dataset: jitter must be >= 0");

  std::vector<Template> temps;
  for (const std::string& name : cfg.templates) {
    Template t = make_template(name, cfg.n_types);
    if (t.n_atoms() > 1 && cfg.jitter >= t.min_distance() / 4.0)
      throw config_error("dataset: jitter " + std::to_string(cfg.jitter) +
                         " too large for template '" + name + "' (min distance " +
                         std::to_string(t.min_distance()) + ")");
    temps.push_back(std::move(t));
  }

  std::vector<MixedState> mols;
  mols.reserve(static_cast<size_t>(count));
  for (int c = 0; c < count; ++c) {
    const Template& t =
        temps[static_cast<size_t>(rng.uniform_int(0, static_cast<std::int64_t>(temps.size()) - 1))];
    const Eigen::Matrix3d rot = rng.random_rotation();
    MixedState s;
    s.coords = t.coords * rot.transpose();
    if (cfg.jitter > 0.0)
      s.coords += cfg.jitter * rng.normal_matrix(t.n_atoms(), 3);
    s.types = Eigen::MatrixXd::Zero(t.n_atoms(), cfg.n_types);
    for (int i = 0; i < t.n_atoms(); ++i) s.types(i, t.labels[static_cast<size_t>(i)]) = 1.0;
    mols.push_back(center(s));
  }
  return Dataset(std::move(mols));
}

}  // namespace ebm
