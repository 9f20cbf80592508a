//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_DATASET_HPP
#define EBM_DATASET_HPP

#include <string>
#include <vector>

#include "ebm/rng.hpp"
#include "ebm/state.hpp"

namespace ebm {

/// Rigid point-cloud template with categorical labels, centered.
struct Template {
  std::string name;
  Coords coords;
  std::vector<int> labels;

  int n_atoms() const { return static_cast<int>(coords.rows()); }
  /// Smallest inter-point distance.
  double min_distance() const;
};

/// Built-in templates: chain3..chain6 (unit spacing), triangle, square,
/// tetra (unit edges), dumbbell (two triangles joined by a 2-atom bridge).
/// Labels are taken modulo n_types. Throws config_error on unknown names.
Template make_template(const std::string& name, int n_types);

struct ToyDatasetConfig {
  std::vector<std::string> templates;
  int n_types = 3;
  double jitter = 0.0;  // per-coordinate Gaussian sigma
};

/// In-memory dataset with the empirical size distribution downstream
/// consumers draw N from, and donor lookup for the PCA-matched prior.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<MixedState> mols);

  const std::vector<MixedState>& molecules() const { return mols_; }
  bool empty() const { return mols_.empty(); }
  size_t size() const { return mols_.size(); }
  const MixedState& operator[](size_t i) const { return mols_[i]; }
  int n_types() const { return mols_.empty() ? 0 : mols_.front().n_types(); }

  /// Draw an atom count from the empirical histogram over molecule sizes.
  int sample_size(RandomStream& rng) const;

  /// Donor with atom count nearest to n (ties toward smaller N); used by the
  /// PCA-matched prior. Throws config_error when the dataset is empty.
  const MixedState& donor_for_size(int n) const;

 private:
  std::vector<MixedState> mols_;
};

/// Random rigid rotations of templates plus optional Gaussian jitter,
/// one-hot types, all centered. Template choice is uniform per sample.
/// Requires count >= 1 and jitter < min template distance / 4.
Dataset generate_toy_dataset(const ToyDatasetConfig& cfg, int count, RandomStream& rng);

}  // namespace ebm

#endif  // EBM_DATASET_HPP
