//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_STEER_HPP
#define EBM_STEER_HPP

#include <vector>

#include "ebm/energy.hpp"
#include "ebm/state.hpp"
#include "ebm/tempering.hpp"

namespace ebm {

/// Rotation-invariant shape potentials built from the PCA eigenvalues
/// lambda1 >= lambda2 >= lambda3 of the coordinate covariance:
///   linear: lambda2 + lambda3, disk: lambda3 + lambda1 - lambda2,
///   sphere: lambda1 - lambda3.
/// Each is nonnegative and zero exactly on its target geometry class.
struct ShapePotential {
  enum class Kind { kLinear, kDisk, kSphere };
  Kind kind = Kind::kLinear;
  double weight = 1.0;

  void check() const;  // finite nonnegative weight
};

/// Eigenvalues sorted descending, clamped at zero (population covariance of
/// centered coords).
Eigen::Vector3d pca_eigs(const Coords& coords);

/// Value and analytic gradient of the shape potential (unweighted). At
/// eigenvalue crossings the gradient uses the symmetric subgradient: the
/// eigenvector outer products of the crossing group are averaged.
double shape_energy_and_grad(const Coords& coords, ShapePotential::Kind kind, Coords* grad);

/// Learned energy composed with w * U: per-atom energies carry w * U / N so
/// additivity is preserved, and coordinate gradients gain w * grad U.
class ComposedEnergy final : public EnergyFn {
 public:
  ComposedEnergy(const EnergyFn& base, const ShapePotential& pot) : base_(&base), pot_(pot) {
    pot.check();
  }
  EnergyEval eval(const MixedState& s) const override;
  EnergyEval eval_grad(const MixedState& s) const override;

 private:
  const EnergyFn* base_;
  ShapePotential pot_;
};

struct ShapeStats {
  double l1 = 0.0, l2 = 0.0, l3 = 0.0;
  double u_lin = 0.0, u_disk = 0.0, u_sphere = 0.0;
};
ShapeStats shape_stats(const Coords& coords);

/// tempering::generate with the shape potential composed in (w = 0 bypasses
/// the composition entirely, so a fixed seed reproduces the unsteered run
/// bit for bit). Shape statistics of every sample are returned alongside.
std::vector<LabeledCloud> steered_generate(const EnergyFn& energy, const ShapePotential& pot,
                                           int count, const Ladder& ladder,
                                           const SamplerConfig& cfg, const ReplicaFactory& factory,
                                           std::uint64_t seed, GenerationReport* report = nullptr,
                                           std::vector<ShapeStats>* stats = nullptr,
                                           int threads = 1);

/// Fragment-fixed conditional sampling task.
struct InpaintTask {
  MixedState base;
  AtomMask mask;  // true = frozen

  void check() const;  // at least one free atom, sizes consistent
};

/// Replica factory for inpainting: frozen atoms keep the base values; free
/// atoms get coords from a Gaussian matched to the removed atoms' mean and
/// covariance (diagonal-floored) and types from the Dirichlet prior.
ReplicaFactory inpaint_factory(const InpaintTask& task, double cov_floor = 1e-2);

/// Per-type-pair contact distance lookup for the connectivity proxy;
/// defaults to a single threshold for every pair.
struct ContactTable {
  struct Override {
    int type_a = 0, type_b = 0;
    double threshold = 0.0;
  };
  double default_threshold = 1.3;
  std::vector<Override> overrides;

  double threshold(int a, int b) const;
};

/// True when the cloud forms one connected component under the contact
/// distance graph.
bool is_connected(const LabeledCloud& cloud, const ContactTable& contacts);

struct InpaintAttempt {
  LabeledCloud sample;
  bool connected = false;
  double energy = 0.0;
  long long nfe = 0;
};

struct InpaintReport {
  std::vector<InpaintAttempt> attempts;
  int successes = 0;
  double success_rate = 0.0;
  long long nfe = 0;
};

/// `attempts` independent completions of the task, each from a fresh pool
/// of tempered chains run for `iterations` MLA steps per replica (plus
/// relaxation). iterations = 0 gives the no-sampling baseline: prior
/// initialization plus relaxation only. Frozen atoms are bitwise invariant.
InpaintReport inpaint(const EnergyFn& energy, const InpaintTask& task, int attempts,
                      int iterations, const Ladder& ladder, const SamplerConfig& cfg,
                      const ContactTable& contacts, std::uint64_t seed, int threads = 1);

}  // namespace ebm

#endif  // EBM_STEER_HPP
