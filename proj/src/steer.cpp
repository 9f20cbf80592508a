//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ebm/steer.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "ebm/errors.hpp"
#include "ebm/prior.hpp"
#include "ebm/util.hpp"

namespace ebm {

void ShapePotential::check() const {
  if (!(weight >= 0.0) || !std::isfinite(weight))
    throw config_error("steering: weight must be finite and >= 0");
}

Eigen::Vector3d pca_eigs(const Coords& coords) { return pca_eigenvalues(coords); }

namespace {

void sorted_eigs(const Coords& coords, Eigen::Vector3d& lam, Eigen::Matrix3d& vecs) {
  Coords c = coords;
  c.rowwise() -= coords.colwise().mean().eval();
  const Eigen::Matrix3d cov = c.transpose() * c / static_cast<double>(coords.rows());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  // Solver returns ascending order; flip to descending.
  for (int k = 0; k < 3; ++k) {
    lam[k] = es.eigenvalues()[2 - k];
    vecs.col(k) = es.eigenvectors().col(2 - k);
  }
}

Eigen::Vector3d kind_coeffs(ShapePotential::Kind kind) {
  switch (kind) {
    case ShapePotential::Kind::kLinear: return {0.0, 1.0, 1.0};
    case ShapePotential::Kind::kDisk: return {1.0, -1.0, 1.0};
    case ShapePotential::Kind::kSphere: return {1.0, 0.0, -1.0};
  }
  return {0.0, 0.0, 0.0};
}

}  // namespace

double shape_energy_and_grad(const Coords& coords, ShapePotential::Kind kind, Coords* grad) {
  Eigen::Vector3d lam;
  Eigen::Matrix3d vecs;
  sorted_eigs(coords, lam, vecs);
  const Eigen::Vector3d lam_clamped = lam.cwiseMax(0.0);
  const Eigen::Vector3d coeff = kind_coeffs(kind);
  const double u = coeff.dot(lam_clamped);

  if (grad != nullptr) {
    // d lambda_k / d c_i = (2/N) (v_k . c~_i) v_k, already zero-mean over
    // atoms, so centering needs no extra projection. At crossings the
    // eigenvector outer products of the group are averaged (symmetric
    // subgradient).
    const double scale = std::max(1.0, lam.cwiseAbs().maxCoeff());
    Eigen::Matrix3d proj[3];
    int k = 0;
    while (k < 3) {
      int j = k + 1;
      while (j < 3 && std::abs(lam[j - 1] - lam[j]) < 1e-9 * scale) ++j;
      Eigen::Matrix3d p = Eigen::Matrix3d::Zero();
      for (int g = k; g < j; ++g) p += vecs.col(g) * vecs.col(g).transpose();
      p /= static_cast<double>(j - k);
      for (int g = k; g < j; ++g) proj[g] = p;
      k = j;
    }
    Eigen::Matrix3d m = Eigen::Matrix3d::Zero();
    for (int g = 0; g < 3; ++g) m += coeff[g] * proj[g];
    Coords centered = coords;
    centered.rowwise() -= coords.colwise().mean().eval();
    *grad = (2.0 / static_cast<double>(coords.rows())) * (centered * m.transpose());
  }
  return u;
}

ShapeStats shape_stats(const Coords& coords) {
  const Eigen::Vector3d lam = pca_eigs(coords);
  ShapeStats s;
  s.l1 = lam[0];
  s.l2 = lam[1];
  s.l3 = lam[2];
  s.u_lin = lam[1] + lam[2];
  s.u_disk = lam[2] + lam[0] - lam[1];
  s.u_sphere = lam[0] - lam[2];
  return s;
}

EnergyEval ComposedEnergy::eval(const MixedState& s) const {
  EnergyEval e = base_->eval(s);
  const double u = shape_energy_and_grad(s.coords, pot_.kind, nullptr);
  const double wu = pot_.weight * u;
  e.per_atom.array() += wu / static_cast<double>(s.n_atoms());
  e.total += wu;
  return e;
}

EnergyEval ComposedEnergy::eval_grad(const MixedState& s) const {
  EnergyEval e = base_->eval_grad(s);
  Coords gu;
  const double u = shape_energy_and_grad(s.coords, pot_.kind, &gu);
  const double wu = pot_.weight * u;
  e.per_atom.array() += wu / static_cast<double>(s.n_atoms());
  e.total += wu;
  e.grad_coords += pot_.weight * gu;
  return e;
}

std::vector<LabeledCloud> steered_generate(const EnergyFn& energy, const ShapePotential& pot,
                                           int count, const Ladder& ladder,
                                           const SamplerConfig& cfg, const ReplicaFactory& factory,
                                           std::uint64_t seed, GenerationReport* report,
                                           std::vector<ShapeStats>* stats, int threads) {
  pot.check();
  std::vector<LabeledCloud> samples;
  if (pot.weight == 0.0) {
    // Null composition: identical draw sequence to the unsteered sampler.
    samples = generate(energy, count, ladder, cfg, factory, seed, report, threads);
  } else {
    const ComposedEnergy composed(energy, pot);
    samples = generate(composed, count, ladder, cfg, factory, seed, report, threads);
  }
  if (stats != nullptr) {
    stats->clear();
    stats->reserve(samples.size());
    for (const LabeledCloud& c : samples) stats->push_back(shape_stats(c.coords));
  }
  return samples;
}

void InpaintTask::check() const {
  validate(base);
  if (mask.size() != base.n_atoms())
    throw config_error("inpaint: mask length must equal the base atom count");
  if (mask.n_free() == 0) throw config_error("inpaint: task has no free atoms");
}

ReplicaFactory inpaint_factory(const InpaintTask& task, double cov_floor) {
  task.check();
  // Spatial statistics of the removed (free) atoms.
  std::vector<int> free_idx;
  for (int i = 0; i < task.base.n_atoms(); ++i)
    if (!task.mask.frozen(i)) free_idx.push_back(i);
  const int nf = static_cast<int>(free_idx.size());
  Eigen::RowVector3d mean = Eigen::RowVector3d::Zero();
  for (int i : free_idx) mean += task.base.coords.row(i);
  mean /= static_cast<double>(nf);
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (int i : free_idx) {
    const Eigen::RowVector3d d = task.base.coords.row(i) - mean;
    cov += d.transpose() * d;
  }
  cov /= static_cast<double>(nf);
  cov += cov_floor * Eigen::Matrix3d::Identity();
  const Eigen::Matrix3d chol = Eigen::LLT<Eigen::Matrix3d>(cov).matrixL();

  const MixedState base = task.base;
  const AtomMask mask = task.mask;
  const int k = base.n_types();
  return [base, mask, mean, chol, k](RandomStream& rng) {
    MixedState s = base;
    s.centered = false;
    for (int i = 0; i < base.n_atoms(); ++i) {
      if (mask.frozen(i)) continue;
      Eigen::Vector3d z;
      for (int a = 0; a < 3; ++a) z[a] = rng.normal();
      s.coords.row(i) = mean + (chol * z).transpose();
      s.types.row(i) = sample_dirichlet(k, rng);
    }
    return s;
  };
}

double ContactTable::threshold(int a, int b) const {
  for (const Override& o : overrides)
    if ((o.type_a == a && o.type_b == b) || (o.type_a == b && o.type_b == a)) return o.threshold;
  return default_threshold;
}

bool is_connected(const LabeledCloud& cloud, const ContactTable& contacts) {
  const int n = cloud.n_atoms();
  if (n <= 1) return true;
  std::vector<int> stack{0};
  std::vector<char> seen(static_cast<size_t>(n), 0);
  seen[0] = 1;
  int reached = 1;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    for (int j = 0; j < n; ++j) {
      if (seen[static_cast<size_t>(j)]) continue;
      const double d = (cloud.coords.row(i) - cloud.coords.row(j)).norm();
      if (d < contacts.threshold(cloud.labels[static_cast<size_t>(i)],
                                 cloud.labels[static_cast<size_t>(j)])) {
        seen[static_cast<size_t>(j)] = 1;
        stack.push_back(j);
        ++reached;
      }
    }
  }
  return reached == n;
}

InpaintReport inpaint(const EnergyFn& energy, const InpaintTask& task, int attempts,
                      int iterations, const Ladder& ladder, const SamplerConfig& cfg,
                      const ContactTable& contacts, std::uint64_t seed, int threads) {
  task.check();
  if (attempts < 1) throw std::invalid_argument("inpaint: attempts must be >= 1");
  const ReplicaFactory factory = inpaint_factory(task);

  InpaintReport rep;
  rep.attempts.resize(static_cast<size_t>(attempts));
  parallel_for(attempts, threads, [&](int a) {
    InpaintAttempt& out = rep.attempts[static_cast<size_t>(a)];
    const std::uint64_t attempt_seed = seed + static_cast<std::uint64_t>(a);
    MixedState state;
    long long nfe = 0;
    if (iterations <= 0) {
      // No-sampling baseline: prior initialization plus relaxation only.
      RandomStream rng(attempt_seed, 1);
      const ChainResult cr =
          relax(factory(rng), energy, ladder.relax_steps, ladder.relax_eta, cfg, &task.mask);
      state = cr.state;
      nfe = cr.nfe;
    } else {
      Ladder lad = ladder;
      lad.batch_per_level = 1;
      lad.swaps_between_harvests = std::max(1, iterations / ladder.steps_between_swaps);
      ChainPool pool(lad, factory, cfg, attempt_seed, &task.mask);
      for (int r = 0; r < lad.swaps_between_harvests; ++r) pool.round(energy, cfg, 1);
      std::vector<MixedState> batch = pool.harvest(energy, cfg, 1);
      nfe = pool.total_nfe();
      if (batch.empty()) {
        // Post-relaxation sanity failed; count the attempt as unconnected.
        out.connected = false;
        out.energy = std::numeric_limits<double>::quiet_NaN();
        out.nfe = nfe;
        return;
      }
      state = std::move(batch.front());
    }
    out.sample = discretize(state);
    out.connected = is_connected(out.sample, contacts);
    out.energy = energy.eval(state).total;
    out.nfe = nfe;
  });

  for (const InpaintAttempt& a : rep.attempts) {
    rep.nfe += a.nfe;
    if (a.connected) ++rep.successes;
  }
  rep.success_rate = static_cast<double>(rep.successes) / attempts;
  return rep;
}

}  // namespace ebm
