//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ebm/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_set>

#include "ebm/errors.hpp"
#include "ebm/ot.hpp"
#include "ebm/rfm.hpp"
#include "ebm/util.hpp"

namespace ebm {

double aligned_rmsd(const Coords& a, const Coords& b) {
  Coords ca = a, cb = b;
  ca.rowwise() -= a.colwise().mean().eval();
  cb.rowwise() -= b.colwise().mean().eval();
  const Eigen::Matrix3d r = kabsch_rotation(ca, cb);
  return std::sqrt((ca * r.transpose() - cb).squaredNorm() / static_cast<double>(a.rows()));
}

RelaxationReport relaxation_test(const EnergyFn& energy, const Dataset& data, int steps,
                                 double eta, const SamplerConfig& cfg, int threads) {
  RelaxationReport rep;
  rep.rows.resize(data.size());
  // Plain gradient descent: only NaN stops a relaxation here, never the
  // sampler's energy bound (runaway descent must be measurable).
  SamplerConfig loose = cfg;
  loose.divergence_factor = 1e300;
  parallel_for(static_cast<int>(data.size()), threads, [&](int i) {
    const MixedState& mol = data[static_cast<size_t>(i)];
    RelaxationRow& row = rep.rows[static_cast<size_t>(i)];
    row.e_before = energy.eval(mol).total;
    const ChainResult cr = relax(mol, energy, steps, eta, loose);
    row.diverged = cr.diverged;
    if (!cr.diverged) {
      row.e_after = energy.eval(cr.state).total;
    } else {
      row.e_after = cr.nfe > 0 ? cr.last_energy : row.e_before;
    }
    row.delta_e = row.e_after - row.e_before;
    row.delta_e_per_atom = row.delta_e / mol.n_atoms();
    row.rmsd = aligned_rmsd(cr.state.coords, mol.coords);
  });

  std::vector<double> de, dea;
  double rmsd_sum = 0.0;
  for (const RelaxationRow& r : rep.rows) {
    de.push_back(r.delta_e);
    dea.push_back(r.delta_e_per_atom);
    rmsd_sum += r.rmsd;
    if (r.diverged) ++rep.diverged;
  }
  rep.median_delta_e = median_of(de);
  rep.median_delta_e_per_atom = median_of(dea);
  rep.mean_rmsd = rep.rows.empty() ? 0.0 : rmsd_sum / static_cast<double>(rep.rows.size());
  return rep;
}

namespace {

double sign0(double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); }

struct ProfileSample {
  std::vector<double> grad;     // per t
  std::vector<double> cosine;   // per t, NaN when excluded
};

}  // namespace

std::vector<ProfilePoint> gradient_profile(const EnergyFn& energy, const Dataset& data,
                                           const PriorSpec& prior,
                                           const std::vector<double>& t_grid, int n_molecules,
                                           RandomStream& rng, int threads) {
  if (t_grid.size() < 3) throw config_error("gradient_profile: grid needs at least {-1, 0, 1}");
  if (data.empty()) throw config_error("gradient_profile: dataset is empty");
  n_molecules = std::min<int>(n_molecules, static_cast<int>(data.size()));

  // Pair construction is sequential so the draw order is reproducible.
  struct Pair {
    MixedState x0;
    MixedState x1;
  };
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<size_t>(n_molecules));
  ObjectiveConfig align_cfg;  // RFM kind: OT alignment on
  for (int m = 0; m < n_molecules; ++m) {
    const MixedState& x0 = data[static_cast<size_t>(m)];
    MixedState x1 = sample_prior(prior, x0.n_atoms(), x0.n_types(), rng);
    const OtAlignment ot = ot_align(x1.coords, x0.coords);
    MixedState aligned = x1;
    aligned.coords = ot.coords;
    for (int i = 0; i < x1.n_atoms(); ++i)
      aligned.types.row(i) = x1.types.row(ot.perm[static_cast<size_t>(i)]);
    pairs.push_back({x0, std::move(aligned)});
  }

  std::vector<ProfileSample> samples(pairs.size());
  parallel_for(static_cast<int>(pairs.size()), threads, [&](int m) {
    const Pair& pr = pairs[static_cast<size_t>(m)];
    ProfileSample& out = samples[static_cast<size_t>(m)];
    for (double t : t_grid) {
      const MixedState xt = interpolate(pr.x0, pr.x1, t);
      const EnergyEval ev = energy.eval_grad(xt);
      const double gnorm = ev.grad_coords.norm();
      out.grad.push_back(gnorm);
      const Coords dir = sign0(t) * (pr.x0.coords - pr.x1.coords);
      const double dnorm = dir.norm();
      if (gnorm < 1e-12 || dnorm < 1e-12) {
        out.cosine.push_back(std::numeric_limits<double>::quiet_NaN());
      } else {
        out.cosine.push_back(ev.grad_coords.cwiseProduct(dir).sum() / (gnorm * dnorm));
      }
    }
  });

  std::vector<ProfilePoint> points(t_grid.size());
  for (size_t ti = 0; ti < t_grid.size(); ++ti) {
    ProfilePoint& p = points[ti];
    p.t = t_grid[ti];
    double gsum = 0.0, gsq = 0.0, csum = 0.0, csq = 0.0;
    int cn = 0;
    for (const ProfileSample& s : samples) {
      const double g = s.grad[ti];
      gsum += g;
      gsq += g * g;
      const double c = s.cosine[ti];
      if (std::isnan(c)) {
        ++p.cos_excluded;
      } else {
        csum += c;
        csq += c * c;
        ++cn;
      }
    }
    p.n = static_cast<int>(samples.size());
    if (p.n > 0) {
      p.grad_mean = gsum / p.n;
      p.grad_std = std::sqrt(std::max(0.0, gsq / p.n - p.grad_mean * p.grad_mean));
    }
    if (cn > 0) {
      p.cos_mean = csum / cn;
      p.cos_std = std::sqrt(std::max(0.0, csq / cn - p.cos_mean * p.cos_mean));
    }
  }
  return points;
}

std::vector<NoisePoint> energy_vs_noise(const EnergyFn& energy, const Dataset& data,
                                        const std::vector<double>& sigma_grid, int n_molecules,
                                        int draws_per_sigma, RandomStream& rng, int threads) {
  if (data.empty()) throw config_error("energy_vs_noise: dataset is empty");
  if (draws_per_sigma < 1) throw config_error("energy_vs_noise: need draws_per_sigma >= 1");
  n_molecules = std::min<int>(n_molecules, static_cast<int>(data.size()));

  // Pre-draw all noise sequentially for reproducibility.
  struct Job {
    const MixedState* mol;
    size_t sigma_idx;
    Coords noise;  // unit noise, scaled by sigma at evaluation
  };
  std::vector<Job> jobs;
  for (size_t si = 0; si < sigma_grid.size(); ++si)
    for (int m = 0; m < n_molecules; ++m)
      for (int d = 0; d < draws_per_sigma; ++d) {
        const MixedState& mol = data[static_cast<size_t>(m)];
        jobs.push_back({&mol, si, rng.normal_matrix(mol.n_atoms(), 3)});
      }

  std::vector<double> values(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), threads, [&](int j) {
    const Job& job = jobs[static_cast<size_t>(j)];
    MixedState s = *job.mol;
    s.coords += sigma_grid[job.sigma_idx] * job.noise;
    s.centered = false;
    values[static_cast<size_t>(j)] = energy.eval(s).total;
  });

  std::vector<NoisePoint> out(sigma_grid.size());
  for (size_t si = 0; si < sigma_grid.size(); ++si) {
    out[si].sigma = sigma_grid[si];
    double sum = 0.0, sq = 0.0;
    int n = 0;
    for (size_t j = 0; j < jobs.size(); ++j) {
      if (jobs[j].sigma_idx != si) continue;
      sum += values[j];
      sq += values[j] * values[j];
      ++n;
    }
    out[si].n = n;
    if (n > 0) {
      out[si].e_mean = sum / n;
      out[si].e_std = std::sqrt(std::max(0.0, sq / n - out[si].e_mean * out[si].e_mean));
    }
  }
  return out;
}

double w2_1d(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw config_error("w2: empty sample set");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  // Exact quantile coupling: both empirical quantile functions are step
  // functions; integrate the squared difference over each flat segment.
  const size_t n = a.size(), m = b.size();
  size_t i = 0, j = 0;
  double q = 0.0, acc = 0.0;
  while (i < n && j < m) {
    const double qa = static_cast<double>(i + 1) / static_cast<double>(n);
    const double qb = static_cast<double>(j + 1) / static_cast<double>(m);
    const double q_next = std::min(qa, qb);
    const double d = a[i] - b[j];
    acc += (q_next - q) * d * d;
    q = q_next;
    if (qa <= q_next + 1e-15) ++i;
    if (qb <= q_next + 1e-15) ++j;
  }
  return std::sqrt(std::max(0.0, acc));
}

std::vector<double> banded_distances(const std::vector<LabeledCloud>& set, double lo, double hi) {
  std::vector<double> out;
  for (const LabeledCloud& c : set)
    for (Eigen::Index i = 0; i < c.coords.rows(); ++i)
      for (Eigen::Index j = i + 1; j < c.coords.rows(); ++j) {
        const double d = (c.coords.row(i) - c.coords.row(j)).norm();
        if (d >= lo && d <= hi) out.push_back(d);
      }
  return out;
}

double w2_pairwise_distance(const std::vector<LabeledCloud>& samples,
                            const std::vector<LabeledCloud>& reference, double lo, double hi) {
  if (samples.empty()) throw config_error("w2: sample set is empty");
  if (reference.empty()) throw config_error("w2: reference set is empty");
  std::vector<double> ds = banded_distances(samples, lo, hi);
  std::vector<double> dr = banded_distances(reference, lo, hi);
  if (ds.empty())
    throw config_error("w2: sample side has no pairwise distances in the band [" +
                       std::to_string(lo) + ", " + std::to_string(hi) + "]");
  if (dr.empty())
    throw config_error("w2: reference side has no pairwise distances in the band [" +
                       std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return w2_1d(std::move(ds), std::move(dr));
}

double uniqueness_proxy(const std::vector<LabeledCloud>& samples, double quantum) {
  if (samples.empty()) return 0.0;
  std::unordered_set<std::string> keys;
  for (const LabeledCloud& c : samples) {
    std::vector<int> labels = c.labels;
    std::sort(labels.begin(), labels.end());
    std::vector<long> dist;
    for (Eigen::Index i = 0; i < c.coords.rows(); ++i)
      for (Eigen::Index j = i + 1; j < c.coords.rows(); ++j)
        dist.push_back(std::lround((c.coords.row(i) - c.coords.row(j)).norm() / quantum));
    std::sort(dist.begin(), dist.end());
    std::string key;
    for (int l : labels) key += std::to_string(l) + ",";
    key += "|";
    for (long d : dist) key += std::to_string(d) + ",";
    keys.insert(std::move(key));
  }
  return static_cast<double>(keys.size()) / static_cast<double>(samples.size());
}

}  // namespace ebm
