//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_TESTS_HELPERS_HPP
#define EBM_TESTS_HELPERS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "ebm/energy.hpp"
#include "ebm/prior.hpp"
#include "ebm/rng.hpp"
#include "ebm/state.hpp"

namespace ebmtest {

inline ebm::MixedState random_state(int n_atoms, int n_types, ebm::RandomStream& rng,
                                    double coord_scale = 1.0) {
  ebm::MixedState s;
  s.coords = coord_scale * rng.normal_matrix(n_atoms, 3);
  s.types.resize(n_atoms, n_types);
  for (int i = 0; i < n_atoms; ++i) s.types.row(i) = ebm::sample_dirichlet(n_types, rng);
  return s;
}

/// Small model with a randomized (non-flat) readout head.
inline ebm::EnergyModel tiny_model(int n_types, ebm::RandomStream& rng, int layers = 2,
                                   int dim = 8, ebm::ad::Fn act = ebm::ad::Fn::kSilu) {
  ebm::EnergyModelConfig cfg;
  cfg.n_layers = layers;
  cfg.embed_dim = dim;
  cfg.n_types = n_types;
  cfg.activation = act;
  ebm::EnergyModel m = ebm::EnergyModel::init(cfg, rng);
  for (Eigen::Index i = 0; i < m.read_w2.rows(); ++i)
    m.read_w2(i, 0) = rng.uniform(-0.5, 0.5);
  m.read_b2(0, 0) = rng.uniform(-0.1, 0.1);
  return m;
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-12, std::abs(a), std::abs(b)});
}

inline double rel_err(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max({1e-12, a.norm(), b.norm()});
}

/// Central finite differences of total energy w.r.t. coords.
inline ebm::Coords fd_grad_coords(const ebm::EnergyModel& m, const ebm::MixedState& s,
                                  double h = 1e-4) {
  ebm::Coords g(s.n_atoms(), 3);
  for (int i = 0; i < s.n_atoms(); ++i)
    for (int a = 0; a < 3; ++a) {
      ebm::MixedState sp = s, sm = s;
      sp.coords(i, a) += h;
      sm.coords(i, a) -= h;
      g(i, a) = (m.forward(sp).total - m.forward(sm).total) / (2.0 * h);
    }
  return g;
}

inline Eigen::MatrixXd fd_grad_types(const ebm::EnergyModel& m, const ebm::MixedState& s,
                                     double h = 1e-4) {
  Eigen::MatrixXd g(s.n_atoms(), s.n_types());
  for (int i = 0; i < s.n_atoms(); ++i)
    for (int k = 0; k < s.n_types(); ++k) {
      ebm::MixedState sp = s, sm = s;
      sp.types(i, k) += h;
      sm.types(i, k) -= h;
      g(i, k) = (m.forward(sp).total - m.forward(sm).total) / (2.0 * h);
    }
  return g;
}

/// Central finite differences of an arbitrary scalar loss w.r.t. every
/// parameter entry. The loss closure must not cache model state.
inline std::vector<ebm::ad::Mat> fd_param_grad(
    ebm::EnergyModel m, const std::function<double(const ebm::EnergyModel&)>& loss,
    double h = 1e-4) {
  std::vector<ebm::ad::Mat> out;
  for (ebm::ad::Mat* p : m.param_ptrs()) {
    ebm::ad::Mat g(p->rows(), p->cols());
    for (Eigen::Index i = 0; i < p->rows(); ++i)
      for (Eigen::Index j = 0; j < p->cols(); ++j) {
        const double orig = (*p)(i, j);
        (*p)(i, j) = orig + h;
        const double up = loss(m);
        (*p)(i, j) = orig - h;
        const double dn = loss(m);
        (*p)(i, j) = orig;
        g(i, j) = (up - dn) / (2.0 * h);
      }
    out.push_back(std::move(g));
  }
  return out;
}

/// Isotropic quadratic test potential E = ||c||^2 / (2 s^2), per atom
/// E_i = ||c_i||^2 / (2 s^2); no type dependence.
class QuadraticPotential final : public ebm::EnergyFn {
 public:
  explicit QuadraticPotential(double s = 1.0) : inv_s2_(1.0 / (s * s)) {}
  ebm::EnergyEval eval(const ebm::MixedState& s) const override {
    ebm::EnergyEval e;
    e.per_atom = 0.5 * inv_s2_ * s.coords.rowwise().squaredNorm();
    e.total = e.per_atom.sum();
    return e;
  }
  ebm::EnergyEval eval_grad(const ebm::MixedState& s) const override {
    ebm::EnergyEval e = eval(s);
    e.grad_coords = inv_s2_ * s.coords;
    e.grad_types = Eigen::MatrixXd::Zero(s.n_atoms(), s.n_types());
    return e;
  }

 private:
  double inv_s2_;
};

/// Constant-energy fixture.
class FrozenPotential final : public ebm::EnergyFn {
 public:
  explicit FrozenPotential(double value) : value_(value) {}
  ebm::EnergyEval eval(const ebm::MixedState& s) const override {
    ebm::EnergyEval e;
    e.per_atom = Eigen::VectorXd::Constant(s.n_atoms(), value_ / s.n_atoms());
    e.total = value_;
    return e;
  }
  ebm::EnergyEval eval_grad(const ebm::MixedState& s) const override {
    ebm::EnergyEval e = eval(s);
    e.grad_coords = ebm::Coords::Zero(s.n_atoms(), 3);
    e.grad_types = Eigen::MatrixXd::Zero(s.n_atoms(), s.n_types());
    return e;
  }

 private:
  double value_;
};

// --------------------------------------------------------------------------
// Regularized incomplete beta I_x(a, b) (continued fraction, Lentz), used as
// the independent CDF oracle for the Dirichlet marginal KS test.
// --------------------------------------------------------------------------

inline double betacf(double a, double b, double x) {
  const int max_it = 300;
  const double eps = 3e-14, fpmin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::abs(d) < fpmin) d = fpmin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= max_it; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < fpmin) d = fpmin;
    c = 1.0 + aa / c;
    if (std::abs(c) < fpmin) c = fpmin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return h;
}

inline double beta_cdf(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - std::exp(std::lgamma(a + b) - std::lgamma(b) - std::lgamma(a) +
                        b * std::log(1.0 - x) + a * std::log(x)) *
                   betacf(b, a, 1.0 - x) / b;
}

/// One-sample KS statistic against a CDF.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max(d, std::abs(f - static_cast<double>(i) / n));
    d = std::max(d, std::abs(static_cast<double>(i + 1) / n - f));
  }
  return d;
}

}  // namespace ebmtest

#endif  // EBM_TESTS_HELPERS_HPP
