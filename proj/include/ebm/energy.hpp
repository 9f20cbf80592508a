//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_ENERGY_HPP
#define EBM_ENERGY_HPP

#include <functional>
#include <string>
#include <vector>

#include "ebm/rng.hpp"
#include "ebm/state.hpp"
#include "ebm/tape.hpp"

namespace ebm {

/// Energies and (optionally) input gradients of one evaluation.
struct EnergyEval {
  Eigen::VectorXd per_atom;  // length N
  double total = 0.0;        // == per_atom.sum()
  Coords grad_coords;        // N x 3 when gradients were requested, else 0 x 3
  Eigen::MatrixXd grad_types;

  bool has_grads() const { return grad_coords.rows() > 0; }
};

/// Abstract energy used by the samplers; lets tests inject closed-form
/// potentials in place of the learned network.
class EnergyFn {
 public:
  virtual ~EnergyFn() = default;
  virtual EnergyEval eval(const MixedState& s) const = 0;
  virtual EnergyEval eval_grad(const MixedState& s) const = 0;
};

struct EnergyModelConfig {
  int n_layers = 4;
  int embed_dim = 32;
  int n_types = 3;
  // Coordinate updates run in every layer except the last; this switch
  // turns them off entirely (distance features only).
  bool coord_updates = true;
  ad::Fn activation = ad::Fn::kSilu;  // must be smooth: silu or tanh

  void check() const;  // throws config_error
};

/// Handles into one energy evaluation recorded on a tape. `params` follows
/// the canonical parameter order of EnergyModel::visit_params.
struct EnergyGraph {
  ad::Var coords, types;
  ad::Var per_atom, total;
  std::vector<ad::Var> params;
  std::vector<ad::Var> layer_coords;  // internal coordinates after each update
};

/// Per-atom-additive invariant energy network. Node embeddings come from the
/// type rows; each layer computes edge messages from (h_i, h_j, |c_i-c_j|^2)
/// over the fully connected graph, aggregates by sum, updates node features
/// residually, and updates coordinates equivariantly with a tanh-bounded
/// gate - except the final layer, which omits the coordinate update. A
/// two-layer readout on the final node features gives per-atom energies.
class EnergyModel {
 public:
  struct Layer {
    ad::Mat edge_w1, edge_b1, edge_w2, edge_b2;
    ad::Mat gate_w, gate_b;
    ad::Mat node_w1, node_b1, node_w2, node_b2;
  };

  EnergyModel() = default;

  /// Fan-in-scaled uniform init; the readout's last layer starts at zero so
  /// the initial landscape is exactly flat.
  static EnergyModel init(const EnergyModelConfig& cfg, RandomStream& rng);

  const EnergyModelConfig& config() const { return cfg_; }

  /// Records one evaluation on the tape. When `shared` is non-null its
  /// parameter vars are reused instead of registering fresh leaves, so a
  /// batch of evaluations accumulates parameter adjoints jointly.
  EnergyGraph build_graph(ad::Tape& t, const MixedState& s,
                          const std::vector<ad::Var>* shared = nullptr) const;

  /// Energies only. Throws numerical_error when the output is not finite.
  EnergyEval forward(const MixedState& s) const;

  /// Energies plus exact reverse-mode gradients w.r.t. coords and types
  /// (types gradient in ambient R^{N x K}).
  EnergyEval grad_input(const MixedState& s) const;

  /// Visits parameters in canonical order (pairs with EnergyGraph::params).
  void visit_params(const std::function<void(const std::string&, ad::Mat&)>& fn);
  void visit_params(const std::function<void(const std::string&, const ad::Mat&)>& fn) const;
  std::vector<ad::Mat*> param_ptrs();
  int param_count() const;

  EnergyModelConfig cfg_;
  ad::Mat embed_w, embed_b;
  std::vector<Layer> layers;
  ad::Mat read_w1, read_b1, read_w2, read_b2;
};

/// ema <- decay * ema + (1 - decay) * model, elementwise.
/// Throws std::invalid_argument on shape mismatch.
void ema_update(EnergyModel& ema, const EnergyModel& model, double decay);

/// Adapts a model to the sampler-facing interface.
class ModelEnergy final : public EnergyFn {
 public:
  explicit ModelEnergy(const EnergyModel& m) : model_(&m) {}
  EnergyEval eval(const MixedState& s) const override { return model_->forward(s); }
  EnergyEval eval_grad(const MixedState& s) const override { return model_->grad_input(s); }

 private:
  const EnergyModel* model_;
};

// Checkpoints store the raw and EMA parameter sets side by side under a
// versioned header; round-trips are bit-exact.
struct Checkpoint {
  EnergyModel raw;
  EnergyModel ema;
};

void save_checkpoint(const std::string& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace ebm

#endif  // EBM_ENERGY_HPP
