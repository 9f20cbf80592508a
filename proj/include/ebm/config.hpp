//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_CONFIG_HPP
#define EBM_CONFIG_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "ebm/dataset.hpp"
#include "ebm/energy.hpp"
#include "ebm/mla.hpp"
#include "ebm/rfm.hpp"
#include "ebm/steer.hpp"
#include "ebm/tempering.hpp"

namespace ebm {

/// Full experiment description. Parsed from flat typed key-value text with
/// section headers; validation rejects unknown keys and out-of-range values
/// naming the offending `section.key`.
struct RunConfig {
  std::uint64_t seed = 42;

  // [dataset]
  std::vector<std::string> dataset_templates{"dumbbell"};
  int n_types = 3;
  double jitter = 0.05;
  int dataset_count = 512;
  std::string dataset_path;  // when set, molecules are loaded instead
  std::string prior_kind = "pca_matched";  // isotropic | pca_matched
  double prior_sigma = 1.0;

  // [model]
  int model_layers = 4;
  int embed_dim = 32;
  bool coord_updates = true;
  std::string activation = "silu";  // silu | tanh (smooth only)

  // [objective]
  std::string objective_kind = "rfm";  // rfm | otfm | plainfm
  double gamma = 25.0;
  double lambda_reg = 1e-3;
  int train_steps = 2000;
  int batch_size = 16;
  double lr = 5e-5;
  std::string lr_schedule = "linear";  // linear | constant
  double clip_norm = 1.0;
  double ema_decay = 0.999;

  // [sampler]
  double eta = 0.05;
  double sigma_c = 0.6;
  double sigma_p = 0.6;
  double simplex_eps = 0.0015;
  double grad_clip = 0.0;
  double divergence_factor = 1e3;
  double divergence_floor = 1.0;
  int ald_steps = 800;       // chain length for the ald/fwde sampler variants
  double ald_tau_max = 1.0;
  double ald_tau_min = 0.05;
  int relax_steps = 50;
  double relax_eta = 0.01;

  // [ladder]
  int ladder_levels = 11;
  double tau_max = 1.0;
  double tau_min = 0.05;
  int batch_per_level = 8;
  int steps_between_swaps = 10;
  int swaps_between_harvests = 8;
  std::string swap_criterion = "atom_max";  // atom_max | atom_avg | total

  // [steering]
  std::string steer_kind = "linear";  // linear | disk | sphere
  double steer_weight = 1.0;

  // [inpaint]
  std::string inpaint_task;
  int inpaint_iterations = 2000;
  int inpaint_attempts = 100;
  double connect_threshold = 1.3;

  // [eval]
  int eval_relax_steps = 500;
  double eval_relax_eta = 0.01;
  int eval_molecules = 200;
  int eval_noise_draws = 4;
  double eval_sigma_max = 1.0;
  int eval_sigma_points = 21;
  int eval_t_points = 21;
  double w2_lo = 0.5;
  double w2_hi = 2.0;

  // -- Derived views ---------------------------------------------------------
  ObjectiveKind objective() const;
  ObjectiveConfig objective_config() const;
  TrainConfig train_config() const;
  EnergyModelConfig model_config() const;
  SamplerConfig sampler_config() const;
  Ladder ladder() const;
  ShapePotential shape_potential() const;
  PriorSpec prior_spec(const Dataset& data) const;

  /// Builds the dataset: loads dataset_path when set, otherwise synthesizes
  /// dataset_count template samples from a seed-derived stream.
  Dataset build_dataset() const;

  void validate() const;                    // throws config_error
  void write(const std::string& path) const;  // resolved echo, re-parseable
};

/// Parses and validates. Throws parse_error (bad syntax) or config_error
/// (unknown key / bad value), both naming `section.key` where applicable.
RunConfig load_config(const std::string& path);
RunConfig parse_config_text(const std::string& text, const std::string& origin = "<string>");

}  // namespace ebm

#endif  // EBM_CONFIG_HPP
