//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_TEMPERING_HPP
#define EBM_TEMPERING_HPP

#include <functional>
#include <vector>

#include "ebm/dataset.hpp"
#include "ebm/energy.hpp"
#include "ebm/mla.hpp"
#include "ebm/prior.hpp"
#include "ebm/rng.hpp"
#include "ebm/state.hpp"

namespace ebm {

enum class SwapCriterion { kAtomMax, kAtomAvg, kTotal };

/// Temperature ladder plus the pool schedule constants.
struct Ladder {
  std::vector<double> taus;  // strictly decreasing, all > 0; taus[0] hottest
  int batch_per_level = 8;
  int steps_between_swaps = 10;
  int swaps_between_harvests = 8;
  SwapCriterion criterion = SwapCriterion::kAtomMax;
  int relax_steps = 50;
  double relax_eta = 0.01;

  int n_levels() const { return static_cast<int>(taus.size()); }
  void check() const;  // throws config_error
};

std::vector<double> geometric_ladder(double tau_max, double tau_min, int levels);

/// Metropolis-Hastings replica-swap acceptance probability
///   min(1, exp[(E_j - E_i) (1/tau_i - 1/tau_j)]).
/// Symmetric in the pair labelling. Requires positive temperatures.
double swap_accept_prob(double e_i, double e_j, double tau_i, double tau_j);

/// Makes a fresh replica state (prior draw, or noised inpaint base).
using ReplicaFactory = std::function<MixedState(RandomStream&)>;

struct Replica {
  MixedState state;
  RandomStream rng;
  MedianTracker median;
  long nfe = 0;
  // Criterion energy + components of the last evaluation.
  double crit_energy = 0.0;
  double total_energy = 0.0;
  bool dead = false;  // diverged during the last round, awaiting refresh
};

/// Tempering state: per-level replica batches plus swap bookkeeping.
class ChainPool {
 public:
  ChainPool(Ladder ladder, ReplicaFactory factory, const SamplerConfig& cfg,
            std::uint64_t seed, const AtomMask* mask = nullptr);

  const Ladder& ladder() const { return ladder_; }
  int n_levels() const { return ladder_.n_levels(); }
  int batch() const { return ladder_.batch_per_level; }
  Replica& at(int level, int slot);
  const Replica& at(int level, int slot) const;

  long rounds_done() const { return rounds_done_; }
  int rounds_since_harvest() const { return rounds_since_harvest_; }
  long diverged_count() const { return diverged_; }
  long long total_nfe() const;
  const std::vector<long>& swaps_attempted() const { return attempted_; }
  const std::vector<long>& swaps_accepted() const { return accepted_; }

  /// One tempering round: every replica runs steps_between_swaps MLA steps
  /// at its level's temperature, dead replicas are replaced by fresh draws
  /// (counted), then adjacent levels attempt swaps (even pairs on even
  /// rounds, odd pairs on odd rounds).
  void round(const EnergyFn& energy, const SamplerConfig& cfg, int threads = 1);

  /// Extracts the coldest-level replicas, relaxes them, refills the slots
  /// with fresh draws. Requires at least swaps_between_harvests rounds since
  /// the last harvest. Samples failing post-relaxation sanity are dropped.
  std::vector<MixedState> harvest(const EnergyFn& energy, const SamplerConfig& cfg,
                                  int threads = 1);

 private:
  void refresh_replica(int level, int slot, const EnergyFn& energy);
  double criterion_energy(const EnergyEval& eval) const;

  Ladder ladder_;
  ReplicaFactory factory_;
  const AtomMask* mask_;
  std::vector<std::vector<Replica>> levels_;
  RandomStream swap_rng_;
  long rounds_done_ = 0;
  int rounds_since_harvest_ = 0;
  long diverged_ = 0;
  long dropped_ = 0;
  std::vector<long> attempted_, accepted_;  // per adjacent pair

  friend struct PoolInspector;
};

struct GenerationReport {
  int requested = 0;
  int produced = 0;
  long long nfe = 0;
  long diverged = 0;
  long dropped = 0;  // failed post-relaxation sanity
  std::vector<double> harvest_median_energy;  // per harvest, post-relax totals
};

/// Loops round/harvest until `count` samples are collected. NFE counts one
/// per gradient evaluation per replica (relaxation included).
std::vector<LabeledCloud> generate(const EnergyFn& energy, int count, const Ladder& ladder,
                                   const SamplerConfig& cfg, const ReplicaFactory& factory,
                                   std::uint64_t seed, GenerationReport* report = nullptr,
                                   int threads = 1, const AtomMask* mask = nullptr,
                                   std::vector<MixedState>* raw_states = nullptr);

/// Factory for unconditional generation: N from the dataset's empirical
/// size histogram, coords/types from the prior.
ReplicaFactory prior_factory(const PriorSpec& prior, const Dataset& data, int n_types);

}  // namespace ebm

#endif  // EBM_TEMPERING_HPP
