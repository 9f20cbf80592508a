//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ebm/tempering.hpp"

#include <cmath>

#include "ebm/errors.hpp"
#include "ebm/util.hpp"

namespace ebm {

void Ladder::check() const {
  if (taus.empty()) throw config_error("ladder: need at least one temperature level");
  for (size_t i = 0; i < taus.size(); ++i) {
    if (!(taus[i] > 0.0)) throw config_error("ladder: temperatures must be > 0");
    if (i > 0 && !(taus[i] < taus[i - 1]))
      throw config_error("ladder: temperatures must be strictly decreasing");
  }
  if (batch_per_level < 1) throw config_error("ladder: batch_per_level must be >= 1");
  if (steps_between_swaps < 1) throw config_error("ladder: steps_between_swaps must be >= 1");
  if (swaps_between_harvests < 1) throw config_error("ladder: swaps_between_harvests must be >= 1");
  if (relax_steps < 0) throw config_error("ladder: relax_steps must be >= 0");
  if (!(relax_eta > 0.0)) throw config_error("ladder: relax_eta must be > 0");
}

std::vector<double> geometric_ladder(double tau_max, double tau_min, int levels) {
  if (levels < 1) throw config_error("ladder: levels must be >= 1");
  if (levels == 1) {
    if (!(tau_max > 0.0)) throw config_error("ladder: temperatures must be > 0");
    return {tau_max};
  }
  if (!(tau_min > 0.0) || !(tau_max > tau_min))
    throw config_error("ladder: need tau_max > tau_min > 0");
  std::vector<double> taus(static_cast<size_t>(levels));
  const double ratio = tau_min / tau_max;
  for (int i = 0; i < levels; ++i)
    taus[static_cast<size_t>(i)] = tau_max * std::pow(ratio, static_cast<double>(i) / (levels - 1));
  return taus;
}

double swap_accept_prob(double e_i, double e_j, double tau_i, double tau_j) {
  if (!(tau_i > 0.0) || !(tau_j > 0.0))
    throw std::invalid_argument("swap_accept_prob: temperatures must be > 0");
  const double expo = (e_j - e_i) * (1.0 / tau_i - 1.0 / tau_j);
  return std::min(1.0, std::exp(expo));
}

double ChainPool::criterion_energy(const EnergyEval& eval) const {
  switch (ladder_.criterion) {
    case SwapCriterion::kAtomMax: return eval.per_atom.maxCoeff();
    case SwapCriterion::kAtomAvg: return eval.per_atom.mean();
    case SwapCriterion::kTotal: return eval.total;
  }
  return eval.total;
}

ChainPool::ChainPool(Ladder ladder, ReplicaFactory factory, const SamplerConfig& cfg,
                     std::uint64_t seed, const AtomMask* mask)
    : ladder_(std::move(ladder)), factory_(std::move(factory)), mask_(mask), swap_rng_(seed, 0) {
  ladder_.check();
  const int m = ladder_.n_levels();
  const int b = ladder_.batch_per_level;
  attempted_.assign(static_cast<size_t>(std::max(0, m - 1)), 0);
  accepted_.assign(static_cast<size_t>(std::max(0, m - 1)), 0);
  levels_.reserve(static_cast<size_t>(m));
  // Stream 0 is the swap stream; replicas start at 1.
  std::uint64_t stream = 1;
  for (int l = 0; l < m; ++l) {
    std::vector<Replica> row;
    row.reserve(static_cast<size_t>(b));
    for (int s = 0; s < b; ++s) {
      Replica r{MixedState{}, RandomStream(seed, stream++), MedianTracker{}, 0, 0.0, 0.0, true};
      row.push_back(std::move(r));
    }
    levels_.push_back(std::move(row));
  }
  (void)cfg;
}

Replica& ChainPool::at(int level, int slot) {
  return levels_[static_cast<size_t>(level)][static_cast<size_t>(slot)];
}
const Replica& ChainPool::at(int level, int slot) const {
  return levels_[static_cast<size_t>(level)][static_cast<size_t>(slot)];
}

long long ChainPool::total_nfe() const {
  long long total = 0;
  for (const auto& row : levels_)
    for (const Replica& r : row) total += r.nfe;
  return total;
}

void ChainPool::refresh_replica(int level, int slot, const EnergyFn& energy) {
  Replica& r = at(level, slot);
  r.state = factory_(r.rng);
  r.median = MedianTracker{};
  r.dead = false;
  const EnergyEval eval = energy.eval(r.state);
  r.total_energy = eval.total;
  r.crit_energy = criterion_energy(eval);
}

void ChainPool::round(const EnergyFn& energy, const SamplerConfig& cfg, int threads) {
  const int m = n_levels();
  const int b = batch();

  // Dead slots (initial fill or divergence replacements) first, serially:
  // factory draws come from each replica's own stream, so this stays
  // deterministic, but the counter update must not race.
  for (int l = 0; l < m; ++l)
    for (int s = 0; s < b; ++s)
      if (at(l, s).dead) {
        if (rounds_done_ > 0) ++diverged_;
        refresh_replica(l, s, energy);
      }

  parallel_for(m * b, threads, [&](int idx) {
    const int l = idx / b;
    const int s = idx % b;
    Replica& r = at(l, s);
    SamplerConfig level_cfg = cfg;
    level_cfg.tau = ladder_.taus[static_cast<size_t>(l)];
    const ChainResult cr = run_chain(r.state, energy, ladder_.steps_between_swaps, level_cfg,
                                     nullptr, r.rng, mask_, false, &r.median);
    r.nfe += cr.nfe;
    if (cr.diverged) {
      r.dead = true;
      return;
    }
    r.state = cr.state;
    EnergyEval eval;
    try {
      eval = energy.eval(r.state);  // swap energies; forward only, not an NFE
    } catch (const numerical_error&) {
      r.dead = true;
      return;
    }
    r.total_energy = eval.total;
    r.crit_energy = criterion_energy(eval);
  });

  // Swap phase (serial): alternate even/odd adjacent pairs so every pair is
  // attempted at least once per two rounds. Dead replicas sit out.
  const int parity = static_cast<int>(rounds_done_ % 2);
  for (int l = parity; l + 1 < m; l += 2) {
    for (int s = 0; s < b; ++s) {
      Replica& hot = at(l, s);
      Replica& cold = at(l + 1, s);
      if (hot.dead || cold.dead) continue;
      ++attempted_[static_cast<size_t>(l)];
      const double p = swap_accept_prob(hot.crit_energy, cold.crit_energy,
                                        ladder_.taus[static_cast<size_t>(l)],
                                        ladder_.taus[static_cast<size_t>(l + 1)]);
      if (swap_rng_.uniform() < p) {
        std::swap(hot.state, cold.state);
        std::swap(hot.total_energy, cold.total_energy);
        std::swap(hot.crit_energy, cold.crit_energy);
        std::swap(hot.median, cold.median);
        ++accepted_[static_cast<size_t>(l)];
      }
    }
  }

  ++rounds_done_;
  ++rounds_since_harvest_;
}

std::vector<MixedState> ChainPool::harvest(const EnergyFn& energy, const SamplerConfig& cfg,
                                           int threads) {
  if (rounds_since_harvest_ < ladder_.swaps_between_harvests)
    throw std::invalid_argument("harvest: only " + std::to_string(rounds_since_harvest_) +
                                " rounds since last harvest, need " +
                                std::to_string(ladder_.swaps_between_harvests));
  const int b = batch();
  const int coldest = n_levels() - 1;

  std::vector<MixedState> out(static_cast<size_t>(b));
  std::vector<char> keep(static_cast<size_t>(b), 0);
  parallel_for(b, threads, [&](int s) {
    Replica& r = at(coldest, s);
    if (r.dead) return;
    const ChainResult cr =
        relax(r.state, energy, ladder_.relax_steps, ladder_.relax_eta, cfg, mask_);
    r.nfe += cr.nfe;
    if (cr.diverged || !is_valid(cr.state)) return;
    out[static_cast<size_t>(s)] = cr.state;
    keep[static_cast<size_t>(s)] = 1;
  });

  std::vector<MixedState> harvested;
  harvested.reserve(static_cast<size_t>(b));
  for (int s = 0; s < b; ++s) {
    if (keep[static_cast<size_t>(s)]) {
      harvested.push_back(std::move(out[static_cast<size_t>(s)]));
    } else {
      ++dropped_;
    }
    // Refill the slot whether or not the sample survived.
    refresh_replica(coldest, s, energy);
  }
  rounds_since_harvest_ = 0;
  return harvested;
}

std::vector<LabeledCloud> generate(const EnergyFn& energy, int count, const Ladder& ladder,
                                   const SamplerConfig& cfg, const ReplicaFactory& factory,
                                   std::uint64_t seed, GenerationReport* report, int threads,
                                   const AtomMask* mask, std::vector<MixedState>* raw_states) {
  if (count < 1) throw std::invalid_argument("generate: count must be >= 1");
  ladder.check();

  ChainPool pool(ladder, factory, cfg, seed, mask);
  GenerationReport rep;
  rep.requested = count;

  std::vector<LabeledCloud> samples;
  samples.reserve(static_cast<size_t>(count));
  while (rep.produced < count) {
    for (int k = 0; k < ladder.swaps_between_harvests; ++k) pool.round(energy, cfg, threads);
    std::vector<MixedState> batch = pool.harvest(energy, cfg, threads);

    std::vector<double> energies;
    energies.reserve(batch.size());
    for (MixedState& s : batch) {
      if (rep.produced >= count) break;
      energies.push_back(energy.eval(s).total);
      samples.push_back(discretize(s));
      if (raw_states != nullptr) raw_states->push_back(std::move(s));
      ++rep.produced;
    }
    if (!energies.empty()) rep.harvest_median_energy.push_back(median_of(energies));
  }
  rep.nfe = pool.total_nfe();
  rep.diverged = pool.diverged_count();
  if (report != nullptr) *report = rep;
  return samples;
}

ReplicaFactory prior_factory(const PriorSpec& prior, const Dataset& data, int n_types) {
  prior.check();
  if (data.empty()) throw config_error("generate: dataset is empty (needed for atom counts)");
  return [&prior, &data, n_types](RandomStream& rng) {
    const int n = data.sample_size(rng);
    return sample_prior(prior, n, n_types, rng);
  };
}

}  // namespace ebm
