//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ebm/config.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "ebm/errors.hpp"
#include "ebm/xyz.hpp"

namespace ebm {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

struct KvDoc {
  // section -> key -> value; insertion order is irrelevant, keys are unique.
  std::map<std::string, std::map<std::string, std::string>> sections;
  std::string origin;
};

KvDoc parse_kv(const std::string& text, const std::string& origin) {
  KvDoc doc;
  doc.origin = origin;
  std::istringstream in(text);
  std::string line, section;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw parse_error(origin + ":" + std::to_string(lineno) + ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw parse_error(origin + ":" + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw parse_error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw parse_error(origin + ":" + std::to_string(lineno) + ": empty key");
    auto& sec = doc.sections[section];
    if (sec.count(key))
      throw config_error(origin + ": duplicate key " + (section.empty() ? key : section + "." + key));
    sec[key] = value;
  }
  return doc;
}

class Reader {
 public:
  explicit Reader(const KvDoc& doc) : doc_(doc) {}

  bool has(const std::string& sec, const std::string& key) const {
    const auto s = doc_.sections.find(sec);
    return s != doc_.sections.end() && s->second.count(key) > 0;
  }

  std::string raw(const std::string& sec, const std::string& key) {
    consumed_[sec].insert(key);
    return doc_.sections.at(sec).at(key);
  }

  void get(const std::string& sec, const std::string& key, std::string& out) {
    if (has(sec, key)) out = raw(sec, key);
  }
  void get(const std::string& sec, const std::string& key, double& out) {
    if (!has(sec, key)) return;
    const std::string v = raw(sec, key);
    try {
      size_t pos = 0;
      out = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw config_error(path(sec, key) + ": expected a number, got '" + v + "'");
    }
  }
  void get(const std::string& sec, const std::string& key, int& out) {
    if (!has(sec, key)) return;
    const std::string v = raw(sec, key);
    try {
      size_t pos = 0;
      const long parsed = std::stol(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      out = static_cast<int>(parsed);
    } catch (const std::exception&) {
      throw config_error(path(sec, key) + ": expected an integer, got '" + v + "'");
    }
  }
  void get(const std::string& sec, const std::string& key, std::uint64_t& out) {
    if (!has(sec, key)) return;
    const std::string v = raw(sec, key);
    try {
      size_t pos = 0;
      out = std::stoull(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
    } catch (const std::exception&) {
      throw config_error(path(sec, key) + ": expected an unsigned integer, got '" + v + "'");
    }
  }
  void get(const std::string& sec, const std::string& key, bool& out) {
    if (!has(sec, key)) return;
    const std::string v = raw(sec, key);
    if (v == "true" || v == "1") {
      out = true;
    } else if (v == "false" || v == "0") {
      out = false;
    } else {
      throw config_error(path(sec, key) + ": expected true/false, got '" + v + "'");
    }
  }
  void get(const std::string& sec, const std::string& key, std::vector<std::string>& out) {
    if (!has(sec, key)) return;
    out.clear();
    std::istringstream ss(raw(sec, key));
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) out.push_back(item);
    }
  }

  static std::string path(const std::string& sec, const std::string& key) {
    return sec.empty() ? key : sec + "." + key;
  }

  /// Every key present in the document must have been consumed.
  void reject_unknown() const {
    for (const auto& [sec, kv] : doc_.sections) {
      const auto it = consumed_.find(sec);
      for (const auto& [key, value] : kv) {
        if (it == consumed_.end() || !it->second.count(key))
          throw config_error(doc_.origin + ": unknown key " + path(sec, key));
      }
    }
  }

 private:
  const KvDoc& doc_;
  std::map<std::string, std::set<std::string>> consumed_;
};

template <typename T>
void require_in(const std::string& key, const T& value, const std::vector<T>& allowed) {
  for (const T& a : allowed)
    if (value == a) return;
  std::string opts;
  for (const T& a : allowed) opts += (opts.empty() ? "" : " | ") + a;
  throw config_error(key + ": must be one of " + opts + ", got '" + value + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
  const KvDoc doc = parse_kv(text, origin);
  Reader r(doc);
  RunConfig c;

  r.get("", "seed", c.seed);

  r.get("dataset", "templates", c.dataset_templates);
  r.get("dataset", "n_types", c.n_types);
  r.get("dataset", "jitter", c.jitter);
  r.get("dataset", "count", c.dataset_count);
  r.get("dataset", "path", c.dataset_path);
  r.get("dataset", "prior", c.prior_kind);
  r.get("dataset", "prior_sigma", c.prior_sigma);

  r.get("model", "layers", c.model_layers);
  r.get("model", "embed_dim", c.embed_dim);
  r.get("model", "coord_updates", c.coord_updates);
  r.get("model", "activation", c.activation);

  r.get("objective", "kind", c.objective_kind);
  r.get("objective", "gamma", c.gamma);
  r.get("objective", "lambda_reg", c.lambda_reg);
  r.get("objective", "steps", c.train_steps);
  r.get("objective", "batch_size", c.batch_size);
  r.get("objective", "lr", c.lr);
  r.get("objective", "lr_schedule", c.lr_schedule);
  r.get("objective", "clip_norm", c.clip_norm);
  r.get("objective", "ema_decay", c.ema_decay);

  r.get("sampler", "eta", c.eta);
  r.get("sampler", "sigma_c", c.sigma_c);
  r.get("sampler", "sigma_p", c.sigma_p);
  r.get("sampler", "eps", c.simplex_eps);
  r.get("sampler", "grad_clip", c.grad_clip);
  r.get("sampler", "divergence_factor", c.divergence_factor);
  r.get("sampler", "divergence_floor", c.divergence_floor);
  r.get("sampler", "ald_steps", c.ald_steps);
  r.get("sampler", "ald_tau_max", c.ald_tau_max);
  r.get("sampler", "ald_tau_min", c.ald_tau_min);
  r.get("sampler", "relax_steps", c.relax_steps);
  r.get("sampler", "relax_eta", c.relax_eta);

  r.get("ladder", "levels", c.ladder_levels);
  r.get("ladder", "tau_max", c.tau_max);
  r.get("ladder", "tau_min", c.tau_min);
  r.get("ladder", "batch_per_level", c.batch_per_level);
  r.get("ladder", "steps_between_swaps", c.steps_between_swaps);
  r.get("ladder", "swaps_between_harvests", c.swaps_between_harvests);
  r.get("ladder", "criterion", c.swap_criterion);

  r.get("steering", "kind", c.steer_kind);
  r.get("steering", "weight", c.steer_weight);

  r.get("inpaint", "task", c.inpaint_task);
  r.get("inpaint", "iterations", c.inpaint_iterations);
  r.get("inpaint", "attempts", c.inpaint_attempts);
  r.get("inpaint", "connect_threshold", c.connect_threshold);

  r.get("eval", "relax_steps", c.eval_relax_steps);
  r.get("eval", "relax_eta", c.eval_relax_eta);
  r.get("eval", "n_molecules", c.eval_molecules);
  r.get("eval", "noise_draws", c.eval_noise_draws);
  r.get("eval", "sigma_max", c.eval_sigma_max);
  r.get("eval", "sigma_points", c.eval_sigma_points);
  r.get("eval", "t_points", c.eval_t_points);
  r.get("eval", "w2_lo", c.w2_lo);
  r.get("eval", "w2_hi", c.w2_hi);

  r.reject_unknown();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw io_error("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

void RunConfig::validate() const {
  if (dataset_path.empty() && dataset_templates.empty())
    throw config_error("dataset.path: no dataset source (set dataset.path or dataset.templates)");
  if (!dataset_path.empty() && !std::filesystem::exists(dataset_path))
    throw config_error("dataset.path: file not found: " + dataset_path);
  if (n_types < 1) throw config_error("dataset.n_types: must be >= 1");
  if (jitter < 0.0) throw config_error("dataset.jitter: must be >= 0");
  if (dataset_count < 1) throw config_error("dataset.count: must be >= 1");
  require_in<std::string>("dataset.prior", prior_kind, {"isotropic", "pca_matched"});
  if (prior_sigma < 0.0) throw config_error("dataset.prior_sigma: must be >= 0");

  if (model_layers < 1) throw config_error("model.layers: must be >= 1");
  if (embed_dim < 1) throw config_error("model.embed_dim: must be >= 1");
  if (activation == "relu")
    throw config_error("model.activation: relu is not twice differentiable; use silu or tanh");
  require_in<std::string>("model.activation", activation, {"silu", "tanh"});

  require_in<std::string>("objective.kind", objective_kind, {"rfm", "otfm", "plainfm"});
  if (!(gamma > 0.0)) throw config_error("objective.gamma: must be > 0");
  if (lambda_reg < 0.0) throw config_error("objective.lambda_reg: must be >= 0");
  if (train_steps < 0) throw config_error("objective.steps: must be >= 0");
  if (batch_size < 1) throw config_error("objective.batch_size: must be >= 1");
  if (!(lr > 0.0)) throw config_error("objective.lr: must be > 0");
  require_in<std::string>("objective.lr_schedule", lr_schedule, {"linear", "constant"});
  if (ema_decay < 0.0 || ema_decay > 1.0)
    throw config_error("objective.ema_decay: must be in [0, 1]");

  if (eta < 0.0) throw config_error("sampler.eta: must be >= 0");
  if (sigma_c < 0.0) throw config_error("sampler.sigma_c: must be >= 0");
  if (sigma_p < 0.0) throw config_error("sampler.sigma_p: must be >= 0");
  if (!(simplex_eps > 0.0) || !(simplex_eps * n_types < 1.0))
    throw config_error("sampler.eps: must satisfy 0 < eps < 1/K");
  if (!(divergence_factor > 0.0)) throw config_error("sampler.divergence_factor: must be > 0");
  if (ald_steps < 1) throw config_error("sampler.ald_steps: must be >= 1");
  if (!(ald_tau_max > 0.0) || !(ald_tau_min > 0.0) || ald_tau_min > ald_tau_max)
    throw config_error("sampler.ald_tau_min: need ald_tau_max >= ald_tau_min > 0");
  if (relax_steps < 0) throw config_error("sampler.relax_steps: must be >= 0");
  if (!(relax_eta > 0.0)) throw config_error("sampler.relax_eta: must be > 0");

  if (ladder_levels < 1) throw config_error("ladder.levels: must be >= 1");
  if (ladder_levels > 1 && (!(tau_min > 0.0) || !(tau_max > tau_min)))
    throw config_error("ladder.tau_min: need tau_max > tau_min > 0");
  if (batch_per_level < 1) throw config_error("ladder.batch_per_level: must be >= 1");
  if (steps_between_swaps < 1) throw config_error("ladder.steps_between_swaps: must be >= 1");
  if (swaps_between_harvests < 1)
    throw config_error("ladder.swaps_between_harvests: must be >= 1");
  require_in<std::string>("ladder.criterion", swap_criterion, {"atom_max", "atom_avg", "total"});

  require_in<std::string>("steering.kind", steer_kind, {"linear", "disk", "sphere"});
  if (!(steer_weight >= 0.0)) throw config_error("steering.weight: must be >= 0");

  if (inpaint_iterations < 0) throw config_error("inpaint.iterations: must be >= 0");
  if (inpaint_attempts < 1) throw config_error("inpaint.attempts: must be >= 1");
  if (!(connect_threshold > 0.0)) throw config_error("inpaint.connect_threshold: must be > 0");

  if (eval_relax_steps < 0) throw config_error("eval.relax_steps: must be >= 0");
  if (!(eval_relax_eta > 0.0)) throw config_error("eval.relax_eta: must be > 0");
  if (eval_molecules < 1) throw config_error("eval.n_molecules: must be >= 1");
  if (eval_noise_draws < 1) throw config_error("eval.noise_draws: must be >= 1");
  if (!(eval_sigma_max > 0.0)) throw config_error("eval.sigma_max: must be > 0");
  if (eval_sigma_points < 2) throw config_error("eval.sigma_points: must be >= 2");
  if (eval_t_points < 3) throw config_error("eval.t_points: must be >= 3");
  if (!(w2_lo < w2_hi)) throw config_error("eval.w2_lo: need w2_lo < w2_hi");

  // Template labels must fit the configured K (checked by construction).
  if (dataset_path.empty())
    for (const std::string& name : dataset_templates) make_template(name, n_types);
}

ObjectiveKind RunConfig::objective() const {
  if (objective_kind == "rfm") return ObjectiveKind::kRfm;
  if (objective_kind == "otfm") return ObjectiveKind::kOtfm;
  return ObjectiveKind::kPlainFm;
}

ObjectiveConfig RunConfig::objective_config() const {
  ObjectiveConfig oc;
  oc.kind = objective();
  oc.gamma = gamma;
  oc.lambda_reg = lambda_reg;
  return oc;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig tc;
  tc.steps = train_steps;
  tc.batch_size = batch_size;
  tc.lr = lr;
  tc.schedule = lr_schedule == "linear" ? LrSchedule::kLinear : LrSchedule::kConstant;
  tc.clip_norm = clip_norm;
  tc.ema_decay = ema_decay;
  return tc;
}

EnergyModelConfig RunConfig::model_config() const {
  EnergyModelConfig mc;
  mc.n_layers = model_layers;
  mc.embed_dim = embed_dim;
  mc.n_types = n_types;
  mc.coord_updates = coord_updates;
  mc.activation = activation == "silu" ? ad::Fn::kSilu : ad::Fn::kTanh;
  return mc;
}

SamplerConfig RunConfig::sampler_config() const {
  SamplerConfig sc;
  sc.eta = eta;
  sc.sigma_c = sigma_c;
  sc.sigma_p = sigma_p;
  sc.eps = simplex_eps;
  sc.grad_clip = grad_clip;
  sc.divergence_factor = divergence_factor;
  sc.divergence_floor = divergence_floor;
  return sc;
}

Ladder RunConfig::ladder() const {
  Ladder l;
  l.taus = geometric_ladder(tau_max, tau_min, ladder_levels);
  l.batch_per_level = batch_per_level;
  l.steps_between_swaps = steps_between_swaps;
  l.swaps_between_harvests = swaps_between_harvests;
  l.criterion = swap_criterion == "atom_max"
                    ? SwapCriterion::kAtomMax
                    : (swap_criterion == "atom_avg" ? SwapCriterion::kAtomAvg
                                                    : SwapCriterion::kTotal);
  l.relax_steps = relax_steps;
  l.relax_eta = relax_eta;
  return l;
}

ShapePotential RunConfig::shape_potential() const {
  ShapePotential p;
  p.kind = steer_kind == "linear"
               ? ShapePotential::Kind::kLinear
               : (steer_kind == "disk" ? ShapePotential::Kind::kDisk
                                       : ShapePotential::Kind::kSphere);
  p.weight = steer_weight;
  return p;
}

PriorSpec RunConfig::prior_spec(const Dataset& data) const {
  PriorSpec p;
  if (prior_kind == "isotropic") {
    p.position = PriorSpec::Position::kIsotropic;
    p.sigma = prior_sigma;
  } else {
    p.position = PriorSpec::Position::kPcaMatched;
    p.dataset = &data;
  }
  return p;
}

Dataset RunConfig::build_dataset() const {
  if (!dataset_path.empty()) {
    std::vector<MixedState> mols = load_xyz(dataset_path, n_types);
    for (MixedState& m : mols) m = center(m);
    return Dataset(std::move(mols));
  }
  ToyDatasetConfig tc;
  tc.templates = dataset_templates;
  tc.n_types = n_types;
  tc.jitter = jitter;
  RandomStream rng(seed, /*stream=*/100);  // dataset stream
  return generate_toy_dataset(tc, dataset_count, rng);
}

void RunConfig::write(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw io_error("cannot write " + path);
  out << "seed = " << seed << "\n\n";
  out << "[dataset]\n";
  out << "templates = ";
  for (size_t i = 0; i < dataset_templates.size(); ++i)
    out << (i ? "," : "") << dataset_templates[i];
  out << "\n";
  out << "n_types = " << n_types << "\n";
  out << "jitter = " << fmt(jitter) << "\n";
  out << "count = " << dataset_count << "\n";
  if (!dataset_path.empty()) out << "path = " << dataset_path << "\n";
  out << "prior = " << prior_kind << "\n";
  out << "prior_sigma = " << fmt(prior_sigma) << "\n";
  out << "\n[model]\n";
  out << "layers = " << model_layers << "\n";
  out << "embed_dim = " << embed_dim << "\n";
  out << "coord_updates = " << (coord_updates ? "true" : "false") << "\n";
  out << "activation = " << activation << "\n";
  out << "\n[objective]\n";
  out << "kind = " << objective_kind << "\n";
  out << "gamma = " << fmt(gamma) << "\n";
  out << "lambda_reg = " << fmt(lambda_reg) << "\n";
  out << "steps = " << train_steps << "\n";
  out << "batch_size = " << batch_size << "\n";
  out << "lr = " << fmt(lr) << "\n";
  out << "lr_schedule = " << lr_schedule << "\n";
  out << "clip_norm = " << fmt(clip_norm) << "\n";
  out << "ema_decay = " << fmt(ema_decay) << "\n";
  out << "\n[sampler]\n";
  out << "eta = " << fmt(eta) << "\n";
  out << "sigma_c = " << fmt(sigma_c) << "\n";
  out << "sigma_p = " << fmt(sigma_p) << "\n";
  out << "eps = " << fmt(simplex_eps) << "\n";
  out << "grad_clip = " << fmt(grad_clip) << "\n";
  out << "divergence_factor = " << fmt(divergence_factor) << "\n";
  out << "divergence_floor = " << fmt(divergence_floor) << "\n";
  out << "ald_steps = " << ald_steps << "\n";
  out << "ald_tau_max = " << fmt(ald_tau_max) << "\n";
  out << "ald_tau_min = " << fmt(ald_tau_min) << "\n";
  out << "relax_steps = " << relax_steps << "\n";
  out << "relax_eta = " << fmt(relax_eta) << "\n";
  out << "\n[ladder]\n";
  out << "levels = " << ladder_levels << "\n";
  out << "tau_max = " << fmt(tau_max) << "\n";
  out << "tau_min = " << fmt(tau_min) << "\n";
  out << "batch_per_level = " << batch_per_level << "\n";
  out << "steps_between_swaps = " << steps_between_swaps << "\n";
  out << "swaps_between_harvests = " << swaps_between_harvests << "\n";
  out << "criterion = " << swap_criterion << "\n";
  out << "\n[steering]\n";
  out << "kind = " << steer_kind << "\n";
  out << "weight = " << fmt(steer_weight) << "\n";
  out << "\n[inpaint]\n";
  if (!inpaint_task.empty()) out << "task = " << inpaint_task << "\n";
  out << "iterations = " << inpaint_iterations << "\n";
  out << "attempts = " << inpaint_attempts << "\n";
  out << "connect_threshold = " << fmt(connect_threshold) << "\n";
  out << "\n[eval]\n";
  out << "relax_steps = " << eval_relax_steps << "\n";
  out << "relax_eta = " << fmt(eval_relax_eta) << "\n";
  out << "n_molecules = " << eval_molecules << "\n";
  out << "noise_draws = " << eval_noise_draws << "\n";
  out << "sigma_max = " << fmt(eval_sigma_max) << "\n";
  out << "sigma_points = " << eval_sigma_points << "\n";
  out << "t_points = " << eval_t_points << "\n";
  out << "w2_lo = " << fmt(w2_lo) << "\n";
  out << "w2_hi = " << fmt(w2_hi) << "\n";
  if (!out) throw io_error("failed writing " + path);
}

}  // namespace ebm
