//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "ebm/config.hpp"
#include "ebm/errors.hpp"
#include "ebm/eval.hpp"
#include "ebm/util.hpp"
#include "ebm/xyz.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw ebm::io_error("cannot create output directory " + dir);
}

std::string default_out() {
  const char* env = std::getenv("EBMGEN_OUT");
  return env != nullptr ? env : "out";
}

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw ebm::io_error("cannot write " + path);
  return f;
}

ebm::Checkpoint load_matching_checkpoint(const std::string& path, const ebm::RunConfig& cfg) {
  ebm::Checkpoint ck = ebm::load_checkpoint(path);
  if (ck.raw.config().n_types != cfg.n_types)
    throw ebm::config_error("dataset.n_types: config has K=" + std::to_string(cfg.n_types) +
                            " but checkpoint was trained with K=" +
                            std::to_string(ck.raw.config().n_types));
  return ck;
}

void write_generation_report(const std::string& dir, const ebm::GenerationReport& rep,
                             const std::string& sampler) {
  auto csv = open_out(dir + "/report.csv");
  csv << "harvest,median_energy\n";
  for (size_t i = 0; i < rep.harvest_median_energy.size(); ++i)
    csv << i << "," << num(rep.harvest_median_energy[i]) << "\n";

  json j;
  j["sampler"] = sampler;
  j["requested"] = rep.requested;
  j["produced"] = rep.produced;
  j["nfe"] = rep.nfe;
  j["diverged"] = rep.diverged;
  j["dropped"] = rep.dropped;
  j["harvest_median_energy"] = rep.harvest_median_energy;
  open_out(dir + "/report.json") << j.dump(2) << "\n";
}

// --------------------------------------------------------------------------
// train
// --------------------------------------------------------------------------

int cmd_train(const std::string& config_path, const std::string& out_dir, int steps_override) {
  ebm::RunConfig cfg = ebm::load_config(config_path);
  if (steps_override >= 0) cfg.train_steps = steps_override;
  ensure_dir(out_dir);

  const ebm::Dataset data = cfg.build_dataset();
  const ebm::PriorSpec prior = cfg.prior_spec(data);
  ebm::RandomStream init_rng(cfg.seed, 1);
  const ebm::EnergyModel initial = ebm::EnergyModel::init(cfg.model_config(), init_rng);
  ebm::RandomStream train_rng(cfg.seed, 2);
  const ebm::TrainResult res =
      ebm::train(initial, data, prior, cfg.objective_config(), cfg.train_config(), train_rng);

  ebm::save_checkpoint(out_dir + "/checkpoint.bin", {res.model, res.ema});
  auto csv = open_out(out_dir + "/loss.csv");
  csv << "step,l_rfm,l_reg,total,grad_norm\n";
  for (const ebm::TrainRecord& r : res.history)
    csv << r.step << "," << num(r.l_rfm) << "," << num(r.l_reg) << "," << num(r.total) << ","
        << num(r.grad_norm) << "\n";
  cfg.write(out_dir + "/resolved.cfg");
  std::cout << "trained " << res.history.size() << " steps -> " << out_dir << "\n";
  return 0;
}

// --------------------------------------------------------------------------
// sample (pt | ald | fwde)
// --------------------------------------------------------------------------

int cmd_sample(const std::string& config_path, const std::string& ck_path, int count,
               const std::string& out_dir, bool use_raw, const std::string& sampler,
               int swaps_override, int threads, bool trace) {
  ebm::RunConfig cfg = ebm::load_config(config_path);
  if (swaps_override > 0) cfg.swaps_between_harvests = swaps_override;
  ensure_dir(out_dir);

  const ebm::Checkpoint ck = load_matching_checkpoint(ck_path, cfg);
  const ebm::EnergyModel& model = use_raw ? ck.raw : ck.ema;
  const ebm::ModelEnergy energy(model);

  const ebm::Dataset data = cfg.build_dataset();
  const ebm::PriorSpec prior = cfg.prior_spec(data);
  const ebm::ReplicaFactory factory = ebm::prior_factory(prior, data, cfg.n_types);
  const ebm::SamplerConfig sc = cfg.sampler_config();

  std::vector<ebm::LabeledCloud> samples;
  ebm::GenerationReport rep;
  rep.requested = count;

  if (sampler == "pt") {
    samples = ebm::generate(energy, count, cfg.ladder(), sc, factory, cfg.seed + 10,
                            &rep, threads);
  } else {
    // Independent annealed (or deterministic) chains, one per sample slot.
    const bool deterministic = sampler == "fwde";
    std::vector<double> schedule;
    if (!deterministic)
      schedule = ebm::geometric_schedule(cfg.ald_tau_max, cfg.ald_tau_min, cfg.ald_steps);
    long long attempt = 0;
    while (static_cast<int>(samples.size()) < count) {
      const int want = count - static_cast<int>(samples.size());
      std::vector<ebm::ChainResult> results(static_cast<size_t>(want));
      std::vector<long long> ids(static_cast<size_t>(want));
      for (int i = 0; i < want; ++i) ids[static_cast<size_t>(i)] = attempt++;
      ebm::parallel_for(want, threads, [&](int i) {
        ebm::RandomStream rng(cfg.seed + 10, static_cast<std::uint64_t>(ids[static_cast<size_t>(i)]));
        const ebm::MixedState start = factory(rng);
        ebm::ChainResult cr;
        if (deterministic) {
          cr = ebm::fwde_run(start, energy, cfg.ald_steps, cfg.eta, sc, nullptr, trace && i == 0);
        } else {
          cr = ebm::ald_run(start, energy, schedule, sc, rng, nullptr, trace && i == 0);
        }
        const long nfe0 = cr.nfe;
        if (!cr.diverged) {
          const ebm::ChainResult rl = ebm::relax(cr.state, energy, cfg.relax_steps,
                                                 cfg.relax_eta, sc);
          cr.state = rl.state;
          cr.diverged = rl.diverged;
          cr.nfe = nfe0 + rl.nfe;
        }
        results[static_cast<size_t>(i)] = std::move(cr);
      });
      for (auto& cr : results) {
        rep.nfe += cr.nfe;
        if (cr.diverged || !ebm::is_valid(cr.state)) {
          ++rep.diverged;
          continue;
        }
        if (static_cast<int>(samples.size()) < count) samples.push_back(ebm::discretize(cr.state));
        if (trace && !cr.trace.empty()) {
          auto tcsv = open_out(out_dir + "/trace.csv");
          tcsv << "step,energy,grad_norm_c,grad_norm_p,diverged\n";
          for (size_t s = 0; s < cr.trace.size(); ++s)
            tcsv << s << "," << num(cr.trace[s].energy_before) << ","
                 << num(cr.trace[s].grad_norm_c) << "," << num(cr.trace[s].grad_norm_p) << ","
                 << (cr.trace[s].diverged ? 1 : 0) << "\n";
          trace = false;
        }
      }
    }
    rep.produced = static_cast<int>(samples.size());
  }

  ebm::save_xyz(samples, cfg.n_types, out_dir + "/samples.xyz");
  write_generation_report(out_dir, rep, sampler);
  cfg.write(out_dir + "/resolved.cfg");
  std::cout << "sampled " << samples.size() << " molecules (" << rep.nfe << " NFE) -> " << out_dir
            << "\n";
  return 0;
}

// --------------------------------------------------------------------------
// steer
// --------------------------------------------------------------------------

int cmd_steer(const std::string& config_path, const std::string& ck_path,
              const std::string& shape, double weight, int count, const std::string& out_dir,
              bool use_raw, int threads) {
  ebm::RunConfig cfg = ebm::load_config(config_path);
  if (!shape.empty()) cfg.steer_kind = shape;
  if (weight >= 0.0) cfg.steer_weight = weight;
  cfg.validate();
  ensure_dir(out_dir);

  const ebm::Checkpoint ck = load_matching_checkpoint(ck_path, cfg);
  const ebm::ModelEnergy energy(use_raw ? ck.raw : ck.ema);
  const ebm::Dataset data = cfg.build_dataset();
  const ebm::PriorSpec prior = cfg.prior_spec(data);
  const ebm::ReplicaFactory factory = ebm::prior_factory(prior, data, cfg.n_types);

  ebm::GenerationReport rep;
  std::vector<ebm::ShapeStats> stats;
  const std::vector<ebm::LabeledCloud> samples =
      ebm::steered_generate(energy, cfg.shape_potential(), count, cfg.ladder(),
                            cfg.sampler_config(), factory, cfg.seed + 10, &rep, &stats, threads);

  ebm::save_xyz(samples, cfg.n_types, out_dir + "/samples.xyz");
  auto csv = open_out(out_dir + "/shape_stats.csv");
  csv << "sample,lambda1,lambda2,lambda3,u_lin,u_disk,u_sphere\n";
  for (size_t i = 0; i < stats.size(); ++i)
    csv << i << "," << num(stats[i].l1) << "," << num(stats[i].l2) << "," << num(stats[i].l3)
        << "," << num(stats[i].u_lin) << "," << num(stats[i].u_disk) << ","
        << num(stats[i].u_sphere) << "\n";
  write_generation_report(out_dir, rep, "pt+steer");
  cfg.write(out_dir + "/resolved.cfg");
  std::cout << "steered " << samples.size() << " samples (" << cfg.steer_kind
            << ", w=" << num(cfg.steer_weight) << ") -> " << out_dir << "\n";
  return 0;
}

// --------------------------------------------------------------------------
// inpaint
// --------------------------------------------------------------------------

ebm::InpaintTask load_task(const std::string& path, int n_types) {
  const std::vector<ebm::MixedState> states = ebm::load_xyz(path, n_types);
  ebm::InpaintTask task;
  task.base = states.front();
  task.mask.fixed.assign(static_cast<size_t>(task.base.n_atoms()), 0);
  const std::string comment = ebm::read_first_comment(path);
  const auto pos = comment.find("frozen=");
  if (pos == std::string::npos)
    throw ebm::parse_error(path + ": task comment line must carry 'frozen=i,j,...'");
  std::istringstream ss(comment.substr(pos + 7));
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const int i = std::stoi(tok);
    if (i < 0 || i >= task.base.n_atoms())
      throw ebm::parse_error(path + ": frozen index " + tok + " out of range");
    task.mask.fixed[static_cast<size_t>(i)] = 1;
  }
  return task;
}

int cmd_inpaint(const std::string& config_path, const std::string& ck_path,
                const std::string& task_path, int attempts, int iterations, bool baseline,
                const std::string& out_dir, bool use_raw, int threads) {
  ebm::RunConfig cfg = ebm::load_config(config_path);
  if (!task_path.empty()) cfg.inpaint_task = task_path;
  if (attempts > 0) cfg.inpaint_attempts = attempts;
  if (iterations >= 0) cfg.inpaint_iterations = iterations;
  if (cfg.inpaint_task.empty())
    throw ebm::config_error("inpaint.task: no task file given");
  ensure_dir(out_dir);

  const ebm::Checkpoint ck = load_matching_checkpoint(ck_path, cfg);
  const ebm::ModelEnergy energy(use_raw ? ck.raw : ck.ema);
  const ebm::InpaintTask task = load_task(cfg.inpaint_task, cfg.n_types);
  ebm::ContactTable contacts;
  contacts.default_threshold = cfg.connect_threshold;

  const int iters = baseline ? 0 : cfg.inpaint_iterations;
  const ebm::InpaintReport rep = ebm::inpaint(energy, task, cfg.inpaint_attempts, iters,
                                              cfg.ladder(), cfg.sampler_config(), contacts,
                                              cfg.seed + 20, threads);

  std::vector<ebm::LabeledCloud> clouds;
  auto csv = open_out(out_dir + "/success.csv");
  csv << "attempt,connected,energy,nfe\n";
  for (size_t i = 0; i < rep.attempts.size(); ++i) {
    const ebm::InpaintAttempt& a = rep.attempts[i];
    csv << i << "," << (a.connected ? 1 : 0) << "," << num(a.energy) << "," << a.nfe << "\n";
    if (a.sample.n_atoms() > 0) clouds.push_back(a.sample);
  }
  ebm::save_xyz(clouds, cfg.n_types, out_dir + "/completions.xyz");
  json j;
  j["attempts"] = rep.attempts.size();
  j["successes"] = rep.successes;
  j["success_rate"] = rep.success_rate;
  j["nfe"] = rep.nfe;
  j["iterations"] = iters;
  j["connectivity_proxy"] =
      "single connected component under distance-threshold adjacency (not a chemical validity check)";
  open_out(out_dir + "/summary.json") << j.dump(2) << "\n";
  cfg.write(out_dir + "/resolved.cfg");
  std::cout << "inpaint success " << rep.successes << "/" << rep.attempts.size() << " -> "
            << out_dir << "\n";
  return 0;
}

// --------------------------------------------------------------------------
// eval
// --------------------------------------------------------------------------

int cmd_eval(const std::string& config_path, const std::string& ck_path, const std::string& suite,
             const std::string& samples_path, const std::string& out_dir, bool use_raw,
             int threads) {
  ebm::RunConfig cfg = ebm::load_config(config_path);
  ensure_dir(out_dir);
  const ebm::Checkpoint ck = load_matching_checkpoint(ck_path, cfg);
  const ebm::ModelEnergy energy(use_raw ? ck.raw : ck.ema);
  const ebm::Dataset data = cfg.build_dataset();

  if (suite == "landscape") {
    const ebm::RelaxationReport rr =
        ebm::relaxation_test(energy, data, cfg.eval_relax_steps, cfg.eval_relax_eta,
                             cfg.sampler_config(), threads);
    auto rcsv = open_out(out_dir + "/relaxation.csv");
    rcsv << "molecule,e_before,e_after,delta_e,delta_e_per_atom,rmsd,diverged\n";
    for (size_t i = 0; i < rr.rows.size(); ++i) {
      const ebm::RelaxationRow& r = rr.rows[i];
      rcsv << i << "," << num(r.e_before) << "," << num(r.e_after) << "," << num(r.delta_e) << ","
           << num(r.delta_e_per_atom) << "," << num(r.rmsd) << "," << (r.diverged ? 1 : 0)
           << "\n";
    }

    const ebm::PriorSpec prior = cfg.prior_spec(data);
    std::vector<double> t_grid;
    for (int i = 0; i < cfg.eval_t_points; ++i)
      t_grid.push_back(-1.0 + 2.0 * i / (cfg.eval_t_points - 1));
    ebm::RandomStream prof_rng(cfg.seed, 30);
    const auto profile = ebm::gradient_profile(energy, data, prior, t_grid, cfg.eval_molecules,
                                               prof_rng, threads);
    auto pcsv = open_out(out_dir + "/gradient_profile.csv");
    pcsv << "t,grad_mean,grad_std,cos_mean,cos_std,n,cos_excluded\n";
    for (const ebm::ProfilePoint& p : profile)
      pcsv << num(p.t) << "," << num(p.grad_mean) << "," << num(p.grad_std) << ","
           << num(p.cos_mean) << "," << num(p.cos_std) << "," << p.n << "," << p.cos_excluded
           << "\n";

    std::vector<double> sigma_grid;
    for (int i = 0; i < cfg.eval_sigma_points; ++i)
      sigma_grid.push_back(cfg.eval_sigma_max * i / (cfg.eval_sigma_points - 1));
    ebm::RandomStream noise_rng(cfg.seed, 31);
    const auto curve = ebm::energy_vs_noise(energy, data, sigma_grid, cfg.eval_molecules,
                                            cfg.eval_noise_draws, noise_rng, threads);
    auto ncsv = open_out(out_dir + "/energy_vs_noise.csv");
    ncsv << "sigma,e_mean,e_std,n\n";
    for (const ebm::NoisePoint& p : curve)
      ncsv << num(p.sigma) << "," << num(p.e_mean) << "," << num(p.e_std) << "," << p.n << "\n";

    json j;
    j["median_delta_e"] = rr.median_delta_e;
    j["median_delta_e_per_atom"] = rr.median_delta_e_per_atom;
    j["mean_rmsd"] = rr.mean_rmsd;
    j["relaxations_diverged"] = rr.diverged;
    j["n_molecules"] = rr.rows.size();
    open_out(out_dir + "/landscape.json") << j.dump(2) << "\n";
  } else if (suite == "metrics") {
    if (samples_path.empty())
      throw ebm::config_error("eval: --samples FILE is required for the metrics suite");
    const std::vector<ebm::MixedState> sampled = ebm::load_xyz(samples_path, cfg.n_types);
    std::vector<ebm::LabeledCloud> gen, ref;
    for (const auto& s : sampled) gen.push_back(ebm::discretize(s));
    for (const auto& s : data.molecules()) ref.push_back(ebm::discretize(s));
    const double w2 = ebm::w2_pairwise_distance(gen, ref, cfg.w2_lo, cfg.w2_hi);
    const double uniq = ebm::uniqueness_proxy(gen);
    auto mcsv = open_out(out_dir + "/metrics.csv");
    mcsv << "metric,value,note\n";
    mcsv << "w2_pairwise_distance," << num(w2) << ",band [" << num(cfg.w2_lo) << ";"
         << num(cfg.w2_hi) << "]\n";
    mcsv << "uniqueness_proxy," << num(uniq)
         << ",distance-multiset key (proxy; not a chemical uniqueness check)\n";
  } else {
    throw ebm::config_error("eval: unknown suite '" + suite + "' (landscape | metrics)");
  }
  cfg.write(out_dir + "/resolved.cfg");
  std::cout << "eval suite " << suite << " -> " << out_dir << "\n";
  return 0;
}

// --------------------------------------------------------------------------
// dataset gen / dataset task
// --------------------------------------------------------------------------

int cmd_dataset_gen(const std::string& config_path, const std::string& out_dir) {
  ebm::RunConfig cfg = ebm::load_config(config_path);
  ensure_dir(out_dir);
  const ebm::Dataset data = cfg.build_dataset();
  ebm::save_xyz(data.molecules(), out_dir + "/data.xyz");
  cfg.write(out_dir + "/resolved.cfg");
  std::cout << "wrote " << data.size() << " molecules -> " << out_dir << "/data.xyz\n";
  return 0;
}

int cmd_dataset_task(const std::string& config_path, const std::string& template_name,
                     int free_type, const std::string& out_path) {
  ebm::RunConfig cfg = ebm::load_config(config_path);
  const ebm::Template t = ebm::make_template(template_name, cfg.n_types);
  ebm::MixedState base;
  base.coords = t.coords;
  base.types = Eigen::MatrixXd::Zero(t.n_atoms(), cfg.n_types);
  std::string frozen;
  for (int i = 0; i < t.n_atoms(); ++i) {
    base.types(i, t.labels[static_cast<size_t>(i)]) = 1.0;
    if (t.labels[static_cast<size_t>(i)] != free_type) frozen += (frozen.empty() ? "" : ",") + std::to_string(i);
  }
  if (frozen.empty()) throw ebm::config_error("inpaint.task: every atom would be free");
  ebm::save_xyz({base}, out_path, {"frozen=" + frozen});
  std::cout << "wrote task " << out_path << " (frozen: " << frozen << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Energy-landscape learning and tempered Mirror-Langevin sampling over mixed "
               "continuous/simplex point clouds"};
  app.require_subcommand(1);

  std::string config_path, ck_path, out_dir = default_out();
  std::string sampler = "pt", shape, samples_path, suite = "landscape", task_path, tmpl = "dumbbell";
  int count = 10, steps_override = -1, swaps_override = -1, threads = 1;
  int attempts = -1, iterations = -1, free_type = 2;
  double weight = -1.0;
  bool use_raw = false, baseline = false, trace = false;

  auto* tr = app.add_subcommand("train", "Train the energy model");
  tr->add_option("--config", config_path, "Run config file")->required();
  tr->add_option("--out", out_dir, "Output directory");
  tr->add_option("--steps", steps_override, "Override objective.steps");

  auto* sa = app.add_subcommand("sample", "Generate samples from a checkpoint");
  sa->add_option("--config", config_path)->required();
  sa->add_option("--checkpoint", ck_path)->required();
  sa->add_option("--count", count, "Samples to generate");
  sa->add_option("--out", out_dir);
  sa->add_option("--sampler", sampler, "pt | ald | fwde");
  sa->add_option("--swaps-between-harvests", swaps_override);
  sa->add_option("--threads", threads);
  sa->add_flag("--raw", use_raw, "Use raw instead of EMA parameters");
  sa->add_flag("--trace", trace, "Write a per-step chain log (ald/fwde)");

  auto* st = app.add_subcommand("steer", "Shape-steered generation");
  st->add_option("--config", config_path)->required();
  st->add_option("--checkpoint", ck_path)->required();
  st->add_option("--shape", shape, "linear | disk | sphere");
  st->add_option("--weight", weight, "Steering weight");
  st->add_option("--count", count);
  st->add_option("--out", out_dir);
  st->add_option("--threads", threads);
  st->add_flag("--raw", use_raw);

  auto* ip = app.add_subcommand("inpaint", "Fragment-fixed conditional generation");
  ip->add_option("--config", config_path)->required();
  ip->add_option("--checkpoint", ck_path)->required();
  ip->add_option("--task", task_path, "Task file: XYZ with 'frozen=...' comment");
  ip->add_option("--attempts", attempts);
  ip->add_option("--iterations", iterations);
  ip->add_option("--out", out_dir);
  ip->add_option("--threads", threads);
  ip->add_flag("--baseline", baseline, "Skip sampling: prior init + relax only");
  ip->add_flag("--raw", use_raw);

  auto* ev = app.add_subcommand("eval", "Landscape diagnostics and metrics");
  ev->add_option("--config", config_path)->required();
  ev->add_option("--checkpoint", ck_path)->required();
  ev->add_option("--suite", suite, "landscape | metrics");
  ev->add_option("--samples", samples_path, "Generated samples (metrics suite)");
  ev->add_option("--out", out_dir);
  ev->add_option("--threads", threads);
  ev->add_flag("--raw", use_raw);

  auto* ds = app.add_subcommand("dataset", "Dataset utilities");
  ds->require_subcommand(1);
  auto* dg = ds->add_subcommand("gen", "Synthesize the configured toy dataset");
  dg->add_option("--config", config_path)->required();
  dg->add_option("--out", out_dir);
  auto* dt = ds->add_subcommand("task", "Emit an inpaint task from a template");
  dt->add_option("--config", config_path)->required();
  dt->add_option("--template", tmpl, "Template name");
  dt->add_option("--free-type", free_type, "Type label left free (others frozen)");
  dt->add_option("--out", out_dir, "Output task file path")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (tr->parsed()) return cmd_train(config_path, out_dir, steps_override);
    if (sa->parsed())
      return cmd_sample(config_path, ck_path, count, out_dir, use_raw, sampler, swaps_override,
                        threads, trace);
    if (st->parsed())
      return cmd_steer(config_path, ck_path, shape, weight, count, out_dir, use_raw, threads);
    if (ip->parsed())
      return cmd_inpaint(config_path, ck_path, task_path, attempts, iterations, baseline, out_dir,
                         use_raw, threads);
    if (ev->parsed())
      return cmd_eval(config_path, ck_path, suite, samples_path, out_dir, use_raw, threads);
    if (ds->parsed()) {
      if (dg->parsed()) return cmd_dataset_gen(config_path, out_dir);
      if (dt->parsed()) return cmd_dataset_task(config_path, tmpl, free_type, out_dir);
    }
  } catch (const ebm::config_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ebm::parse_error& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ebm::numerical_error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const ebm::io_error& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
