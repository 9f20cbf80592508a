//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ebm/energy.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "ebm/errors.hpp"

namespace ebm {

using ad::Mat;
using ad::Tape;
using ad::Var;

void EnergyModelConfig::check() const {
  if (n_layers < 1) throw config_error("model: n_layers must be >= 1");
  if (embed_dim < 1) throw config_error("model: embed_dim must be >= 1");
  if (n_types < 1) throw config_error("model: n_types must be >= 1");
}

namespace {

Mat uniform_fan_in(int rows, int cols, RandomStream& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(rows));
  Mat m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = rng.uniform(-bound, bound);
  return m;
}

}  // namespace

EnergyModel EnergyModel::init(const EnergyModelConfig& cfg, RandomStream& rng) {
  cfg.check();
  EnergyModel m;
  m.cfg_ = cfg;
  const int d = cfg.embed_dim;
  const int k = cfg.n_types;

  m.embed_w = uniform_fan_in(k, d, rng);
  m.embed_b = Mat::Zero(1, d);
  m.layers.resize(static_cast<size_t>(cfg.n_layers));
  for (Layer& l : m.layers) {
    l.edge_w1 = uniform_fan_in(2 * d + 1, d, rng);
    l.edge_b1 = Mat::Zero(1, d);
    l.edge_w2 = uniform_fan_in(d, d, rng);
    l.edge_b2 = Mat::Zero(1, d);
    l.gate_w = uniform_fan_in(d, 1, rng);
    l.gate_b = Mat::Zero(1, 1);
    l.node_w1 = uniform_fan_in(2 * d, d, rng);
    l.node_b1 = Mat::Zero(1, d);
    l.node_w2 = uniform_fan_in(d, d, rng);
    l.node_b2 = Mat::Zero(1, d);
  }
  m.read_w1 = uniform_fan_in(d, d, rng);
  m.read_b1 = Mat::Zero(1, d);
  m.read_w2 = Mat::Zero(d, 1);  // flat initial landscape
  m.read_b2 = Mat::Zero(1, 1);
  return m;
}

void EnergyModel::visit_params(const std::function<void(const std::string&, Mat&)>& fn) {
  fn("embed.w", embed_w);
  fn("embed.b", embed_b);
  for (size_t i = 0; i < layers.size(); ++i) {
    const std::string p = "layer" + std::to_string(i) + ".";
    Layer& l = layers[i];
    fn(p + "edge.w1", l.edge_w1);
    fn(p + "edge.b1", l.edge_b1);
    fn(p + "edge.w2", l.edge_w2);
    fn(p + "edge.b2", l.edge_b2);
    fn(p + "gate.w", l.gate_w);
    fn(p + "gate.b", l.gate_b);
    fn(p + "node.w1", l.node_w1);
    fn(p + "node.b1", l.node_b1);
    fn(p + "node.w2", l.node_w2);
    fn(p + "node.b2", l.node_b2);
  }
  fn("readout.w1", read_w1);
  fn("readout.b1", read_b1);
  fn("readout.w2", read_w2);
  fn("readout.b2", read_b2);
}

void EnergyModel::visit_params(
    const std::function<void(const std::string&, const Mat&)>& fn) const {
  const_cast<EnergyModel*>(this)->visit_params(
      [&fn](const std::string& name, Mat& m) { fn(name, m); });
}

std::vector<Mat*> EnergyModel::param_ptrs() {
  std::vector<Mat*> out;
  visit_params([&out](const std::string&, Mat& m) { out.push_back(&m); });
  return out;
}

int EnergyModel::param_count() const {
  int n = 0;
  visit_params([&n](const std::string&, const Mat&) { ++n; });
  return n;
}

EnergyGraph EnergyModel::build_graph(Tape& t, const MixedState& s,
                                     const std::vector<Var>* shared) const {
  if (s.n_types() != cfg_.n_types)
    throw std::invalid_argument("energy: state has " + std::to_string(s.n_types()) +
                                " types, model expects " + std::to_string(cfg_.n_types));
  const int n = s.n_atoms();
  const ad::Fn act = cfg_.activation;

  EnergyGraph g;
  if (shared != nullptr) {
    g.params = *shared;
  } else {
    visit_params([&](const std::string&, const Mat& m) { g.params.push_back(t.input(m)); });
  }
  size_t pi = 0;
  auto next_param = [&g, &pi]() { return g.params[pi++]; };

  const Var embed_w_v = next_param();
  const Var embed_b_v = next_param();

  g.coords = t.input(s.coords);
  g.types = t.input(s.types);

  Var c = g.coords;
  Var h = t.add(t.matmul(g.types, embed_w_v), t.rep_rows(embed_b_v, n));

  // Directed fully connected edge lists (no self loops).
  int src_set = -1, dst_set = -1;
  const int n_edges = n * (n - 1);
  if (n_edges > 0) {
    std::vector<int> src, dst;
    src.reserve(static_cast<size_t>(n_edges));
    dst.reserve(static_cast<size_t>(n_edges));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        if (i != j) {
          src.push_back(i);
          dst.push_back(j);
        }
    src_set = t.index_set(std::move(src));
    dst_set = t.index_set(std::move(dst));
  }

  const int n_layers = cfg_.n_layers;
  for (int li = 0; li < n_layers; ++li) {
    const Var edge_w1_v = next_param();
    const Var edge_b1_v = next_param();
    const Var edge_w2_v = next_param();
    const Var edge_b2_v = next_param();
    const Var gate_w_v = next_param();
    const Var gate_b_v = next_param();
    const Var node_w1_v = next_param();
    const Var node_b1_v = next_param();
    const Var node_w2_v = next_param();
    const Var node_b2_v = next_param();

    Var agg;
    if (n_edges > 0) {
      const Var ci = t.gather_rows(c, src_set);
      const Var cj = t.gather_rows(c, dst_set);
      const Var diff = t.sub(ci, cj);
      const Var d2 = t.rowsum(t.mul(diff, diff));
      const Var hi = t.gather_rows(h, src_set);
      const Var hj = t.gather_rows(h, dst_set);
      const Var feat = t.hcat(hi, hj, d2);
      Var msg = t.apply(act, t.add(t.matmul(feat, edge_w1_v), t.rep_rows(edge_b1_v, n_edges)));
      msg = t.apply(act, t.add(t.matmul(msg, edge_w2_v), t.rep_rows(edge_b2_v, n_edges)));

      const bool update_coords = cfg_.coord_updates && li + 1 < n_layers;
      if (update_coords) {
        const Var gate = t.apply(ad::Fn::kTanh,
                                 t.add(t.matmul(msg, gate_w_v), t.rep_rows(gate_b_v, n_edges)));
        const Var push = t.scatter_rows(t.mul(diff, t.rep_cols(gate, 3)), src_set, n);
        c = t.add(c, t.scale(push, 1.0 / static_cast<double>(n - 1)));
        g.layer_coords.push_back(c);
      }
      agg = t.scatter_rows(msg, src_set, n);
    } else {
      agg = t.constant(Mat::Zero(n, cfg_.embed_dim));
    }

    const Var nf = t.hcat(h, agg);
    const Var hidden =
        t.apply(act, t.add(t.matmul(nf, node_w1_v), t.rep_rows(node_b1_v, n)));
    const Var upd = t.add(t.matmul(hidden, node_w2_v), t.rep_rows(node_b2_v, n));
    h = t.add(h, upd);
  }

  const Var read_w1_v = next_param();
  const Var read_b1_v = next_param();
  const Var read_w2_v = next_param();
  const Var read_b2_v = next_param();

  const Var rh = t.apply(act, t.add(t.matmul(h, read_w1_v), t.rep_rows(read_b1_v, n)));
  g.per_atom = t.add(t.matmul(rh, read_w2_v), t.rep_rows(read_b2_v, n));
  g.total = t.sum_all(g.per_atom);
  return g;
}

EnergyEval EnergyModel::forward(const MixedState& s) const {
  Tape t;
  const EnergyGraph g = build_graph(t, s);
  EnergyEval out;
  out.per_atom = t.value(g.per_atom).col(0);
  out.total = t.value(g.total)(0, 0);
  if (!out.per_atom.allFinite() || !std::isfinite(out.total))
    throw numerical_error("energy forward produced non-finite values");
  return out;
}

EnergyEval EnergyModel::grad_input(const MixedState& s) const {
  Tape t;
  const EnergyGraph g = build_graph(t, s);
  const std::vector<Mat> grads = t.backward_values(g.total, {g.coords, g.types});
  EnergyEval out;
  out.per_atom = t.value(g.per_atom).col(0);
  out.total = t.value(g.total)(0, 0);
  out.grad_coords = grads[0];
  out.grad_types = grads[1];
  if (!out.per_atom.allFinite() || !std::isfinite(out.total) || !out.grad_coords.allFinite() ||
      !out.grad_types.allFinite())
    throw numerical_error("energy gradient produced non-finite values");
  return out;
}

void ema_update(EnergyModel& ema, const EnergyModel& model, double decay) {
  std::vector<Mat*> dst = ema.param_ptrs();
  std::vector<Mat*> src = const_cast<EnergyModel&>(model).param_ptrs();
  if (dst.size() != src.size()) throw std::invalid_argument("ema_update: parameter count mismatch");
  for (size_t i = 0; i < dst.size(); ++i) {
    if (dst[i]->rows() != src[i]->rows() || dst[i]->cols() != src[i]->cols())
      throw std::invalid_argument("ema_update: parameter shape mismatch");
    *dst[i] = decay * *dst[i] + (1.0 - decay) * *src[i];
  }
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic, config header, then raw and EMA parameter
// sections of named row-major float64 entries.
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'E', 'B', 'M', 'C', 'K', '0', '0', '1'};

template <typename T>
void put(std::ofstream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw parse_error(path + ": truncated checkpoint");
  return v;
}

void write_params(std::ofstream& out, const EnergyModel& m) {
  m.visit_params([&out](const std::string& name, const Mat& mat) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(mat.rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(mat.cols()));
    for (Eigen::Index i = 0; i < mat.rows(); ++i)
      for (Eigen::Index j = 0; j < mat.cols(); ++j) put<double>(out, mat(i, j));
  });
}

void read_params(std::ifstream& in, EnergyModel& m, const std::string& path) {
  m.visit_params([&in, &path](const std::string& name, Mat& mat) {
    const auto len = get<std::uint16_t>(in, path);
    std::string got(len, '\0');
    in.read(got.data(), len);
    if (!in) throw parse_error(path + ": truncated checkpoint");
    if (got != name)
      throw parse_error(path + ": checkpoint entry '" + got + "' where '" + name + "' expected");
    const auto rows = get<std::uint32_t>(in, path);
    const auto cols = get<std::uint32_t>(in, path);
    if (static_cast<Eigen::Index>(rows) != mat.rows() ||
        static_cast<Eigen::Index>(cols) != mat.cols())
      throw parse_error(path + ": checkpoint entry '" + name + "' has unexpected shape");
    for (Eigen::Index i = 0; i < mat.rows(); ++i)
      for (Eigen::Index j = 0; j < mat.cols(); ++j) mat(i, j) = get<double>(in, path);
  });
}

EnergyModel zeros_like_config(const EnergyModelConfig& cfg) {
  // Shape-only construction; values are overwritten by read_params.
  RandomStream rng(0);
  return EnergyModel::init(cfg, rng);
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& ck) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw io_error("cannot write " + path);
  out.write(kMagic, sizeof(kMagic));
  const EnergyModelConfig& cfg = ck.raw.config();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.n_layers));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.embed_dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(cfg.n_types));
  put<std::uint8_t>(out, cfg.coord_updates ? 1 : 0);
  put<std::uint8_t>(out, cfg.activation == ad::Fn::kSilu ? 0 : 1);
  write_params(out, ck.raw);
  write_params(out, ck.ema);
  if (!out) throw io_error("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw parse_error(path + ": not an ebmgen checkpoint (bad magic/version)");
  EnergyModelConfig cfg;
  cfg.n_layers = static_cast<int>(get<std::uint32_t>(in, path));
  cfg.embed_dim = static_cast<int>(get<std::uint32_t>(in, path));
  cfg.n_types = static_cast<int>(get<std::uint32_t>(in, path));
  cfg.coord_updates = get<std::uint8_t>(in, path) != 0;
  cfg.activation = get<std::uint8_t>(in, path) == 0 ? ad::Fn::kSilu : ad::Fn::kTanh;
  cfg.check();

  Checkpoint ck;
  ck.raw = zeros_like_config(cfg);
  ck.ema = zeros_like_config(cfg);
  read_params(in, ck.raw, path);
  read_params(in, ck.ema, path);
  return ck;
}

}  // namespace ebm
