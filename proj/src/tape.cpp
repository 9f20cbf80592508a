//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#include "ebm/tape.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace ebm::ad {

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double silu_k(int order, double x) {
  const double s = sigmoid(x);
  const double sp = s * (1.0 - s);
  switch (order) {
    case 0: return x * s;
    case 1: return s + x * sp;
    case 2: return 2.0 * sp + x * sp * (1.0 - 2.0 * s);
    case 3: {
      const double spp = sp * (1.0 - 2.0 * s);                    // sigma''
      const double sppp = spp * (1.0 - 2.0 * s) - 2.0 * sp * sp;  // sigma'''
      return 3.0 * spp + x * sppp;
    }
    default: throw std::logic_error("silu derivative order > 3");
  }
}

double tanh_k(int order, double x) {
  const double t = std::tanh(x);
  const double tp = 1.0 - t * t;
  switch (order) {
    case 0: return t;
    case 1: return tp;
    case 2: return -2.0 * t * tp;
    case 3: return tp * (6.0 * t * t - 2.0);
    default: throw std::logic_error("tanh derivative order > 3");
  }
}

}  // namespace

double eval_fn(Fn fn, int order, double x) {
  return fn == Fn::kSilu ? silu_k(order, x) : tanh_k(order, x);
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

int Tape::index_set(std::vector<int> idx) {
  index_sets_.push_back(std::move(idx));
  return static_cast<int>(index_sets_.size()) - 1;
}

Var Tape::input(Mat v) {
  Node n;
  n.op = Op::kInput;
  n.val = std::move(v);
  return push(std::move(n));
}

#define EBM_VAL(x) nodes_[static_cast<size_t>((x).id)].val

Var Tape::add(Var a, Var b) {
  Node n;
  n.op = Op::kAdd;
  n.a = a.id;
  n.b = b.id;
  n.val = EBM_VAL(a) + EBM_VAL(b);
  return push(std::move(n));
}

Var Tape::sub(Var a, Var b) {
  Node n;
  n.op = Op::kSub;
  n.a = a.id;
  n.b = b.id;
  n.val = EBM_VAL(a) - EBM_VAL(b);
  return push(std::move(n));
}

Var Tape::mul(Var a, Var b) {
  Node n;
  n.op = Op::kMul;
  n.a = a.id;
  n.b = b.id;
  n.val = EBM_VAL(a).cwiseProduct(EBM_VAL(b));
  return push(std::move(n));
}

Var Tape::scale(Var a, double s) {
  Node n;
  n.op = Op::kScale;
  n.a = a.id;
  n.s = s;
  n.val = s * EBM_VAL(a);
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  Node n;
  n.op = Op::kMatMul;
  n.a = a.id;
  n.b = b.id;
  n.val = EBM_VAL(a) * EBM_VAL(b);
  return push(std::move(n));
}

Var Tape::transpose(Var a) {
  Node n;
  n.op = Op::kTranspose;
  n.a = a.id;
  n.val = EBM_VAL(a).transpose();
  return push(std::move(n));
}

Var Tape::rowsum(Var a) {
  Node n;
  n.op = Op::kRowSum;
  n.a = a.id;
  n.val = EBM_VAL(a).rowwise().sum();
  return push(std::move(n));
}

Var Tape::colsum(Var a) {
  Node n;
  n.op = Op::kColSum;
  n.a = a.id;
  n.val = EBM_VAL(a).colwise().sum();
  return push(std::move(n));
}

Var Tape::sum_all(Var a) {
  Node n;
  n.op = Op::kSumAll;
  n.a = a.id;
  n.val = Mat::Constant(1, 1, EBM_VAL(a).sum());
  return push(std::move(n));
}

Var Tape::broadcast(Var a, int rows, int cols) {
  assert(EBM_VAL(a).size() == 1);
  Node n;
  n.op = Op::kBcast;
  n.a = a.id;
  n.i0 = rows;
  n.i1 = cols;
  n.val = Mat::Constant(rows, cols, EBM_VAL(a)(0, 0));
  return push(std::move(n));
}

Var Tape::rep_cols(Var a, int cols) {
  assert(EBM_VAL(a).cols() == 1);
  Node n;
  n.op = Op::kRepCols;
  n.a = a.id;
  n.i0 = cols;
  n.val = EBM_VAL(a).replicate(1, cols);
  return push(std::move(n));
}

Var Tape::rep_rows(Var a, int rows) {
  assert(EBM_VAL(a).rows() == 1);
  Node n;
  n.op = Op::kRepRows;
  n.a = a.id;
  n.i0 = rows;
  n.val = EBM_VAL(a).replicate(rows, 1);
  return push(std::move(n));
}

Var Tape::gather_rows(Var a, int index_set) {
  const std::vector<int>& idx = indices(index_set);
  const Mat& src = EBM_VAL(a);
  Node n;
  n.op = Op::kGather;
  n.a = a.id;
  n.i0 = index_set;
  n.val.resize(static_cast<Eigen::Index>(idx.size()), src.cols());
  for (size_t e = 0; e < idx.size(); ++e)
    n.val.row(static_cast<Eigen::Index>(e)) = src.row(idx[e]);
  return push(std::move(n));
}

Var Tape::scatter_rows(Var a, int index_set, int out_rows) {
  const std::vector<int>& idx = indices(index_set);
  const Mat& src = EBM_VAL(a);
  assert(static_cast<size_t>(src.rows()) == idx.size());
  Node n;
  n.op = Op::kScatter;
  n.a = a.id;
  n.i0 = index_set;
  n.i1 = out_rows;
  n.val = Mat::Zero(out_rows, src.cols());
  for (size_t e = 0; e < idx.size(); ++e)
    n.val.row(idx[e]) += src.row(static_cast<Eigen::Index>(e));
  return push(std::move(n));
}

Var Tape::hcat(Var a, Var b) {
  const Mat &va = EBM_VAL(a), &vb = EBM_VAL(b);
  assert(va.rows() == vb.rows());
  Node n;
  n.op = Op::kHCat2;
  n.a = a.id;
  n.b = b.id;
  n.val.resize(va.rows(), va.cols() + vb.cols());
  n.val << va, vb;
  return push(std::move(n));
}

Var Tape::hcat(Var a, Var b, Var c) {
  const Mat &va = EBM_VAL(a), &vb = EBM_VAL(b), &vc = EBM_VAL(c);
  assert(va.rows() == vb.rows() && vb.rows() == vc.rows());
  Node n;
  n.op = Op::kHCat3;
  n.a = a.id;
  n.b = b.id;
  n.c = c.id;
  n.val.resize(va.rows(), va.cols() + vb.cols() + vc.cols());
  n.val << va, vb, vc;
  return push(std::move(n));
}

Var Tape::slice_cols(Var a, int start, int len) {
  Node n;
  n.op = Op::kSliceCols;
  n.a = a.id;
  n.i0 = start;
  n.i1 = len;
  n.val = EBM_VAL(a).middleCols(start, len);
  return push(std::move(n));
}

Var Tape::pad_cols(Var a, int start, int total) {
  const Mat& va = EBM_VAL(a);
  Node n;
  n.op = Op::kPadCols;
  n.a = a.id;
  n.i0 = start;
  n.i1 = total;
  n.val = Mat::Zero(va.rows(), total);
  n.val.middleCols(start, va.cols()) = va;
  return push(std::move(n));
}

Var Tape::apply(Fn fn, Var a, int order) {
  Node n;
  n.op = Op::kUnary;
  n.fn = fn;
  n.order = static_cast<std::int16_t>(order);
  n.a = a.id;
  n.val = EBM_VAL(a).unaryExpr([fn, order](double x) { return eval_fn(fn, order, x); });
  return push(std::move(n));
}

// ---------------------------------------------------------------------------
// Reverse passes. Both walk nodes in decreasing id so every consumer of a
// node has contributed to its adjoint before it is processed.
// ---------------------------------------------------------------------------

std::vector<Var> Tape::backward_graph(Var root, const std::vector<Var>& wrt) {
  assert(value(root).size() == 1);
  const int n0 = root.id;
  std::vector<Var> adj(static_cast<size_t>(n0) + 1);
  adj[static_cast<size_t>(n0)] = scalar(1.0);

  auto accum = [this, &adj](int target, Var contrib) {
    Var& slot = adj[static_cast<size_t>(target)];
    slot = slot.valid() ? add(slot, contrib) : contrib;
  };

  for (int i = n0; i >= 0; --i) {
    const Var g = adj[static_cast<size_t>(i)];
    if (!g.valid()) continue;
    // Copy the POD fields: pushing adjoint nodes reallocates nodes_.
    const Node nd = [this, i] {
      Node c;
      const Node& src = nodes_[static_cast<size_t>(i)];
      c.op = src.op;
      c.fn = src.fn;
      c.order = src.order;
      c.a = src.a;
      c.b = src.b;
      c.c = src.c;
      c.s = src.s;
      c.i0 = src.i0;
      c.i1 = src.i1;
      return c;
    }();
    switch (nd.op) {
      case Op::kInput:
        break;
      case Op::kAdd:
        accum(nd.a, g);
        accum(nd.b, g);
        break;
      case Op::kSub:
        accum(nd.a, g);
        accum(nd.b, scale(g, -1.0));
        break;
      case Op::kMul:
        accum(nd.a, mul(g, Var{nd.b}));
        accum(nd.b, mul(g, Var{nd.a}));
        break;
      case Op::kScale:
        accum(nd.a, scale(g, nd.s));
        break;
      case Op::kMatMul:
        accum(nd.a, matmul(g, transpose(Var{nd.b})));
        accum(nd.b, matmul(transpose(Var{nd.a}), g));
        break;
      case Op::kTranspose:
        accum(nd.a, transpose(g));
        break;
      case Op::kRowSum:
        accum(nd.a, rep_cols(g, static_cast<int>(nodes_[static_cast<size_t>(nd.a)].val.cols())));
        break;
      case Op::kColSum:
        accum(nd.a, rep_rows(g, static_cast<int>(nodes_[static_cast<size_t>(nd.a)].val.rows())));
        break;
      case Op::kSumAll: {
        const Mat& av = nodes_[static_cast<size_t>(nd.a)].val;
        accum(nd.a, broadcast(g, static_cast<int>(av.rows()), static_cast<int>(av.cols())));
        break;
      }
      case Op::kBcast:
        accum(nd.a, sum_all(g));
        break;
      case Op::kRepCols:
        accum(nd.a, rowsum(g));
        break;
      case Op::kRepRows:
        accum(nd.a, colsum(g));
        break;
      case Op::kGather:
        accum(nd.a, scatter_rows(g, nd.i0,
                                 static_cast<int>(nodes_[static_cast<size_t>(nd.a)].val.rows())));
        break;
      case Op::kScatter:
        accum(nd.a, gather_rows(g, nd.i0));
        break;
      case Op::kHCat2: {
        const int ca = static_cast<int>(nodes_[static_cast<size_t>(nd.a)].val.cols());
        const int cb = static_cast<int>(nodes_[static_cast<size_t>(nd.b)].val.cols());
        accum(nd.a, slice_cols(g, 0, ca));
        accum(nd.b, slice_cols(g, ca, cb));
        break;
      }
      case Op::kHCat3: {
        const int ca = static_cast<int>(nodes_[static_cast<size_t>(nd.a)].val.cols());
        const int cb = static_cast<int>(nodes_[static_cast<size_t>(nd.b)].val.cols());
        const int cc = static_cast<int>(nodes_[static_cast<size_t>(nd.c)].val.cols());
        accum(nd.a, slice_cols(g, 0, ca));
        accum(nd.b, slice_cols(g, ca, cb));
        accum(nd.c, slice_cols(g, ca + cb, cc));
        break;
      }
      case Op::kSliceCols:
        accum(nd.a, pad_cols(g, nd.i0,
                             static_cast<int>(nodes_[static_cast<size_t>(nd.a)].val.cols())));
        break;
      case Op::kPadCols:
        accum(nd.a, slice_cols(g, nd.i0,
                               static_cast<int>(nodes_[static_cast<size_t>(nd.a)].val.cols())));
        break;
      case Op::kUnary:
        accum(nd.a, mul(g, apply(nd.fn, Var{nd.a}, nd.order + 1)));
        break;
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (Var w : wrt) {
    Var a = w.id <= n0 ? adj[static_cast<size_t>(w.id)] : Var{};
    if (!a.valid()) {
      const Mat& wv = value(w);
      a = constant(Mat::Zero(wv.rows(), wv.cols()));
    }
    out.push_back(a);
  }
  return out;
}

std::vector<Mat> Tape::backward_values(Var root, const std::vector<Var>& wrt) const {
  assert(value(root).size() == 1);
  const int n0 = root.id;
  std::vector<Mat> adj(static_cast<size_t>(n0) + 1);
  std::vector<char> seen(static_cast<size_t>(n0) + 1, 0);
  adj[static_cast<size_t>(n0)] = Mat::Constant(1, 1, 1.0);
  seen[static_cast<size_t>(n0)] = 1;

  auto accum = [&adj, &seen](int target, const Mat& contrib) {
    if (seen[static_cast<size_t>(target)]) {
      adj[static_cast<size_t>(target)] += contrib;
    } else {
      adj[static_cast<size_t>(target)] = contrib;
      seen[static_cast<size_t>(target)] = 1;
    }
  };

  for (int i = n0; i >= 0; --i) {
    if (!seen[static_cast<size_t>(i)]) continue;
    const Node& nd = nodes_[static_cast<size_t>(i)];
    const Mat& g = adj[static_cast<size_t>(i)];
    switch (nd.op) {
      case Op::kInput:
        break;
      case Op::kAdd:
        accum(nd.a, g);
        accum(nd.b, g);
        break;
      case Op::kSub:
        accum(nd.a, g);
        accum(nd.b, -g);
        break;
      case Op::kMul:
        accum(nd.a, g.cwiseProduct(nodes_[static_cast<size_t>(nd.b)].val));
        accum(nd.b, g.cwiseProduct(nodes_[static_cast<size_t>(nd.a)].val));
        break;
      case Op::kScale:
        accum(nd.a, nd.s * g);
        break;
      case Op::kMatMul:
        accum(nd.a, g * nodes_[static_cast<size_t>(nd.b)].val.transpose());
        accum(nd.b, nodes_[static_cast<size_t>(nd.a)].val.transpose() * g);
        break;
      case Op::kTranspose:
        accum(nd.a, g.transpose());
        break;
      case Op::kRowSum:
        accum(nd.a, g.replicate(1, nodes_[static_cast<size_t>(nd.a)].val.cols()));
        break;
      case Op::kColSum:
        accum(nd.a, g.replicate(nodes_[static_cast<size_t>(nd.a)].val.rows(), 1));
        break;
      case Op::kSumAll: {
        const Mat& av = nodes_[static_cast<size_t>(nd.a)].val;
        accum(nd.a, Mat::Constant(av.rows(), av.cols(), g(0, 0)));
        break;
      }
      case Op::kBcast:
        accum(nd.a, Mat::Constant(1, 1, g.sum()));
        break;
      case Op::kRepCols:
        accum(nd.a, g.rowwise().sum());
        break;
      case Op::kRepRows:
        accum(nd.a, g.colwise().sum());
        break;
      case Op::kGather: {
        const std::vector<int>& idx = indices(nd.i0);
        Mat out = Mat::Zero(nodes_[static_cast<size_t>(nd.a)].val.rows(), g.cols());
        for (size_t e = 0; e < idx.size(); ++e)
          out.row(idx[e]) += g.row(static_cast<Eigen::Index>(e));
        accum(nd.a, out);
        break;
      }
      case Op::kScatter: {
        const std::vector<int>& idx = indices(nd.i0);
        Mat out(static_cast<Eigen::Index>(idx.size()), g.cols());
        for (size_t e = 0; e < idx.size(); ++e)
          out.row(static_cast<Eigen::Index>(e)) = g.row(idx[e]);
        accum(nd.a, out);
        break;
      }
      case Op::kHCat2: {
        const Eigen::Index ca = nodes_[static_cast<size_t>(nd.a)].val.cols();
        const Eigen::Index cb = nodes_[static_cast<size_t>(nd.b)].val.cols();
        accum(nd.a, g.middleCols(0, ca));
        accum(nd.b, g.middleCols(ca, cb));
        break;
      }
      case Op::kHCat3: {
        const Eigen::Index ca = nodes_[static_cast<size_t>(nd.a)].val.cols();
        const Eigen::Index cb = nodes_[static_cast<size_t>(nd.b)].val.cols();
        const Eigen::Index cc = nodes_[static_cast<size_t>(nd.c)].val.cols();
        accum(nd.a, g.middleCols(0, ca));
        accum(nd.b, g.middleCols(ca, cb));
        accum(nd.c, g.middleCols(ca + cb, cc));
        break;
      }
      case Op::kSliceCols: {
        const Mat& av = nodes_[static_cast<size_t>(nd.a)].val;
        Mat out = Mat::Zero(av.rows(), av.cols());
        out.middleCols(nd.i0, nd.i1) = g;
        accum(nd.a, out);
        break;
      }
      case Op::kPadCols: {
        const Mat& av = nodes_[static_cast<size_t>(nd.a)].val;
        accum(nd.a, g.middleCols(nd.i0, av.cols()));
        break;
      }
      case Op::kUnary: {
        const Mat& av = nodes_[static_cast<size_t>(nd.a)].val;
        const Fn fn = nd.fn;
        const int next = nd.order + 1;
        accum(nd.a,
              g.cwiseProduct(av.unaryExpr([fn, next](double x) { return eval_fn(fn, next, x); })));
        break;
      }
    }
  }

  std::vector<Mat> out;
  out.reserve(wrt.size());
  for (Var w : wrt) {
    if (w.id <= n0 && seen[static_cast<size_t>(w.id)]) {
      out.push_back(adj[static_cast<size_t>(w.id)]);
    } else {
      const Mat& wv = value(w);
      out.push_back(Mat::Zero(wv.rows(), wv.cols()));
    }
  }
  return out;
}

#undef EBM_VAL

}  // namespace ebm::ad
