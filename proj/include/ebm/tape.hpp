//
// Project ebmgen - Copyright 2026 the ebmgen authors.
// SPDX-License-Identifier: Apache-2.0
//

#ifndef EBM_TAPE_HPP
#define EBM_TAPE_HPP

#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace ebm::ad {

using Mat = Eigen::MatrixXd;

enum class Op : std::uint8_t {
  kInput,
  kAdd,
  kSub,
  kMul,        // elementwise
  kScale,      // by compile-time scalar
  kMatMul,
  kTranspose,
  kRowSum,     // m x n -> m x 1
  kColSum,     // m x n -> 1 x n
  kSumAll,     // m x n -> 1 x 1
  kBcast,      // 1 x 1 -> m x n
  kRepCols,    // m x 1 -> m x n
  kRepRows,    // 1 x n -> m x n
  kGather,     // select rows by index set
  kScatter,    // sum rows into index set
  kHCat2,
  kHCat3,
  kSliceCols,
  kPadCols,    // place block into zero matrix of `total` cols at `start`
  kUnary,      // elementwise analytic function, kth derivative
};

enum class Fn : std::uint8_t { kSilu, kTanh };

/// Lightweight handle into a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Define-by-run reverse-mode tape over dense matrices. Every node's value
/// is computed eagerly at construction. backward_graph() emits the reverse
/// pass as new tape nodes, so gradients are themselves differentiable —
/// that is how second-order parameter gradients of losses built on input
/// gradients are obtained. backward_values() is the cheap variant that only
/// propagates adjoint matrices.
class Tape {
 public:
  Var input(Mat v);
  Var constant(Mat v) { return input(std::move(v)); }
  Var scalar(double v) { return input(Mat::Constant(1, 1, v)); }

  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  Var matmul(Var a, Var b);
  Var transpose(Var a);
  Var rowsum(Var a);
  Var colsum(Var a);
  Var sum_all(Var a);
  Var broadcast(Var a, int rows, int cols);
  Var rep_cols(Var a, int n);
  Var rep_rows(Var a, int n);
  Var gather_rows(Var a, int index_set);
  Var scatter_rows(Var a, int index_set, int out_rows);
  Var hcat(Var a, Var b);
  Var hcat(Var a, Var b, Var c);
  Var slice_cols(Var a, int start, int len);
  Var pad_cols(Var a, int start, int total);
  Var apply(Fn fn, Var a, int order = 0);

  /// Registers a row index list for gather/scatter; returns its handle.
  int index_set(std::vector<int> idx);

  const Mat& value(Var v) const { return nodes_[static_cast<size_t>(v.id)].val; }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse pass from a 1x1 root, emitting adjoints as new tape nodes.
  /// Returns one Var per requested leaf (zero-valued when unreached).
  std::vector<Var> backward_graph(Var root, const std::vector<Var>& wrt);

  /// Reverse pass propagating adjoint values only (no new nodes).
  std::vector<Mat> backward_values(Var root, const std::vector<Var>& wrt) const;

 private:
  struct Node {
    Op op;
    Fn fn = Fn::kSilu;
    std::int16_t order = 0;
    int a = -1, b = -1, c = -1;
    double s = 0.0;
    int i0 = 0, i1 = 0;  // slice/pad bounds, bcast dims, index-set handle
    Mat val;
  };

  Var push(Node n);
  const std::vector<int>& indices(int handle) const {
    return index_sets_[static_cast<size_t>(handle)];
  }

  std::vector<Node> nodes_;
  std::vector<std::vector<int>> index_sets_;
};

/// kth derivative (k = 0..3) of the named elementwise function.
double eval_fn(Fn fn, int order, double x);

}  // namespace ebm::ad

#endif  // EBM_TAPE_HPP
