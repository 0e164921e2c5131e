#pragma once

#include <Eigen/SparseCore>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "dcgl/diff/tape.hpp"

// Differentiable ops over tape variables. Each op checks its shape contract
// and records a backward closure on the owning tape.
namespace dcgl::diff {

using Index = std::uint32_t;
using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// Constant sparse operator with its transpose cached for the backward pass.
struct SparseOp {
  std::shared_ptr<const SpMat> forward;
  std::shared_ptr<const SpMat> transpose;
  static SparseOp from(SpMat m);
};

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var div(Var a, Var b);  // elementwise
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var one_minus(Var a);

// a * b, with optional transposes of either operand.
Var matmul(Var a, Var b, bool transpose_a = false, bool transpose_b = false);
// Adds a bias (1 x n or n x 1) to every row of a (m x n).
Var add_row(Var a, Var bias);

Var leaky_relu(Var a, double slope);
Var sigmoid(Var a);
Var log(Var a);
Var log_sigmoid(Var a);
// Subgradient 0 at exact zeros.
Var abs(Var a);

Var sum(Var a);
Var row_sum(Var a);  // m x 1
Var sum_squares(Var a);
Var row_dot(Var a, Var b);     // m x 1, dot product of matching rows
Var scale_rows(Var a, Var v);  // row r of a times v(r), v is m x 1

Var gather_rows(Var a, std::span<const Index> rows);
// out(rows[k]) += a(k) into a zero matrix with `num_rows` rows.
Var scatter_add_rows(Var a, std::span<const Index> rows, Eigen::Index num_rows);
Var head_rows(Var a, Eigen::Index n);

Var concat_cols(const std::vector<Var>& parts);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);

// Softmax of an m x 1 column within contiguous segments
// [offsets[s], offsets[s+1]); offsets.back() == m.
Var segment_softmax(Var a, std::span<const std::size_t> offsets);

// op * a for a constant sparse operator.
Var spmm(const SparseOp& op, Var a);

// Each row divided by its L2 norm; zero rows stay zero with zero gradient.
Var l2_normalize_rows(Var a);

// Contrastive loss over an N x N logit matrix whose diagonal holds the
// positive pairs: -sum_n [L(n,n) - log sum_{m in D(n)} exp L(n,m)], where
// D(n) excludes m == n unless include_positive is set.
Var info_nce_logits(Var logits, bool include_positive);

}  // namespace dcgl::diff
