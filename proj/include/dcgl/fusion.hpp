#pragma once

#include <span>

#include "dcgl/diff/ops.hpp"

namespace dcgl::fusion {

using diff::Var;

struct GateVars {
  Var weight;  // (2d + 1) x 1
  Var bias;    // 1 x 1
};

// sigma(W_g [x_id || x_llm || phi] + b_g), one gate per row (n x 1).
Var gate_weight(Var x_id, Var x_llm, Var phi, const GateVars& gate);
double gate_weight(std::span<const double> x_id, std::span<const double> x_llm, double phi,
                   std::span<const double> weight, double bias);

// [g x_id || (1 - g) x_llm] per row.
Var fuse(Var x_id, Var x_llm, Var g);

struct Score {
  Var score;  // n x 1
  Var alpha;  // n x 1, g_u g_i + (1 - g_u)(1 - g_i)
};

// Normalized convex combination w s_id + (1 - w) s_llm, w = g_u g_i / alpha.
// All inputs are row-aligned: row k describes one (user, item) pair.
Score predict_score(Var user_id, Var item_id, Var user_llm, Var item_llm, Var gate_user,
                    Var gate_item);
double predict_score(double s_id, double s_llm, double gate_user, double gate_item,
                     double* alpha = nullptr);

// Mean over rows of sum_{x in {u, i, i'}} [-log g_x - log(1 - g_x)].
Var gate_regularization(Var gate_user, Var gate_pos, Var gate_neg);

}  // namespace dcgl::fusion
