#include "dcgl/fusion.hpp"

#include <cmath>

#include "dcgl/diff/kernels.hpp"
#include "dcgl/error.hpp"

namespace dcgl::fusion {

Var gate_weight(Var x_id, Var x_llm, Var phi, const GateVars& gate) {
  DCGL_EXPECT(x_id.rows() == x_llm.rows() && phi.rows() == x_id.rows() && phi.cols() == 1,
              "gate_weight: inputs must be row-aligned");
  DCGL_EXPECT(gate.weight.rows() == x_id.cols() + x_llm.cols() + 1 && gate.weight.cols() == 1,
              "gate_weight: W_g must be (2d + 1) x 1");
  Var features = diff::concat_cols({x_id, x_llm, phi});
  return diff::sigmoid(diff::add_row(diff::matmul(features, gate.weight), gate.bias));
}

double gate_weight(std::span<const double> x_id, std::span<const double> x_llm, double phi,
                   std::span<const double> weight, double bias) {
  DCGL_EXPECT(weight.size() == x_id.size() + x_llm.size() + 1, "gate_weight: W_g length mismatch");
  double z = bias;
  std::size_t k = 0;
  for (double v : x_id) z += weight[k++] * v;
  for (double v : x_llm) z += weight[k++] * v;
  z += weight[k] * phi;
  return diff::sigmoid(z);
}

Var fuse(Var x_id, Var x_llm, Var g) {
  return diff::concat_cols({diff::scale_rows(x_id, g), diff::scale_rows(x_llm, diff::one_minus(g))});
}

Score predict_score(Var user_id, Var item_id, Var user_llm, Var item_llm, Var gate_user,
                    Var gate_item) {
  Var s_id = diff::row_dot(user_id, item_id);
  Var s_llm = diff::row_dot(user_llm, item_llm);
  Var w_id = diff::mul(gate_user, gate_item);
  Var w_llm = diff::mul(diff::one_minus(gate_user), diff::one_minus(gate_item));
  Var alpha = diff::add(w_id, w_llm);
  Var raw = diff::add(diff::mul(w_id, s_id), diff::mul(w_llm, s_llm));
  return {diff::div(raw, alpha), alpha};
}

double predict_score(double s_id, double s_llm, double gate_user, double gate_item, double* alpha) {
  const double w_id = gate_user * gate_item;
  const double w_llm = (1 - gate_user) * (1 - gate_item);
  const double a = w_id + w_llm;
  if (alpha) *alpha = a;
  return (w_id * s_id + w_llm * s_llm) / a;
}

Var gate_regularization(Var gate_user, Var gate_pos, Var gate_neg) {
  DCGL_EXPECT(gate_user.rows() > 0, "gate_regularization: empty triple list");
  auto term = [](Var g) { return diff::add(diff::log(g), diff::log(diff::one_minus(g))); };
  Var total = diff::add(diff::add(term(gate_user), term(gate_pos)), term(gate_neg));
  return diff::scale(diff::sum(total), -1.0 / static_cast<double>(gate_user.rows()));
}

}  // namespace dcgl::fusion
