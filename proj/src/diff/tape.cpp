#include "dcgl/diff/tape.hpp"

#include "dcgl/error.hpp"

namespace dcgl::diff {

const Mat& Var::value() const {
  DCGL_EXPECT(tape_ != nullptr, "use of an unbound Var");
  return tape_->value(*this);
}

double Var::scalar() const {
  const auto& v = value();
  DCGL_EXPECT(v.rows() == 1 && v.cols() == 1, "scalar() on a non-1x1 node");
  return v(0, 0);
}

Var Tape::push(Mat value, bool requires_grad, Backward backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::check_owner(Var v) const {
  DCGL_EXPECT(v.tape_ == this, "Var belongs to a different tape");
}

Var Tape::constant(Mat value) { return push(std::move(value), false, nullptr); }

Var Tape::variable(Mat value) { return push(std::move(value), true, nullptr); }

Var Tape::record(Mat value, std::initializer_list<Var> parents, Backward backward) {
  bool rg = false;
  for (auto p : parents) {
    check_owner(p);
    rg = rg || nodes_[p.index_].requires_grad;
  }
  return push(std::move(value), rg, std::move(backward));
}

Var Tape::record(Mat value, const std::vector<Var>& parents, Backward backward) {
  bool rg = false;
  for (auto p : parents) {
    check_owner(p);
    rg = rg || nodes_[p.index_].requires_grad;
  }
  return push(std::move(value), rg, std::move(backward));
}

void Tape::ensure_grad(Node& node) {
  if (!node.has_grad) {
    node.grad = Mat::Zero(node.value.rows(), node.value.cols());
    node.has_grad = true;
  }
}

void Tape::accumulate(Var v, const Mat& delta) {
  auto& node = nodes_[v.index_];
  if (!node.requires_grad) return;
  DCGL_EXPECT(delta.rows() == node.value.rows() && delta.cols() == node.value.cols(),
              "gradient shape mismatch");
  ensure_grad(node);
  node.grad += delta;
}

Mat Tape::grad(Var v) const {
  check_owner(v);
  const auto& node = nodes_[v.index_];
  if (!node.has_grad) return Mat::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

void Tape::backward(Var output) { backward(output, Mat::Ones(1, 1)); }

void Tape::backward(Var output, const Mat& seed) {
  check_owner(output);
  auto& out = nodes_[output.index_];
  DCGL_EXPECT(seed.rows() == out.value.rows() && seed.cols() == out.value.cols(),
              "seed shape must match output");
  for (auto& n : nodes_) n.has_grad = false;
  if (!out.requires_grad) return;
  ensure_grad(out);
  out.grad = seed;
  for (int k = output.index_; k >= 0; --k) {
    auto& node = nodes_[k];
    if (node.has_grad && node.backward) node.backward(*this, node.grad);
  }
}

}  // namespace dcgl::diff
