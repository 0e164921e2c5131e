#pragma once

#include <Eigen/Dense>
#include <functional>
#include <initializer_list>
#include <vector>

namespace dcgl::diff {

// Row-major so that embedding rows are contiguous.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Tape* tape() const { return tape_; }
  int index() const { return index_; }
  bool valid() const { return tape_ != nullptr; }
  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  // Value of a 1x1 node.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, int index) : tape_(tape), index_(index) {}
  Tape* tape_ = nullptr;
  int index_ = -1;
};

// Records a computation as a list of nodes and replays it in reverse to
// accumulate gradients. Single owner; not thread-safe.
class Tape {
 public:
  // Called with the node's accumulated output gradient; pushes gradients to
  // the parents through Tape::accumulate.
  using Backward = std::function<void(Tape&, const Mat& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value);
  Var variable(Mat value);

  // Records an op result. The node requires a gradient iff any parent does;
  // otherwise the backward function is discarded.
  Var record(Mat value, std::initializer_list<Var> parents, Backward backward);
  Var record(Mat value, const std::vector<Var>& parents, Backward backward);

  const Mat& value(Var v) const { return nodes_[v.index_].value; }
  bool requires_grad(Var v) const { return nodes_[v.index_].requires_grad; }

  // Adds `delta` to the gradient of v (no-op when v needs no gradient).
  void accumulate(Var v, const Mat& delta);
  template <typename Fn>
  void accumulate_with(Var v, Fn&& fn) {
    auto& node = nodes_[v.index_];
    if (!node.requires_grad) return;
    ensure_grad(node);
    fn(node.grad);
  }

  // Gradient of v after backward(); zeros when v received nothing.
  Mat grad(Var v) const;

  // Seeds a 1x1 output with 1 and runs the reverse sweep.
  void backward(Var output);
  void backward(Var output, const Mat& seed);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
  };

  void ensure_grad(Node& node);
  Var push(Mat value, bool requires_grad, Backward backward);
  void check_owner(Var v) const;

  std::vector<Node> nodes_;
};

}  // namespace dcgl::diff
