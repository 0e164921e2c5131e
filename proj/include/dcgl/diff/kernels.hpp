#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dcgl/diff/tape.hpp"

namespace dcgl::diff {

// Negative slope used by every LeakyReLU in the model.
inline constexpr double kLeakySlope = 0.2;

// Max-shifted softmax. Throws ContractViolation on empty input.
std::vector<double> softmax_row(std::span<const double> logits);
double leaky_relu(double x, double slope = kLeakySlope);
// Stable for large |x|.
double sigmoid(double x);
// Zero vectors give 0 and bump degenerate_cosine_count().
double cosine_sim(std::span<const double> a, std::span<const double> b);
std::uint64_t degenerate_cosine_count();

// A differentiable function of one or more matrices with an explicit
// vector-Jacobian product.
struct Kernel {
  std::string name;
  std::size_t arity = 0;
  std::function<Mat(std::span<const Mat>)> forward;
  // (inputs, output, upstream gradient) -> one gradient per input
  std::function<std::vector<Mat>(std::span<const Mat>, const Mat&, const Mat&)> backward;
};

// Wraps a tape-built function as a Kernel. Every input is bound as a tape
// variable; the backward pass seeds the output with the upstream gradient.
Kernel tape_kernel(std::string name, std::size_t arity,
                   std::function<Var(Tape&, std::span<const Var>)> build);

struct GradReport {
  std::string kernel;
  double max_rel_error = 0;
  std::size_t trials = 0;
  bool pass = false;
  std::string detail;
};

// Compares the kernel's backward output with central differences of
// J(x) = <upstream, f(x)> coordinate-wise. Relative error per coordinate is
// |a - n| / max(1, |a|, |n|). The upstream gradient is 1 for scalar outputs
// and seeded uniform noise otherwise.
GradReport check_gradient(const Kernel& kernel, std::span<const Mat> inputs, double eps,
                          double tol, std::uint64_t upstream_seed = 1);

// Folds per-trial reports for one kernel into a single report.
GradReport merge_reports(std::span<const GradReport> trials, double tol);

}  // namespace dcgl::diff
