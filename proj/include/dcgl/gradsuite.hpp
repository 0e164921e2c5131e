#pragma once

#include <cstdint>
#include <vector>

#include "dcgl/config.hpp"
#include "dcgl/diff/kernels.hpp"
#include "dcgl/model.hpp"

namespace dcgl::grad {

struct SuiteOptions {
  std::size_t trials = 20;
  std::uint64_t seed = 1;
  double eps = 1e-5;
  double tol = 1e-4;
};

struct SuiteResult {
  std::vector<diff::GradReport> reports;
  double seconds = 0;
  bool pass() const;
};

// Five users, six items, four attribute entities, two relations, d_llm 12.
model::DataBundle toy_bundle();
// d = 8, one layer combine mode per call; every loss weight active.
train::TrainConfig toy_config();

// Finite-difference checks for every differentiable operation and for the
// composed losses of the model.
SuiteResult run_gradient_suite(const SuiteOptions& options = {});

}  // namespace dcgl::grad
