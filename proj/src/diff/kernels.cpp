#include "dcgl/diff/kernels.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <sstream>

#include "dcgl/error.hpp"
#include "dcgl/rng.hpp"

namespace dcgl::diff {
namespace {
std::atomic<std::uint64_t> g_degenerate_cosine{0};
}

std::vector<double> softmax_row(std::span<const double> logits) {
  DCGL_EXPECT(!logits.empty(), "softmax_row: empty input");
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double z = 0;
  for (std::size_t k = 0; k < logits.size(); ++k) z += (out[k] = std::exp(logits[k] - mx));
  for (auto& v : out) v /= z;
  return out;
}

double leaky_relu(double x, double slope) { return x >= 0 ? x : slope * x; }

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double cosine_sim(std::span<const double> a, std::span<const double> b) {
  DCGL_EXPECT(a.size() == b.size(), "cosine_sim: length mismatch");
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0 || bb == 0) {
    if (g_degenerate_cosine.fetch_add(1) == 0)
      std::clog << "warning: cosine similarity of a zero vector defined as 0\n";
    return 0.0;
  }
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), -1.0, 1.0);
}

std::uint64_t degenerate_cosine_count() { return g_degenerate_cosine.load(); }

Kernel tape_kernel(std::string name, std::size_t arity,
                   std::function<Var(Tape&, std::span<const Var>)> build) {
  Kernel k;
  k.name = std::move(name);
  k.arity = arity;
  k.forward = [build, arity](std::span<const Mat> inputs) -> Mat {
    DCGL_EXPECT(inputs.size() == arity, "kernel arity mismatch");
    Tape tape;
    std::vector<Var> vars;
    for (const auto& m : inputs) vars.push_back(tape.constant(m));
    return build(tape, vars).value();
  };
  k.backward = [build, arity](std::span<const Mat> inputs, const Mat&,
                              const Mat& upstream) -> std::vector<Mat> {
    DCGL_EXPECT(inputs.size() == arity, "kernel arity mismatch");
    Tape tape;
    std::vector<Var> vars;
    for (const auto& m : inputs) vars.push_back(tape.variable(m));
    Var out = build(tape, vars);
    tape.backward(out, upstream);
    std::vector<Mat> grads;
    for (auto v : vars) grads.push_back(tape.grad(v));
    return grads;
  };
  return k;
}

GradReport check_gradient(const Kernel& kernel, std::span<const Mat> inputs, double eps,
                          double tol, std::uint64_t upstream_seed) {
  DCGL_EXPECT(eps > 0 && eps <= 1e-2, "check_gradient: eps must be in (0, 1e-2]");
  DCGL_EXPECT(inputs.size() == kernel.arity, "check_gradient: arity mismatch");
  GradReport report;
  report.kernel = kernel.name;
  report.trials = 1;
  for (const auto& m : inputs) {
    if (!m.allFinite()) {
      report.detail = "non-finite input";
      return report;
    }
  }

  std::vector<Mat> x(inputs.begin(), inputs.end());
  const Mat out = kernel.forward(x);
  if (!out.allFinite()) {
    report.detail = "non-finite forward value";
    report.max_rel_error = std::numeric_limits<double>::infinity();
    return report;
  }
  Mat upstream = Mat::Ones(out.rows(), out.cols());
  if (out.size() > 1) {
    Rng rng = make_rng(upstream_seed, "upstream");
    for (Eigen::Index k = 0; k < upstream.size(); ++k) upstream.data()[k] = 2 * uniform_unit(rng) - 1;
  }
  const auto analytic = kernel.backward(x, out, upstream);
  DCGL_EXPECT(analytic.size() == x.size(), "check_gradient: backward returned wrong arity");

  auto objective = [&]() { return kernel.forward(x).cwiseProduct(upstream).sum(); };
  double worst = 0;
  std::ostringstream where;
  for (std::size_t i = 0; i < x.size(); ++i) {
    DCGL_EXPECT(analytic[i].rows() == x[i].rows() && analytic[i].cols() == x[i].cols(),
                "check_gradient: gradient shape mismatch");
    for (Eigen::Index k = 0; k < x[i].size(); ++k) {
      double& xi = x[i].data()[k];
      const double saved = xi;
      xi = saved + eps;
      const double fp = objective();
      xi = saved - eps;
      const double fm = objective();
      xi = saved;
      const double numeric = (fp - fm) / (2 * eps);
      const double a = analytic[i].data()[k];
      if (!std::isfinite(numeric)) {
        report.detail = "non-finite forward value";
        report.max_rel_error = std::numeric_limits<double>::infinity();
        return report;
      }
      const double rel = std::abs(a - numeric) / std::max({1.0, std::abs(a), std::abs(numeric)});
      if (rel > worst) {
        worst = rel;
        where.str("");
        where << "input " << i << " coord " << k << ": analytic " << a << " numeric " << numeric;
      }
    }
  }
  report.max_rel_error = worst;
  report.pass = worst <= tol;
  report.detail = where.str();
  return report;
}

GradReport merge_reports(std::span<const GradReport> trials, double tol) {
  GradReport r;
  if (trials.empty()) return r;
  r.kernel = trials.front().kernel;
  r.pass = true;
  for (const auto& t : trials) {
    r.trials += t.trials;
    if (!t.pass) r.pass = false;
    if (t.max_rel_error >= r.max_rel_error) {
      r.max_rel_error = t.max_rel_error;
      r.detail = t.detail;
    }
  }
  r.pass = r.pass && r.max_rel_error <= tol;
  return r;
}

}  // namespace dcgl::diff
