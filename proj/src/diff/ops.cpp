#include "dcgl/diff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "dcgl/error.hpp"

namespace dcgl::diff {
namespace {

void expect_same_shape(Var a, Var b, const char* op) {
  DCGL_EXPECT(a.tape() == b.tape(), std::string(op) + ": operands on different tapes");
  DCGL_EXPECT(a.rows() == b.rows() && a.cols() == b.cols(),
              std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                  std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                  std::to_string(b.cols()));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_log_sigmoid(double x) {
  return x >= 0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

}  // namespace

SparseOp SparseOp::from(SpMat m) {
  m.makeCompressed();
  SpMat t = m.transpose();
  t.makeCompressed();
  return {std::make_shared<const SpMat>(std::move(m)), std::make_shared<const SpMat>(std::move(t))};
}

Var add(Var a, Var b) {
  expect_same_shape(a, b, "add");
  return a.tape()->record(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Var sub(Var a, Var b) {
  expect_same_shape(a, b, "sub");
  return a.tape()->record(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate_with(b, [&](Mat& gb) { gb -= g; });
  });
}

Var mul(Var a, Var b) {
  expect_same_shape(a, b, "mul");
  Mat v = a.value().cwiseProduct(b.value());
  return a.tape()->record(std::move(v), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) { ga += g.cwiseProduct(b.value()); });
    t.accumulate_with(b, [&](Mat& gb) { gb += g.cwiseProduct(a.value()); });
  });
}

Var div(Var a, Var b) {
  expect_same_shape(a, b, "div");
  Mat v = a.value().cwiseQuotient(b.value());
  return a.tape()->record(std::move(v), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) { ga += g.cwiseQuotient(b.value()); });
    t.accumulate_with(b, [&](Mat& gb) {
      gb.array() -= g.array() * a.value().array() / b.value().array().square();
    });
  });
}

Var scale(Var a, double s) {
  return a.tape()->record(a.value() * s, {a}, [a, s](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) { ga += s * g; });
  });
}

Var add_scalar(Var a, double s) {
  Mat v = a.value().array() + s;
  return a.tape()->record(std::move(v), {a}, [a](Tape& t, const Mat& g) { t.accumulate(a, g); });
}

Var one_minus(Var a) { return add_scalar(scale(a, -1.0), 1.0); }

Var matmul(Var a, Var b, bool ta, bool tb) {
  DCGL_EXPECT(a.tape() == b.tape(), "matmul: operands on different tapes");
  const auto inner_a = ta ? a.rows() : a.cols();
  const auto inner_b = tb ? b.cols() : b.rows();
  DCGL_EXPECT(inner_a == inner_b, "matmul: inner dimensions differ (" + std::to_string(inner_a) +
                                      " vs " + std::to_string(inner_b) + ")");
  const Mat& av = a.value();
  const Mat& bv = b.value();
  Mat v;
  if (!ta && !tb) v.noalias() = av * bv;
  else if (ta && !tb) v.noalias() = av.transpose() * bv;
  else if (!ta && tb) v.noalias() = av * bv.transpose();
  else v.noalias() = av.transpose() * bv.transpose();
  return a.tape()->record(std::move(v), {a, b}, [a, b, ta, tb](Tape& t, const Mat& g) {
    const Mat& av = a.value();
    const Mat& bv = b.value();
    // C = op(A) op(B); dop(A) = G op(B)^T, dop(B) = op(A)^T G
    t.accumulate_with(a, [&](Mat& ga) {
      if (!ta) {
        if (!tb) ga.noalias() += g * bv.transpose();
        else ga.noalias() += g * bv;
      } else {
        if (!tb) ga.noalias() += bv * g.transpose();
        else ga.noalias() += bv.transpose() * g.transpose();
      }
    });
    t.accumulate_with(b, [&](Mat& gb) {
      if (!tb) {
        if (!ta) gb.noalias() += av.transpose() * g;
        else gb.noalias() += av * g;
      } else {
        if (!ta) gb.noalias() += g.transpose() * av;
        else gb.noalias() += g.transpose() * av.transpose();
      }
    });
  });
}

Var add_row(Var a, Var bias) {
  const auto n = a.cols();
  DCGL_EXPECT(bias.value().size() == n, "add_row: bias length must equal column count");
  const bool as_row = bias.rows() == 1;
  Mat v = a.value();
  if (as_row) v.rowwise() += bias.value().row(0);
  else v.rowwise() += bias.value().col(0).transpose();
  return a.tape()->record(std::move(v), {a, bias}, [a, bias, as_row](Tape& t, const Mat& g) {
    t.accumulate(a, g);
    t.accumulate_with(bias, [&](Mat& gb) {
      if (as_row) gb.row(0) += g.colwise().sum();
      else gb.col(0) += g.colwise().sum().transpose();
    });
  });
}

Var leaky_relu(Var a, double slope) {
  Mat v = a.value().unaryExpr([slope](double x) { return x >= 0 ? x : slope * x; });
  return a.tape()->record(std::move(v), {a}, [a, slope](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) {
      ga.array() += g.array() * a.value().array().unaryExpr(
                                    [slope](double x) { return x >= 0 ? 1.0 : slope; });
    });
  });
}

Var sigmoid(Var a) {
  Mat v = a.value().unaryExpr(&stable_sigmoid);
  return a.tape()->record(v, {a}, [a, v](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) { ga.array() += g.array() * v.array() * (1.0 - v.array()); });
  });
}

Var log(Var a) {
  Mat v = a.value().array().log();
  return a.tape()->record(std::move(v), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) { ga.array() += g.array() / a.value().array(); });
  });
}

Var log_sigmoid(Var a) {
  Mat v = a.value().unaryExpr(&stable_log_sigmoid);
  return a.tape()->record(std::move(v), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) {
      ga.array() += g.array() * a.value().array().unaryExpr([](double x) { return stable_sigmoid(-x); });
    });
  });
}

Var abs(Var a) {
  Mat v = a.value().cwiseAbs();
  return a.tape()->record(std::move(v), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) {
      ga.array() += g.array() * a.value().array().unaryExpr(
                                    [](double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); });
    });
  });
}

Var sum(Var a) {
  Mat v(1, 1);
  v(0, 0) = a.value().sum();
  return a.tape()->record(std::move(v), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) { ga.array() += g(0, 0); });
  });
}

Var row_sum(Var a) {
  Mat v = a.value().rowwise().sum();
  return a.tape()->record(std::move(v), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) { ga.colwise() += g.col(0); });
  });
}

Var sum_squares(Var a) {
  Mat v(1, 1);
  v(0, 0) = a.value().squaredNorm();
  return a.tape()->record(std::move(v), {a}, [a](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) { ga += (2.0 * g(0, 0)) * a.value(); });
  });
}

Var row_dot(Var a, Var b) {
  expect_same_shape(a, b, "row_dot");
  Mat v = a.value().cwiseProduct(b.value()).rowwise().sum();
  return a.tape()->record(std::move(v), {a, b}, [a, b](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) { ga += g.col(0).asDiagonal() * b.value(); });
    t.accumulate_with(b, [&](Mat& gb) { gb += g.col(0).asDiagonal() * a.value(); });
  });
}

Var scale_rows(Var a, Var v) {
  DCGL_EXPECT(v.cols() == 1 && v.rows() == a.rows(), "scale_rows: v must be m x 1");
  Mat out = v.value().col(0).asDiagonal() * a.value();
  return a.tape()->record(std::move(out), {a, v}, [a, v](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) { ga += v.value().col(0).asDiagonal() * g; });
    t.accumulate_with(v, [&](Mat& gv) { gv.col(0) += g.cwiseProduct(a.value()).rowwise().sum(); });
  });
}

Var gather_rows(Var a, std::span<const Index> rows) {
  const Mat& av = a.value();
  Mat v(static_cast<Eigen::Index>(rows.size()), av.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    DCGL_EXPECT(rows[k] < av.rows(), "gather_rows: index out of range");
    v.row(static_cast<Eigen::Index>(k)) = av.row(rows[k]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return a.tape()->record(std::move(v), {a}, [a, idx = std::move(idx)](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) {
      for (std::size_t k = 0; k < idx.size(); ++k) ga.row(idx[k]) += g.row(static_cast<Eigen::Index>(k));
    });
  });
}

Var scatter_add_rows(Var a, std::span<const Index> rows, Eigen::Index num_rows) {
  DCGL_EXPECT(static_cast<std::size_t>(a.rows()) == rows.size(),
              "scatter_add_rows: one target row per input row");
  Mat v = Mat::Zero(num_rows, a.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    DCGL_EXPECT(rows[k] < num_rows, "scatter_add_rows: index out of range");
    v.row(rows[k]) += a.value().row(static_cast<Eigen::Index>(k));
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return a.tape()->record(std::move(v), {a}, [a, idx = std::move(idx)](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) {
      for (std::size_t k = 0; k < idx.size(); ++k) ga.row(static_cast<Eigen::Index>(k)) += g.row(idx[k]);
    });
  });
}

Var head_rows(Var a, Eigen::Index n) {
  DCGL_EXPECT(n >= 0 && n <= a.rows(), "head_rows: n out of range");
  Mat v = a.value().topRows(n);
  return a.tape()->record(std::move(v), {a}, [a, n](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) { ga.topRows(n) += g; });
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  DCGL_EXPECT(!parts.empty(), "concat_cols: no parts");
  const auto rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (auto p : parts) {
    DCGL_EXPECT(p.rows() == rows, "concat_cols: row counts differ");
    cols += p.cols();
  }
  Mat v(rows, cols);
  Eigen::Index at = 0;
  for (auto p : parts) {
    v.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return parts.front().tape()->record(std::move(v), parts, [parts](Tape& t, const Mat& g) {
    Eigen::Index at = 0;
    for (auto p : parts) {
      const auto c = p.cols();
      t.accumulate_with(p, [&](Mat& gp) { gp += g.middleCols(at, c); });
      at += c;
    }
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  DCGL_EXPECT(start >= 0 && count >= 0 && start + count <= a.cols(), "slice_cols: out of range");
  Mat v = a.value().middleCols(start, count);
  return a.tape()->record(std::move(v), {a}, [a, start, count](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) { ga.middleCols(start, count) += g; });
  });
}

Var segment_softmax(Var a, std::span<const std::size_t> offsets) {
  DCGL_EXPECT(a.cols() == 1, "segment_softmax: input must be a column");
  DCGL_EXPECT(!offsets.empty() && offsets.back() == static_cast<std::size_t>(a.rows()),
              "segment_softmax: offsets must end at the row count");
  const Mat& av = a.value();
  Mat v(av.rows(), 1);
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const auto b = offsets[s], e = offsets[s + 1];
    if (b == e) continue;
    double mx = av(b, 0);
    for (auto k = b + 1; k < e; ++k) mx = std::max(mx, av(k, 0));
    double z = 0;
    for (auto k = b; k < e; ++k) z += (v(k, 0) = std::exp(av(k, 0) - mx));
    for (auto k = b; k < e; ++k) v(k, 0) /= z;
  }
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return a.tape()->record(v, {a}, [a, v, off = std::move(off)](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) {
      for (std::size_t s = 0; s + 1 < off.size(); ++s) {
        double dot = 0;
        for (auto k = off[s]; k < off[s + 1]; ++k) dot += v(k, 0) * g(k, 0);
        for (auto k = off[s]; k < off[s + 1]; ++k) ga(k, 0) += v(k, 0) * (g(k, 0) - dot);
      }
    });
  });
}

Var spmm(const SparseOp& op, Var a) {
  DCGL_EXPECT(op.forward && op.forward->cols() == a.rows(), "spmm: operator width must equal rows");
  Mat v = (*op.forward) * a.value();
  auto tr = op.transpose;
  return a.tape()->record(std::move(v), {a}, [a, tr](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) { ga += (*tr) * g; });
  });
}

Var l2_normalize_rows(Var a) {
  const Mat& av = a.value();
  Eigen::VectorXd inv(av.rows());
  Mat v(av.rows(), av.cols());
  for (Eigen::Index r = 0; r < av.rows(); ++r) {
    const double n = av.row(r).norm();
    inv(r) = n > 0 ? 1.0 / n : 0.0;
    v.row(r) = av.row(r) * inv(r);
  }
  return a.tape()->record(v, {a}, [a, v, inv](Tape& t, const Mat& g) {
    t.accumulate_with(a, [&](Mat& ga) {
      for (Eigen::Index r = 0; r < v.rows(); ++r) {
        if (inv(r) == 0) continue;
        const double proj = v.row(r).dot(g.row(r));
        ga.row(r) += inv(r) * (g.row(r) - proj * v.row(r));
      }
    });
  });
}

Var info_nce_logits(Var logits, bool include_positive) {
  const Mat& L = logits.value();
  const auto n = L.rows();
  DCGL_EXPECT(n == L.cols(), "info_nce_logits: logits must be square");
  DCGL_EXPECT(n >= 2 || include_positive, "info_nce_logits: needs at least 2 rows");
  DCGL_EXPECT(n >= 1, "info_nce_logits: empty batch");
  // softmax over each row's denominator set, kept for the backward pass
  Mat p = Mat::Zero(n, n);
  double loss = 0;
  for (Eigen::Index r = 0; r < n; ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < n; ++c)
      if (include_positive || c != r) mx = std::max(mx, L(r, c));
    double z = 0;
    for (Eigen::Index c = 0; c < n; ++c)
      if (include_positive || c != r) z += (p(r, c) = std::exp(L(r, c) - mx));
    p.row(r) /= z;
    loss -= L(r, r) - (mx + std::log(z));
  }
  Mat v(1, 1);
  v(0, 0) = loss;
  return logits.tape()->record(std::move(v), {logits}, [logits, p](Tape& t, const Mat& g) {
    t.accumulate_with(logits, [&](Mat& gl) {
      gl += g(0, 0) * p;
      gl.diagonal().array() -= g(0, 0);
    });
  });
}

}  // namespace dcgl::diff
