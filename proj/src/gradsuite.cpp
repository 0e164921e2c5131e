#include "dcgl/gradsuite.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <string>

#include "dcgl/cf_propagation.hpp"
#include "dcgl/fusion.hpp"
#include "dcgl/kg_encoder.hpp"
#include "dcgl/rng.hpp"
#include "dcgl/ssl.hpp"
#include "dcgl/trainer.hpp"
#include "dcgl/translate.hpp"

namespace dcgl::grad {

using diff::Mat;
using diff::Tape;
using diff::Var;

bool SuiteResult::pass() const {
  for (const auto& r : reports)
    if (!r.pass) return false;
  return !reports.empty();
}

namespace {

constexpr std::size_t kD = 8;

Mat random_mat(Rng& rng, Eigen::Index rows, Eigen::Index cols, double lo = -1, double hi = 1) {
  Mat m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = lo + (hi - lo) * uniform_unit(rng);
  return m;
}

// Values bounded away from zero so that |x| and LeakyReLU kinks are not
// straddled by the finite-difference step.
Mat away_from_zero(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Mat m = random_mat(rng, rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    double& v = m.data()[k];
    v = (v < 0 ? -1.0 : 1.0) * (0.05 + std::abs(v));
  }
  return m;
}

using Generator = std::function<std::vector<Mat>(Rng&)>;

struct Case {
  diff::Kernel kernel;
  Generator inputs;
};

Case make_case(std::string name, std::size_t arity, std::function<Var(Tape&, std::span<const Var>)> build,
               Generator gen) {
  return {diff::tape_kernel(std::move(name), arity, std::move(build)), std::move(gen)};
}

Generator uniform_inputs(std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes) {
  return [shapes](Rng& rng) {
    std::vector<Mat> out;
    for (auto [r, c] : shapes) out.push_back(random_mat(rng, r, c));
    return out;
  };
}

std::vector<Case> primitive_cases() {
  std::vector<Case> cases;
  auto unary = [&](std::string name, std::function<Var(Var)> f, Generator gen) {
    cases.push_back(make_case(std::move(name), 1, [f](Tape&, std::span<const Var> x) { return f(x[0]); },
                              std::move(gen)));
  };
  auto binary = [&](std::string name, std::function<Var(Var, Var)> f, Generator gen) {
    cases.push_back(make_case(std::move(name), 2,
                              [f](Tape&, std::span<const Var> x) { return f(x[0], x[1]); }, std::move(gen)));
  };
  const auto m34 = uniform_inputs({{3, 4}});
  const auto two34 = uniform_inputs({{3, 4}, {3, 4}});
  binary("add", diff::add, two34);
  binary("sub", diff::sub, two34);
  binary("mul", diff::mul, two34);
  binary("div", diff::div, [](Rng& rng) {
    return std::vector<Mat>{random_mat(rng, 3, 4), random_mat(rng, 3, 4, 0.5, 2.0)};
  });
  unary("scale", [](Var a) { return diff::scale(a, -1.7); }, m34);
  unary("add_scalar", [](Var a) { return diff::add_scalar(a, 0.3); }, m34);
  unary("one_minus", diff::one_minus, m34);
  binary("matmul", [](Var a, Var b) { return diff::matmul(a, b); }, uniform_inputs({{3, 4}, {4, 5}}));
  binary("matmul_ta", [](Var a, Var b) { return diff::matmul(a, b, true, false); }, uniform_inputs({{4, 3}, {4, 5}}));
  binary("matmul_tb", [](Var a, Var b) { return diff::matmul(a, b, false, true); }, uniform_inputs({{3, 4}, {5, 4}}));
  binary("matmul_tab", [](Var a, Var b) { return diff::matmul(a, b, true, true); }, uniform_inputs({{4, 3}, {5, 4}}));
  binary("add_row", diff::add_row, uniform_inputs({{3, 4}, {1, 4}}));
  binary("add_row_column_bias", diff::add_row, uniform_inputs({{3, 4}, {4, 1}}));
  unary("leaky_relu", [](Var a) { return diff::leaky_relu(a, diff::kLeakySlope); },
        [](Rng& rng) { return std::vector<Mat>{away_from_zero(rng, 3, 4)}; });
  unary("sigmoid", [](Var a) { return diff::sigmoid(a); }, [](Rng& rng) { return std::vector<Mat>{random_mat(rng, 3, 4, -4, 4)}; });
  unary("log", [](Var a) { return diff::log(a); }, [](Rng& rng) { return std::vector<Mat>{random_mat(rng, 3, 4, 0.3, 3.0)}; });
  unary("log_sigmoid", diff::log_sigmoid, [](Rng& rng) { return std::vector<Mat>{random_mat(rng, 3, 4, -5, 5)}; });
  unary("abs", diff::abs, [](Rng& rng) { return std::vector<Mat>{away_from_zero(rng, 3, 4)}; });
  unary("sum", diff::sum, m34);
  unary("row_sum", diff::row_sum, m34);
  unary("sum_squares", diff::sum_squares, m34);
  binary("row_dot", diff::row_dot, two34);
  binary("scale_rows", diff::scale_rows, uniform_inputs({{3, 4}, {3, 1}}));
  static const std::vector<diff::Index> rows = {2, 0, 2, 1};
  unary("gather_rows", [](Var a) { return diff::gather_rows(a, rows); }, m34);
  unary("scatter_add_rows", [](Var a) { return diff::scatter_add_rows(a, rows, 5); }, uniform_inputs({{4, 3}}));
  unary("head_rows", [](Var a) { return diff::head_rows(a, 2); }, m34);
  cases.push_back(make_case(
      "concat_cols", 3,
      [](Tape&, std::span<const Var> x) { return diff::concat_cols({x[0], x[1], x[2]}); },
      uniform_inputs({{3, 2}, {3, 4}, {3, 1}})));
  unary("slice_cols", [](Var a) { return diff::slice_cols(a, 1, 2); }, m34);
  static const std::vector<std::size_t> offsets = {0, 3, 4, 8};
  unary("segment_softmax", [](Var a) { return diff::segment_softmax(a, offsets); }, uniform_inputs({{8, 1}}));
  static const diff::SparseOp sparse = [] {
    diff::SpMat m(3, 4);
    std::vector<Eigen::Triplet<double>> t = {{0, 1, 0.5}, {0, 3, -1.25}, {1, 0, 2.0}, {2, 2, 0.75}, {2, 3, 0.1}};
    m.setFromTriplets(t.begin(), t.end());
    return diff::SparseOp::from(std::move(m));
  }();
  unary("spmm", [](Var a) { return diff::spmm(sparse, a); }, uniform_inputs({{4, 5}}));
  unary("l2_normalize_rows", diff::l2_normalize_rows, m34);
  unary("info_nce_logits", [](Var a) { return diff::info_nce_logits(a, false); }, uniform_inputs({{5, 5}}));
  unary("info_nce_logits_inclusive", [](Var a) { return diff::info_nce_logits(a, true); }, uniform_inputs({{5, 5}}));
  return cases;
}

const corpus::KnowledgeGraph& toy_kg() {
  static const corpus::KnowledgeGraph kg = corpus::KnowledgeGraph::from_triplets(
      6, 10, 2, {{0, 0, 6}, {0, 1, 7}, {1, 0, 6}, {2, 1, 8}, {2, 0, 1}, {3, 0, 9}, {3, 1, 7}, {4, 0, 8}, {6, 1, 9}});
  return kg;
}

const std::vector<corpus::Edge>& toy_edges() {
  static const std::vector<corpus::Edge> e = {{0, 0}, {0, 1}, {0, 2}, {1, 1}, {1, 3}, {1, 4}, {2, 0}, {2, 5},
                                              {2, 2}, {3, 3}, {3, 4}, {3, 5}, {4, 0}, {4, 4}, {4, 1}};
  return e;
}

std::vector<Case> model_cases(const SuiteOptions& opts) {
  std::vector<Case> cases;
  const auto index = kg::KgIndex::build(toy_kg());

  // adapter: raw 10 x 12 -> 10 x 8 via d_mid 10
  cases.push_back(make_case(
      "adapter", 5,
      [](Tape&, std::span<const Var> x) { return kg::adapt_semantic(x[0], {x[1], x[2], x[3], x[4]}); },
      uniform_inputs({{10, 12}, {10, 12}, {10, 1}, {kD, 10}, {kD, 1}})));

  cases.push_back(make_case(
      "rgat_stack", 3,
      [index](Tape&, std::span<const Var> x) { return kg::rgat_encode(x[0], x[1], x[2], index, 2); },
      uniform_inputs({{10, kD}, {2, kD}, {kD, 2 * kD}})));

  const auto adj = cf::NormalizedAdjacency::build(5, 6, toy_edges());
  for (auto combine : {cf::LayerCombine::mean, cf::LayerCombine::last}) {
    cases.push_back(make_case(
        combine == cf::LayerCombine::mean ? "lightgcn_stack" : "lightgcn_stack_last", 2,
        [adj, combine](Tape&, std::span<const Var> x) {
          auto p = cf::propagate(x[0], x[1], adj, 2, combine);
          return diff::add(diff::sum_squares(p.users), diff::sum(diff::mul(p.items, p.items)));
        },
        uniform_inputs({{5, kD}, {6, kD}})));
  }

  static const translate::CorruptedBatch transe_batch = {
      {0, 0, 6, 7}, {1, 0, 6, 9}, {2, 1, 8, 3}, {3, 1, 7, 0}, {6, 1, 9, 2}};
  cases.push_back(make_case(
      "transe_loss", 2,
      [](Tape&, std::span<const Var> x) { return translate::transe_loss(transe_batch, x[0], x[1]); },
      [](Rng& rng) {
        // jitter until no coordinate of h + r - t sits near the L1 kink
        while (true) {
          std::vector<Mat> in = {random_mat(rng, 10, kD), random_mat(rng, 2, kD)};
          bool ok = true;
          for (const auto& t : transe_batch)
            for (auto tail : {t.tail, t.corrupted_tail}) {
              const auto diff = in[0].row(t.head) + in[1].row(t.relation) - in[0].row(tail);
              if (diff.cwiseAbs().minCoeff() < 1e-2) ok = false;
            }
          if (ok) return in;
        }
      }));

  for (auto denom : {ssl::Denominator::exclude_positive, ssl::Denominator::include_positive}) {
    const bool inc = denom == ssl::Denominator::include_positive;
    cases.push_back(make_case(
        inc ? "info_nce_inclusive" : "info_nce", 2,
        [denom](Tape&, std::span<const Var> x) { return ssl::info_nce(x[0], x[1], 0.2, denom); },
        uniform_inputs({{6, kD}, {6, kD}})));
  }

  static const std::vector<diff::Index> users = {0, 2, 3}, items = {1, 4, 5, 0};
  cases.push_back(make_case(
      "intra_view_loss", 8,
      [](Tape&, std::span<const Var> x) {
        std::vector<ssl::ChannelViews> orig = {{x[0], x[1]}, {x[4], x[5]}};
        std::vector<ssl::ChannelViews> aug = {{x[2], x[3]}, {x[6], x[7]}};
        return ssl::intra_view_loss(orig, aug, users, items, 0.5);
      },
      uniform_inputs({{5, kD}, {6, kD}, {5, kD}, {6, kD}, {5, kD}, {6, kD}, {5, kD}, {6, kD}})));

  cases.push_back(make_case(
      "align_loss", 6,
      [](Tape&, std::span<const Var> x) { return ssl::align_loss(x[0], x[1], {x[2], x[3]}, {x[4], x[5]}, 0.3); },
      [](Rng& rng) {
        return std::vector<Mat>{random_mat(rng, 5, kD), random_mat(rng, 5, kD), random_mat(rng, kD, kD),
                                random_mat(rng, kD, 1), random_mat(rng, kD, kD), random_mat(rng, kD, 1)};
      }));

  cases.push_back(make_case(
      "gate_weight", 5,
      [](Tape&, std::span<const Var> x) { return fusion::gate_weight(x[0], x[1], x[2], {x[3], x[4]}); },
      [](Rng& rng) {
        return std::vector<Mat>{random_mat(rng, 5, kD), random_mat(rng, 5, kD), random_mat(rng, 5, 1, 0, 1),
                                random_mat(rng, 2 * kD + 1, 1), random_mat(rng, 1, 1)};
      }));

  cases.push_back(make_case(
      "predict_score", 6,
      [](Tape&, std::span<const Var> x) {
        auto s = fusion::predict_score(x[0], x[1], x[2], x[3], diff::sigmoid(x[4]), diff::sigmoid(x[5]));
        return diff::add(s.score, s.alpha);
      },
      uniform_inputs({{5, kD}, {5, kD}, {5, kD}, {5, kD}, {5, 1}, {5, 1}})));

  cases.push_back(make_case(
      "gate_regularization", 3,
      [](Tape&, std::span<const Var> x) {
        return fusion::gate_regularization(diff::sigmoid(x[0]), diff::sigmoid(x[1]), diff::sigmoid(x[2]));
      },
      [](Rng& rng) {
        return std::vector<Mat>{random_mat(rng, 6, 1, -3, 3), random_mat(rng, 6, 1, -3, 3),
                                random_mat(rng, 6, 1, -3, 3)};
      }));

  // End-to-end objective over every model parameter.
  static const model::DataBundle bundle = toy_bundle();
  for (auto ablation : {train::Ablation::none, train::Ablation::cat}) {
    auto cfg = toy_config();
    cfg.ablation = ablation;
    cfg.seed = opts.seed;
    const auto names = model::init_params(cfg, model::dimensions(cfg, bundle)).names();
    std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes;
    {
      const auto p = model::init_params(cfg, model::dimensions(cfg, bundle));
      for (const auto& n : names) shapes.emplace_back(p.at(n).rows(), p.at(n).cols());
    }
    auto main = std::make_shared<model::GraphView>(
        model::GraphView::build(bundle.kg, bundle.graph.num_users, bundle.graph.num_items, bundle.split.train));
    std::vector<corpus::Triplet> kept(bundle.kg.triplets.begin(), bundle.kg.triplets.end() - 3);
    std::vector<corpus::Edge> ui(bundle.split.train.begin() + 2, bundle.split.train.end());
    auto aug = std::make_shared<model::GraphView>(model::GraphView::build(
        corpus::KnowledgeGraph::from_triplets(6, 10, 2, kept), bundle.graph.num_users, bundle.graph.num_items, ui));
    auto observed = train::observed_items(bundle.split);
    Rng rng = make_rng(opts.seed, "gradsuite-batch");
    auto batch = std::make_shared<train::Batch>(train::make_batch(
        train::sample_bpr_triples(bundle.split.train, observed, bundle.graph.num_items, 8, 1, rng), 0));
    cases.push_back(make_case(
        ablation == train::Ablation::none ? "total_loss" : "total_loss_cat", names.size(),
        [cfg, names, main, aug, batch](Tape& tape, std::span<const Var> x) {
          model::Bound p;
          for (std::size_t k = 0; k < names.size(); ++k) p.emplace(names[k], x[k]);
          auto in = model::make_inputs(tape, bundle, cfg);
          train::LossContext ctx{cfg, in, *main, aug.get()};
          return train::total_loss(p, ctx, *batch).total;
        },
        [shapes](Rng& rng) {
          std::vector<Mat> out;
          for (auto [r, c] : shapes) out.push_back(random_mat(rng, r, c, -0.5, 0.5));
          return out;
        }));
  }
  return cases;
}

}  // namespace

model::DataBundle toy_bundle() {
  auto graph = corpus::InteractionGraph::from_edges(5, 6, toy_edges());
  auto split = corpus::split_interactions(graph, {}, 11);
  Rng rng = make_rng(5, "toy-semantic");
  Mat sem = random_mat(rng, 10, 12);
  return model::DataBundle::assemble(std::move(graph), toy_kg(), std::move(split), std::move(sem));
}

train::TrainConfig toy_config() {
  train::TrainConfig c;
  c.dim = kD;
  c.kg_layers = 2;
  c.cf_layers = 2;
  c.lambda_aug = 0.3;
  c.lambda_align = 0.2;
  c.lambda_gate = 0.1;
  c.lambda_reg = 0.01;
  c.tau = 0.5;
  c.bpr_alpha_grad = true;
  c.ssl_batch = 0;
  return c;
}

SuiteResult run_gradient_suite(const SuiteOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  SuiteResult result;
  auto cases = primitive_cases();
  auto more = model_cases(options);
  cases.insert(cases.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
  for (const auto& c : cases) {
    Rng rng = make_rng(options.seed, "gradsuite:" + c.kernel.name);
    std::vector<diff::GradReport> trials;
    for (std::size_t t = 0; t < options.trials; ++t) {
      auto inputs = c.inputs(rng);
      trials.push_back(diff::check_gradient(c.kernel, inputs, options.eps, options.tol,
                                            stream_seed(options.seed, c.kernel.name) + t));
    }
    result.reports.push_back(diff::merge_reports(trials, options.tol));
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace dcgl::grad
