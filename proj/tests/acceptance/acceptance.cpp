// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
// failure. `--only name[,name]` runs a subset; `--verbose` prints details.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <functional>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "dcgl/checkpoint.hpp"
#include "dcgl/corpus.hpp"
#include "dcgl/evalkit.hpp"
#include "dcgl/fusion.hpp"
#include "dcgl/gradsuite.hpp"
#include "dcgl/kg_encoder.hpp"
#include "dcgl/ssl.hpp"
#include "dcgl/synth.hpp"
#include "dcgl/trainer.hpp"
#include "dcgl/translate.hpp"

using namespace dcgl;
using diff::Mat;
using diff::Tape;
using Clock = std::chrono::steady_clock;

namespace {

bool verbose = false;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string summary;
};

std::string fmt(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------- gradients

Outcome gradient_suite() {
  auto r = grad::run_gradient_suite();
  double worst = 0;
  std::size_t min_trials = SIZE_MAX;
  std::string failed;
  for (const auto& k : r.reports) {
    worst = std::max(worst, k.max_rel_error);
    min_trials = std::min(min_trials, k.trials);
    if (!k.pass) failed += " " + k.kernel;
    if (verbose) std::cout << "    " << k.kernel << " " << k.max_rel_error << "\n";
  }
  Outcome o;
  o.pass = r.pass() && r.seconds < 60 && min_trials >= 20;
  o.summary = std::to_string(r.reports.size()) + " operations, >= " + std::to_string(min_trials) +
              " trials each, max rel error " + fmt(worst, 3) + ", " + fmt(r.seconds, 3) + " s" +
              (failed.empty() ? "" : ", failed:" + failed);
  return o;
}

// ---------------------------------------------------------------- oracles

Outcome oracles() {
  constexpr int kInstances = 250;
  std::mt19937_64 rng(20261017);
  std::uniform_real_distribution<double> unit(0, 1);
  double err_nce = 0, err_metric = 0, err_transe = 0, err_phi = 0, err_gate = 0;

  for (int t = 0; t < kInstances; ++t) {
    const Eigen::Index n = 2 + t % 15, d = 1 + t % 9;
    Mat z1 = fixture::random_mat(rng, n, d), z2 = fixture::random_mat(rng, n, d);
    const double tau = 0.05 + unit(rng);
    for (bool inc : {false, true}) {
      const double got =
          ssl::info_nce(z1, z2, tau, inc ? ssl::Denominator::include_positive : ssl::Denominator::exclude_positive);
      const double want = oracle::info_nce(fixture::rows_of(z1), fixture::rows_of(z2), tau, inc);
      err_nce = std::max(err_nce, std::fabs(got - want) / std::max(1.0, std::fabs(want)));
    }

    std::vector<double> scores(60);
    for (auto& s : scores) s = std::floor(unit(rng) * 25);  // ties on purpose
    std::set<corpus::Id> excluded, relevant;
    for (int k = 0; k < 6; ++k) excluded.insert(static_cast<corpus::Id>(rng() % 60));
    const int nrel = 1 + t % 10;
    while (static_cast<int>(relevant.size()) < nrel) {
      const auto i = static_cast<corpus::Id>(rng() % 60);
      if (!excluded.count(i)) relevant.insert(i);
    }
    std::vector<corpus::Id> ex(excluded.begin(), excluded.end()), rel(relevant.begin(), relevant.end());
    const auto ranked = eval::rank_items(scores, ex);
    if (ranked != oracle::rank(scores, excluded)) err_metric = std::max(err_metric, 1.0);
    for (std::size_t k : {std::size_t{1}, std::size_t{5}, std::size_t{20}, 1 + rng() % 60}) {
      err_metric = std::max(err_metric, std::fabs(*eval::recall_at_k(ranked, rel, k) - oracle::recall(ranked, relevant, k)));
      err_metric = std::max(err_metric, std::fabs(*eval::ndcg_at_k(ranked, rel, k) - oracle::ndcg(ranked, relevant, k)));
    }

    std::vector<double> h(static_cast<std::size_t>(d)), r(h.size()), tt(h.size());
    for (std::size_t k = 0; k < h.size(); ++k) {
      h[k] = 2 * unit(rng) - 1;
      r[k] = 2 * unit(rng) - 1;
      tt[k] = 2 * unit(rng) - 1;
    }
    err_transe = std::max(err_transe, std::fabs(translate::transe_distance(h, r, tt) - oracle::transe(h, r, tt)));

    const auto max_freq = 1 + rng() % 5000;
    const auto freq = rng() % (max_freq + 1);
    err_phi = std::max(err_phi, std::fabs(corpus::log_normalized_frequency(freq, max_freq) -
                                          oracle::phi(static_cast<double>(freq), static_cast<double>(max_freq))));

    std::vector<double> xi(static_cast<std::size_t>(d)), xl(xi.size()), w(2 * xi.size() + 1);
    for (auto& v : xi) v = 2 * unit(rng) - 1;
    for (auto& v : xl) v = 2 * unit(rng) - 1;
    for (auto& v : w) v = 2 * unit(rng) - 1;
    const double ph = unit(rng), b = 2 * unit(rng) - 1;
    const double gu = fusion::gate_weight(xi, xl, ph, w, b);
    err_gate = std::max(err_gate, std::fabs(gu - oracle::gate(xi, xl, ph, w, b)));
    const double gi = unit(rng), s_id = 4 * unit(rng) - 2, s_llm = 4 * unit(rng) - 2;
    double alpha = 0, alpha_ref = 0;
    const double y = fusion::predict_score(s_id, s_llm, gu, gi, &alpha);
    err_gate = std::max(err_gate, std::fabs(y - oracle::fused_score(s_id, s_llm, gu, gi, &alpha_ref)));
    err_gate = std::max(err_gate, std::fabs(alpha - alpha_ref));
  }
  // the tape version of predict_score against the same reference
  for (int t = 0; t < kInstances; ++t) {
    Tape tape;
    Mat ui = fixture::random_mat(rng, 3, 4), ii = fixture::random_mat(rng, 3, 4);
    Mat ul = fixture::random_mat(rng, 3, 4), il = fixture::random_mat(rng, 3, 4);
    Mat gu = fixture::random_mat(rng, 3, 1, 0.001, 0.999), gi = fixture::random_mat(rng, 3, 1, 0.001, 0.999);
    auto s = fusion::predict_score(tape.constant(ui), tape.constant(ii), tape.constant(ul), tape.constant(il),
                                   tape.constant(gu), tape.constant(gi));
    for (int r = 0; r < 3; ++r) {
      const double want = oracle::fused_score(ui.row(r).dot(ii.row(r)), ul.row(r).dot(il.row(r)), gu(r, 0), gi(r, 0));
      err_gate = std::max(err_gate, std::fabs(s.score.value()(r, 0) - want));
    }
  }

  Outcome o;
  o.pass = err_nce <= 1e-10 && err_metric <= 1e-12 && err_transe <= 1e-10 && err_phi <= 1e-10 && err_gate <= 1e-10;
  o.summary = std::to_string(kInstances) + " instances each; max error infonce " + fmt(err_nce, 2) + ", recall/ndcg " +
              fmt(err_metric, 2) + ", transe " + fmt(err_transe, 2) + ", phi " + fmt(err_phi, 2) + ", gate/score " +
              fmt(err_gate, 2);
  return o;
}

// ---------------------------------------------------------------- invariants

// |kept - n p| <= 3 sqrt(n p (1 - p)), pooled over repeated draws until n >= 10000.
bool within_three_sigma(double kept, double n, double p) {
  return std::fabs(kept - n * p) <= 3 * std::sqrt(n * p * (1 - p)) + 1e-9;
}

Outcome invariants() {
  constexpr int kCorpora = 50;
  std::mt19937_64 rng(7);
  double worst_attention = 0, worst_bound = 0, worst_forms = 0;
  int keep_failures = 0, split_failures = 0, filter_failures = 0;
  std::size_t attention_rows = 0, scored_pairs = 0;

  for (int c = 0; c < kCorpora; ++c) {
    const std::size_t users = 20 + rng() % 40, items = 15 + rng() % 40, entities = items + 5 + rng() % 30;
    auto graph = fixture::random_graph(rng, users, items, 4 + rng() % 20);
    auto kg = fixture::random_kg(rng, items, entities, 2 + rng() % 4, 30 + rng() % 120);

    // filter fixed point and split partition
    const std::size_t min = rng() % 10;
    auto filtered = corpus::filter_graph(graph, min);
    for (const auto& adj : filtered.user_adj)
      if (adj.size() < min) ++filter_failures;
    if (corpus::filter_graph(filtered, min).edges != filtered.edges) ++filter_failures;
    auto split = corpus::split_interactions(filtered, {}, static_cast<std::uint64_t>(c));
    std::vector<int> cover(filtered.edges.size(), 0);
    for (auto k : split.train_idx) ++cover[k];
    for (auto k : split.validation_idx) ++cover[k];
    for (auto k : split.test_idx) ++cover[k];
    if (!std::all_of(cover.begin(), cover.end(), [](int v) { return v == 1; })) ++split_failures;
    for (std::size_t u = 0; u < filtered.num_users; ++u)
      if (split.train_items[u].empty()) ++split_failures;

    // attention rows
    const Eigen::Index d = 4 + static_cast<Eigen::Index>(rng() % 6);
    auto index = kg::KgIndex::build(kg);
    {
      Tape tape;
      auto out = kg::rgat_layer_detailed(tape.variable(fixture::random_mat(rng, static_cast<Eigen::Index>(entities), d)),
                                         tape.variable(fixture::random_mat(rng, static_cast<Eigen::Index>(kg.num_relations), d)),
                                         tape.variable(fixture::random_mat(rng, d, 2 * d, -2, 2)), index);
      const Mat& a = out.attention.value();
      for (std::size_t i = 0; i < items; ++i) {
        if (index.offsets[i] == index.offsets[i + 1]) continue;
        double s = 0;
        for (auto k = index.offsets[i]; k < index.offsets[i + 1]; ++k) s += a(static_cast<Eigen::Index>(k), 0);
        worst_attention = std::max(worst_attention, std::fabs(s - 1));
        ++attention_rows;
      }
    }

    // fused score bounds and the two printed score forms
    {
      Tape tape;
      const Eigen::Index n = 64;
      Mat ui = fixture::random_mat(rng, n, d), ii = fixture::random_mat(rng, n, d);
      Mat ul = fixture::random_mat(rng, n, d), il = fixture::random_mat(rng, n, d);
      Mat gu = fixture::random_mat(rng, n, 1, 1e-4, 1 - 1e-4), gi = fixture::random_mat(rng, n, 1, 1e-4, 1 - 1e-4);
      auto s = fusion::predict_score(tape.constant(ui), tape.constant(ii), tape.constant(ul), tape.constant(il),
                                     tape.constant(gu), tape.constant(gi));
      Mat fu = fusion::fuse(tape.constant(ui), tape.constant(ul), tape.constant(gu)).value();
      Mat fi = fusion::fuse(tape.constant(ii), tape.constant(il), tape.constant(gi)).value();
      for (Eigen::Index r = 0; r < n; ++r) {
        const double sid = ui.row(r).dot(ii.row(r)), sllm = ul.row(r).dot(il.row(r));
        const double y = s.score.value()(r, 0);
        worst_bound = std::max({worst_bound, std::min(sid, sllm) - y, y - std::max(sid, sllm)});
        worst_forms = std::max(worst_forms, std::fabs(y - fu.row(r).dot(fi.row(r)) / s.alpha.value()(r, 0)));
        ++scored_pairs;
      }
    }

    // dropout keep rates
    const double rho = 0.1 + 0.8 * static_cast<double>(rng() % 1000) / 1000.0;
    Rng kg_rng = make_rng(static_cast<std::uint64_t>(c), "kg-drop");
    double kept = 0, trials = 0;
    while (trials < 10000) {
      kept += static_cast<double>(ssl::drop_edges_kg(kg, rho, kg_rng).triplets.size());
      trials += static_cast<double>(kg.triplets.size());
    }
    if (!within_three_sigma(kept, trials, 1 - rho)) ++keep_failures;

    ssl::StabilityScores scores(items);
    for (auto& s : scores) s = static_cast<double>(rng() % 1001) / 1000.0;
    const double mu = 0.2 + 0.8 * static_cast<double>(rng() % 1000) / 1000.0;
    Rng ui_rng = make_rng(static_cast<std::uint64_t>(c), "ui-drop");
    double expected = 0, variance = 0, kept_ui = 0, draws = 0;
    while (draws < 10000) {
      kept_ui += static_cast<double>(ssl::stab_adaptive_drop(std::span<const corpus::Edge>(graph.edges), scores, mu, ui_rng).size());
      for (const auto& e : graph.edges) {
        const double p = mu * scores[e.item];
        expected += p;
        variance += p * (1 - p);
      }
      draws += static_cast<double>(graph.edges.size());
    }
    if (std::fabs(kept_ui - expected) > 3 * std::sqrt(variance) + 1e-9) ++keep_failures;
  }

  Outcome o;
  o.pass = worst_attention <= 1e-9 && worst_bound <= 1e-12 && worst_forms <= 1e-9 && keep_failures == 0 &&
           split_failures == 0 && filter_failures == 0;
  o.summary = std::to_string(kCorpora) + " corpora; attention |sum-1| " + fmt(worst_attention, 2) + " over " +
              std::to_string(attention_rows) + " rows; score bound excess " + fmt(std::max(0.0, worst_bound), 2) +
              ", form gap " + fmt(worst_forms, 2) + " over " + std::to_string(scored_pairs) +
              " pairs; keep-rate failures " + std::to_string(keep_failures) + "/" + std::to_string(2 * kCorpora) +
              "; split failures " + std::to_string(split_failures) + "; filter failures " +
              std::to_string(filter_failures);
  return o;
}

// ---------------------------------------------------------------- training criteria

corpus::SynthConfig benchmark(std::uint64_t seed, bool heterogeneous) {
  corpus::SynthConfig s;
  s.num_users = 200;
  s.num_items = 300;
  s.seed = seed;
  s.semantic_noise_by_frequency = heterogeneous;
  return s;
}

train::TrainConfig acceptance_config(std::uint64_t seed) {
  train::TrainConfig c;
  c.seed = seed;
  return c;
}

Outcome memorization() {
  auto syn = corpus::gen_synthetic(benchmark(1, false));
  auto data = model::DataBundle::from_synthetic(syn);
  auto config = acceptance_config(1);
  config.max_epochs = 300;
  const auto t0 = Clock::now();
  train::Trainer trainer(config, data);
  double recall = 0;
  std::size_t epoch = 0;
  while (epoch < config.max_epochs && recall < 0.9) {
    trainer.run_epoch();
    ++epoch;
    recall = eval::evaluate(trainer.representations(), data.split, eval::Target::train, {50}).recall[0];
    if (verbose && epoch % 10 == 0) std::cout << "    epoch " << epoch << " train recall@50 " << recall << "\n";
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = recall >= 0.9 && secs < 300;
  o.summary = "training Recall@50 " + fmt(recall) + " after " + std::to_string(epoch) + " epochs, " + fmt(secs, 3) +
              " s on one thread";
  return o;
}

struct RunResult {
  double best_validation = 0;
  eval::Correlation user, item;
  std::size_t epochs = 0;
};

train::TrainConfig gate_config(std::uint64_t seed) {
  auto c = acceptance_config(seed);
  c.max_epochs = 200;
  c.patience = 30;
  return c;
}

RunResult train_and_export(const model::DataBundle& data, const train::TrainConfig& config) {
  train::Trainer trainer(config, data);
  auto fit = trainer.fit();
  auto reps = model::represent(fit.best_params, data, config);
  auto gates = eval::export_gates(reps, data.freq);
  return {fit.best_validation, gates.user_correlation, gates.item_correlation, fit.history.size()};
}

Outcome gate_correlation() {
  int passing = 0;
  std::string detail;
  for (std::uint64_t seed : {1, 2, 3}) {
    auto data = model::DataBundle::from_synthetic(corpus::gen_synthetic(benchmark(seed, true)));
    auto r = train_and_export(data, gate_config(seed));
    const bool ok = r.user.defined && r.item.defined && r.user.value >= 0.3 && r.item.value >= 0.3;
    passing += ok;
    detail += " seed " + std::to_string(seed) + ": user " + fmt(r.user.value, 3) + ", item " + fmt(r.item.value, 3) +
              (ok ? "" : " (below)") + ";";
  }
  Outcome o;
  o.pass = passing >= 2;
  o.summary = std::to_string(passing) + "/3 seeds reach Spearman >= 0.3 on both sides;" + detail;
  return o;
}

Outcome ablation_direction() {
  const auto data = model::DataBundle::from_synthetic(corpus::gen_synthetic(benchmark(1, true)));
  const std::vector<train::Ablation> variants = {train::Ablation::none,   train::Ablation::no_llm,
                                                 train::Ablation::no_id,  train::Ablation::cat,
                                                 train::Ablation::no_freq, train::Ablation::no_aug,
                                                 train::Ablation::no_align};
  std::vector<double> med(variants.size());
  std::string table;
  for (std::size_t v = 0; v < variants.size(); ++v) {
    std::vector<double> vals;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto c = gate_config(seed);
      c.ablation = variants[v];
      vals.push_back(train_and_export(data, c).best_validation);
    }
    med[v] = median(vals);
    table += std::string(v ? ", " : " ") + std::string(train::to_string(variants[v])) + " " + fmt(med[v]);
    if (verbose) {
      std::cout << "    " << train::to_string(variants[v]) << ":";
      for (double x : vals) std::cout << " " << x;
      std::cout << "\n";
    }
  }
  Outcome o;
  o.pass = med[0] >= med[4] && med[0] >= med[3];
  o.summary = "median validation Recall@50 over 5 seeds:" + table;
  return o;
}

Outcome determinism() {
  auto data = model::DataBundle::from_synthetic(corpus::gen_synthetic(benchmark(5, true)));
  auto config = acceptance_config(11);
  config.max_epochs = 5;
  auto run = [&](std::string& history, std::string& metrics, ckpt::Checkpoint& best) {
    train::Trainer trainer(config, data);
    auto fit = trainer.fit();
    history.clear();
    for (const auto& r : fit.history) history += train::to_json_line(r) + "\n";
    auto reps = model::represent(fit.best_params, data, config);
    auto report = eval::evaluate(reps, data.split, eval::Target::test, {50, 100});
    auto gates = eval::export_gates(reps, data.freq);
    std::vector<std::pair<eval::GroupSpec, std::vector<eval::GroupRow>>> groups;
    for (const auto& spec : {eval::default_user_groups(), eval::default_item_groups()})
      groups.emplace_back(spec, eval::group_report(report, data.freq, spec));
    metrics = eval::metrics_json(report, to_hex(config.hash()), groups, &gates);
    best = fit.best_checkpoint;
  };
  std::string h1, h2, m1, m2;
  ckpt::Checkpoint c1, c2;
  run(h1, m1, c1);
  run(h2, m2, c2);

  std::stringstream bytes;
  ckpt::write_checkpoint(bytes, c1);
  const std::string first = bytes.str();
  auto loaded = ckpt::read_checkpoint(bytes);
  std::stringstream again;
  ckpt::write_checkpoint(again, loaded);

  train::Trainer resumed(config, data);
  resumed.restore(loaded);
  const bool params_equal = [&] {
    for (const auto& n : resumed.params().names())
      if (resumed.params().at(n) != c1.matrix("param." + n)) return false;
    return true;
  }();

  Outcome o;
  o.pass = h1 == h2 && m1 == m2 && c1 == c2 && again.str() == first && loaded == c1 && params_equal;
  o.summary = std::string("history ") + (h1 == h2 ? "identical" : "DIFFERS") + " (" + std::to_string(h1.size()) +
              " bytes), metrics JSON " + (m1 == m2 ? "identical" : "DIFFERS") + ", checkpoint round trip " +
              (again.str() == first && loaded == c1 && params_equal ? "bitwise" : "NOT bitwise") + " (" +
              std::to_string(first.size()) + " bytes)";
  return o;
}

Outcome linear_scaling() {
  auto base = benchmark(3, true);
  auto doubled = base;
  doubled.num_users *= 2;
  doubled.num_relations *= 2;
  doubled.num_entities *= 2;
  auto small = model::DataBundle::from_synthetic(corpus::gen_synthetic(base));
  auto large = model::DataBundle::from_synthetic(corpus::gen_synthetic(doubled));

  auto per_epoch = [](const model::DataBundle& data) {
    auto c = acceptance_config(1);
    c.batch_size = data.split.train.size();
    c.max_epochs = 6;
    c.patience = 0;
    train::Trainer trainer(c, data);
    auto fit = trainer.fit();
    std::vector<double> t(fit.epoch_seconds.begin() + 1, fit.epoch_seconds.end());
    return median(t);
  };
  std::vector<double> ratios;
  std::string detail;
  for (int run = 0; run < 3; ++run) {
    const double a = per_epoch(small), b = per_epoch(large);
    ratios.push_back(b / a);
    detail += " " + fmt(a * 1000, 3) + " ms -> " + fmt(b * 1000, 3) + " ms;";
  }
  const double edges_ratio = static_cast<double>(large.split.train.size()) / static_cast<double>(small.split.train.size());
  const double trip_ratio =
      static_cast<double>(large.kg.triplets.size()) / static_cast<double>(small.kg.triplets.size());
  const double worst = *std::max_element(ratios.begin(), ratios.end());
  Outcome o;
  o.pass = worst <= 2.6;
  o.summary = "train edges x" + fmt(edges_ratio, 3) + ", triplets x" + fmt(trip_ratio, 3) +
              ", epoch time ratio per run " + fmt(ratios[0], 3) + "/" + fmt(ratios[1], 3) + "/" + fmt(ratios[2], 3) +
              " (max " + fmt(worst, 3) + ");" + detail;
  return o;
}

struct Criterion {
  std::string name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  std::set<std::string> only;
  for (int a = 1; a < argc; ++a) {
    if (std::strcmp(argv[a], "--verbose") == 0) {
      verbose = true;
    } else if (std::strcmp(argv[a], "--only") == 0 && a + 1 < argc) {
      std::stringstream s(argv[++a]);
      std::string tok;
      while (std::getline(s, tok, ',')) only.insert(tok);
    }
  }
  const std::vector<Criterion> criteria = {
      {"gradient-suite", gradient_suite},   {"exact-oracles", oracles},
      {"invariants", invariants},           {"memorization", memorization},
      {"gate-frequency", gate_correlation}, {"ablation-direction", ablation_direction},
      {"determinism", determinism},         {"linear-scaling", linear_scaling},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.name)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    failures += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << c.name << " [" << fmt(seconds_since(t0), 3) << " s] " << o.summary
              << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
