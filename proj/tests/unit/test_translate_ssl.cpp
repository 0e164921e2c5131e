#include <doctest.h>

#include <cmath>
#include <map>
#include <random>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "dcgl/error.hpp"
#include "dcgl/ssl.hpp"
#include "dcgl/translate.hpp"

using namespace dcgl;
using diff::Mat;
using diff::Tape;
using diff::Var;

TEST_CASE("transe_distance") {
  std::vector<double> h = {1, 0}, r = {0, 1}, t = {0, 0};
  CHECK(translate::transe_distance(h, r, t) == 2);
  std::vector<double> t2 = {1, 1};
  CHECK(translate::transe_distance(h, r, t2) == 0);
  std::vector<double> hv = {1.5, 0.5}, tv = {0.5, 0.5};
  CHECK(translate::transe_distance(hv, r, tv) == translate::transe_distance(h, r, std::vector<double>{0, 0}));
}

TEST_CASE("transe pair loss") {
  Tape tape;
  Mat pos(3, 1), neg(3, 1);
  pos << 1, 0, 0;
  neg << 1, 2, 5;
  Mat y = translate::transe_pair_loss(tape.constant(pos), tape.constant(neg)).value();
  CHECK(std::fabs(y(0, 0) - std::log(2.0)) < 1e-15);
  CHECK(std::fabs(y(1, 0) - std::log1p(std::exp(-2.0))) < 1e-15);
  CHECK(y(2, 0) < y(1, 0));
}

TEST_CASE("transe loss matches the distance oracle") {
  std::mt19937_64 rng(3);
  auto kgraph = fixture::random_kg(rng, 5, 9, 2, 12);
  Rng r = make_rng(1, "t");
  auto batch = translate::sample_corrupted(kgraph, 5, r);
  Tape tape;
  Mat e = fixture::random_mat(rng, 9, 4), rel = fixture::random_mat(rng, 2, 4);
  const double got = translate::transe_loss(batch, tape.variable(e), tape.variable(rel)).scalar();
  auto ent = fixture::rows_of(e), rels = fixture::rows_of(rel);
  double want = 0;
  for (const auto& c : batch) {
    const double dp = oracle::transe(ent[c.head], rels[c.relation], ent[c.tail]);
    const double dn = oracle::transe(ent[c.head], rels[c.relation], ent[c.corrupted_tail]);
    want += -std::log(oracle::sigmoid(dn - dp));
  }
  CHECK(std::fabs(got - want) < 1e-12);
}

TEST_CASE("sample_corrupted") {
  SUBCASE("two entities") {
    auto kgraph = corpus::KnowledgeGraph::from_triplets(1, 2, 1, {{0, 0, 1}});
    Rng r = make_rng(2, "t");
    for (const auto& c : translate::sample_corrupted(kgraph, 50, r)) CHECK(c.corrupted_tail == 0);
  }
  SUBCASE("single entity") {
    auto kgraph = corpus::KnowledgeGraph::from_triplets(1, 1, 1, {{0, 0, 0}});
    Rng r = make_rng(2, "t");
    CHECK_THROWS(translate::sample_corrupted(kgraph, 1, r));
  }
  SUBCASE("seeded and uniform") {
    std::mt19937_64 rng(9);
    auto kgraph = fixture::random_kg(rng, 10, 20, 3, 20);
    Rng a = make_rng(5, "t"), b = make_rng(5, "t");
    auto x = translate::sample_corrupted(kgraph, 10000, a);
    auto y = translate::sample_corrupted(kgraph, 10000, b);
    std::map<std::tuple<corpus::Id, corpus::Id, corpus::Id>, int> counts;
    for (std::size_t k = 0; k < x.size(); ++k) {
      CHECK(x[k].corrupted_tail == y[k].corrupted_tail);
      CHECK(x[k].corrupted_tail != x[k].tail);
      ++counts[{x[k].head, x[k].relation, x[k].tail}];
    }
    // per distinct triplet: expected count = multiplicity * n / |triplets|
    std::map<std::tuple<corpus::Id, corpus::Id, corpus::Id>, int> mult;
    for (const auto& t : kgraph.triplets) ++mult[{t.head, t.relation, t.tail}];
    const double n = 10000, m = static_cast<double>(kgraph.triplets.size());
    for (const auto& [key, c] : mult) {
      const double p = c / m;
      CHECK(std::fabs(counts[key] - n * p) <= 3 * std::sqrt(n * p * (1 - p)));
    }
  }
}

TEST_CASE("drop_edges_kg") {
  std::mt19937_64 rng(4);
  auto kgraph = fixture::random_kg(rng, 50, 200, 4, 10000);
  Rng r = make_rng(1, "kg-drop");
  CHECK(ssl::drop_edges_kg(kgraph, 0, r).triplets == kgraph.triplets);
  CHECK(ssl::drop_edges_kg(kgraph, 1, r).triplets.empty());
  const auto kept = static_cast<double>(ssl::drop_edges_kg(kgraph, 0.5, r).triplets.size());
  CHECK(std::fabs(kept - 5000) <= 3 * std::sqrt(10000 * 0.25));
}

TEST_CASE("stability scores") {
  std::mt19937_64 rng(6);
  Mat a = fixture::random_mat(rng, 5, 4);
  auto same = ssl::stability_scores(a, a);
  for (double s : same) CHECK(s == 1.0);
  Mat b = a;
  b.row(2) = Mat::Zero(1, 4);
  b(2, 0) = -a(2, 1);
  b(2, 1) = a(2, 0);  // orthogonal in the first two coordinates
  b(2, 2) = 0;
  b(2, 3) = 0;
  a(2, 2) = 0;
  a(2, 3) = 0;
  auto s = ssl::stability_scores(a, b);
  CHECK(s[2] == 0.0);
  CHECK(s[0] == doctest::Approx(1.0));
  auto scaled = ssl::stability_scores(Mat(3 * a), Mat(0.5 * b));
  for (std::size_t k = 0; k < s.size(); ++k) CHECK(std::fabs(scaled[k] - s[k]) < 1e-12);
  Mat c = fixture::random_mat(rng, 30, 4), d = fixture::random_mat(rng, 30, 4);
  for (double v : ssl::stability_scores(c, d)) {
    CHECK(v >= 0);
    CHECK(v <= 1);
  }
}

TEST_CASE("stab_adaptive_drop keeps edges at mu * S") {
  std::vector<corpus::Edge> edges;
  for (corpus::Id u = 0; u < 10000; ++u) edges.push_back({u, u % 3});
  ssl::StabilityScores s = {1.0, 0.0, 0.8};
  Rng r = make_rng(1, "ui-drop");
  auto all = ssl::stab_adaptive_drop(edges, s, 1.0, r);
  std::size_t n0 = 0, n1 = 0, n2 = 0;
  for (const auto& e : all) (e.item == 0 ? n0 : e.item == 1 ? n1 : n2)++;
  CHECK(n0 == 3334);
  CHECK(n1 == 0);
  auto half = ssl::stab_adaptive_drop(edges, s, 0.5, r);
  std::size_t k2 = 0;
  for (const auto& e : half) k2 += e.item == 2;
  const double n = 3333, p = 0.4;  // 1 - p_drop with p_drop = 0.6
  CHECK(std::fabs(k2 - n * p) <= 3 * std::sqrt(n * p * (1 - p)));
}

TEST_CASE("info_nce") {
  Mat e = Mat::Identity(2, 2);
  CHECK(std::fabs(ssl::info_nce(e, e, 1.0) + 2) < 1e-12);
  Mat swapped(2, 2);
  swapped << 0, 1, 1, 0;
  CHECK(std::fabs(ssl::info_nce(e, swapped, 1.0) - 2) < 1e-12);
  std::mt19937_64 rng(10);
  Mat a = fixture::random_mat(rng, 6, 5), b = fixture::random_mat(rng, 6, 5);
  CHECK(std::fabs(ssl::info_nce(a, b, 0.3) - ssl::info_nce(Mat(4 * a), Mat(4 * b), 0.3)) < 1e-10);
  Mat one = fixture::random_mat(rng, 1, 5);
  CHECK_THROWS_AS(ssl::info_nce(one, one, 1.0), ContractViolation);
  for (int t = 0; t < 20; ++t) {
    Mat z1 = fixture::random_mat(rng, 16, 8), z2 = fixture::random_mat(rng, 16, 8);
    for (bool inc : {false, true}) {
      const auto mode = inc ? ssl::Denominator::include_positive : ssl::Denominator::exclude_positive;
      CHECK(std::fabs(ssl::info_nce(z1, z2, 0.2, mode) -
                      oracle::info_nce(fixture::rows_of(z1), fixture::rows_of(z2), 0.2, inc)) <= 1e-10);
    }
  }
}

TEST_CASE("intra_view_loss on orthonormal batches") {
  Tape tape;
  Mat e = Mat::Identity(2, 2);
  std::vector<ssl::ChannelViews> views = {{tape.constant(e), tape.constant(e)}, {tape.constant(e), tape.constant(e)}};
  std::vector<diff::Index> rows = {0, 1};
  CHECK(std::fabs(ssl::intra_view_loss(views, views, rows, rows, 1.0).scalar() + 8) < 1e-12);
  std::vector<ssl::ChannelViews> one(views.begin(), views.begin() + 1);
  CHECK(std::fabs(ssl::intra_view_loss(one, one, rows, rows, 1.0).scalar() + 4) < 1e-12);
}

TEST_CASE("align_loss") {
  Tape tape;
  ssl::ProjectionVars id{tape.variable(Mat::Identity(2, 2)), tape.variable(Mat::Zero(2, 1))};
  ssl::ProjectionVars llm{tape.variable(Mat::Identity(2, 2)), tape.variable(Mat::Zero(2, 1))};
  Mat u = Mat::Identity(2, 2);
  CHECK(std::fabs(ssl::align_loss(tape.constant(u), tape.constant(u), id, llm, 1.0).scalar() + 2) < 1e-12);

  std::mt19937_64 rng(12);
  Tape t2;
  Mat a = fixture::random_mat(rng, 5, 4), b = fixture::random_mat(rng, 5, 4);
  ssl::ProjectionVars p1{t2.variable(fixture::random_mat(rng, 4, 4)), t2.variable(fixture::random_mat(rng, 4, 1))};
  ssl::ProjectionVars p2{t2.variable(fixture::random_mat(rng, 4, 4)), t2.variable(fixture::random_mat(rng, 4, 1))};
  Var loss = ssl::align_loss(t2.constant(a), t2.constant(b), p1, p2, 0.5);
  t2.backward(loss);
  CHECK(t2.grad(p1.w).norm() > 0);
  CHECK(t2.grad(p2.w).norm() > 0);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
  perm.indices() << 3, 0, 4, 1, 2;
  Tape t3;
  ssl::ProjectionVars q1{t3.variable(p1.w.value()), t3.variable(p1.b.value())};
  ssl::ProjectionVars q2{t3.variable(p2.w.value()), t3.variable(p2.b.value())};
  Mat pa = perm * a, pb = perm * b;
  CHECK(std::fabs(ssl::align_loss(t3.constant(pa), t3.constant(pb), q1, q2, 0.5).scalar() - loss.scalar()) < 1e-10);
}
