#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "../support/fixtures.hpp"
#include "../support/oracles.hpp"
#include "dcgl/corpus.hpp"
#include "dcgl/error.hpp"
#include "dcgl/synth.hpp"

using namespace dcgl;
using namespace dcgl::corpus;

TEST_CASE("parse_interactions maps tokens in first-occurrence order") {
  std::istringstream in("a\tx\na\ty\nb\tx\n");
  auto g = parse_interactions(in);
  CHECK(g.num_users == 2);
  CHECK(g.num_items == 2);
  CHECK(g.edges.size() == 3);
  CHECK(g.user_tokens == std::vector<std::string>{"a", "b"});
  CHECK(g.item_tokens == std::vector<std::string>{"x", "y"});
  CHECK(g.item_adj[0] == std::vector<Id>{0, 1});
  g.validate();
}

TEST_CASE("parse_interactions drops duplicates and comments") {
  std::istringstream in("# header\na\tx\n\na\tx\n");
  auto g = parse_interactions(in);
  CHECK(g.edges.size() == 1);
}

TEST_CASE("parse_interactions reports the line of a malformed record") {
  std::istringstream in("a\tx\nb\tx\textra\n");
  try {
    parse_interactions(in);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("parse_kg links item heads and appends other entities") {
  std::istringstream gi("u\tx\nu\ty\n");
  auto g = parse_interactions(gi);
  SUBCASE("empty stream") {
    std::istringstream in("");
    auto kg = parse_kg(in, g);
    CHECK(kg.triplets.empty());
    CHECK(kg.num_entities == g.num_items);
  }
  SUBCASE("single triplet") {
    std::istringstream in("x\tgenre\te1\n");
    auto kg = parse_kg(in, g);
    REQUIRE(kg.triplets.size() == 1);
    CHECK(kg.num_entities == 3);
    CHECK(kg.item_neighbors[0] == std::vector<KgNeighbor>{{0, 2}});
    CHECK(kg.item_neighbors[1].empty());
    kg.validate();
  }
  SUBCASE("strict linking rejects unknown heads") {
    std::istringstream in("zz\tgenre\te1\n");
    CHECK_THROWS_AS(parse_kg(in, g, true), DataError);
  }
  SUBCASE("malformed line") {
    std::istringstream in("x\tgenre\n");
    CHECK_THROWS_AS(parse_kg(in, g), ParseError);
  }
}

TEST_CASE("filter_low_frequency") {
  std::vector<Edge> e;
  for (Id i = 0; i < 4; ++i) e.push_back({0, i});
  for (Id i = 0; i < 5; ++i) e.push_back({1, i});
  CHECK(filter_low_frequency(e, 5).size() == 5);
  CHECK(filter_low_frequency(e, 0) == e);
}

TEST_CASE("filter_graph compacts users and keeps items") {
  auto g = InteractionGraph::from_edges(3, 4, std::vector<Edge>{{0, 0}, {1, 0}, {1, 1}, {2, 3}, {2, 2}});
  auto f = filter_graph(g, 2);
  CHECK(f.num_users == 2);
  CHECK(f.num_items == 4);
  CHECK(f.user_tokens == std::vector<std::string>{"u1", "u2"});
  f.validate();
}

TEST_CASE("split_interactions follows the 7:1:2 floor rule") {
  std::vector<Edge> e;
  for (Id i = 0; i < 10; ++i) e.push_back({0, i});
  e.push_back({1, 0});
  e.push_back({1, 1});
  auto g = InteractionGraph::from_edges(2, 10, e);
  auto s = split_interactions(g, {}, 3);
  CHECK(s.train_items[0].size() == 7);
  CHECK(s.validation_items[0].size() == 1);
  CHECK(s.test_items[0].size() == 2);
  CHECK(s.train_items[1].size() == 2);
  CHECK(s.validation_items[1].empty());
  CHECK(s.test_items[1].empty());
  auto again = split_interactions(g, {}, 3);
  CHECK(again.train_idx == s.train_idx);
  CHECK(again.test_idx == s.test_idx);
}

TEST_CASE("frequency features") {
  CHECK(log_normalized_frequency(7, 7) == 1.0);
  CHECK(log_normalized_frequency(0, 7) == 0.0);
  CHECK(log_normalized_frequency(3, 7) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(log_normalized_frequency(0, 0) == 0.0);
}

TEST_CASE("corpus properties on random graphs") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = fixture::random_graph(rng, 30, 40, 15);
    g.validate();
    // transpose consistency
    for (const auto& e : g.edges) {
      CHECK(std::binary_search(g.user_adj[e.user].begin(), g.user_adj[e.user].end(), e.item));
      CHECK(std::binary_search(g.item_adj[e.item].begin(), g.item_adj[e.item].end(), e.user));
    }
    const std::size_t min = 1 + static_cast<std::size_t>(trial % 8);
    auto f = filter_graph(g, min);
    for (const auto& adj : f.user_adj) CHECK(adj.size() >= min);
    auto ff = filter_graph(f, min);
    CHECK(ff.edges.size() == f.edges.size());

    auto s = split_interactions(f, {}, static_cast<std::uint64_t>(trial));
    std::vector<int> seen(f.edges.size(), 0);
    for (auto k : s.train_idx) ++seen[k];
    for (auto k : s.validation_idx) ++seen[k];
    for (auto k : s.test_idx) ++seen[k];
    CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
    for (std::size_t u = 0; u < f.num_users; ++u)
      if (!f.user_adj[u].empty()) CHECK(!s.train_items[u].empty());

    auto freq = frequency_features(f, s.train);
    const double mx = *std::max_element(freq.item_counts.begin(), freq.item_counts.end());
    for (std::size_t i = 0; i < f.num_items; ++i) {
      CHECK(freq.item_phi[i] >= 0);
      CHECK(freq.item_phi[i] <= 1);
      CHECK(std::fabs(freq.item_phi[i] - oracle::phi(freq.item_counts[i], mx)) <= 1e-12);
      for (std::size_t j = 0; j < f.num_items; ++j)
        if (freq.item_counts[i] < freq.item_counts[j]) CHECK(freq.item_phi[i] <= freq.item_phi[j]);
    }
  }
}

TEST_CASE("gen_synthetic is seeded and shaped by its config") {
  SynthConfig c;
  auto a = gen_synthetic(c);
  auto b = gen_synthetic(c);
  CHECK(a.graph.edges == b.graph.edges);
  CHECK(a.kg.triplets == b.kg.triplets);
  CHECK(a.embeddings.values == b.embeddings.values);
  CHECK(a.graph.num_users == 200);
  CHECK(a.graph.num_items == 300);
  a.graph.validate();
  a.kg.validate();

  SUBCASE("power-law popularity") {
    SynthConfig p;
    p.popularity_exponent = 1.2;
    auto d = gen_synthetic(p);
    std::vector<std::size_t> deg;
    for (const auto& adj : d.graph.item_adj) deg.push_back(adj.size());
    std::sort(deg.rbegin(), deg.rend());
    std::size_t top = 0;
    for (std::size_t k = 0; k < deg.size() / 10; ++k) top += deg[k];
    CHECK(static_cast<double>(top) / static_cast<double>(d.graph.edges.size()) > 0.35);
  }
  SUBCASE("semantic vectors track the latent factors") {
    double total = 0;
    for (std::size_t i = 0; i < a.graph.num_items; ++i) {
      auto row = a.embeddings.row(i);
      CHECK(a.embeddings.ids[i] == i);
      std::vector<double> v(row.begin(), row.end());
      total += oracle::cosine(v, a.item_latent[i]);
    }
    CHECK(total / static_cast<double>(a.graph.num_items) >= 0.9);
  }
}

TEST_CASE("SynthConfig rejects degenerate counts") {
  SynthConfig c;
  c.num_users = 1;
  CHECK_THROWS_AS(gen_synthetic(c), ConfigError);
  c = {};
  c.popularity_exponent = 0;
  CHECK_THROWS_AS(gen_synthetic(c), ConfigError);
}
