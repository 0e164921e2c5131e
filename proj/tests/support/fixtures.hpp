#pragma once

#include <random>
#include <vector>

#include "dcgl/corpus.hpp"
#include "dcgl/diff/tape.hpp"

namespace fixture {

using dcgl::diff::Mat;

inline Mat random_mat(std::mt19937_64& rng, Eigen::Index r, Eigen::Index c, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Mat m(r, c);
  for (Eigen::Index i = 0; i < r; ++i)
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

inline std::vector<std::vector<double>> rows_of(const Mat& m) {
  std::vector<std::vector<double>> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    out[static_cast<std::size_t>(i)].assign(m.row(i).data(), m.row(i).data() + m.cols());
  return out;
}

// Random bipartite graph with uneven user degrees (some below 3, some large).
inline dcgl::corpus::InteractionGraph random_graph(std::mt19937_64& rng, std::size_t users, std::size_t items,
                                                   std::size_t max_degree) {
  std::vector<dcgl::corpus::Edge> edges;
  std::uniform_int_distribution<std::size_t> deg(1, max_degree);
  std::uniform_int_distribution<dcgl::corpus::Id> item(0, static_cast<dcgl::corpus::Id>(items - 1));
  for (dcgl::corpus::Id u = 0; u < users; ++u) {
    const auto n = deg(rng);
    for (std::size_t k = 0; k < n; ++k) edges.push_back({u, item(rng)});
  }
  return dcgl::corpus::InteractionGraph::from_edges(users, items, edges);
}

inline dcgl::corpus::KnowledgeGraph random_kg(std::mt19937_64& rng, std::size_t items, std::size_t entities,
                                              std::size_t relations, std::size_t triplets) {
  std::vector<dcgl::corpus::Triplet> t;
  std::uniform_int_distribution<dcgl::corpus::Id> head(0, static_cast<dcgl::corpus::Id>(items - 1));
  std::uniform_int_distribution<dcgl::corpus::Id> tail(0, static_cast<dcgl::corpus::Id>(entities - 1));
  std::uniform_int_distribution<dcgl::corpus::Id> rel(0, static_cast<dcgl::corpus::Id>(relations - 1));
  for (std::size_t k = 0; k < triplets; ++k) t.push_back({head(rng), rel(rng), tail(rng)});
  return dcgl::corpus::KnowledgeGraph::from_triplets(items, entities, relations, std::move(t));
}

}  // namespace fixture
