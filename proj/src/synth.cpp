#include "dcgl/synth.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dcgl/error.hpp"
#include "dcgl/rng.hpp"

namespace dcgl::corpus {
namespace {

using Vec = Eigen::VectorXd;

Vec gaussian(Rng& rng, std::size_t n, double stddev) {
  std::normal_distribution<double> normal(0.0, stddev);
  Vec v(static_cast<Eigen::Index>(n));
  for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = normal(rng);
  return v;
}

// Orthonormal columns lifting latent vectors into the semantic space.
Eigen::MatrixXd lifting_basis(Rng& rng, std::size_t rows, std::size_t cols) {
  Eigen::MatrixXd g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::normal_distribution<double> normal;
  for (Eigen::Index c = 0; c < g.cols(); ++c)
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  return qr.householderQ() * Eigen::MatrixXd::Identity(g.rows(), g.cols());
}

Vec noisy(const Vec& clean, double relative, Rng& rng) {
  const double scale = relative * clean.norm() / std::sqrt(static_cast<double>(clean.size()));
  return clean + gaussian(rng, static_cast<std::size_t>(clean.size()), scale);
}

}  // namespace

void SynthConfig::validate() const {
  if (num_users < 2 || num_items < 2 || num_entities < 2 || num_relations < 2)
    throw ConfigError("synthetic counts must be at least 2");
  if (!(popularity_exponent > 0)) throw ConfigError("popularity_exponent must be positive");
  if (latent_dim < 1 || semantic_dim < latent_dim)
    throw ConfigError("semantic_dim must be at least latent_dim >= 1");
  if (num_clusters < 1) throw ConfigError("num_clusters must be positive");
  if (min_user_degree < 1 || mean_user_degree < static_cast<double>(min_user_degree))
    throw ConfigError("mean_user_degree must be at least min_user_degree >= 1");
}

SyntheticData gen_synthetic(const SynthConfig& cfg) {
  cfg.validate();
  const auto k = cfg.latent_dim;
  const double unit = 1.0 / std::sqrt(static_cast<double>(k));

  Rng rng_struct = make_rng(cfg.seed, "synth-structure");
  Rng rng_pref = make_rng(cfg.seed, "synth-preference");
  Rng rng_sample = make_rng(cfg.seed, "synth-sample");
  Rng rng_kg = make_rng(cfg.seed, "synth-kg");
  Rng rng_sem = make_rng(cfg.seed, "synth-semantic");

  std::vector<Vec> centers;
  for (std::size_t c = 0; c < cfg.num_clusters; ++c) centers.push_back(gaussian(rng_struct, k, unit));

  // items: cluster, semantic latent, hidden behavioral latent, popularity
  std::vector<std::size_t> item_cluster(cfg.num_items);
  std::vector<Vec> item_sem, item_beh;
  for (std::size_t i = 0; i < cfg.num_items; ++i) {
    item_cluster[i] = uniform_index(rng_struct, cfg.num_clusters);
    item_sem.push_back(centers[item_cluster[i]] + gaussian(rng_struct, k, 0.5 * unit));
    item_beh.push_back(gaussian(rng_struct, k, unit));
  }
  std::vector<std::size_t> rank(cfg.num_items);
  std::iota(rank.begin(), rank.end(), 0);
  for (std::size_t j = rank.size() - 1; j > 0; --j)
    std::swap(rank[j], rank[uniform_index(rng_struct, j + 1)]);
  std::vector<double> log_pop(cfg.num_items);
  for (std::size_t i = 0; i < cfg.num_items; ++i)
    log_pop[i] = -cfg.popularity_exponent * std::log(static_cast<double>(rank[i] + 1));

  // users: favourite cluster, behavioral taste, activity level
  const std::size_t max_degree = std::max<std::size_t>(cfg.min_user_degree, cfg.num_items / 3);
  std::vector<std::size_t> degree(cfg.num_users);
  std::vector<Vec> user_sem, user_beh;
  std::exponential_distribution<double> expo(1.0);
  for (std::size_t u = 0; u < cfg.num_users; ++u) {
    const auto c = uniform_index(rng_pref, cfg.num_clusters);
    user_sem.push_back(centers[c] + gaussian(rng_pref, k, 0.5 * unit));
    user_beh.push_back(gaussian(rng_pref, k, unit));
    const double extra = (cfg.mean_user_degree - static_cast<double>(cfg.min_user_degree)) * expo(rng_pref);
    degree[u] = std::min(max_degree, cfg.min_user_degree + static_cast<std::size_t>(std::lround(extra)));
  }
  const double mean_degree =
      std::accumulate(degree.begin(), degree.end(), 0.0) / static_cast<double>(cfg.num_users);

  // Gumbel top-k sampling without replacement from softmax(log_pop + affinity)
  std::vector<Edge> edges;
  std::vector<double> key(cfg.num_items);
  std::vector<std::size_t> order(cfg.num_items);
  for (std::size_t u = 0; u < cfg.num_users; ++u) {
    double beh = cfg.behavior_weight;
    if (cfg.semantic_noise_by_frequency)
      beh *= 2.0 * std::min(2.0, static_cast<double>(degree[u]) / mean_degree);
    const double sem = 1.0;
    for (std::size_t i = 0; i < cfg.num_items; ++i) {
      const double affinity = sem * user_sem[u].dot(item_sem[i]) + beh * user_beh[u].dot(item_beh[i]);
      const double gumbel = -std::log(-std::log(std::max(uniform_unit(rng_sample), 1e-300)));
      key[i] = log_pop[i] + cfg.affinity_scale * affinity / (unit * unit * static_cast<double>(k)) + gumbel;
    }
    std::iota(order.begin(), order.end(), 0);
    std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(degree[u]), order.end(),
                      [&](std::size_t a, std::size_t b) { return key[a] > key[b] || (key[a] == key[b] && a < b); });
    std::vector<std::size_t> chosen(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(degree[u]));
    std::sort(chosen.begin(), chosen.end());
    for (auto i : chosen) edges.push_back({static_cast<Id>(u), static_cast<Id>(i)});
  }

  std::vector<std::string> user_tokens, item_tokens;
  for (std::size_t u = 0; u < cfg.num_users; ++u) user_tokens.push_back("u" + std::to_string(u));
  for (std::size_t i = 0; i < cfg.num_items; ++i) item_tokens.push_back("i" + std::to_string(i));
  SyntheticData out;
  out.graph = InteractionGraph::from_edges(cfg.num_users, cfg.num_items, edges, user_tokens, item_tokens);

  // attribute entities: one relation type and one cluster each
  const std::size_t ne = cfg.num_items + cfg.num_entities;
  std::vector<std::size_t> ent_cluster(cfg.num_entities), ent_relation(cfg.num_entities);
  std::vector<std::vector<std::vector<std::size_t>>> by_rel_cluster(
      cfg.num_relations, std::vector<std::vector<std::size_t>>(cfg.num_clusters));
  for (std::size_t e = 0; e < cfg.num_entities; ++e) {
    ent_relation[e] = e % cfg.num_relations;
    ent_cluster[e] = (e / cfg.num_relations) % cfg.num_clusters;
    by_rel_cluster[ent_relation[e]][ent_cluster[e]].push_back(e);
  }
  std::vector<std::vector<std::size_t>> by_rel(cfg.num_relations);
  for (std::size_t e = 0; e < cfg.num_entities; ++e) by_rel[ent_relation[e]].push_back(e);

  std::vector<Triplet> triplets;
  for (std::size_t i = 0; i < cfg.num_items; ++i) {
    for (std::size_t r = 0; r < cfg.num_relations; ++r) {
      if (by_rel[r].empty() || !bernoulli(rng_kg, cfg.link_probability)) continue;
      const auto& same = by_rel_cluster[r][item_cluster[i]];
      const bool faithful = !same.empty() && bernoulli(rng_kg, 0.9);
      const auto& pool = faithful ? same : by_rel[r];
      const auto e = pool[uniform_index(rng_kg, pool.size())];
      triplets.push_back({static_cast<Id>(i), static_cast<Id>(r), static_cast<Id>(cfg.num_items + e)});
    }
  }
  std::vector<std::string> entity_tokens = item_tokens, relation_tokens;
  for (std::size_t e = 0; e < cfg.num_entities; ++e) entity_tokens.push_back("e" + std::to_string(e));
  for (std::size_t r = 0; r < cfg.num_relations; ++r) relation_tokens.push_back("r" + std::to_string(r));
  out.kg = KnowledgeGraph::from_triplets(cfg.num_items, ne, cfg.num_relations, std::move(triplets),
                                         entity_tokens, relation_tokens);

  // semantic vectors
  const Eigen::MatrixXd lift = lifting_basis(rng_sem, cfg.semantic_dim, k);
  std::vector<std::uint32_t> item_freq(cfg.num_items, 0);
  for (const auto& e : out.graph.edges) ++item_freq[e.item];
  const auto max_freq = *std::max_element(item_freq.begin(), item_freq.end());
  out.embeddings.dim = static_cast<std::uint32_t>(cfg.semantic_dim);
  auto emit = [&](std::size_t id, const Vec& v) {
    out.embeddings.ids.push_back(static_cast<std::uint32_t>(id));
    for (Eigen::Index j = 0; j < v.size(); ++j) out.embeddings.values.push_back(static_cast<float>(v(j)));
    out.id_map.emplace_back(entity_tokens[id], static_cast<std::uint32_t>(id));
  };
  for (std::size_t i = 0; i < cfg.num_items; ++i) {
    const Vec clean = lift * item_sem[i];
    double rel = cfg.semantic_noise;
    if (cfg.semantic_noise_by_frequency) {
      const double phi = log_normalized_frequency(item_freq[i], max_freq);
      rel += cfg.frequency_noise * phi * phi;
    }
    out.item_latent.emplace_back(clean.data(), clean.data() + clean.size());
    emit(i, noisy(clean, rel, rng_sem));
  }
  for (std::size_t e = 0; e < cfg.num_entities; ++e)
    emit(cfg.num_items + e, noisy(lift * centers[ent_cluster[e]], cfg.semantic_noise, rng_sem));

  out.split = split_interactions(out.graph, SplitRatios{}, cfg.seed);
  return out;
}

}  // namespace dcgl::corpus
