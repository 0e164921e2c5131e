#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace dcgl::corpus {

using Id = std::uint32_t;

struct Edge {
  Id user = 0;
  Id item = 0;
  auto operator<=>(const Edge&) const = default;
};

// Bipartite user-item graph with implicit feedback. Token tables are kept so
// that ids can be written back out in the caller's vocabulary.
struct InteractionGraph {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::vector<Edge> edges;
  std::vector<std::vector<Id>> user_adj;  // sorted item ids per user
  std::vector<std::vector<Id>> item_adj;  // sorted user ids per item
  std::vector<std::string> user_tokens;
  std::vector<std::string> item_tokens;

  // Builds adjacency from an edge list. Duplicate edges are dropped, edge
  // order of first occurrence is kept. Token tables are filled with the
  // decimal ids when not supplied.
  static InteractionGraph from_edges(std::size_t num_users, std::size_t num_items,
                                     std::span<const Edge> edges,
                                     std::vector<std::string> user_tokens = {},
                                     std::vector<std::string> item_tokens = {});

  // Throws DataError when any structural invariant is broken.
  void validate() const;
};

struct Triplet {
  Id head = 0;
  Id relation = 0;
  Id tail = 0;
  auto operator<=>(const Triplet&) const = default;
};

struct KgNeighbor {
  Id relation = 0;
  Id entity = 0;
  auto operator<=>(const KgNeighbor&) const = default;
};

// Entity ids [0, num_items) are the items of the interaction graph.
struct KnowledgeGraph {
  std::size_t num_items = 0;
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::vector<Triplet> triplets;
  std::vector<std::vector<KgNeighbor>> item_neighbors;  // triplet order
  std::vector<std::string> entity_tokens;
  std::vector<std::string> relation_tokens;

  static KnowledgeGraph from_triplets(std::size_t num_items, std::size_t num_entities,
                                      std::size_t num_relations,
                                      std::vector<Triplet> triplets,
                                      std::vector<std::string> entity_tokens = {},
                                      std::vector<std::string> relation_tokens = {});

  void validate() const;
};

struct SplitRatios {
  double train = 7;
  double validation = 1;
  double test = 2;
};

// Per-user disjoint split of a graph's edges. The index vectors point into
// the source graph's edge list and are what the split manifest stores.
struct SplitDataset {
  std::uint64_t seed = 0;
  std::vector<std::uint32_t> train_idx;
  std::vector<std::uint32_t> validation_idx;
  std::vector<std::uint32_t> test_idx;
  std::vector<Edge> train;
  std::vector<Edge> validation;
  std::vector<Edge> test;
  std::vector<std::vector<Id>> train_items;  // sorted, per user
  std::vector<std::vector<Id>> validation_items;
  std::vector<std::vector<Id>> test_items;

  static SplitDataset from_indices(const InteractionGraph& graph, std::uint64_t seed,
                                   std::vector<std::uint32_t> train_idx,
                                   std::vector<std::uint32_t> validation_idx,
                                   std::vector<std::uint32_t> test_idx);
};

struct FrequencyFeatures {
  std::vector<double> user_phi;
  std::vector<double> item_phi;
  std::vector<std::uint32_t> user_counts;
  std::vector<std::uint32_t> item_counts;
};

// log(1 + freq) / log(1 + max_freq); zero when max_freq is zero.
double log_normalized_frequency(std::uint64_t freq, std::uint64_t max_freq);

InteractionGraph parse_interactions(std::istream& in);

// Heads (and tails) whose token matches an item token reuse that item's id.
// With strict_linking, a head that is not an item token is a link error.
KnowledgeGraph parse_kg(std::istream& in, const InteractionGraph& graph,
                        bool strict_linking = false);

// Drops every edge of users with fewer than min_interactions edges. Items are
// never removed. Edge order is preserved.
std::vector<Edge> filter_low_frequency(std::span<const Edge> edges,
                                       std::size_t min_interactions);

// filter_low_frequency followed by dense re-indexing of the surviving users
// in first-occurrence order. Item ids and tokens are unchanged.
InteractionGraph filter_graph(const InteractionGraph& graph, std::size_t min_interactions);

SplitDataset split_interactions(const InteractionGraph& graph, SplitRatios ratios,
                                std::uint64_t seed);

// Counts come from train_edges only.
FrequencyFeatures frequency_features(const InteractionGraph& graph,
                                     std::span<const Edge> train_edges);

}  // namespace dcgl::corpus
