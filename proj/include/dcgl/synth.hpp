#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dcgl/corpus.hpp"
#include "dcgl/dataio.hpp"

namespace dcgl::corpus {

// Desk-scale synthetic recommender corpus. Preferences combine a semantic
// part (cluster structure visible through the KG and semantic vectors) and a
// behavioral part that only interactions reveal.
struct SynthConfig {
  std::size_t num_users = 200;
  std::size_t num_items = 300;
  std::size_t num_entities = 100;  // attribute entities, in addition to items
  std::size_t num_relations = 4;
  double popularity_exponent = 1.0;
  std::size_t latent_dim = 16;
  // Heavier semantic noise for popular items and more idiosyncratic behavior
  // for active users: semantics help the sparse side, ids the dense side.
  bool semantic_noise_by_frequency = false;
  std::uint64_t seed = 1;

  std::size_t semantic_dim = 32;
  std::size_t num_clusters = 8;
  double mean_user_degree = 20;
  std::size_t min_user_degree = 5;
  double semantic_noise = 0.15;   // relative noise on semantic vectors
  double frequency_noise = 2.0;   // extra relative noise at max popularity
  double affinity_scale = 4.0;
  double behavior_weight = 0.5;
  double link_probability = 0.7;

  void validate() const;
};

struct SyntheticData {
  InteractionGraph graph;
  KnowledgeGraph kg;
  io::EmbeddingFile embeddings;
  io::IdMap id_map;
  SplitDataset split;
  // Noise-free semantic vector of each item (semantic_dim wide).
  std::vector<std::vector<double>> item_latent;
};

SyntheticData gen_synthetic(const SynthConfig& config);

}  // namespace dcgl::corpus
