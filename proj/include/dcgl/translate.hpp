#pragma once

#include <span>
#include <vector>

#include "dcgl/corpus.hpp"
#include "dcgl/diff/ops.hpp"
#include "dcgl/rng.hpp"

namespace dcgl::translate {

using diff::Var;

// ||h + r - t||_1
double transe_distance(std::span<const double> h, std::span<const double> r,
                       std::span<const double> t);

struct CorruptedTriplet {
  corpus::Id head = 0;
  corpus::Id relation = 0;
  corpus::Id tail = 0;
  corpus::Id corrupted_tail = 0;
};
using CorruptedBatch = std::vector<CorruptedTriplet>;

// Uniform triplets with a uniformly resampled tail t' != t.
CorruptedBatch sample_corrupted(const corpus::KnowledgeGraph& kg, std::size_t batch_size, Rng& rng);

// Per-pair losses -ln sigma(d_neg - d_pos) from precomputed distances (n x 1).
Var transe_pair_loss(Var pos_distance, Var neg_distance);

// Sum of pair losses. Entity ids in the batch index rows of `entities`.
Var transe_loss(const CorruptedBatch& batch, Var entities, Var relations);

}  // namespace dcgl::translate
