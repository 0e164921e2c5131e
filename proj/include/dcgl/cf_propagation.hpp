#pragma once

#include <cstddef>
#include <span>

#include "dcgl/corpus.hpp"
#include "dcgl/diff/ops.hpp"

namespace dcgl::cf {

using diff::Var;

// Symmetric-normalized bipartite adjacency, coefficient 1/sqrt(|N_u| |N_i|)
// per edge, stored in both directions.
struct NormalizedAdjacency {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  diff::SparseOp user_from_item;  // num_users x num_items
  diff::SparseOp item_from_user;  // num_items x num_users

  static NormalizedAdjacency build(std::size_t num_users, std::size_t num_items,
                                   std::span<const corpus::Edge> edges);
  double coefficient(corpus::Id user, corpus::Id item) const;
  double reverse_coefficient(corpus::Id item, corpus::Id user) const;
};

enum class LayerCombine { last, mean };

struct Propagated {
  Var users;
  Var items;
};

// One synchronous layer; both sides read the layer-l inputs.
Propagated lightgcn_layer(Var users, Var items, const NormalizedAdjacency& adj);

// Stacks `layers` layers and combines outputs 0..layers.
Propagated propagate(Var users, Var items, const NormalizedAdjacency& adj, int layers,
                     LayerCombine combine = LayerCombine::mean);

}  // namespace dcgl::cf
