#include "dcgl/cf_propagation.hpp"

#include <cmath>
#include <vector>

#include "dcgl/error.hpp"

namespace dcgl::cf {

NormalizedAdjacency NormalizedAdjacency::build(std::size_t num_users, std::size_t num_items,
                                               std::span<const corpus::Edge> edges) {
  std::vector<double> du(num_users, 0), di(num_items, 0);
  for (const auto& e : edges) {
    DCGL_EXPECT(e.user < num_users && e.item < num_items, "adjacency edge out of range");
    ++du[e.user];
    ++di[e.item];
  }
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(edges.size());
  for (const auto& e : edges)
    trips.emplace_back(static_cast<int>(e.user), static_cast<int>(e.item),
                       1.0 / std::sqrt(du[e.user] * di[e.item]));
  diff::SpMat a(static_cast<Eigen::Index>(num_users), static_cast<Eigen::Index>(num_items));
  // duplicate edges would be summed; callers pass deduplicated edge lists
  a.setFromTriplets(trips.begin(), trips.end());
  NormalizedAdjacency adj;
  adj.num_users = num_users;
  adj.num_items = num_items;
  adj.user_from_item = diff::SparseOp::from(a);
  adj.item_from_user = {adj.user_from_item.transpose, adj.user_from_item.forward};
  return adj;
}

double NormalizedAdjacency::coefficient(corpus::Id user, corpus::Id item) const {
  return user_from_item.forward->coeff(user, item);
}

double NormalizedAdjacency::reverse_coefficient(corpus::Id item, corpus::Id user) const {
  return item_from_user.forward->coeff(item, user);
}

Propagated lightgcn_layer(Var users, Var items, const NormalizedAdjacency& adj) {
  DCGL_EXPECT(static_cast<std::size_t>(users.rows()) == adj.num_users &&
                  static_cast<std::size_t>(items.rows()) == adj.num_items,
              "lightgcn_layer: embedding rows must match the graph");
  return {diff::spmm(adj.user_from_item, items), diff::spmm(adj.item_from_user, users)};
}

Propagated propagate(Var users, Var items, const NormalizedAdjacency& adj, int layers,
                     LayerCombine combine) {
  DCGL_EXPECT(layers >= 0, "propagate: negative layer count");
  Propagated current{users, items};
  Var sum_u = users, sum_i = items;
  for (int l = 0; l < layers; ++l) {
    current = lightgcn_layer(current.users, current.items, adj);
    if (combine == LayerCombine::mean) {
      sum_u = diff::add(sum_u, current.users);
      sum_i = diff::add(sum_i, current.items);
    }
  }
  if (combine == LayerCombine::last || layers == 0) return current;
  const double inv = 1.0 / static_cast<double>(layers + 1);
  return {diff::scale(sum_u, inv), diff::scale(sum_i, inv)};
}

}  // namespace dcgl::cf
