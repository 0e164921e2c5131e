#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "dcgl/corpus.hpp"
#include "dcgl/diff/ops.hpp"

namespace dcgl::kg {

using diff::Mat;
using diff::Var;

// Two-layer adapter from semantic space (d_llm) into model space (d):
// W2 * LeakyReLU(W1 x + b1) + b2.
struct AdapterVars {
  Var w1;  // d_mid x d_llm
  Var b1;  // d_mid x 1
  Var w2;  // d x d_mid
  Var b2;  // d x 1
};

inline std::size_t default_adapter_mid(std::size_t d_llm, std::size_t d) { return (d_llm + d) / 2; }

// raw: n x d_llm, one entity per row. Returns n x d.
Var adapt_semantic(Var raw, const AdapterVars& adapter);

// Item-major view of the knowledge graph: the KG neighbors of item i occupy
// edge slots [offsets[i], offsets[i+1]).
struct KgIndex {
  std::size_t num_items = 0;
  std::size_t num_entities = 0;
  std::vector<std::size_t> offsets;
  std::vector<diff::Index> item;
  std::vector<diff::Index> relation;
  std::vector<diff::Index> entity;

  static KgIndex build(const corpus::KnowledgeGraph& kg);
  std::size_t num_edges() const { return entity.size(); }
};

// Attention of one item over its KG neighbors:
// softmax_e LeakyReLU(r_e^T W [x_e || x_i]). Lists must be non-empty and of
// equal length.
std::vector<double> rgat_attention(const Eigen::VectorXd& item,
                                   const std::vector<Eigen::VectorXd>& neighbors,
                                   const std::vector<Eigen::VectorXd>& relations,
                                   const Eigen::MatrixXd& w);

struct RgatLayerOutput {
  Var entities;   // num_entities x d; only item rows change
  Var attention;  // num_edges x 1, invalid when the KG is empty
};

// One synchronous residual layer: x_i + sum_e a_ei x_e for every item.
// entities: num_entities x d, relations: num_relations x d, w: d x 2d.
RgatLayerOutput rgat_layer_detailed(Var entities, Var relations, Var w, const KgIndex& index);
Var rgat_layer(Var entities, Var relations, Var w, const KgIndex& index);

// `layers` stacked layers; returns the item rows (num_items x d).
Var rgat_encode(Var entities, Var relations, Var w, const KgIndex& index, int layers);

}  // namespace dcgl::kg
