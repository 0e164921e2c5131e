#include "dcgl/kg_encoder.hpp"

#include "dcgl/diff/kernels.hpp"
#include "dcgl/error.hpp"

namespace dcgl::kg {

Var adapt_semantic(Var raw, const AdapterVars& a) {
  DCGL_EXPECT(raw.cols() == a.w1.cols(), "adapt_semantic: raw width must equal W1 columns");
  DCGL_EXPECT(a.w2.cols() == a.w1.rows(), "adapt_semantic: W2 columns must equal W1 rows");
  Var hidden = diff::leaky_relu(diff::add_row(diff::matmul(raw, a.w1, false, true), a.b1),
                                diff::kLeakySlope);
  return diff::add_row(diff::matmul(hidden, a.w2, false, true), a.b2);
}

KgIndex KgIndex::build(const corpus::KnowledgeGraph& kg) {
  KgIndex idx;
  idx.num_items = kg.num_items;
  idx.num_entities = kg.num_entities;
  idx.offsets.assign(kg.num_items + 1, 0);
  for (std::size_t i = 0; i < kg.num_items; ++i) {
    idx.offsets[i + 1] = idx.offsets[i] + kg.item_neighbors[i].size();
    for (const auto& n : kg.item_neighbors[i]) {
      idx.item.push_back(static_cast<diff::Index>(i));
      idx.relation.push_back(n.relation);
      idx.entity.push_back(n.entity);
    }
  }
  return idx;
}

std::vector<double> rgat_attention(const Eigen::VectorXd& item,
                                   const std::vector<Eigen::VectorXd>& neighbors,
                                   const std::vector<Eigen::VectorXd>& relations,
                                   const Eigen::MatrixXd& w) {
  DCGL_EXPECT(!neighbors.empty(), "rgat_attention: empty neighbor list");
  DCGL_EXPECT(neighbors.size() == relations.size(), "rgat_attention: list lengths differ");
  const auto d = item.size();
  DCGL_EXPECT(w.rows() == d && w.cols() == 2 * d, "rgat_attention: W must be d x 2d");
  std::vector<double> logits;
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    Eigen::VectorXd cat(2 * d);
    cat << neighbors[k], item;
    logits.push_back(diff::leaky_relu(relations[k].dot(w * cat)));
  }
  return diff::softmax_row(logits);
}

RgatLayerOutput rgat_layer_detailed(Var entities, Var relations, Var w, const KgIndex& index) {
  const auto d = entities.cols();
  DCGL_EXPECT(static_cast<std::size_t>(entities.rows()) == index.num_entities,
              "rgat_layer: entity matrix rows must equal entity count");
  DCGL_EXPECT(relations.cols() == d && w.rows() == d && w.cols() == 2 * d,
              "rgat_layer: relation/W shapes must match the embedding width");
  if (index.num_edges() == 0) return {entities, Var{}};

  // r^T W [x_e || x_i] = (W^T r)[:d] . x_e + (W^T r)[d:] . x_i
  Var proj = diff::matmul(relations, w);
  Var proj_e = diff::gather_rows(diff::slice_cols(proj, 0, d), index.relation);
  Var proj_i = diff::gather_rows(diff::slice_cols(proj, d, d), index.relation);
  Var x_e = diff::gather_rows(entities, index.entity);
  Var x_i = diff::gather_rows(entities, index.item);
  Var logits = diff::leaky_relu(diff::add(diff::row_dot(proj_e, x_e), diff::row_dot(proj_i, x_i)),
                                diff::kLeakySlope);
  Var attention = diff::segment_softmax(logits, index.offsets);
  Var messages = diff::scale_rows(x_e, attention);
  Var aggregated = diff::scatter_add_rows(messages, index.item, entities.rows());
  return {diff::add(entities, aggregated), attention};
}

Var rgat_layer(Var entities, Var relations, Var w, const KgIndex& index) {
  return rgat_layer_detailed(entities, relations, w, index).entities;
}

Var rgat_encode(Var entities, Var relations, Var w, const KgIndex& index, int layers) {
  DCGL_EXPECT(layers >= 0, "rgat_encode: negative layer count");
  Var x = entities;
  for (int l = 0; l < layers; ++l) x = rgat_layer(x, relations, w, index);
  return diff::head_rows(x, static_cast<Eigen::Index>(index.num_items));
}

}  // namespace dcgl::kg
