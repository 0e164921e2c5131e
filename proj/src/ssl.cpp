#include "dcgl/ssl.hpp"

#include <algorithm>
#include <cmath>

#include "dcgl/diff/kernels.hpp"
#include "dcgl/error.hpp"

namespace dcgl::ssl {

corpus::KnowledgeGraph drop_edges_kg(const corpus::KnowledgeGraph& kg, double rho, Rng& rng) {
  DCGL_EXPECT(rho >= 0 && rho <= 1, "drop_edges_kg: rho must be in [0, 1]");
  std::vector<corpus::Triplet> kept;
  kept.reserve(kg.triplets.size());
  for (const auto& t : kg.triplets)
    if (bernoulli(rng, 1.0 - rho)) kept.push_back(t);
  return corpus::KnowledgeGraph::from_triplets(kg.num_items, kg.num_entities, kg.num_relations,
                                               std::move(kept), kg.entity_tokens, kg.relation_tokens);
}

StabilityScores stability_scores(const Mat& orig, const Mat& aug) {
  return stability_scores(std::span<const Mat>(&orig, 1), std::span<const Mat>(&aug, 1));
}

StabilityScores stability_scores(std::span<const Mat> orig, std::span<const Mat> aug) {
  DCGL_EXPECT(!orig.empty() && orig.size() == aug.size(), "stability_scores: channel count mismatch");
  const auto n = orig.front().rows();
  StabilityScores raw(static_cast<std::size_t>(n), 0.0);
  for (std::size_t c = 0; c < orig.size(); ++c) {
    DCGL_EXPECT(orig[c].rows() == n && aug[c].rows() == n && orig[c].cols() == aug[c].cols(),
                "stability_scores: shape mismatch");
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto a = orig[c].row(i), b = aug[c].row(i);
      const double cos = diff::cosine_sim(std::span<const double>(a.data(), a.size()),
                                          std::span<const double>(b.data(), b.size()));
      raw[i] += (cos + 1.0) / 2.0 / static_cast<double>(orig.size());
    }
  }
  if (raw.empty()) return raw;
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double mn = *lo, mx = *hi;
  for (auto& s : raw) s = mx > mn ? (s - mn) / (mx - mn) : 1.0;
  return raw;
}

std::vector<corpus::Edge> stab_adaptive_drop(std::span<const corpus::Edge> edges,
                                             const StabilityScores& scores, double mu, Rng& rng) {
  DCGL_EXPECT(mu > 0 && mu <= 1, "stab_adaptive_drop: mu must be in (0, 1]");
  std::vector<corpus::Edge> kept;
  kept.reserve(edges.size());
  for (const auto& e : edges) {
    DCGL_EXPECT(e.item < scores.size(), "stab_adaptive_drop: item without a stability score");
    if (bernoulli(rng, mu * scores[e.item])) kept.push_back(e);
  }
  return kept;
}

corpus::InteractionGraph stab_adaptive_drop(const corpus::InteractionGraph& graph,
                                            const StabilityScores& scores, double mu, Rng& rng) {
  auto kept = stab_adaptive_drop(std::span<const corpus::Edge>(graph.edges), scores, mu, rng);
  return corpus::InteractionGraph::from_edges(graph.num_users, graph.num_items, kept,
                                              graph.user_tokens, graph.item_tokens);
}

Var info_nce(Var z1, Var z2, double tau, Denominator denominator) {
  DCGL_EXPECT(tau > 0, "info_nce: tau must be positive");
  DCGL_EXPECT(z1.rows() == z2.rows() && z1.cols() == z2.cols(), "info_nce: view shapes differ");
  DCGL_EXPECT(z1.rows() >= 2, "info_nce: needs at least two rows");
  Var logits = diff::scale(
      diff::matmul(diff::l2_normalize_rows(z1), diff::l2_normalize_rows(z2), false, true), 1.0 / tau);
  return diff::info_nce_logits(logits, denominator == Denominator::include_positive);
}

double info_nce(const Mat& z1, const Mat& z2, double tau, Denominator denominator) {
  diff::Tape tape;
  return info_nce(tape.constant(z1), tape.constant(z2), tau, denominator).scalar();
}

Var intra_view_loss(std::span<const ChannelViews> orig, std::span<const ChannelViews> aug,
                    std::span<const diff::Index> users, std::span<const diff::Index> items,
                    double tau, Denominator denominator) {
  DCGL_EXPECT(!orig.empty() && orig.size() == aug.size(), "intra_view_loss: channel count mismatch");
  diff::Tape& tape = *orig.front().users.tape();
  Var total = tape.constant(Mat::Zero(1, 1));
  for (std::size_t c = 0; c < orig.size(); ++c) {
    if (users.size() >= 2)
      total = diff::add(total, info_nce(diff::gather_rows(aug[c].users, users),
                                        diff::gather_rows(orig[c].users, users), tau, denominator));
    if (items.size() >= 2)
      total = diff::add(total, info_nce(diff::gather_rows(aug[c].items, items),
                                        diff::gather_rows(orig[c].items, items), tau, denominator));
  }
  return total;
}

Var project(Var x, const ProjectionVars& p) {
  DCGL_EXPECT(p.w.rows() == x.cols() && p.w.cols() == x.cols(), "project: W must be d x d");
  return diff::leaky_relu(diff::add_row(diff::matmul(x, p.w, false, true), p.b), diff::kLeakySlope);
}

Var align_loss(Var users_id, Var users_llm, const ProjectionVars& proj_id,
               const ProjectionVars& proj_llm, double tau, Denominator denominator) {
  return info_nce(project(users_id, proj_id), project(users_llm, proj_llm), tau, denominator);
}

}  // namespace dcgl::ssl
