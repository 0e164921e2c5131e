#pragma once

#include <span>
#include <vector>

#include "dcgl/corpus.hpp"
#include "dcgl/diff/ops.hpp"
#include "dcgl/rng.hpp"

namespace dcgl::ssl {

using diff::Mat;
using diff::Var;

// Keeps each triplet independently with probability 1 - rho.
corpus::KnowledgeGraph drop_edges_kg(const corpus::KnowledgeGraph& kg, double rho, Rng& rng);

// Per-item stability in [0, 1]: (cos(orig_i, aug_i) + 1) / 2 averaged over
// the supplied channels, then min-max rescaled over items. When every raw
// score is equal, all scores are 1.
using StabilityScores = std::vector<double>;
StabilityScores stability_scores(const Mat& orig, const Mat& aug);
StabilityScores stability_scores(std::span<const Mat> orig, std::span<const Mat> aug);

// Keeps edge (u, i) with probability mu * S_i.
std::vector<corpus::Edge> stab_adaptive_drop(std::span<const corpus::Edge> edges,
                                             const StabilityScores& scores, double mu, Rng& rng);
corpus::InteractionGraph stab_adaptive_drop(const corpus::InteractionGraph& graph,
                                            const StabilityScores& scores, double mu, Rng& rng);

enum class Denominator { exclude_positive, include_positive };

// -sum_n log[exp(sim(z1n, z2n)/tau) / sum_{m in D(n)} exp(sim(z1n, z2m)/tau)]
// with cosine similarity; D(n) = {m != n} unless include_positive.
Var info_nce(Var z1, Var z2, double tau, Denominator denominator = Denominator::exclude_positive);
double info_nce(const Mat& z1, const Mat& z2, double tau,
                Denominator denominator = Denominator::exclude_positive);

struct ChannelViews {
  Var users;
  Var items;
};

// Sum over channels of InfoNCE(U_aug, U) + InfoNCE(I_aug, I) restricted to
// the given rows. Terms with fewer than two rows are skipped.
Var intra_view_loss(std::span<const ChannelViews> orig, std::span<const ChannelViews> aug,
                    std::span<const diff::Index> users, std::span<const diff::Index> items,
                    double tau, Denominator denominator = Denominator::exclude_positive);

// Linear d x d map plus bias followed by LeakyReLU.
struct ProjectionVars {
  Var w;  // d x d
  Var b;  // d x 1
};
Var project(Var x, const ProjectionVars& p);

// InfoNCE between Proj1(U_id) and Proj2(U_llm); row n of both is the same user.
Var align_loss(Var users_id, Var users_llm, const ProjectionVars& proj_id,
               const ProjectionVars& proj_llm, double tau,
               Denominator denominator = Denominator::exclude_positive);

}  // namespace dcgl::ssl
