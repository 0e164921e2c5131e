#include "dcgl/translate.hpp"

#include <cmath>

#include "dcgl/error.hpp"

namespace dcgl::translate {

double transe_distance(std::span<const double> h, std::span<const double> r,
                       std::span<const double> t) {
  DCGL_EXPECT(h.size() == r.size() && r.size() == t.size(), "transe_distance: length mismatch");
  double d = 0;
  for (std::size_t k = 0; k < h.size(); ++k) d += std::abs(h[k] + r[k] - t[k]);
  return d;
}

CorruptedBatch sample_corrupted(const corpus::KnowledgeGraph& kg, std::size_t batch_size, Rng& rng) {
  if (kg.triplets.empty()) throw DataError("sample_corrupted: knowledge graph has no triplets");
  if (kg.num_entities < 2) throw DataError("sample_corrupted: need at least two entities");
  CorruptedBatch batch;
  batch.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) {
    const auto& t = kg.triplets[uniform_index(rng, kg.triplets.size())];
    corpus::Id neg;
    do {
      neg = static_cast<corpus::Id>(uniform_index(rng, kg.num_entities));
    } while (neg == t.tail);
    batch.push_back({t.head, t.relation, t.tail, neg});
  }
  return batch;
}

Var transe_pair_loss(Var pos_distance, Var neg_distance) {
  return diff::scale(diff::log_sigmoid(diff::sub(neg_distance, pos_distance)), -1.0);
}

Var transe_loss(const CorruptedBatch& batch, Var entities, Var relations) {
  DCGL_EXPECT(!batch.empty(), "transe_loss: empty batch");
  std::vector<diff::Index> h, r, t, tn;
  for (const auto& c : batch) {
    h.push_back(c.head);
    r.push_back(c.relation);
    t.push_back(c.tail);
    tn.push_back(c.corrupted_tail);
  }
  Var hr = diff::add(diff::gather_rows(entities, h), diff::gather_rows(relations, r));
  Var pos = diff::row_sum(diff::abs(diff::sub(hr, diff::gather_rows(entities, t))));
  Var neg = diff::row_sum(diff::abs(diff::sub(hr, diff::gather_rows(entities, tn))));
  return diff::sum(transe_pair_loss(pos, neg));
}

}  // namespace dcgl::translate
