#include "dcgl/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <set>
#include <string_view>
#include <unordered_map>

#include "dcgl/error.hpp"
#include "dcgl/rng.hpp"

namespace dcgl::corpus {
namespace {

std::vector<std::string> decimal_tokens(std::size_t n, std::string_view prefix) {
  std::vector<std::string> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(std::string(prefix) + std::to_string(i));
  return out;
}

std::vector<std::string_view> split_tabs(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find('\t', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool skip_line(std::string_view line) {
  auto t = trim(line);
  return t.empty() || t.front() == '#';
}

// Token interner with first-occurrence ids.
class Vocabulary {
 public:
  Id intern(std::string_view token) {
    auto [it, inserted] = index_.try_emplace(std::string(token), static_cast<Id>(tokens_.size()));
    if (inserted) tokens_.emplace_back(token);
    return it->second;
  }
  const Id* find(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? nullptr : &it->second;
  }
  std::size_t size() const { return tokens_.size(); }
  std::vector<std::string> take() { return std::move(tokens_); }

 private:
  std::unordered_map<std::string, Id> index_;
  std::vector<std::string> tokens_;
};

}  // namespace

InteractionGraph InteractionGraph::from_edges(std::size_t num_users, std::size_t num_items,
                                              std::span<const Edge> edges,
                                              std::vector<std::string> user_tokens,
                                              std::vector<std::string> item_tokens) {
  InteractionGraph g;
  g.num_users = num_users;
  g.num_items = num_items;
  g.user_adj.assign(num_users, {});
  g.item_adj.assign(num_items, {});
  std::set<Edge> seen;
  g.edges.reserve(edges.size());
  for (const auto& e : edges) {
    if (e.user >= num_users || e.item >= num_items)
      throw DataError("edge (" + std::to_string(e.user) + "," + std::to_string(e.item) +
                      ") out of range");
    if (!seen.insert(e).second) continue;
    g.edges.push_back(e);
    g.user_adj[e.user].push_back(e.item);
    g.item_adj[e.item].push_back(e.user);
  }
  for (auto& adj : g.user_adj) std::sort(adj.begin(), adj.end());
  for (auto& adj : g.item_adj) std::sort(adj.begin(), adj.end());
  g.user_tokens = user_tokens.empty() ? decimal_tokens(num_users, "u") : std::move(user_tokens);
  g.item_tokens = item_tokens.empty() ? decimal_tokens(num_items, "i") : std::move(item_tokens);
  if (g.user_tokens.size() != num_users || g.item_tokens.size() != num_items)
    throw DataError("token table size does not match node count");
  return g;
}

void InteractionGraph::validate() const {
  if (user_adj.size() != num_users || item_adj.size() != num_items)
    throw DataError("adjacency size mismatch");
  std::set<Edge> seen;
  for (const auto& e : edges) {
    if (e.user >= num_users || e.item >= num_items) throw DataError("edge id out of range");
    if (!seen.insert(e).second) throw DataError("duplicate edge");
    if (!std::binary_search(user_adj[e.user].begin(), user_adj[e.user].end(), e.item) ||
        !std::binary_search(item_adj[e.item].begin(), item_adj[e.item].end(), e.user))
      throw DataError("adjacency is not consistent with edges");
  }
  std::size_t su = 0, si = 0;
  for (const auto& a : user_adj) su += a.size();
  for (const auto& a : item_adj) si += a.size();
  if (su != edges.size() || si != edges.size()) throw DataError("adjacency degree sum mismatch");
}

KnowledgeGraph KnowledgeGraph::from_triplets(std::size_t num_items, std::size_t num_entities,
                                             std::size_t num_relations,
                                             std::vector<Triplet> triplets,
                                             std::vector<std::string> entity_tokens,
                                             std::vector<std::string> relation_tokens) {
  if (num_entities < num_items) throw DataError("entity count below item count");
  KnowledgeGraph kg;
  kg.num_items = num_items;
  kg.num_entities = num_entities;
  kg.num_relations = num_relations;
  kg.triplets = std::move(triplets);
  kg.item_neighbors.assign(num_items, {});
  for (const auto& t : kg.triplets) {
    if (t.head >= num_entities || t.tail >= num_entities || t.relation >= num_relations)
      throw DataError("triplet id out of range");
    if (t.head < num_items) kg.item_neighbors[t.head].push_back({t.relation, t.tail});
  }
  if (entity_tokens.empty()) {
    entity_tokens = decimal_tokens(num_items, "i");
    for (std::size_t e = num_items; e < num_entities; ++e)
      entity_tokens.push_back("e" + std::to_string(e - num_items));
  }
  kg.entity_tokens = std::move(entity_tokens);
  kg.relation_tokens =
      relation_tokens.empty() ? decimal_tokens(num_relations, "r") : std::move(relation_tokens);
  if (kg.entity_tokens.size() != num_entities || kg.relation_tokens.size() != num_relations)
    throw DataError("token table size does not match entity/relation count");
  return kg;
}

void KnowledgeGraph::validate() const {
  if (item_neighbors.size() != num_items) throw DataError("item_neighbors size mismatch");
  std::vector<std::vector<KgNeighbor>> expect(num_items);
  for (const auto& t : triplets) {
    if (t.head >= num_entities || t.tail >= num_entities || t.relation >= num_relations)
      throw DataError("triplet id out of range");
    if (t.head < num_items) expect[t.head].push_back({t.relation, t.tail});
  }
  if (expect != item_neighbors) throw DataError("item_neighbors inconsistent with triplets");
}

double log_normalized_frequency(std::uint64_t freq, std::uint64_t max_freq) {
  if (max_freq == 0) return 0.0;
  return std::log1p(static_cast<double>(freq)) / std::log1p(static_cast<double>(max_freq));
}

InteractionGraph parse_interactions(std::istream& in) {
  Vocabulary users, items;
  std::vector<Edge> edges;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 2)
      throw ParseError("expected 2 tab-separated fields, got " + std::to_string(fields.size()),
                       lineno);
    auto u = trim(fields[0]), i = trim(fields[1]);
    if (u.empty() || i.empty()) throw ParseError("empty token", lineno);
    edges.push_back({users.intern(u), items.intern(i)});
  }
  const auto nu = users.size(), ni = items.size();
  return InteractionGraph::from_edges(nu, ni, edges, users.take(), items.take());
}

KnowledgeGraph parse_kg(std::istream& in, const InteractionGraph& graph, bool strict_linking) {
  std::unordered_map<std::string, Id> item_ids;
  for (Id i = 0; i < graph.item_tokens.size(); ++i) item_ids.emplace(graph.item_tokens[i], i);
  Vocabulary others, relations;
  struct Raw {
    bool head_item;
    Id head;
    Id rel;
    bool tail_item;
    Id tail;
  };
  std::vector<Raw> raw;
  std::string line;
  std::size_t lineno = 0;
  auto resolve = [&](std::string_view tok, bool& is_item) -> Id {
    auto it = item_ids.find(std::string(tok));
    is_item = it != item_ids.end();
    return is_item ? it->second : others.intern(tok);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (skip_line(line)) continue;
    auto fields = split_tabs(line);
    if (fields.size() != 3)
      throw ParseError("expected 3 tab-separated fields, got " + std::to_string(fields.size()),
                       lineno);
    auto h = trim(fields[0]), r = trim(fields[1]), t = trim(fields[2]);
    if (h.empty() || r.empty() || t.empty()) throw ParseError("empty token", lineno);
    if (strict_linking && !item_ids.count(std::string(h)))
      throw DataError("line " + std::to_string(lineno) + ": head '" + std::string(h) +
                      "' does not link to a known item");
    Raw rec{};
    rec.head = resolve(h, rec.head_item);
    rec.rel = relations.intern(r);
    rec.tail = resolve(t, rec.tail_item);
    raw.push_back(rec);
  }
  const std::size_t ni = graph.num_items;
  std::vector<Triplet> triplets;
  triplets.reserve(raw.size());
  for (const auto& r : raw) {
    triplets.push_back({r.head_item ? r.head : static_cast<Id>(ni + r.head), r.rel,
                        r.tail_item ? r.tail : static_cast<Id>(ni + r.tail)});
  }
  std::vector<std::string> entity_tokens = graph.item_tokens;
  auto other_tokens = others.take();
  entity_tokens.insert(entity_tokens.end(), other_tokens.begin(), other_tokens.end());
  const auto ne = entity_tokens.size();
  const auto nr = relations.size();
  return KnowledgeGraph::from_triplets(ni, ne, nr, std::move(triplets), std::move(entity_tokens),
                                       relations.take());
}

std::vector<Edge> filter_low_frequency(std::span<const Edge> edges, std::size_t min_interactions) {
  std::vector<Edge> current(edges.begin(), edges.end());
  if (min_interactions == 0) return current;
  while (true) {
    std::unordered_map<Id, std::size_t> degree;
    for (const auto& e : current) ++degree[e.user];
    std::vector<Edge> next;
    next.reserve(current.size());
    for (const auto& e : current)
      if (degree[e.user] >= min_interactions) next.push_back(e);
    if (next.size() == current.size()) return next;
    current = std::move(next);
  }
}

InteractionGraph filter_graph(const InteractionGraph& graph, std::size_t min_interactions) {
  auto kept = filter_low_frequency(graph.edges, min_interactions);
  std::vector<Id> remap(graph.num_users, static_cast<Id>(-1));
  std::vector<std::string> tokens;
  Id next = 0;
  for (auto& e : kept) {
    if (remap[e.user] == static_cast<Id>(-1)) {
      remap[e.user] = next++;
      tokens.push_back(graph.user_tokens[e.user]);
    }
    e.user = remap[e.user];
  }
  return InteractionGraph::from_edges(next, graph.num_items, kept, std::move(tokens),
                                      graph.item_tokens);
}

SplitDataset SplitDataset::from_indices(const InteractionGraph& graph, std::uint64_t seed,
                                        std::vector<std::uint32_t> train_idx,
                                        std::vector<std::uint32_t> validation_idx,
                                        std::vector<std::uint32_t> test_idx) {
  SplitDataset s;
  s.seed = seed;
  s.train_idx = std::move(train_idx);
  s.validation_idx = std::move(validation_idx);
  s.test_idx = std::move(test_idx);
  std::vector<char> used(graph.edges.size(), 0);
  auto fill = [&](const std::vector<std::uint32_t>& idx, std::vector<Edge>& edges,
                  std::vector<std::vector<Id>>& items) {
    items.assign(graph.num_users, {});
    edges.reserve(idx.size());
    for (auto k : idx) {
      if (k >= graph.edges.size()) throw DataError("split index out of range");
      if (used[k]) throw DataError("split index " + std::to_string(k) + " listed twice");
      used[k] = 1;
      edges.push_back(graph.edges[k]);
      items[graph.edges[k].user].push_back(graph.edges[k].item);
    }
    for (auto& v : items) std::sort(v.begin(), v.end());
  };
  fill(s.train_idx, s.train, s.train_items);
  fill(s.validation_idx, s.validation, s.validation_items);
  fill(s.test_idx, s.test, s.test_items);
  if (std::find(used.begin(), used.end(), 0) != used.end())
    throw DataError("split does not cover every edge");
  return s;
}

SplitDataset split_interactions(const InteractionGraph& graph, SplitRatios ratios,
                                std::uint64_t seed) {
  if (!(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0))
    throw ContractViolation("split ratios must be positive");
  const double total = ratios.train + ratios.validation + ratios.test;
  std::vector<std::vector<std::uint32_t>> per_user(graph.num_users);
  for (std::uint32_t k = 0; k < graph.edges.size(); ++k) per_user[graph.edges[k].user].push_back(k);

  Rng rng = make_rng(seed, "split");
  std::vector<std::uint32_t> train, val, test;
  for (auto& idx : per_user) {
    const std::size_t n = idx.size();
    if (n < 3) {
      train.insert(train.end(), idx.begin(), idx.end());
      continue;
    }
    for (std::size_t j = n - 1; j > 0; --j) std::swap(idx[j], idx[uniform_index(rng, j + 1)]);
    const auto n_val = static_cast<std::size_t>(std::floor(ratios.validation / total * n + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(ratios.test / total * n + 1e-9));
    const std::size_t n_train = n - n_val - n_test;
    train.insert(train.end(), idx.begin(), idx.begin() + n_train);
    val.insert(val.end(), idx.begin() + n_train, idx.begin() + n_train + n_val);
    test.insert(test.end(), idx.begin() + n_train + n_val, idx.end());
  }
  return SplitDataset::from_indices(graph, seed, std::move(train), std::move(val), std::move(test));
}

FrequencyFeatures frequency_features(const InteractionGraph& graph,
                                     std::span<const Edge> train_edges) {
  FrequencyFeatures f;
  f.user_counts.assign(graph.num_users, 0);
  f.item_counts.assign(graph.num_items, 0);
  for (const auto& e : train_edges) {
    ++f.user_counts.at(e.user);
    ++f.item_counts.at(e.item);
  }
  auto phi = [](const std::vector<std::uint32_t>& counts) {
    const std::uint64_t mx = counts.empty() ? 0 : *std::max_element(counts.begin(), counts.end());
    std::vector<double> out(counts.size());
    for (std::size_t k = 0; k < counts.size(); ++k) out[k] = log_normalized_frequency(counts[k], mx);
    return out;
  };
  f.user_phi = phi(f.user_counts);
  f.item_phi = phi(f.item_counts);
  return f;
}

}  // namespace dcgl::corpus
