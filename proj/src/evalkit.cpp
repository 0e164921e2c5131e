#include "dcgl/evalkit.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "dcgl/error.hpp"

namespace dcgl::eval {
namespace {

bool contains(std::span<const Id> sorted, Id x) { return std::binary_search(sorted.begin(), sorted.end(), x); }

std::vector<Id> candidates(std::size_t n, std::span<const Id> excluded) {
  std::vector<Id> out;
  out.reserve(n);
  for (Id i = 0; i < n; ++i)
    if (!contains(excluded, i)) out.push_back(i);
  return out;
}

auto by_score(std::span<const double> scores) {
  return [scores](Id a, Id b) { return scores[a] > scores[b] || (scores[a] == scores[b] && a < b); };
}

std::vector<Id> merged(std::span<const Id> a, std::span<const Id> b) {
  std::vector<Id> out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

}  // namespace

std::vector<Id> rank_items(std::span<const double> scores, std::span<const Id> excluded) {
  auto out = candidates(scores.size(), excluded);
  std::sort(out.begin(), out.end(), by_score(scores));
  return out;
}

std::vector<Id> top_k(std::span<const double> scores, std::span<const Id> excluded, std::size_t k) {
  auto out = candidates(scores.size(), excluded);
  k = std::min(k, out.size());
  std::partial_sort(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(k), out.end(), by_score(scores));
  out.resize(k);
  return out;
}

std::optional<double> recall_at_k(std::span<const Id> ranked, std::span<const Id> relevant, std::size_t k) {
  DCGL_EXPECT(k >= 1, "recall_at_k: K must be >= 1");
  if (relevant.empty()) return std::nullopt;
  std::size_t hits = 0;
  for (std::size_t p = 0; p < std::min(k, ranked.size()); ++p) hits += contains(relevant, ranked[p]);
  return static_cast<double>(hits) / static_cast<double>(relevant.size());
}

std::optional<double> ndcg_at_k(std::span<const Id> ranked, std::span<const Id> relevant, std::size_t k) {
  DCGL_EXPECT(k >= 1, "ndcg_at_k: K must be >= 1");
  if (relevant.empty()) return std::nullopt;
  double dcg = 0, idcg = 0;
  for (std::size_t p = 0; p < std::min(k, ranked.size()); ++p)
    if (contains(relevant, ranked[p])) dcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  for (std::size_t p = 0; p < std::min(k, relevant.size()); ++p) idcg += 1.0 / std::log2(static_cast<double>(p) + 2.0);
  return dcg / idcg;
}

std::string_view to_string(Target t) {
  switch (t) {
    case Target::train: return "train";
    case Target::validation: return "validation";
    case Target::test: return "test";
  }
  return "test";
}

MetricsReport evaluate(const model::Representations& reps, const corpus::SplitDataset& split, Target target,
                       std::vector<std::size_t> ks, std::size_t threads) {
  DCGL_EXPECT(!ks.empty(), "evaluate: no cutoffs");
  for (auto k : ks) DCGL_EXPECT(k >= 1, "evaluate: K must be >= 1");
  const std::size_t nu = reps.num_users(), ni = reps.num_items();
  DCGL_EXPECT(split.train_items.size() == nu, "evaluate: split does not match the model's users");
  const std::size_t max_k = *std::max_element(ks.begin(), ks.end());
  const auto& relevant_sets = target == Target::train        ? split.train_items
                              : target == Target::validation ? split.validation_items
                                                             : split.test_items;

  std::vector<std::optional<UserMetrics>> slots(nu);
  auto work = [&](std::size_t begin, std::size_t stride) {
    std::vector<double> scores(ni);
    for (std::size_t u = begin; u < nu; u += stride) {
      const auto& relevant = relevant_sets[u];
      if (relevant.empty()) continue;
      std::vector<Id> excluded;
      if (target == Target::validation) excluded = split.train_items[u];
      if (target == Target::test) excluded = merged(split.train_items[u], split.validation_items[u]);
      reps.score_user(static_cast<Id>(u), scores);
      const auto ranked = top_k(scores, excluded, max_k);
      UserMetrics m;
      m.user = static_cast<Id>(u);
      for (auto k : ks) {
        m.recall.push_back(*recall_at_k(ranked, relevant, k));
        m.ndcg.push_back(*ndcg_at_k(ranked, relevant, k));
      }
      for (Id item : relevant) {
        auto it = std::find(ranked.begin(), ranked.end(), item);
        m.hits.emplace_back(item, it == ranked.end() ? 0u : static_cast<std::uint32_t>(it - ranked.begin() + 1));
      }
      slots[u] = std::move(m);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, nu));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < workers; ++t) pool.emplace_back(work, t, workers);
    for (auto& th : pool) th.join();
  }

  MetricsReport r;
  r.target = target;
  r.ks = std::move(ks);
  r.recall.assign(r.ks.size(), 0.0);
  r.ndcg.assign(r.ks.size(), 0.0);
  for (auto& s : slots) {
    if (!s) continue;
    for (std::size_t j = 0; j < r.ks.size(); ++j) {
      r.recall[j] += s->recall[j];
      r.ndcg[j] += s->ndcg[j];
    }
    r.per_user.push_back(std::move(*s));
  }
  r.num_users_evaluated = r.per_user.size();
  if (r.num_users_evaluated > 0)
    for (std::size_t j = 0; j < r.ks.size(); ++j) {
      r.recall[j] /= static_cast<double>(r.num_users_evaluated);
      r.ndcg[j] /= static_cast<double>(r.num_users_evaluated);
    }
  return r;
}

GroupSpec GroupSpec::parse(std::string_view text) {
  GroupSpec g;
  auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ConfigError("group spec must look like side:b0,b1,...");
  auto side = text.substr(0, colon);
  if (side == "user") g.side = Side::user;
  else if (side == "item") g.side = Side::item;
  else throw ConfigError("group side must be user or item");
  auto rest = text.substr(colon + 1);
  while (!rest.empty()) {
    auto comma = rest.find(',');
    auto tok = rest.substr(0, comma);
    std::uint32_t v = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
      throw ConfigError("bad group boundary '" + std::string(tok) + "'");
    g.bounds.push_back(v);
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
  }
  if (g.bounds.empty() || g.bounds.front() != 0) throw ConfigError("group boundaries must start at 0");
  for (std::size_t k = 1; k < g.bounds.size(); ++k)
    if (g.bounds[k] <= g.bounds[k - 1]) throw ConfigError("group boundaries must be strictly increasing");
  return g;
}

std::size_t GroupSpec::bin_of(std::uint32_t count) const {
  auto it = std::upper_bound(bounds.begin(), bounds.end(), count);
  return static_cast<std::size_t>(it - bounds.begin()) - 1;
}

std::string GroupSpec::label(std::size_t bin) const {
  if (bin + 1 == bounds.size()) return "[" + std::to_string(bounds[bin]) + "+)";
  return "[" + std::to_string(bounds[bin]) + "," + std::to_string(bounds[bin + 1]) + ")";
}

GroupSpec default_user_groups() { return {Side::user, {0, 18, 36, 72}}; }
GroupSpec default_item_groups() { return {Side::item, {0, 12, 24, 48}}; }

std::vector<GroupRow> group_report(const MetricsReport& report, const corpus::FrequencyFeatures& freq,
                                   const GroupSpec& spec) {
  const auto nk = report.ks.size();
  std::vector<GroupRow> rows(spec.num_bins());
  for (std::size_t b = 0; b < rows.size(); ++b) {
    rows[b].label = spec.label(b);
    rows[b].recall.assign(nk, 0.0);
    rows[b].ndcg.assign(nk, 0.0);
  }
  const auto& counts = spec.side == Side::user ? freq.user_counts : freq.item_counts;
  for (auto c : counts) ++rows[spec.bin_of(c)].population;
  for (const auto& m : report.per_user) {
    if (spec.side == Side::user) {
      auto& row = rows[spec.bin_of(counts[m.user])];
      ++row.evaluated;
      for (std::size_t j = 0; j < nk; ++j) {
        row.recall[j] += m.recall[j];
        row.ndcg[j] += m.ndcg[j];
      }
      continue;
    }
    for (const auto& [item, rank] : m.hits) {
      auto& row = rows[spec.bin_of(counts[item])];
      ++row.evaluated;
      for (std::size_t j = 0; j < nk; ++j) {
        if (rank == 0 || rank > report.ks[j]) continue;
        row.recall[j] += 1.0;
        row.ndcg[j] += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
      }
    }
  }
  for (auto& row : rows)
    if (row.evaluated > 0)
      for (std::size_t j = 0; j < nk; ++j) {
        row.recall[j] /= static_cast<double>(row.evaluated);
        row.ndcg[j] /= static_cast<double>(row.evaluated);
      }
  return rows;
}

namespace {

std::vector<double> average_ranks(std::span<const double> x) {
  std::vector<std::size_t> order(x.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
    const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  DCGL_EXPECT(x.size() == y.size(), "spearman: length mismatch");
  if (x.size() < 2) return {};
  const auto rx = average_ranks(x), ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) return {};
  return {sxy / std::sqrt(sxx * syy), true};
}

GateExport export_gates(const model::Representations& reps, const corpus::FrequencyFeatures& freq) {
  GateExport g;
  const bool gated = !reps.gate_user.empty();
  const double fixed = !gated && reps.channels.front() == model::Channel::llm ? 0.0 : 1.0;
  auto side = [&](Side kind, const std::vector<std::uint32_t>& counts, const std::vector<double>& phi,
                  const std::vector<double>& gates) {
    std::vector<double> f, v;
    for (std::size_t k = 0; k < counts.size(); ++k) {
      const double gate = gated ? gates[k] : fixed;
      g.rows.push_back({kind, static_cast<Id>(k), counts[k], phi[k], gate});
      f.push_back(counts[k]);
      v.push_back(gate);
    }
    return spearman(f, v);
  };
  g.user_correlation = side(Side::user, freq.user_counts, freq.user_phi, reps.gate_user);
  g.item_correlation = side(Side::item, freq.item_counts, freq.item_phi, reps.gate_item);
  return g;
}

void write_gate_tsv(std::ostream& out, const GateExport& gates) {
  out << "kind\tid\tfreq\tphi\tgate\n";
  char buf[64];
  auto num = [&](double v) {
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
  };
  for (const auto& r : gates.rows)
    out << (r.kind == Side::user ? "user" : "item") << '\t' << r.id << '\t' << r.freq << '\t' << num(r.phi)
        << '\t' << num(r.gate) << '\n';
}

std::string metrics_json(const MetricsReport& report, const std::string& config_hash,
                         const std::vector<std::pair<GroupSpec, std::vector<GroupRow>>>& groups,
                         const GateExport* gates) {
  nlohmann::ordered_json j;
  j["config_hash"] = config_hash;
  j["target"] = std::string(to_string(report.target));
  j["num_users_evaluated"] = report.num_users_evaluated;
  auto per_k = [&](const std::vector<double>& recall, const std::vector<double>& ndcg) {
    nlohmann::ordered_json m = nlohmann::ordered_json::object();
    for (std::size_t k = 0; k < report.ks.size(); ++k)
      m[std::to_string(report.ks[k])] = {{"recall", recall[k]}, {"ndcg", ndcg[k]}};
    return m;
  };
  j["metrics"] = per_k(report.recall, report.ndcg);
  nlohmann::ordered_json gs = nlohmann::ordered_json::array();
  for (const auto& [spec, rows] : groups) {
    nlohmann::ordered_json g;
    g["side"] = spec.side == Side::user ? "user" : "item";
    nlohmann::ordered_json bins = nlohmann::ordered_json::array();
    for (const auto& row : rows)
      bins.push_back({{"bin", row.label},
                      {"population", row.population},
                      {"evaluated", row.evaluated},
                      {"metrics", per_k(row.recall, row.ndcg)}});
    g["bins"] = bins;
    gs.push_back(g);
  }
  j["groups"] = gs;
  if (gates) {
    j["gate_spearman"] = {
        {"user", {{"value", gates->user_correlation.value}, {"defined", gates->user_correlation.defined}}},
        {"item", {{"value", gates->item_correlation.value}, {"defined", gates->item_correlation.defined}}}};
  }
  return j.dump(2) + "\n";
}

}  // namespace dcgl::eval
