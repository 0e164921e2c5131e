#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcgl/corpus.hpp"
#include "dcgl/model.hpp"

namespace dcgl::eval {

using corpus::Id;

// All items not in `excluded` (sorted), by score descending; ties go to the
// lower id.
std::vector<Id> rank_items(std::span<const double> scores, std::span<const Id> excluded);
// The first k entries of rank_items without sorting the whole list.
std::vector<Id> top_k(std::span<const double> scores, std::span<const Id> excluded, std::size_t k);

// nullopt when `relevant` is empty. `relevant` must be sorted.
std::optional<double> recall_at_k(std::span<const Id> ranked, std::span<const Id> relevant,
                                  std::size_t k);
// Binary gains, log2 discount.
std::optional<double> ndcg_at_k(std::span<const Id> ranked, std::span<const Id> relevant,
                                std::size_t k);

enum class Target { train, validation, test };
std::string_view to_string(Target t);

struct UserMetrics {
  Id user = 0;
  std::vector<double> recall;  // one per K
  std::vector<double> ndcg;
  // (item, 1-based rank) of every relevant item; rank 0 when beyond max K.
  std::vector<std::pair<Id, std::uint32_t>> hits;
};

struct MetricsReport {
  Target target = Target::test;
  std::vector<std::size_t> ks;
  std::vector<double> recall;  // means over evaluated users
  std::vector<double> ndcg;
  std::size_t num_users_evaluated = 0;
  std::vector<UserMetrics> per_user;  // ascending user id
};

// Candidates exclude the items known before the target split: none for
// train, train items for validation, train and validation items for test.
MetricsReport evaluate(const model::Representations& reps, const corpus::SplitDataset& split,
                       Target target, std::vector<std::size_t> ks, std::size_t threads = 1);

enum class Side { user, item };

// Half-open bins [b0, b1), ..., [b_last, inf); b0 is 0.
struct GroupSpec {
  Side side = Side::user;
  std::vector<std::uint32_t> bounds;
  static GroupSpec parse(std::string_view text);  // "user:0,18,36,72"
  std::size_t bin_of(std::uint32_t count) const;
  std::string label(std::size_t bin) const;
  std::size_t num_bins() const { return bounds.size(); }
};
GroupSpec default_user_groups();
GroupSpec default_item_groups();

struct GroupRow {
  std::string label;
  std::size_t population = 0;  // entities falling in the bin
  std::size_t evaluated = 0;   // users (user side) or test interactions (item side)
  std::vector<double> recall;
  std::vector<double> ndcg;
};

// Counts are training interaction counts. On the item side, every target
// interaction is one unit: recall is its hit rate and ndcg its discounted
// gain 1/log2(rank + 1).
std::vector<GroupRow> group_report(const MetricsReport& report, const corpus::FrequencyFeatures& freq,
                                   const GroupSpec& spec);

struct Correlation {
  double value = 0;
  bool defined = false;
};
// Spearman rank correlation with average ranks for ties; 0 and undefined
// when either side is constant.
Correlation spearman(std::span<const double> x, std::span<const double> y);

struct GateRow {
  Side kind = Side::user;
  Id id = 0;
  std::uint32_t freq = 0;
  double phi = 0;
  double gate = 0;
};
struct GateExport {
  std::vector<GateRow> rows;
  Correlation user_correlation;
  Correlation item_correlation;
};
// Ungated variants report the fixed share of the ID channel (1 or 0).
GateExport export_gates(const model::Representations& reps, const corpus::FrequencyFeatures& freq);
void write_gate_tsv(std::ostream& out, const GateExport& gates);

std::string metrics_json(const MetricsReport& report, const std::string& config_hash,
                         const std::vector<std::pair<GroupSpec, std::vector<GroupRow>>>& groups,
                         const GateExport* gates = nullptr);

}  // namespace dcgl::eval
