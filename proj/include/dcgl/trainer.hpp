#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcgl/checkpoint.hpp"
#include "dcgl/config.hpp"
#include "dcgl/corpus.hpp"
#include "dcgl/model.hpp"
#include "dcgl/rng.hpp"
#include "dcgl/translate.hpp"

namespace dcgl::train {

using corpus::Id;
using diff::Mat;
using diff::Var;

struct TrainTriple {
  Id user = 0;
  Id pos = 0;
  Id neg = 0;
  auto operator<=>(const TrainTriple&) const = default;
};

// Sorted union of each user's train, validation and test items.
std::vector<std::vector<Id>> observed_items(const corpus::SplitDataset& split);

// batch_size training edges drawn uniformly with replacement, `negatives`
// triples per edge, each negative resampled until unobserved. Edges of users
// who observed every item are skipped and counted in `skipped`.
std::vector<TrainTriple> sample_bpr_triples(std::span<const corpus::Edge> train,
                                            const std::vector<std::vector<Id>>& observed,
                                            std::size_t num_items, std::size_t batch_size,
                                            std::size_t negatives, Rng& rng,
                                            std::size_t* skipped = nullptr);

// sum_k -alpha_k ln sigma(pos_k - neg_k)
Var bpr_loss(Var pos, Var neg, Var alpha);

struct Batch {
  std::vector<TrainTriple> triples;
  std::vector<diff::Index> users, pos, neg;
  std::vector<diff::Index> ssl_users;  // distinct, first-occurrence order, capped
  std::vector<diff::Index> ssl_items;
};
Batch make_batch(std::vector<TrainTriple> triples, std::size_t ssl_cap);

// How often each term was evaluated.
struct LossCounters {
  std::size_t bpr = 0;
  std::size_t aug = 0;
  std::size_t align = 0;
  std::size_t gate = 0;
  std::size_t transe = 0;
};

struct LossTerms {
  Var total;
  Var bpr;
  Var aug;    // invalid when not evaluated
  Var align;
  Var gate;
  Var reg;
};

struct LossContext {
  const TrainConfig& config;
  const model::Inputs& inputs;
  const model::GraphView& main;
  const model::GraphView* aug = nullptr;  // no contrastive term without it
};

// BPR + l_aug * aug + l_align * align + l_gate * gate + l_reg * ||Theta||^2.
LossTerms total_loss(const model::Bound& p, const LossContext& ctx, const Batch& batch,
                     LossCounters* counters = nullptr);

// Sum over channels of the TransE loss on layer-0 entity rows.
Var transe_objective(const model::Bound& p, const model::Inputs& in, const TrainConfig& config,
                     const translate::CorruptedBatch& batch);

class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(const TrainConfig& config, double learning_rate);
  // Updates every named parameter from its gradient on `tape`.
  void step(model::ParamStore& params, const model::Bound& bound, const diff::Tape& tape,
            const std::vector<std::string>& names);
  std::uint64_t steps() const { return t_; }
  void save(ckpt::Checkpoint& c, const std::string& prefix) const;
  void load(const ckpt::Checkpoint& c, const std::string& prefix);

 private:
  OptimizerKind kind_ = OptimizerKind::adam;
  double lr_ = 0, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  std::uint64_t t_ = 0;
  std::map<std::string, std::pair<Mat, Mat>> moments_;
};

struct LossValues {
  double total = 0, bpr = 0, aug = 0, align = 0, gate = 0, reg = 0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  LossValues loss;  // mean over the epoch's batches
  double transe = 0;
  double val_recall = 0;
  double gate_user_mean = 0, gate_user_std = 0;
  double gate_item_mean = 0, gate_item_std = 0;
  std::size_t kg_kept = 0;  // augmented view sizes
  std::size_t ui_kept = 0;
  std::size_t skipped = 0;
};
std::string to_json_line(const EpochRecord& r);

struct FitResult {
  model::ParamStore best_params;
  ckpt::Checkpoint best_checkpoint;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;
  double best_validation = -1;
  bool early_stopped = false;
  std::vector<double> epoch_seconds;  // training phase only
  std::vector<double> validation_seconds;
  LossCounters counters;
};

class Trainer {
 public:
  Trainer(TrainConfig config, const model::DataBundle& data);

  const TrainConfig& config() const { return config_; }
  const model::ParamStore& params() const { return params_; }
  std::size_t epoch() const { return epoch_; }
  const LossCounters& counters() const { return counters_; }

  // Redraws the augmented graphs from the current parameters.
  void prepare_epoch();
  Batch next_batch();
  LossValues batch_loss(const Batch& batch) const;
  LossValues step(const Batch& batch);
  double transe_pass();
  EpochRecord run_epoch();
  double validation_recall() const;
  model::Representations representations() const;

  FitResult fit(const std::function<void(const EpochRecord&)>& on_epoch = {});

  ckpt::Checkpoint checkpoint() const;
  void restore(const ckpt::Checkpoint& c);

 private:
  LossTerms build_loss(const model::Bound& bound, const model::Inputs& in,
                       const Batch& batch, LossCounters* counters) const;
  std::string rng_state() const;
  void set_rng_state(const std::string& s);

  TrainConfig config_;
  const model::DataBundle& data_;
  model::GraphView main_view_;
  std::optional<model::GraphView> aug_view_;
  std::size_t kg_kept_ = 0, ui_kept_ = 0;
  std::vector<std::vector<Id>> observed_;
  model::ParamStore params_;
  std::vector<std::string> transe_names_;
  Optimizer opt_;
  Optimizer transe_opt_;
  Rng bpr_rng_, kg_drop_rng_, ui_drop_rng_, transe_rng_;
  std::size_t epoch_ = 0;
  std::size_t skipped_ = 0;
  double best_ = -1;
  std::size_t best_epoch_ = 0;
  std::size_t since_best_ = 0;
  LossCounters counters_;
};

}  // namespace dcgl::train
