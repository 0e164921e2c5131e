#include "dcgl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iostream>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

#include "dcgl/error.hpp"
#include "dcgl/evalkit.hpp"
#include "dcgl/fusion.hpp"
#include "dcgl/ssl.hpp"

namespace dcgl::train {

std::vector<std::vector<Id>> observed_items(const corpus::SplitDataset& split) {
  std::vector<std::vector<Id>> out(split.train_items.size());
  for (std::size_t u = 0; u < out.size(); ++u) {
    auto& o = out[u];
    o = split.train_items[u];
    o.insert(o.end(), split.validation_items[u].begin(), split.validation_items[u].end());
    o.insert(o.end(), split.test_items[u].begin(), split.test_items[u].end());
    std::sort(o.begin(), o.end());
    o.erase(std::unique(o.begin(), o.end()), o.end());
  }
  return out;
}

std::vector<TrainTriple> sample_bpr_triples(std::span<const corpus::Edge> train,
                                            const std::vector<std::vector<Id>>& observed,
                                            std::size_t num_items, std::size_t batch_size,
                                            std::size_t negatives, Rng& rng, std::size_t* skipped) {
  DCGL_EXPECT(!train.empty(), "sample_bpr_triples: empty training split");
  DCGL_EXPECT(negatives >= 1, "sample_bpr_triples: need at least one negative");
  std::vector<TrainTriple> out;
  out.reserve(batch_size * negatives);
  std::size_t skip = 0;
  for (std::size_t k = 0; k < batch_size; ++k) {
    const auto& e = train[uniform_index(rng, train.size())];
    const auto& seen = observed[e.user];
    if (seen.size() >= num_items) {
      ++skip;
      continue;
    }
    for (std::size_t n = 0; n < negatives; ++n) {
      Id neg;
      do {
        neg = static_cast<Id>(uniform_index(rng, num_items));
      } while (std::binary_search(seen.begin(), seen.end(), neg));
      out.push_back({e.user, e.item, neg});
    }
  }
  if (skip > 0) {
    static bool warned = false;
    if (!warned) {
      std::clog << "warning: skipped training edges of users who interacted with every item\n";
      warned = true;
    }
  }
  if (skipped) *skipped += skip;
  return out;
}

Var bpr_loss(Var pos, Var neg, Var alpha) {
  return diff::scale(diff::sum(diff::mul(alpha, diff::log_sigmoid(diff::sub(pos, neg)))), -1.0);
}

Batch make_batch(std::vector<TrainTriple> triples, std::size_t ssl_cap) {
  Batch b;
  std::unordered_set<Id> seen_u, seen_i;
  for (const auto& t : triples) {
    b.users.push_back(t.user);
    b.pos.push_back(t.pos);
    b.neg.push_back(t.neg);
    const bool room_u = ssl_cap == 0 || b.ssl_users.size() < ssl_cap;
    const bool room_i = ssl_cap == 0 || b.ssl_items.size() < ssl_cap;
    if (room_u && seen_u.insert(t.user).second) b.ssl_users.push_back(t.user);
    if (room_i && seen_i.insert(t.pos).second) b.ssl_items.push_back(t.pos);
  }
  b.triples = std::move(triples);
  return b;
}

LossTerms total_loss(const model::Bound& p, const LossContext& ctx, const Batch& batch, LossCounters* counters) {
  DCGL_EXPECT(!batch.triples.empty(), "total_loss: empty batch");
  const auto& cfg = ctx.config;
  LossTerms t;
  auto f = model::forward(p, ctx.inputs, ctx.main, cfg);
  diff::Tape& tape = *f.channels.front().users.tape();

  auto pos = model::score_pairs(f, batch.users, batch.pos);
  auto neg = model::score_pairs(f, batch.users, batch.neg);
  Var alpha = cfg.bpr_alpha_grad ? pos.alpha : tape.constant(pos.alpha.value());
  t.bpr = bpr_loss(pos.score, neg.score, alpha);
  if (counters) ++counters->bpr;
  t.total = t.bpr;

  const double l_aug = cfg.effective_lambda_aug();
  if (l_aug > 0 && ctx.aug) {
    auto fa = model::forward(p, ctx.inputs, *ctx.aug, cfg);
    std::vector<ssl::ChannelViews> orig, aug;
    for (std::size_t c = 0; c < f.channels.size(); ++c) {
      orig.push_back({f.channels[c].users, f.channels[c].items});
      aug.push_back({fa.channels[c].users, fa.channels[c].items});
    }
    t.aug = ssl::intra_view_loss(orig, aug, batch.ssl_users, batch.ssl_items, cfg.tau, cfg.infonce_denominator);
    if (counters) ++counters->aug;
    t.total = diff::add(t.total, diff::scale(t.aug, l_aug));
  }

  const double l_align = cfg.effective_lambda_align();
  if (l_align > 0 && f.gated() && batch.ssl_users.size() >= 2) {
    t.align = ssl::align_loss(diff::gather_rows(f.channels[0].users, batch.ssl_users),
                              diff::gather_rows(f.channels[1].users, batch.ssl_users),
                              {model::param(p, "proj_id.w"), model::param(p, "proj_id.b")},
                              {model::param(p, "proj_llm.w"), model::param(p, "proj_llm.b")}, cfg.tau,
                              cfg.infonce_denominator);
    if (counters) ++counters->align;
    t.total = diff::add(t.total, diff::scale(t.align, l_align));
  }

  if (cfg.lambda_gate > 0 && f.gated()) {
    t.gate = fusion::gate_regularization(pos.gate_user, pos.gate_item, neg.gate_item);
    if (counters) ++counters->gate;
    t.total = diff::add(t.total, diff::scale(t.gate, cfg.lambda_gate));
  }

  if (cfg.lambda_reg > 0) {
    Var reg;
    for (const auto& [name, v] : p) {
      Var s = diff::sum_squares(v);
      reg = reg.valid() ? diff::add(reg, s) : s;
    }
    if (reg.valid()) {
      t.reg = reg;
      t.total = diff::add(t.total, diff::scale(reg, cfg.lambda_reg));
    }
  }
  return t;
}

Var transe_objective(const model::Bound& p, const model::Inputs& in, const TrainConfig& config,
                     const translate::CorruptedBatch& batch) {
  Var total;
  for (auto c : model::channels_for(config.ablation)) {
    Var l = translate::transe_loss(batch, model::entity_layer0(c, p, in), model::relation_table(c, p));
    total = total.valid() ? diff::add(total, l) : l;
  }
  return total;
}

Optimizer::Optimizer(const TrainConfig& config, double learning_rate)
    : kind_(config.optimizer),
      lr_(learning_rate),
      beta1_(config.adam_beta1),
      beta2_(config.adam_beta2),
      eps_(config.adam_epsilon) {}

void Optimizer::step(model::ParamStore& params, const model::Bound& bound, const diff::Tape& tape,
                     const std::vector<std::string>& names) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& name : names) {
    Mat& w = params.at(name);
    const Mat g = tape.grad(model::param(bound, name));
    if (kind_ == OptimizerKind::sgd) {
      w.noalias() -= lr_ * g;
      continue;
    }
    auto it = moments_.find(name);
    if (it == moments_.end())
      it = moments_.emplace(name, std::make_pair(Mat::Zero(w.rows(), w.cols()), Mat::Zero(w.rows(), w.cols()))).first;
    auto& [m, v] = it->second;
    m = beta1_ * m + (1.0 - beta1_) * g;
    v = beta2_ * v + (1.0 - beta2_) * g.cwiseProduct(g);
    w.array() -= lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
  }
}

void Optimizer::save(ckpt::Checkpoint& c, const std::string& prefix) const {
  c.put_scalar(prefix + ".t", static_cast<double>(t_));
  for (const auto& [name, mv] : moments_) {
    c.put_matrix(prefix + ".m." + name, mv.first);
    c.put_matrix(prefix + ".v." + name, mv.second);
  }
}

void Optimizer::load(const ckpt::Checkpoint& c, const std::string& prefix) {
  t_ = static_cast<std::uint64_t>(c.scalar(prefix + ".t"));
  moments_.clear();
  const std::string mp = prefix + ".m.";
  for (const auto& r : c.records) {
    if (r.name.rfind(mp, 0) != 0) continue;
    const auto name = r.name.substr(mp.size());
    moments_.emplace(name, std::make_pair(c.matrix(r.name), c.matrix(prefix + ".v." + name)));
  }
}

std::string to_json_line(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["loss"] = r.loss.total;
  j["bpr"] = r.loss.bpr;
  j["aug"] = r.loss.aug;
  j["align"] = r.loss.align;
  j["gate"] = r.loss.gate;
  j["reg"] = r.loss.reg;
  j["transe"] = r.transe;
  j["val_recall"] = r.val_recall;
  j["gate_user_mean"] = r.gate_user_mean;
  j["gate_user_std"] = r.gate_user_std;
  j["gate_item_mean"] = r.gate_item_mean;
  j["gate_item_std"] = r.gate_item_std;
  j["kg_kept"] = r.kg_kept;
  j["ui_kept"] = r.ui_kept;
  j["skipped"] = r.skipped;
  return j.dump();
}

namespace {

double value_of(Var v) { return v.valid() ? v.scalar() : 0.0; }

LossValues values_of(const LossTerms& t) {
  return {value_of(t.total), value_of(t.bpr), value_of(t.aug), value_of(t.align), value_of(t.gate), value_of(t.reg)};
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0, 0};
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0;
  for (double x : v) s += (x - m) * (x - m);
  return {m, std::sqrt(s / static_cast<double>(v.size()))};
}

}  // namespace

Trainer::Trainer(TrainConfig config, const model::DataBundle& data)
    : config_(std::move(config)),
      data_(data),
      main_view_(model::GraphView::build(data.kg, data.graph.num_users, data.graph.num_items, data.split.train)),
      observed_(observed_items(data.split)),
      bpr_rng_(make_rng(config_.seed, "bpr")),
      kg_drop_rng_(make_rng(config_.seed, "kg-drop")),
      ui_drop_rng_(make_rng(config_.seed, "ui-drop")),
      transe_rng_(make_rng(config_.seed, "transe")) {
  config_.validate();
  if (data.split.train.empty()) throw DataError("training split is empty");
  if (model::uses_semantic(config_.ablation) && data.semantic.cols() == 0)
    throw DataError("configuration needs semantic embeddings but none were loaded");
  params_ = model::init_params(config_, model::dimensions(config_, data));
  for (const auto& n : params_.names())
    if (n.starts_with("id.entity") || n.starts_with("id.relation") || n.starts_with("llm.relation") ||
        n.starts_with("adapter.") || n == "cat.w")
      transe_names_.push_back(n);
  opt_ = Optimizer(config_, config_.learning_rate);
  transe_opt_ = Optimizer(config_, config_.effective_transe_lr());
}

void Trainer::prepare_epoch() {
  aug_view_.reset();
  if (config_.effective_lambda_aug() <= 0) return;
  auto kg_aug = ssl::drop_edges_kg(data_.kg, config_.rho, kg_drop_rng_);
  const auto aug_index = kg::KgIndex::build(kg_aug);
  diff::Tape tape;
  model::Bound p;
  for (const auto& name : params_.names()) p.emplace(name, tape.constant(params_.at(name)));
  auto in = model::make_inputs(tape, data_, config_);
  std::vector<Mat> orig, aug;
  for (auto c : model::channels_for(config_.ablation)) {
    orig.push_back(model::kg_items(c, p, in, main_view_.kg, config_.kg_layers).value());
    aug.push_back(model::kg_items(c, p, in, aug_index, config_.kg_layers).value());
  }
  const auto scores = ssl::stability_scores(orig, aug);
  auto edges = ssl::stab_adaptive_drop(std::span<const corpus::Edge>(data_.split.train), scores, config_.mu,
                                       ui_drop_rng_);
  kg_kept_ = kg_aug.triplets.size();
  ui_kept_ = edges.size();
  aug_view_ = model::GraphView::build(kg_aug, data_.graph.num_users, data_.graph.num_items, edges);
}

Batch Trainer::next_batch() {
  const std::size_t n = std::min(config_.batch_size, data_.split.train.size());
  return make_batch(sample_bpr_triples(data_.split.train, observed_, data_.graph.num_items, n, config_.negatives,
                                       bpr_rng_, &skipped_),
                    config_.ssl_batch);
}

LossTerms Trainer::build_loss(const model::Bound& bound, const model::Inputs& in,
                              const Batch& batch, LossCounters* counters) const {
  LossContext ctx{config_, in, main_view_, aug_view_ ? &*aug_view_ : nullptr};
  return total_loss(bound, ctx, batch, counters);
}

LossValues Trainer::batch_loss(const Batch& batch) const {
  diff::Tape tape;
  model::Bound p;
  for (const auto& name : params_.names()) p.emplace(name, tape.constant(params_.at(name)));
  auto in = model::make_inputs(tape, data_, config_);
  return values_of(build_loss(p, in, batch, nullptr));
}

LossValues Trainer::step(const Batch& batch) {
  diff::Tape tape;
  auto bound = model::bind(tape, params_);
  auto in = model::make_inputs(tape, data_, config_);
  auto terms = build_loss(bound, in, batch, &counters_);
  auto values = values_of(terms);
  if (!std::isfinite(values.total)) {
    std::ostringstream msg;
    msg << "non-finite loss at epoch " << epoch_ + 1 << ": total=" << values.total << " bpr=" << values.bpr
        << " aug=" << values.aug << " align=" << values.align << " gate=" << values.gate << " reg=" << values.reg;
    throw NumericAbort(msg.str());
  }
  tape.backward(terms.total);
  opt_.step(params_, bound, tape, params_.names());
  return values;
}

double Trainer::transe_pass() {
  if (!config_.transe || transe_names_.empty() || data_.kg.triplets.empty() || data_.kg.num_entities < 2) return 0;
  double total = 0;
  std::size_t remaining = data_.kg.triplets.size();
  while (remaining > 0) {
    const std::size_t n = std::min(remaining, config_.batch_size);
    remaining -= n;
    auto batch = translate::sample_corrupted(data_.kg, n, transe_rng_);
    diff::Tape tape;
    auto bound = model::bind(tape, params_);
    auto in = model::make_inputs(tape, data_, config_);
    Var loss = transe_objective(bound, in, config_, batch);
    ++counters_.transe;
    if (!std::isfinite(loss.scalar()))
      throw NumericAbort("non-finite TransE loss at epoch " + std::to_string(epoch_ + 1));
    total += loss.scalar();
    tape.backward(loss);
    transe_opt_.step(params_, bound, tape, transe_names_);
  }
  return total;
}

model::Representations Trainer::representations() const {
  return model::represent(params_, data_, config_, main_view_);
}

double Trainer::validation_recall() const {
  auto reps = representations();
  auto r = eval::evaluate(reps, data_.split, eval::Target::validation, {config_.early_stop_k}, config_.threads);
  return r.recall.front();
}

EpochRecord Trainer::run_epoch() {
  EpochRecord rec;
  prepare_epoch();
  const std::size_t per_batch = std::min(config_.batch_size, data_.split.train.size());
  const std::size_t batches = (data_.split.train.size() + per_batch - 1) / per_batch;
  const std::size_t skipped_before = skipped_;
  for (std::size_t b = 0; b < batches; ++b) {
    auto batch = next_batch();
    if (batch.triples.empty()) continue;
    auto v = step(batch);
    rec.loss.total += v.total / static_cast<double>(batches);
    rec.loss.bpr += v.bpr / static_cast<double>(batches);
    rec.loss.aug += v.aug / static_cast<double>(batches);
    rec.loss.align += v.align / static_cast<double>(batches);
    rec.loss.gate += v.gate / static_cast<double>(batches);
    rec.loss.reg += v.reg / static_cast<double>(batches);
  }
  rec.transe = transe_pass();
  ++epoch_;
  rec.epoch = epoch_;
  rec.kg_kept = aug_view_ ? kg_kept_ : 0;
  rec.ui_kept = aug_view_ ? ui_kept_ : 0;
  rec.skipped = skipped_ - skipped_before;
  return rec;
}

FitResult Trainer::fit(const std::function<void(const EpochRecord&)>& on_epoch) {
  using clock = std::chrono::steady_clock;
  FitResult result;
  while (epoch_ < config_.max_epochs) {
    const auto t0 = clock::now();
    auto rec = run_epoch();
    const auto t1 = clock::now();
    auto reps = representations();
    auto report =
        eval::evaluate(reps, data_.split, eval::Target::validation, {config_.early_stop_k}, config_.threads);
    rec.val_recall = report.recall.front();
    std::tie(rec.gate_user_mean, rec.gate_user_std) =
        mean_std(reps.gate_user.empty() ? std::vector<double>{} : reps.gate_user);
    std::tie(rec.gate_item_mean, rec.gate_item_std) = mean_std(reps.gate_item);
    const auto t2 = clock::now();
    result.epoch_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
    result.validation_seconds.push_back(std::chrono::duration<double>(t2 - t1).count());

    if (rec.val_recall > best_) {
      best_ = rec.val_recall;
      best_epoch_ = epoch_;
      since_best_ = 0;
      result.best_checkpoint = checkpoint();
      result.best_params = params_;
    } else {
      ++since_best_;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (config_.patience > 0 && since_best_ >= config_.patience) {
      result.early_stopped = true;
      break;
    }
  }
  if (result.history.empty()) {
    result.best_checkpoint = checkpoint();
    result.best_params = params_;
  }
  result.best_epoch = best_epoch_;
  result.best_validation = best_;
  result.counters = counters_;
  return result;
}

std::string Trainer::rng_state() const {
  std::ostringstream s;
  s << "bpr " << bpr_rng_ << "\nkg-drop " << kg_drop_rng_ << "\nui-drop " << ui_drop_rng_ << "\ntranse "
    << transe_rng_ << "\n";
  return s.str();
}

void Trainer::set_rng_state(const std::string& text) {
  std::istringstream s(text);
  std::string name;
  int seen = 0;
  while (s >> name) {
    Rng* r = name == "bpr"       ? &bpr_rng_
             : name == "kg-drop" ? &kg_drop_rng_
             : name == "ui-drop" ? &ui_drop_rng_
             : name == "transe"  ? &transe_rng_
                                 : nullptr;
    if (!r) throw DataError("checkpoint: unknown RNG stream " + name);
    if (!(s >> *r)) throw DataError("checkpoint: bad RNG state for " + name);
    ++seen;
  }
  if (seen != 4) throw DataError("checkpoint: incomplete RNG state");
}

ckpt::Checkpoint Trainer::checkpoint() const {
  ckpt::Checkpoint c;
  c.config_hash = config_.hash();
  for (const auto& name : params_.names()) c.put_matrix("param." + name, params_.at(name));
  opt_.save(c, "adam");
  transe_opt_.save(c, "transe_adam");
  c.put_scalar("meta.epoch", static_cast<double>(epoch_));
  c.put_scalar("meta.best", best_);
  c.put_scalar("meta.best_epoch", static_cast<double>(best_epoch_));
  c.put_scalar("meta.since_best", static_cast<double>(since_best_));
  c.put_scalar("meta.skipped", static_cast<double>(skipped_));
  c.rng_state = rng_state();
  return c;
}

void Trainer::restore(const ckpt::Checkpoint& c) {
  ckpt::require_hash(c, config_.hash());
  model::ParamStore p;
  for (const auto& name : params_.names()) {
    Mat m = c.matrix("param." + name);
    const auto& cur = params_.at(name);
    if (m.rows() != cur.rows() || m.cols() != cur.cols())
      throw DataError("checkpoint: parameter " + name + " has the wrong shape");
    p.add(name, std::move(m));
  }
  params_ = std::move(p);
  opt_.load(c, "adam");
  transe_opt_.load(c, "transe_adam");
  epoch_ = static_cast<std::size_t>(c.scalar("meta.epoch"));
  best_ = c.scalar("meta.best");
  best_epoch_ = static_cast<std::size_t>(c.scalar("meta.best_epoch"));
  since_best_ = static_cast<std::size_t>(c.scalar("meta.since_best"));
  skipped_ = static_cast<std::size_t>(c.scalar("meta.skipped"));
  set_rng_state(c.rng_state);
  aug_view_.reset();
}

}  // namespace dcgl::train
