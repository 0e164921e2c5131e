#include "dcgl/model.hpp"

#include <cmath>
#include <cstring>

#include "dcgl/error.hpp"
#include "dcgl/fusion.hpp"
#include "dcgl/rng.hpp"
#include "dcgl/synth.hpp"

namespace dcgl::model {

DataBundle DataBundle::assemble(corpus::InteractionGraph graph, corpus::KnowledgeGraph kg,
                                corpus::SplitDataset split, Mat semantic,
                                std::size_t missing_semantic) {
  DataBundle b;
  b.freq = corpus::frequency_features(graph, split.train);
  b.graph = std::move(graph);
  b.kg = std::move(kg);
  b.split = std::move(split);
  b.semantic = std::move(semantic);
  b.missing_semantic = missing_semantic;
  b.validate();
  return b;
}

DataBundle DataBundle::from_synthetic(const corpus::SyntheticData& data) {
  std::size_t missing = 0;
  Mat sem = semantic_matrix(data.embeddings, data.id_map, data.kg.entity_tokens, &missing);
  return assemble(data.graph, data.kg, data.split, std::move(sem), missing);
}

void DataBundle::validate() const {
  graph.validate();
  kg.validate();
  if (kg.num_items != graph.num_items) throw DataError("KG item count differs from the interaction graph");
  if (split.train_items.size() != graph.num_users) throw DataError("split does not match the graph's users");
  if (semantic.cols() > 0 && static_cast<std::size_t>(semantic.rows()) != kg.num_entities)
    throw DataError("semantic table rows differ from the entity count");
}

Mat semantic_matrix(const io::SemanticTable& table) {
  Mat m(static_cast<Eigen::Index>(table.rows), static_cast<Eigen::Index>(table.dim));
  for (std::size_t r = 0; r < table.rows; ++r)
    for (std::size_t c = 0; c < table.dim; ++c) m(r, c) = table.values[r * table.dim + c];
  return m;
}

Mat semantic_matrix(const io::EmbeddingFile& file, const io::IdMap& id_map,
                    std::span<const std::string> entity_tokens, std::size_t* missing) {
  auto table = io::align_embeddings(file, id_map, entity_tokens);
  if (missing) *missing = table.missing;
  return semantic_matrix(table);
}

void ParamStore::add(std::string name, Mat value) {
  DCGL_EXPECT(!index_.count(name), "ParamStore: duplicate parameter " + name);
  index_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  values_.push_back(std::move(value));
}

Mat& ParamStore::at(std::string_view name) {
  auto it = index_.find(name);
  DCGL_EXPECT(it != index_.end(), "ParamStore: unknown parameter " + std::string(name));
  return values_[it->second];
}

const Mat& ParamStore::at(std::string_view name) const {
  auto it = index_.find(name);
  DCGL_EXPECT(it != index_.end(), "ParamStore: unknown parameter " + std::string(name));
  return values_[it->second];
}

bool ParamStore::contains(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParamStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& v : values_) n += static_cast<std::size_t>(v.size());
  return n;
}

bool ParamStore::operator==(const ParamStore& other) const {
  if (names_ != other.names_) return false;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const auto& a = values_[k];
    const auto& b = other.values_[k];
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    if (a.size() > 0 && std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) != 0) return false;
  }
  return true;
}

std::string_view to_string(Channel c) {
  switch (c) {
    case Channel::id: return "id";
    case Channel::llm: return "llm";
    case Channel::cat: return "cat";
  }
  return "id";
}

std::vector<Channel> channels_for(Ablation a) {
  switch (a) {
    case Ablation::no_llm: return {Channel::id};
    case Ablation::no_id: return {Channel::llm};
    case Ablation::cat: return {Channel::cat};
    default: return {Channel::id, Channel::llm};
  }
}

bool is_gated(Ablation a) { return channels_for(a).size() == 2; }

bool uses_semantic(Ablation a) { return a != Ablation::no_llm; }

Dimensions dimensions(const TrainConfig& config, const DataBundle& data) {
  Dimensions d;
  d.num_users = data.graph.num_users;
  d.num_items = data.graph.num_items;
  d.num_entities = data.kg.num_entities;
  d.num_relations = data.kg.num_relations;
  d.d = config.dim;
  d.d_llm = static_cast<std::size_t>(data.semantic.cols());
  d.d_mid = config.adapter_mid ? config.adapter_mid : kg::default_adapter_mid(d.d_llm, d.d);
  return d;
}

namespace {

Mat uniform(Rng& rng, std::size_t rows, std::size_t cols, double bound) {
  Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = (2.0 * uniform_unit(rng) - 1.0) * bound;
  return m;
}

Mat zeros(std::size_t rows, std::size_t cols) {
  return Mat::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace

ParamStore init_params(const TrainConfig& config, const Dimensions& dims) {
  DCGL_EXPECT(dims.d > 0, "init_params: dimension must be positive");
  Rng rng = make_rng(config.seed, "init");
  const std::size_t d = dims.d;
  const double table = 1.0 / std::sqrt(static_cast<double>(d));
  auto dense = [&](std::size_t rows, std::size_t cols) {
    return uniform(rng, rows, cols, 1.0 / std::sqrt(static_cast<double>(std::max<std::size_t>(cols, 1))));
  };
  const auto chans = channels_for(config.ablation);
  const bool id_tables = chans.front() != Channel::llm;
  const bool llm_channel = chans.back() == Channel::llm;
  ParamStore p;
  if (id_tables) {
    p.add("id.entity", uniform(rng, dims.num_entities, d, table));
    p.add("id.user", uniform(rng, dims.num_users, d, table));
    p.add("id.relation", uniform(rng, dims.num_relations, d, table));
    p.add("id.attn", dense(d, 2 * d));
  }
  if (llm_channel) {
    p.add("llm.user", uniform(rng, dims.num_users, d, table));
    p.add("llm.relation", uniform(rng, dims.num_relations, d, table));
    p.add("llm.attn", dense(d, 2 * d));
  }
  if (uses_semantic(config.ablation)) {
    DCGL_EXPECT(dims.d_llm > 0 && dims.d_mid > 0, "init_params: semantic dimension is zero");
    p.add("adapter.w1", dense(dims.d_mid, dims.d_llm));
    p.add("adapter.b1", zeros(dims.d_mid, 1));
    p.add("adapter.w2", dense(d, dims.d_mid));
    p.add("adapter.b2", zeros(d, 1));
  }
  if (config.ablation == Ablation::cat) p.add("cat.w", dense(2 * d, d));
  if (is_gated(config.ablation)) {
    p.add("proj_id.w", dense(d, d));
    p.add("proj_id.b", zeros(d, 1));
    p.add("proj_llm.w", dense(d, d));
    p.add("proj_llm.b", zeros(d, 1));
    p.add("gate_user.w", zeros(2 * d + 1, 1));
    p.add("gate_user.b", zeros(1, 1));
    p.add("gate_item.w", zeros(2 * d + 1, 1));
    p.add("gate_item.b", zeros(1, 1));
  }
  return p;
}

Bound bind(diff::Tape& tape, const ParamStore& params) {
  Bound b;
  for (const auto& name : params.names()) b.emplace(name, tape.variable(params.at(name)));
  return b;
}

Var param(const Bound& bound, std::string_view name) {
  auto it = bound.find(name);
  DCGL_EXPECT(it != bound.end(), "missing parameter " + std::string(name));
  return it->second;
}

GraphView GraphView::build(const corpus::KnowledgeGraph& kg, std::size_t num_users,
                           std::size_t num_items, std::span<const corpus::Edge> edges) {
  return {kg::KgIndex::build(kg), cf::NormalizedAdjacency::build(num_users, num_items, edges)};
}

Inputs make_inputs(diff::Tape& tape, const DataBundle& data, const TrainConfig& config) {
  Inputs in;
  if (uses_semantic(config.ablation)) {
    if (data.semantic.cols() == 0) throw DataError("configuration needs semantic embeddings but none were loaded");
    in.semantic = tape.constant(data.semantic);
  }
  auto column = [&](const std::vector<double>& v) {
    Mat m(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t k = 0; k < v.size(); ++k) m(static_cast<Eigen::Index>(k), 0) = v[k];
    return tape.constant(std::move(m));
  };
  in.user_phi = column(data.freq.user_phi);
  in.item_phi = column(data.freq.item_phi);
  return in;
}

namespace {

kg::AdapterVars adapter(const Bound& p) {
  return {param(p, "adapter.w1"), param(p, "adapter.b1"), param(p, "adapter.w2"), param(p, "adapter.b2")};
}

fusion::GateVars gate(const Bound& p, std::string_view side) {
  const std::string s(side);
  return {param(p, s + ".w"), param(p, s + ".b")};
}

}  // namespace

Var entity_layer0(Channel c, const Bound& p, const Inputs& in) {
  switch (c) {
    case Channel::id:
      return param(p, "id.entity");
    case Channel::llm:
      return kg::adapt_semantic(in.semantic, adapter(p));
    case Channel::cat:
      return diff::matmul(diff::concat_cols({param(p, "id.entity"), kg::adapt_semantic(in.semantic, adapter(p))}),
                          param(p, "cat.w"));
  }
  return {};
}

Var relation_table(Channel c, const Bound& p) {
  return param(p, c == Channel::llm ? "llm.relation" : "id.relation");
}

Var attention_matrix(Channel c, const Bound& p) {
  return param(p, c == Channel::llm ? "llm.attn" : "id.attn");
}

Var user_layer0(Channel c, const Bound& p) { return param(p, c == Channel::llm ? "llm.user" : "id.user"); }

Var kg_items(Channel c, const Bound& p, const Inputs& in, const kg::KgIndex& index, int layers) {
  return kg::rgat_encode(entity_layer0(c, p, in), relation_table(c, p), attention_matrix(c, p), index,
                         layers);
}

ChannelOutput encode_channel(Channel c, const Bound& p, const Inputs& in, const GraphView& view,
                             const TrainConfig& config) {
  Var items0 = kg_items(c, p, in, view.kg, config.kg_layers);
  auto out = cf::propagate(user_layer0(c, p), items0, view.adj, config.cf_layers, config.layer_combine);
  return {c, out.users, out.items};
}

Forward forward(const Bound& p, const Inputs& in, const GraphView& view, const TrainConfig& config) {
  Forward f;
  for (auto c : channels_for(config.ablation)) f.channels.push_back(encode_channel(c, p, in, view, config));
  if (f.channels.size() == 2) {
    const auto& id = f.channels[0];
    const auto& llm = f.channels[1];
    if (config.ablation == Ablation::no_freq) {
      diff::Tape& tape = *id.users.tape();
      f.gate_user = tape.constant(Mat::Constant(id.users.rows(), 1, 0.5));
      f.gate_item = tape.constant(Mat::Constant(id.items.rows(), 1, 0.5));
    } else {
      f.gate_user = fusion::gate_weight(id.users, llm.users, in.user_phi, gate(p, "gate_user"));
      f.gate_item = fusion::gate_weight(id.items, llm.items, in.item_phi, gate(p, "gate_item"));
    }
  }
  return f;
}

PairScores score_pairs(const Forward& f, std::span<const diff::Index> users,
                       std::span<const diff::Index> items) {
  DCGL_EXPECT(users.size() == items.size() && !users.empty(), "score_pairs: users and items must align");
  PairScores s;
  const auto& first = f.channels.front();
  if (!f.gated()) {
    s.score = diff::row_dot(diff::gather_rows(first.users, users), diff::gather_rows(first.items, items));
    s.alpha = first.users.tape()->constant(Mat::Ones(static_cast<Eigen::Index>(users.size()), 1));
    return s;
  }
  const auto& second = f.channels[1];
  s.gate_user = diff::gather_rows(f.gate_user, users);
  s.gate_item = diff::gather_rows(f.gate_item, items);
  auto r = fusion::predict_score(diff::gather_rows(first.users, users), diff::gather_rows(first.items, items),
                                 diff::gather_rows(second.users, users), diff::gather_rows(second.items, items),
                                 s.gate_user, s.gate_item);
  s.score = r.score;
  s.alpha = r.alpha;
  return s;
}

void Representations::score_user(corpus::Id user, std::span<double> out) const {
  DCGL_EXPECT(out.size() == num_items(), "score_user: output size mismatch");
  Eigen::Map<Eigen::VectorXd> o(out.data(), static_cast<Eigen::Index>(out.size()));
  if (gate_user.empty()) {
    o.noalias() = items[0] * users[0].row(user).transpose();
    return;
  }
  const Eigen::VectorXd s_id = items[0] * users[0].row(user).transpose();
  const Eigen::VectorXd s_llm = items[1] * users[1].row(user).transpose();
  const double gu = gate_user[user];
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = fusion::predict_score(s_id(i), s_llm(i), gu, gate_item[i]);
}

double Representations::score(corpus::Id user, corpus::Id item) const {
  const double s0 = users[0].row(user).dot(items[0].row(item));
  if (gate_user.empty()) return s0;
  const double s1 = users[1].row(user).dot(items[1].row(item));
  return fusion::predict_score(s0, s1, gate_user[user], gate_item[item]);
}

Representations represent(const ParamStore& params, const DataBundle& data, const TrainConfig& config,
                          const GraphView& view) {
  diff::Tape tape;
  Bound p;
  for (const auto& name : params.names()) p.emplace(name, tape.constant(params.at(name)));
  Inputs in = make_inputs(tape, data, config);
  Forward f = forward(p, in, view, config);
  Representations r;
  for (const auto& c : f.channels) {
    r.channels.push_back(c.channel);
    r.users.push_back(c.users.value());
    r.items.push_back(c.items.value());
  }
  if (f.gated()) {
    const auto& gu = f.gate_user.value();
    const auto& gi = f.gate_item.value();
    r.gate_user.assign(gu.data(), gu.data() + gu.size());
    r.gate_item.assign(gi.data(), gi.data() + gi.size());
  }
  return r;
}

Representations represent(const ParamStore& params, const DataBundle& data, const TrainConfig& config) {
  return represent(params, data, config,
                   GraphView::build(data.kg, data.graph.num_users, data.graph.num_items, data.split.train));
}

}  // namespace dcgl::model
