#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcgl/cf_propagation.hpp"
#include "dcgl/config.hpp"
#include "dcgl/corpus.hpp"
#include "dcgl/dataio.hpp"
#include "dcgl/diff/ops.hpp"
#include "dcgl/kg_encoder.hpp"

namespace dcgl::corpus {
struct SyntheticData;
}

namespace dcgl::model {

using diff::Mat;
using diff::Var;
using train::Ablation;
using train::TrainConfig;

// Corpus products the model reads, all in corpus id space.
struct DataBundle {
  corpus::InteractionGraph graph;
  corpus::KnowledgeGraph kg;
  corpus::SplitDataset split;
  corpus::FrequencyFeatures freq;  // from training edges
  Mat semantic;                    // num_entities x d_llm, 0 columns when absent
  std::size_t missing_semantic = 0;

  static DataBundle assemble(corpus::InteractionGraph graph, corpus::KnowledgeGraph kg,
                             corpus::SplitDataset split, Mat semantic = {},
                             std::size_t missing_semantic = 0);
  static DataBundle from_synthetic(const corpus::SyntheticData& data);
  void validate() const;
};

Mat semantic_matrix(const io::SemanticTable& table);
Mat semantic_matrix(const io::EmbeddingFile& file, const io::IdMap& id_map,
                    std::span<const std::string> entity_tokens, std::size_t* missing = nullptr);

// Named parameter tensors in insertion order.
class ParamStore {
 public:
  void add(std::string name, Mat value);
  Mat& at(std::string_view name);
  const Mat& at(std::string_view name) const;
  bool contains(std::string_view name) const;
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::size_t num_scalars() const;
  bool operator==(const ParamStore& other) const;

 private:
  std::vector<std::string> names_;
  std::vector<Mat> values_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

enum class Channel { id, llm, cat };
std::string_view to_string(Channel c);

std::vector<Channel> channels_for(Ablation a);
// Two channels combined through frequency gates.
bool is_gated(Ablation a);
bool uses_semantic(Ablation a);

struct Dimensions {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
  std::size_t num_entities = 0;
  std::size_t num_relations = 0;
  std::size_t d = 0;
  std::size_t d_llm = 0;
  std::size_t d_mid = 0;
};
Dimensions dimensions(const TrainConfig& config, const DataBundle& data);

// Embedding tables uniform on [-1/sqrt(d), 1/sqrt(d)], dense weights uniform
// on [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases and gates zero.
ParamStore init_params(const TrainConfig& config, const Dimensions& dims);

using Bound = std::map<std::string, Var, std::less<>>;
Bound bind(diff::Tape& tape, const ParamStore& params);
Var param(const Bound& bound, std::string_view name);

// KG and interaction structure a forward pass runs on.
struct GraphView {
  kg::KgIndex kg;
  cf::NormalizedAdjacency adj;
  static GraphView build(const corpus::KnowledgeGraph& kg, std::size_t num_users,
                         std::size_t num_items, std::span<const corpus::Edge> edges);
};

struct Inputs {
  Var semantic;  // invalid when the configuration does not read it
  Var user_phi;  // num_users x 1
  Var item_phi;  // num_items x 1
};
Inputs make_inputs(diff::Tape& tape, const DataBundle& data, const TrainConfig& config);

// Layer-0 entity rows of a channel: the free table (id), the adapted
// semantic vectors (llm), or a learned 2d -> d map of both (cat).
Var entity_layer0(Channel c, const Bound& p, const Inputs& in);
Var relation_table(Channel c, const Bound& p);
Var attention_matrix(Channel c, const Bound& p);
Var user_layer0(Channel c, const Bound& p);

// RGAT item rows of a channel (num_items x d).
Var kg_items(Channel c, const Bound& p, const Inputs& in, const kg::KgIndex& index, int layers);

struct ChannelOutput {
  Channel channel = Channel::id;
  Var users;
  Var items;
};
ChannelOutput encode_channel(Channel c, const Bound& p, const Inputs& in, const GraphView& view,
                             const TrainConfig& config);

struct Forward {
  std::vector<ChannelOutput> channels;
  Var gate_user;  // num_users x 1, invalid when ungated
  Var gate_item;
  bool gated() const { return gate_user.valid(); }
};
Forward forward(const Bound& p, const Inputs& in, const GraphView& view, const TrainConfig& config);

struct PairScores {
  Var score;      // n x 1
  Var alpha;      // n x 1; constant ones for single-channel variants
  Var gate_user;  // n x 1, invalid when ungated
  Var gate_item;
};
PairScores score_pairs(const Forward& f, std::span<const diff::Index> users,
                       std::span<const diff::Index> items);

// Detached final representations used for ranking.
struct Representations {
  std::vector<Channel> channels;
  std::vector<Mat> users;
  std::vector<Mat> items;
  std::vector<double> gate_user;  // empty when ungated
  std::vector<double> gate_item;

  std::size_t num_users() const { return static_cast<std::size_t>(users.front().rows()); }
  std::size_t num_items() const { return static_cast<std::size_t>(items.front().rows()); }
  // Scores of every item for one user.
  void score_user(corpus::Id user, std::span<double> out) const;
  double score(corpus::Id user, corpus::Id item) const;
};
Representations represent(const ParamStore& params, const DataBundle& data,
                          const TrainConfig& config, const GraphView& view);
Representations represent(const ParamStore& params, const DataBundle& data,
                          const TrainConfig& config);

}  // namespace dcgl::model
