#include "dcgl/dataset.hpp"

#include <fstream>
#include <sstream>

#include "dcgl/error.hpp"

namespace dcgl::data {

DatasetPaths DatasetPaths::in(const fs::path& dir) {
  return {dir / "interactions.tsv", dir / "kg.tsv", dir / "semantic.emb", dir / "id_map.tsv", dir / "split.txt"};
}

std::vector<fs::path> DatasetPaths::all() const { return {interactions, kg, embeddings, id_map, split}; }

namespace {

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(p, mode);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

std::ifstream open_in(const fs::path& p, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(p, mode);
  if (!in) throw DataError("cannot read " + p.string());
  return in;
}

}  // namespace

void write_synthetic(const DatasetPaths& paths, const corpus::SyntheticData& data) {
  {
    auto out = open_out(paths.interactions);
    io::write_interactions(out, data.graph);
  }
  {
    auto out = open_out(paths.kg);
    io::write_kg(out, data.kg);
  }
  {
    auto out = open_out(paths.embeddings, std::ios::binary);
    io::write_embeddings(out, data.embeddings);
  }
  {
    auto out = open_out(paths.id_map);
    io::write_id_map(out, data.id_map);
  }
  {
    auto out = open_out(paths.split);
    io::write_split_manifest(out, data.split);
  }
}

model::DataBundle load_bundle(const LoadOptions& o) {
  corpus::InteractionGraph graph;
  {
    auto in = open_in(o.paths.interactions);
    graph = corpus::parse_interactions(in);
  }
  if (o.min_interactions > 0) graph = corpus::filter_graph(graph, o.min_interactions);
  corpus::KnowledgeGraph kg;
  if (fs::exists(o.paths.kg)) {
    auto in = open_in(o.paths.kg);
    kg = corpus::parse_kg(in, graph, o.strict_linking);
  } else {
    std::istringstream empty;
    kg = corpus::parse_kg(empty, graph);
  }
  corpus::SplitDataset split;
  if (fs::exists(o.paths.split)) {
    auto in = open_in(o.paths.split);
    split = io::read_split_manifest(in, graph);
  } else {
    split = corpus::split_interactions(graph, {}, o.split_seed);
  }
  model::Mat semantic;
  std::size_t missing = 0;
  if (o.need_semantic) {
    for (const auto& p : {o.paths.embeddings, o.paths.id_map})
      if (!fs::exists(p)) throw DataError("semantic embedding input not found: " + p.string());
    auto ein = open_in(o.paths.embeddings, std::ios::binary);
    auto file = io::read_embeddings(ein);
    auto min = open_in(o.paths.id_map);
    auto ids = io::read_id_map(min);
    semantic = model::semantic_matrix(file, ids, kg.entity_tokens, &missing);
  }
  return model::DataBundle::assemble(std::move(graph), std::move(kg), std::move(split), std::move(semantic),
                                     missing);
}

}  // namespace dcgl::data
