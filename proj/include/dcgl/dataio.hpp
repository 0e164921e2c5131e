#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dcgl/corpus.hpp"

namespace dcgl::io {

// Binary semantic embedding file:
//   "DCGLEMB1" | u32 count | u32 dim | count x (u32 id | dim x f32), little-endian.
struct EmbeddingFile {
  std::uint32_t dim = 0;
  std::vector<std::uint32_t> ids;
  std::vector<float> values;  // ids.size() * dim, row-major

  std::span<const float> row(std::size_t k) const {
    return {values.data() + k * dim, static_cast<std::size_t>(dim)};
  }
};

void write_embeddings(std::ostream& out, const EmbeddingFile& file);
EmbeddingFile read_embeddings(std::istream& in);

// Sidecar "token<TAB>id" table giving the vocabulary of embedding file ids.
using IdMap = std::vector<std::pair<std::string, std::uint32_t>>;
void write_id_map(std::ostream& out, const IdMap& map);
IdMap read_id_map(std::istream& in);

// Embedding rows re-ordered to corpus entity ids; entities without a vector
// get zeros and are counted in `missing`.
struct SemanticTable {
  std::size_t rows = 0;
  std::size_t dim = 0;
  std::vector<double> values;
  std::size_t missing = 0;
};
SemanticTable align_embeddings(const EmbeddingFile& file, const IdMap& id_map,
                               std::span<const std::string> entity_tokens);

void write_interactions(std::ostream& out, const corpus::InteractionGraph& graph);
void write_kg(std::ostream& out, const corpus::KnowledgeGraph& kg);

// Text manifest: "seed N", then "train|validation|test COUNT" headers, each
// followed by one line of space-separated edge indices.
void write_split_manifest(std::ostream& out, const corpus::SplitDataset& split);
corpus::SplitDataset read_split_manifest(std::istream& in, const corpus::InteractionGraph& graph);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace dcgl::io
