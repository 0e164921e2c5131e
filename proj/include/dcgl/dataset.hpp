#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "dcgl/model.hpp"
#include "dcgl/synth.hpp"

namespace dcgl::data {

namespace fs = std::filesystem;

// File layout of a dataset directory.
struct DatasetPaths {
  fs::path interactions;
  fs::path kg;
  fs::path embeddings;
  fs::path id_map;
  fs::path split;
  static DatasetPaths in(const fs::path& dir);
  std::vector<fs::path> all() const;
};

// Writes interactions.tsv, kg.tsv, semantic.emb, id_map.tsv and split.txt.
void write_synthetic(const DatasetPaths& paths, const corpus::SyntheticData& data);

struct LoadOptions {
  DatasetPaths paths;
  std::size_t min_interactions = 0;
  std::uint64_t split_seed = 1;  // used when no split file exists
  bool need_semantic = true;
  bool strict_linking = false;
};

// Parses, filters and splits. A missing KG file means an empty KG; a missing
// split file means a fresh 7:1:2 split. Missing semantic files are a
// DataError naming the path when need_semantic is set.
model::DataBundle load_bundle(const LoadOptions& options);

}  // namespace dcgl::data
