#include "dcgl/dataio.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "dcgl/error.hpp"

namespace dcgl::io {
namespace {

constexpr char kEmbMagic[8] = {'D', 'C', 'G', 'L', 'E', 'M', 'B', '1'};

void put_u32(std::ostream& out, std::uint32_t v) {
  std::array<char, 4> b;
  for (int k = 0; k < 4; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xff);
  out.write(b.data(), 4);
}

std::uint32_t get_u32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  if (!in.read(reinterpret_cast<char*>(b.data()), 4)) throw DataError("embedding file truncated");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f32(std::ostream& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }
float get_f32(std::istream& in) { return std::bit_cast<float>(get_u32(in)); }

}  // namespace

void write_embeddings(std::ostream& out, const EmbeddingFile& file) {
  if (file.values.size() != file.ids.size() * file.dim)
    throw ContractViolation("embedding values size does not match ids x dim");
  out.write(kEmbMagic, sizeof kEmbMagic);
  put_u32(out, static_cast<std::uint32_t>(file.ids.size()));
  put_u32(out, file.dim);
  for (std::size_t k = 0; k < file.ids.size(); ++k) {
    put_u32(out, file.ids[k]);
    for (float v : file.row(k)) put_f32(out, v);
  }
}

EmbeddingFile read_embeddings(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kEmbMagic, 8) != 0)
    throw DataError("not a DCGLEMB1 embedding file");
  EmbeddingFile f;
  const auto count = get_u32(in);
  f.dim = get_u32(in);
  f.ids.reserve(count);
  f.values.reserve(static_cast<std::size_t>(count) * f.dim);
  for (std::uint32_t k = 0; k < count; ++k) {
    f.ids.push_back(get_u32(in));
    for (std::uint32_t j = 0; j < f.dim; ++j) f.values.push_back(get_f32(in));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in embedding file");
  return f;
}

void write_id_map(std::ostream& out, const IdMap& map) {
  for (const auto& [token, id] : map) out << token << '\t' << id << '\n';
}

IdMap read_id_map(std::istream& in) {
  IdMap map;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos)
      throw ParseError("expected token<TAB>id", lineno);
    try {
      std::size_t used = 0;
      auto id = std::stoul(line.substr(tab + 1), &used);
      if (used != line.size() - tab - 1) throw std::invalid_argument("trailing");
      map.emplace_back(line.substr(0, tab), static_cast<std::uint32_t>(id));
    } catch (const std::logic_error&) {
      throw ParseError("bad id '" + line.substr(tab + 1) + "'", lineno);
    }
  }
  return map;
}

SemanticTable align_embeddings(const EmbeddingFile& file, const IdMap& id_map,
                               std::span<const std::string> entity_tokens) {
  std::unordered_map<std::uint32_t, std::string> token_of;
  for (const auto& [token, id] : id_map) token_of.emplace(id, token);
  std::unordered_map<std::string, std::size_t> entity_of;
  for (std::size_t e = 0; e < entity_tokens.size(); ++e) entity_of.emplace(entity_tokens[e], e);

  SemanticTable t;
  t.rows = entity_tokens.size();
  t.dim = file.dim;
  t.values.assign(t.rows * t.dim, 0.0);
  std::vector<char> filled(t.rows, 0);
  for (std::size_t k = 0; k < file.ids.size(); ++k) {
    auto tok = token_of.find(file.ids[k]);
    if (tok == token_of.end())
      throw DataError("embedding id " + std::to_string(file.ids[k]) + " missing from id map");
    auto ent = entity_of.find(tok->second);
    if (ent == entity_of.end()) continue;
    auto row = file.row(k);
    for (std::size_t j = 0; j < t.dim; ++j) t.values[ent->second * t.dim + j] = row[j];
    filled[ent->second] = 1;
  }
  for (char f : filled) t.missing += f ? 0 : 1;
  return t;
}

void write_interactions(std::ostream& out, const corpus::InteractionGraph& graph) {
  for (const auto& e : graph.edges)
    out << graph.user_tokens[e.user] << '\t' << graph.item_tokens[e.item] << '\n';
}

void write_kg(std::ostream& out, const corpus::KnowledgeGraph& kg) {
  for (const auto& t : kg.triplets)
    out << kg.entity_tokens[t.head] << '\t' << kg.relation_tokens[t.relation] << '\t'
        << kg.entity_tokens[t.tail] << '\n';
}

void write_split_manifest(std::ostream& out, const corpus::SplitDataset& split) {
  out << "# dcgl split manifest\n";
  out << "seed " << split.seed << '\n';
  auto section = [&](const char* name, const std::vector<std::uint32_t>& idx) {
    out << name << ' ' << idx.size() << '\n';
    for (std::size_t k = 0; k < idx.size(); ++k) out << (k ? " " : "") << idx[k];
    out << '\n';
  };
  section("train", split.train_idx);
  section("validation", split.validation_idx);
  section("test", split.test_idx);
}

corpus::SplitDataset read_split_manifest(std::istream& in, const corpus::InteractionGraph& graph) {
  std::string line;
  std::size_t lineno = 0;
  auto next_line = [&]() -> bool {
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.front() == '#') continue;
      return true;
    }
    return false;
  };
  if (!next_line()) throw ParseError("empty split manifest", lineno);
  std::uint64_t seed = 0;
  {
    std::istringstream ss(line);
    std::string key;
    if (!(ss >> key >> seed) || key != "seed") throw ParseError("expected 'seed N'", lineno);
  }
  std::vector<std::uint32_t> parts[3];
  const char* names[3] = {"train", "validation", "test"};
  for (int s = 0; s < 3; ++s) {
    if (!next_line()) throw ParseError(std::string("missing section ") + names[s], lineno);
    std::istringstream hs(line);
    std::string key;
    std::size_t count = 0;
    if (!(hs >> key >> count) || key != names[s])
      throw ParseError(std::string("expected '") + names[s] + " COUNT'", lineno);
    if (!next_line() && count > 0) throw ParseError("missing index line", lineno);
    std::istringstream ls(line);
    std::uint32_t v;
    while (ls >> v) parts[s].push_back(v);
    if (parts[s].size() != count) throw ParseError("index count mismatch", lineno);
  }
  return corpus::SplitDataset::from_indices(graph, seed, std::move(parts[0]), std::move(parts[1]),
                                            std::move(parts[2]));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
}

}  // namespace dcgl::io
