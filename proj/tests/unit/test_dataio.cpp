#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dcgl/dataio.hpp"
#include "dcgl/dataset.hpp"
#include "dcgl/error.hpp"
#include "dcgl/synth.hpp"

using namespace dcgl;

namespace {

std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("dcgl_unit_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Hand-assembled file in the shared byte layout.
std::string hand_file() {
  std::string s = "DCGLEMB1";
  auto u32 = [&](std::uint32_t v) {
    for (int k = 0; k < 4; ++k) s.push_back(static_cast<char>((v >> (8 * k)) & 0xff));
  };
  auto f32 = [&](float f) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    u32(bits);
  };
  u32(2);
  u32(3);
  u32(7);
  f32(1.0f);
  f32(-2.5f);
  f32(0.125f);
  u32(3);
  f32(0.0f);
  f32(3.0f);
  f32(-1.0f);
  return s;
}

}  // namespace

TEST_CASE("embedding reader accepts the shared byte layout") {
  std::istringstream in(hand_file());
  auto f = io::read_embeddings(in);
  CHECK(f.dim == 3);
  CHECK(f.ids == std::vector<std::uint32_t>{7, 3});
  CHECK(f.row(0)[1] == -2.5f);
  CHECK(f.row(1)[2] == -1.0f);
}

TEST_CASE("embedding writer reproduces the file bitwise") {
  std::istringstream in(hand_file());
  auto f = io::read_embeddings(in);
  std::ostringstream out;
  io::write_embeddings(out, f);
  CHECK(out.str() == hand_file());
}

TEST_CASE("embedding reader rejects damaged files") {
  auto bytes = hand_file();
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    std::istringstream in(bytes);
    CHECK_THROWS_AS(io::read_embeddings(in), DataError);
  }
  SUBCASE("truncated") {
    std::istringstream in(bytes.substr(0, bytes.size() - 2));
    CHECK_THROWS_AS(io::read_embeddings(in), DataError);
  }
}

TEST_CASE("align_embeddings orders rows by entity id and counts gaps") {
  std::istringstream in(hand_file());
  auto f = io::read_embeddings(in);
  io::IdMap map = {{"a", 3}, {"b", 7}};
  std::vector<std::string> tokens = {"b", "c", "a"};
  auto t = io::align_embeddings(f, map, tokens);
  CHECK(t.rows == 3);
  CHECK(t.missing == 1);
  CHECK(t.values[0] == 1.0);
  CHECK(t.values[3] == 0.0);
  CHECK(t.values[7] == 3.0);
}

TEST_CASE("id map round trip") {
  io::IdMap map = {{"item 1", 0}, {"e:x", 4}};
  std::stringstream s;
  io::write_id_map(s, map);
  CHECK(io::read_id_map(s) == map);
}

TEST_CASE("synthetic dataset round-trips through the parsers") {
  corpus::SynthConfig c;
  c.num_users = 40;
  c.num_items = 60;
  c.num_entities = 30;
  auto data = corpus::gen_synthetic(c);
  auto dir = temp_dir("roundtrip");
  auto paths = data::DatasetPaths::in(dir);
  data::write_synthetic(paths, data);

  data::LoadOptions o;
  o.paths = paths;
  auto bundle = data::load_bundle(o);
  CHECK(bundle.graph.num_users == data.graph.num_users);
  CHECK(bundle.graph.edges.size() == data.graph.edges.size());
  std::size_t items_with_edges = 0;
  for (const auto& adj : data.graph.item_adj) items_with_edges += adj.empty() ? 0 : 1;
  CHECK(bundle.graph.num_items >= items_with_edges);
  CHECK(bundle.kg.triplets.size() == data.kg.triplets.size());
  CHECK(bundle.split.train.size() == data.split.train.size());
  CHECK(bundle.split.test.size() == data.split.test.size());
  CHECK(bundle.semantic.rows() == static_cast<Eigen::Index>(bundle.kg.num_entities));

  std::ifstream ein(paths.embeddings, std::ios::binary);
  auto file = io::read_embeddings(ein);
  CHECK(file.values == data.embeddings.values);
  std::ostringstream again;
  io::write_embeddings(again, file);
  CHECK(again.str() == io::read_text_file(paths.embeddings));
}

TEST_CASE("load_bundle names a missing embedding file") {
  corpus::SynthConfig c;
  c.num_users = 20;
  c.num_items = 30;
  auto dir = temp_dir("missing");
  auto paths = data::DatasetPaths::in(dir);
  data::write_synthetic(paths, corpus::gen_synthetic(c));
  std::filesystem::remove(paths.embeddings);
  data::LoadOptions o;
  o.paths = paths;
  try {
    data::load_bundle(o);
    FAIL("expected a data error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("semantic.emb") != std::string::npos);
  }
  o.need_semantic = false;
  CHECK_NOTHROW(data::load_bundle(o));
}

TEST_CASE("split manifest round trip") {
  corpus::SynthConfig c;
  c.num_users = 20;
  c.num_items = 30;
  auto data = corpus::gen_synthetic(c);
  std::stringstream s;
  io::write_split_manifest(s, data.split);
  auto back = io::read_split_manifest(s, data.graph);
  CHECK(back.seed == data.split.seed);
  CHECK(back.train_idx == data.split.train_idx);
  CHECK(back.validation_idx == data.split.validation_idx);
  CHECK(back.test_idx == data.split.test_idx);
}
