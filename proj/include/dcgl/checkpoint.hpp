#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dcgl/diff/tape.hpp"
#include "dcgl/digest.hpp"

namespace dcgl::ckpt {

// Binary layout, little-endian:
//   "DCGLCKPT" | u16 version | 32-byte config hash | u32 record count
//   | records: u16 name length, name, u8 rank, rank x u32 dims, f64 payload
//   | u32 blob length, RNG state blob
inline constexpr std::uint16_t kVersion = 1;

struct Record {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<double> data;
};

struct Checkpoint {
  Sha256 config_hash{};
  std::vector<Record> records;
  std::string rng_state;

  void put_matrix(std::string name, const diff::Mat& m);
  void put_scalar(std::string name, double v);
  const Record* find(std::string_view name) const;
  diff::Mat matrix(std::string_view name) const;
  double scalar(std::string_view name) const;
  bool operator==(const Checkpoint& other) const;
};

void write_checkpoint(std::ostream& out, const Checkpoint& c);
Checkpoint read_checkpoint(std::istream& in);
void save(const std::filesystem::path& path, const Checkpoint& c);
Checkpoint load(const std::filesystem::path& path);
// Throws ConfigError when the stored hash differs from `expected`.
void require_hash(const Checkpoint& c, const Sha256& expected);

}  // namespace dcgl::ckpt
