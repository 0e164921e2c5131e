#include "dcgl/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "dcgl/error.hpp"

namespace dcgl::ckpt {
namespace {

constexpr char kMagic[8] = {'D', 'C', 'G', 'L', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T v) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) throw DataError("checkpoint: truncated file");
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

std::string get_bytes(std::istream& in, std::size_t n) {
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n))) throw DataError("checkpoint: truncated file");
  return s;
}

}  // namespace

void Checkpoint::put_matrix(std::string name, const diff::Mat& m) {
  Record r{std::move(name), {static_cast<std::uint32_t>(m.rows()), static_cast<std::uint32_t>(m.cols())},
           std::vector<double>(m.data(), m.data() + m.size())};
  records.push_back(std::move(r));
}

void Checkpoint::put_scalar(std::string name, double v) { records.push_back({std::move(name), {}, {v}}); }

const Record* Checkpoint::find(std::string_view name) const {
  for (const auto& r : records)
    if (r.name == name) return &r;
  return nullptr;
}

diff::Mat Checkpoint::matrix(std::string_view name) const {
  const auto* r = find(name);
  if (!r || r->dims.size() != 2) throw DataError("checkpoint: missing matrix record " + std::string(name));
  diff::Mat m(r->dims[0], r->dims[1]);
  if (m.size() > 0) std::memcpy(m.data(), r->data.data(), sizeof(double) * r->data.size());
  return m;
}

double Checkpoint::scalar(std::string_view name) const {
  const auto* r = find(name);
  if (!r || !r->dims.empty()) throw DataError("checkpoint: missing scalar record " + std::string(name));
  return r->data.front();
}

bool Checkpoint::operator==(const Checkpoint& other) const {
  if (config_hash != other.config_hash || rng_state != other.rng_state || records.size() != other.records.size())
    return false;
  for (std::size_t k = 0; k < records.size(); ++k) {
    const auto& a = records[k];
    const auto& b = other.records[k];
    if (a.name != b.name || a.dims != b.dims || a.data.size() != b.data.size()) return false;
    if (!a.data.empty() && std::memcmp(a.data.data(), b.data.data(), sizeof(double) * a.data.size()) != 0)
      return false;
  }
  return true;
}

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint16_t>(out, kVersion);
  out.write(reinterpret_cast<const char*>(c.config_hash.data()), c.config_hash.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.records.size()));
  for (const auto& r : c.records) {
    DCGL_EXPECT(r.name.size() <= 0xffff, "checkpoint: record name too long");
    DCGL_EXPECT(r.dims.size() <= 0xff, "checkpoint: rank too large");
    std::size_t n = 1;
    for (auto d : r.dims) n *= d;
    DCGL_EXPECT(n == r.data.size(), "checkpoint: record payload does not match its dims");
    put<std::uint16_t>(out, static_cast<std::uint16_t>(r.name.size()));
    out.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put<std::uint8_t>(out, static_cast<std::uint8_t>(r.dims.size()));
    for (auto d : r.dims) put<std::uint32_t>(out, d);
    for (double v : r.data) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.rng_state.size()));
  out.write(c.rng_state.data(), static_cast<std::streamsize>(c.rng_state.size()));
  if (!out) throw DataError("checkpoint: write failed");
}

Checkpoint read_checkpoint(std::istream& in) {
  if (get_bytes(in, sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic)))
    throw DataError("checkpoint: bad magic");
  const auto version = get<std::uint16_t>(in);
  if (version != kVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  const auto hash = get_bytes(in, c.config_hash.size());
  std::memcpy(c.config_hash.data(), hash.data(), hash.size());
  const auto count = get<std::uint32_t>(in);
  for (std::uint32_t k = 0; k < count; ++k) {
    Record r;
    r.name = get_bytes(in, get<std::uint16_t>(in));
    const auto rank = get<std::uint8_t>(in);
    std::size_t n = 1;
    for (std::uint8_t d = 0; d < rank; ++d) {
      r.dims.push_back(get<std::uint32_t>(in));
      n *= r.dims.back();
    }
    r.data.resize(n);
    for (auto& v : r.data) v = std::bit_cast<double>(get<std::uint64_t>(in));
    c.records.push_back(std::move(r));
  }
  c.rng_state = get_bytes(in, get<std::uint32_t>(in));
  if (in.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint: trailing bytes");
  return c;
}

void save(const std::filesystem::path& path, const Checkpoint& c) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  write_checkpoint(out, c);
}

Checkpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return read_checkpoint(in);
}

void require_hash(const Checkpoint& c, const Sha256& expected) {
  if (c.config_hash != expected)
    throw ConfigError("checkpoint config hash " + to_hex(c.config_hash) + " does not match " + to_hex(expected));
}

}  // namespace dcgl::ckpt
