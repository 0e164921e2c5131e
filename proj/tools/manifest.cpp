#include "manifest.hpp"

#include <chrono>
#include <ctime>

#include <json.hpp>

#include "dcgl/dataio.hpp"
#include "dcgl/digest.hpp"

namespace dcgl::cli {

void RunManifest::add_input(const std::filesystem::path& path) {
  inputs.emplace_back(path.string(), to_hex(sha256_file(path)));
}

void RunManifest::write(const std::filesystem::path& path) const {
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config_path"] = config_path;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  nlohmann::ordered_json in = nlohmann::ordered_json::array();
  for (const auto& [p, digest] : inputs) in.push_back({{"path", p}, {"sha256", digest}});
  j["inputs"] = in;
  j["outputs"] = outputs;
  j["started"] = started;
  j["finished"] = finished;
  j["build"] = build;
  j["status"] = status;
  io::write_text_file(path, j.dump(2) + "\n");
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace dcgl::cli
