#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace dcgl::cli {

// Record of one CLI run: enough to rebuild it from inputs by digest.
struct RunManifest {
  std::string command;
  std::string config_path;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> inputs;  // path, sha256
  std::vector<std::string> outputs;
  std::string started;
  std::string finished;
  std::string build;
  std::string status = "running";

  void add_input(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;
};

std::string utc_timestamp();

}  // namespace dcgl::cli
