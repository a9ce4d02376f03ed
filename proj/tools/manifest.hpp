#pragma once

#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace strokeseg::cli {

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path);
/// Writes atomically enough for our purposes: to a sibling temp file, then rename.
void write_file(const std::filesystem::path& path, const std::string& bytes);

/// Relative paths that do not exist are looked up under $STROKESEG_DATA_DIR.
std::filesystem::path resolve_input(const std::string& path);

/// Collects everything needed to re-run one command.
class RunManifest {
 public:
  RunManifest(std::string command, std::vector<std::string> args);

  void set_seed(std::uint64_t seed) { doc_["seed"] = seed; }
  nlohmann::json& config() { return doc_["config"]; }
  nlohmann::json& notes() { return doc_["notes"]; }

  void add_input(const std::filesystem::path& path);
  /// Writes the file and records its checksum.
  void write_output(const std::filesystem::path& path, const std::string& bytes);
  void add_output(const std::filesystem::path& path);

  /// Adds timings and writes the manifest itself.
  void finish(const std::filesystem::path& manifest_path);

 private:
  nlohmann::json doc_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace strokeseg::cli
