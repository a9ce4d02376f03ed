#include "manifest.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <openssl/evp.h>

namespace strokeseg::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  std::string out;
  char hex[3];
  for (unsigned int i = 0; i < length; ++i) {
    std::snprintf(hex, sizeof hex, "%02x", digest[i]);
    out += hex;
  }
  return out;
}

std::string file_sha256(const fs::path& path) { return sha256_hex(read_file(path)); }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("failed writing " + path.string());
  }
  fs::rename(tmp, path);
}

fs::path resolve_input(const std::string& path) {
  const fs::path p(path);
  if (fs::exists(p) || p.is_absolute()) return p;
  if (const char* root = std::getenv("STROKESEG_DATA_DIR")) {
    const fs::path alt = fs::path(root) / p;
    if (fs::exists(alt)) return alt;
  }
  return p;
}

RunManifest::RunManifest(std::string command, std::vector<std::string> args)
    : start_(std::chrono::steady_clock::now()) {
  doc_["command"] = std::move(command);
  doc_["args"] = std::move(args);
  doc_["cwd"] = fs::current_path().string();
  doc_["seed"] = 0;
  doc_["config"] = nlohmann::json::object();
  doc_["notes"] = nlohmann::json::object();
  doc_["inputs"] = nlohmann::json::object();
  doc_["outputs"] = nlohmann::json::object();
}

void RunManifest::add_input(const fs::path& path) { doc_["inputs"][path.string()] = file_sha256(path); }

void RunManifest::write_output(const fs::path& path, const std::string& bytes) {
  write_file(path, bytes);
  doc_["outputs"][path.string()] = sha256_hex(bytes);
}

void RunManifest::add_output(const fs::path& path) { doc_["outputs"][path.string()] = file_sha256(path); }

void RunManifest::finish(const fs::path& manifest_path) {
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  doc_["timings"] = {{"wall_seconds", seconds}};
  write_file(manifest_path, doc_.dump(2) + "\n");
}

}  // namespace strokeseg::cli
