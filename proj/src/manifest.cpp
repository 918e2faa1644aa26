#include "pegnet/manifest.hpp"

#include "pegnet/dataset.hpp"
#include "pegnet/errors.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

namespace fs = std::filesystem;

namespace pegnet {

namespace {

struct Sha256 {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};

  Sha256() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error("sha256 init failed");
  }
  void update(const void* data, std::size_t size) { EVP_DigestUpdate(ctx.get(), data, size); }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), md, &len);
    std::ostringstream out;
    for (unsigned int i = 0; i < len; ++i) out << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return out.str();
  }
};

std::vector<fs::path> files_below(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const fs::path rel = fs::relative(e.path(), dir);
    if (rel == kManifestName) continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  return files;
}

}  // namespace

std::string sha256_hex(const void* data, std::size_t size) {
  Sha256 h;
  h.update(data, size);
  return h.hex();
}

std::string sha256_file(const fs::path& path) {
  const std::vector<char> bytes = read_file_bytes(path);
  return sha256_hex(bytes.data(), bytes.size());
}

std::string tree_hash(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  Sha256 h;
  for (const auto& rel : files_below(dir)) {
    const std::string name = rel.generic_string();
    const std::string digest = sha256_file(dir / rel);
    h.update(name.data(), name.size() + 1);
    h.update(digest.data(), digest.size());
  }
  return h.hex();
}

nlohmann::json to_json(const RunManifest& m) {
  return {{"command", m.command},   {"args", m.args},
          {"config", m.config},     {"dataset_hash", m.dataset_hash},
          {"checkpoint_hash", m.checkpoint_hash}, {"seed", m.seed},
          {"started", m.started},   {"finished", m.finished},
          {"outputs", m.outputs}};
}

RunManifest manifest_from_json(const nlohmann::json& j) {
  try {
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    m.config = j.at("config");
    m.dataset_hash = j.at("dataset_hash").get<std::string>();
    m.checkpoint_hash = j.at("checkpoint_hash").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.started = j.at("started").get<std::string>();
    m.finished = j.at("finished").get<std::string>();
    m.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("bad manifest: ") + e.what());
  }
}

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

void write_manifest(const fs::path& dir, RunManifest m) {
  m.outputs.clear();
  for (const auto& rel : files_below(dir)) m.outputs[rel.generic_string()] = sha256_file(dir / rel);
  std::ofstream out(dir / kManifestName, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest in " + dir.string());
  out << to_json(m).dump(2) << '\n';
}

RunManifest verify_manifest(const fs::path& dir) {
  const fs::path path = dir / kManifestName;
  if (!fs::exists(path)) throw DataError("missing " + path.string());
  const std::vector<char> bytes = read_file_bytes(path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw DataError("bad manifest " + path.string() + ": " + e.what());
  }
  RunManifest m = manifest_from_json(j);
  for (const auto& [rel, digest] : m.outputs) {
    if (!fs::exists(dir / rel)) throw DataError("manifest lists missing file " + rel);
    if (sha256_file(dir / rel) != digest) throw DataError("hash mismatch for " + (dir / rel).string());
  }
  return m;
}

}  // namespace pegnet
