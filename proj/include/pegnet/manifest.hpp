#ifndef PEGNET_MANIFEST_HPP_
#define PEGNET_MANIFEST_HPP_

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace pegnet {

inline constexpr const char* kManifestName = "manifest.json";

std::string sha256_hex(const void* data, std::size_t size);
std::string sha256_file(const std::filesystem::path& path);
/// Hash over the sorted relative paths and contents of every regular file
/// below `dir`, skipping manifest.json.
std::string tree_hash(const std::filesystem::path& dir);

/// Provenance record written next to every artifact directory.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  nlohmann::json config = nlohmann::json::object();
  std::string dataset_hash;     // empty when not applicable
  std::string checkpoint_hash;  // empty when not applicable
  std::uint64_t seed = 0;
  std::string started;   // UTC, ISO 8601
  std::string finished;
  /// Relative path -> SHA-256 of every file the command wrote.
  std::map<std::string, std::string> outputs;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j);

std::string utc_now();

/// Hashes every file in `dir` into m.outputs and writes dir/manifest.json.
void write_manifest(const std::filesystem::path& dir, RunManifest m);
/// Reads dir/manifest.json and recomputes every output hash; throws DataError
/// on a missing manifest, a missing file or a mismatch.
RunManifest verify_manifest(const std::filesystem::path& dir);

}  // namespace pegnet

#endif  // PEGNET_MANIFEST_HPP_
