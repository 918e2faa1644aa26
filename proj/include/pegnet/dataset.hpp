#ifndef PEGNET_DATASET_HPP_
#define PEGNET_DATASET_HPP_

#include "pegnet/meshgraph.hpp"
#include "pegnet/normalizer.hpp"
#include "pegnet/task.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace pegnet {

struct FieldInfo {
  std::string name;
  int width = 1;
};

/// Contents of meta.json. Every array shape on disk is derivable from it.
struct DatasetMeta {
  std::string case_name;
  int dim = 2;
  double dt = 1.0;
  int steps = 0;
  Index num_nodes = 0;
  Index num_cells = 0;
  int cell_arity = 3;
  std::vector<FieldInfo> fields;
  int num_trajectories = 0;
  std::optional<Normalizer> normalization;
  std::optional<Eigen::VectorXd> periodic_box;
  /// Free-form extras (generator parameters, ground-truth diagnostics,
  /// source trajectory ids of rollouts).
  nlohmann::json extra = nlohmann::json::object();

  TaskSpec task() const;
};

/// One time series of fields on a fixed mesh.
struct Trajectory {
  Mesh mesh;
  /// fields[k][t]: N x width values of field k at step t.
  std::vector<std::vector<Tensor>> fields;

  int steps() const { return fields.empty() ? 0 : static_cast<int>(fields.front().size()); }
  /// All fields at step t, in field order.
  std::vector<Tensor> state(int t) const;
};

struct Dataset {
  DatasetMeta meta;
  std::vector<Trajectory> trajectories;
};

nlohmann::json to_json(const DatasetMeta& meta);
DatasetMeta meta_from_json(const nlohmann::json& j);

/// Writes meta.json and traj_<i>/{cells.i32le,pos.f32le,node_type.u8,<field>.f32le}.
/// Field and position values are stored as float32.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Throws DataError on a missing file, bad JSON, or a byte count that does not
/// match the meta header.
DatasetMeta read_meta(const std::filesystem::path& dir);
Trajectory read_trajectory(const std::filesystem::path& dir, const DatasetMeta& meta, int index);
Dataset read_dataset(const std::filesystem::path& dir);

/// Checks meta/trajectory consistency before writing; throws DataError.
void validate_dataset(const Dataset& dataset);

/// Little-endian raw array helpers (exposed for tests and tools).
std::vector<char> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, const std::vector<char>& bytes);

}  // namespace pegnet

#endif  // PEGNET_DATASET_HPP_
