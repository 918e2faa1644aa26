#ifndef PEGNET_VTK_HPP_
#define PEGNET_VTK_HPP_

#include "pegnet/dataset.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace pegnet {

/// Legacy VTK cell type ids.
inline constexpr int kVtkTriangle = 5;
inline constexpr int kVtkTetra = 10;

int vtk_cell_type(int arity);

/// Legacy ASCII UNSTRUCTURED_GRID with one point-data array per field
/// (SCALARS for width 1, VECTORS padded to 3 components otherwise).
void write_vtk(const std::filesystem::path& path, const Mesh& mesh,
               const std::vector<std::pair<std::string, Tensor>>& point_data);

struct VtkData {
  Tensor points;  // N x 3
  std::vector<std::vector<std::int32_t>> cells;
  std::vector<int> cell_types;
  std::vector<std::pair<std::string, Tensor>> point_data;  // N x 1 or N x 3
};

/// Reads back what write_vtk emits; throws DataError on anything else.
VtkData read_vtk(const std::filesystem::path& path);

/// One file per frame, step_<t>.vtk, in `out`. Returns the written paths.
std::vector<std::filesystem::path> export_trajectory_vtk(const Trajectory& trajectory, const DatasetMeta& meta,
                                                         const std::filesystem::path& out);

}  // namespace pegnet

#endif  // PEGNET_VTK_HPP_
