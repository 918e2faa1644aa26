#ifndef PEGNET_MESHGRAPH_HPP_
#define PEGNET_MESHGRAPH_HPP_

#include "pegnet/tensor.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace pegnet {

/// Node classes. The taxonomy is fixed; datasets may use fewer classes.
enum class NodeType : std::uint8_t { kInterior = 0, kInlet = 1, kOutlet = 2, kWall = 3 };
inline constexpr int kNumNodeTypes = 4;

/// Simplicial mesh: triangles (arity 3) in 2D or tetrahedra (arity 4) in 3D.
struct Mesh {
  Tensor positions;                       // N x dim
  RowMatrix<std::int32_t> cells;          // C x arity
  std::vector<std::uint8_t> node_types;   // N
  /// Side lengths of a periodic box, one per dimension. When set, displacements
  /// use the minimum-image convention.
  std::optional<Eigen::VectorXd> periodic_box;

  Index num_nodes() const { return positions.rows(); }
  Index dim() const { return positions.cols(); }
  Index num_cells() const { return cells.rows(); }
  Index cell_arity() const { return cells.cols(); }
};

/// Directed, symmetric edge set sorted by (src, dst). For edge e = (i, j),
/// disp[e] = pos_j - pos_i and dist[e] = |disp[e]|.
struct EdgeSet {
  IndexArray src;
  IndexArray dst;
  Tensor disp;  // E x dim
  Tensor dist;  // E x 1

  Index size() const { return static_cast<Index>(src.size()); }
};

/// A mesh's node set together with its edges; the unit every block operates on.
struct MeshGraph {
  Tensor positions;
  std::vector<std::uint8_t> node_types;
  std::optional<Eigen::VectorXd> periodic_box;
  EdgeSet edges;

  Index num_nodes() const { return positions.rows(); }
  Index dim() const { return positions.cols(); }
  /// Number of outgoing edges per node (|N(i)|).
  std::vector<int> degrees() const;
};

/// Throws StructuralError if indices are out of range, a cell repeats a
/// vertex, or positions are non-finite.
void validate(const Mesh& mesh);

/// pos_j - pos_i, wrapped to the nearest periodic image when a box is given.
Eigen::VectorXd displacement(const Eigen::Ref<const Eigen::RowVectorXd>& pos_i,
                             const Eigen::Ref<const Eigen::RowVectorXd>& pos_j,
                             const std::optional<Eigen::VectorXd>& periodic_box);

/// Builds both directions of every cell edge, deduplicated and sorted.
EdgeSet build_edges(const Mesh& mesh);

/// Builds an edge set from an undirected neighbor list (pairs in any order,
/// duplicates allowed) over the given positions.
EdgeSet edges_from_pairs(const Tensor& positions, const std::vector<std::pair<std::int32_t, std::int32_t>>& pairs,
                         const std::optional<Eigen::VectorXd>& periodic_box);

MeshGraph make_graph(const Mesh& mesh);

/// N x num_classes one-hot encoding; throws RangeError on a label >= num_classes.
Tensor one_hot(const std::vector<std::uint8_t>& labels, int num_classes);

}  // namespace pegnet

#endif  // PEGNET_MESHGRAPH_HPP_
