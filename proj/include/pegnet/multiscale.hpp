#ifndef PEGNET_MULTISCALE_HPP_
#define PEGNET_MULTISCALE_HPP_

#include "pegnet/errors.hpp"
#include "pegnet/meshgraph.hpp"
#include "pegnet/tape.hpp"

#include <string>
#include <vector>

namespace pegnet {

/// Transition between level d (fine) and level d+1 (coarse).
struct LevelTransition {
  /// kept[k] is the fine index of coarse node k; ascending.
  IndexArray kept;
  /// Coarse index of each fine node, -1 for dropped nodes.
  IndexArray coarse_of_fine;
  /// For each fine node: its kept fine-graph neighbors (empty for kept nodes).
  std::vector<IndexArray> parent_neighbors;
  RowMix restrict_op;     // N_{d+1} rows from N_d rows
  RowMix interpolate_op;  // N_d rows from N_{d+1} rows
};

/// Bi-stride multilevel graph. levels[0] is the input graph.
struct GraphHierarchy {
  std::vector<MeshGraph> levels;
  std::vector<LevelTransition> transitions;  // levels.size() - 1 entries

  int depth() const { return static_cast<int>(levels.size()); }
};

/// Builds `depth` levels by repeated bi-stride pooling: BFS from the lowest
/// index of every connected component, keep nodes at even BFS depth, connect
/// kept nodes joined by a fine path of length <= 2. Throws ConfigError if
/// depth < 1.
GraphHierarchy bistride_coarsen(const MeshGraph& graph, int depth);

/// BFS depth of every node, seeding each component at its lowest index.
std::vector<int> bfs_depths(const MeshGraph& graph);

/// Copies the rows of kept nodes in coarse order.
template <typename Derived>
RowMatrix<typename Derived::Scalar> restrict_rows(const Eigen::MatrixBase<Derived>& features,
                                                  const LevelTransition& t) {
  if (features.rows() != static_cast<Index>(t.coarse_of_fine.size())) {
    throw ShapeError("restrict: feature rows " + std::to_string(features.rows()) + " != fine node count " +
                     std::to_string(t.coarse_of_fine.size()));
  }
  RowMatrix<typename Derived::Scalar> out(static_cast<Index>(t.kept.size()), features.cols());
  for (std::size_t k = 0; k < t.kept.size(); ++k) out.row(static_cast<Index>(k)) = features.row(t.kept[k]);
  return out;
}

/// Kept fine nodes take their coarse row; dropped nodes the mean of their
/// kept neighbors' rows (zero when they have none).
template <typename Derived>
RowMatrix<typename Derived::Scalar> interpolate_rows(const Eigen::MatrixBase<Derived>& coarse,
                                                     const GraphHierarchy& hierarchy, int level) {
  if (level < 0 || level + 1 >= hierarchy.depth()) throw RangeError("interpolate: level out of range");
  const LevelTransition& t = hierarchy.transitions[static_cast<std::size_t>(level)];
  if (coarse.rows() != static_cast<Index>(t.kept.size())) {
    throw ShapeError("interpolate: coarse rows " + std::to_string(coarse.rows()) + " != coarse node count " +
                     std::to_string(t.kept.size()));
  }
  using Scalar = typename Derived::Scalar;
  const auto n_fine = static_cast<Index>(t.coarse_of_fine.size());
  RowMatrix<Scalar> out = RowMatrix<Scalar>::Zero(n_fine, coarse.cols());
  for (Index i = 0; i < n_fine; ++i) {
    if (t.coarse_of_fine[i] >= 0) {
      out.row(i) = coarse.row(t.coarse_of_fine[i]);
      continue;
    }
    const IndexArray& parents = t.parent_neighbors[static_cast<std::size_t>(i)];
    for (auto p : parents) out.row(i) += coarse.row(t.coarse_of_fine[p]);
    if (!parents.empty()) out.row(i) /= static_cast<Scalar>(parents.size());
  }
  return out;
}

struct LevelStats {
  Index nodes = 0;
  Index edges = 0;
};
std::vector<LevelStats> hierarchy_stats(const GraphHierarchy& hierarchy);

/// True iff every dropped node of every level has a kept neighbor at that
/// level (nodes of singleton components excepted).
bool check_bistride_cover(const GraphHierarchy& hierarchy);

}  // namespace pegnet

#endif  // PEGNET_MULTISCALE_HPP_
