#include "pegnet/multiscale.hpp"

#include <algorithm>
#include <deque>

namespace pegnet {

namespace {

// CSR adjacency of a sorted EdgeSet.
struct Adjacency {
  std::vector<Index> offsets;
  IndexArray targets;

  explicit Adjacency(const MeshGraph& g) : offsets(static_cast<std::size_t>(g.num_nodes()) + 1, 0) {
    for (auto s : g.edges.src) ++offsets[static_cast<std::size_t>(s) + 1];
    for (std::size_t i = 1; i < offsets.size(); ++i) offsets[i] += offsets[i - 1];
    targets = g.edges.dst;  // edges are sorted by (src, dst)
  }
  std::span<const std::int32_t> neighbors(Index i) const {
    return {targets.data() + offsets[i], static_cast<std::size_t>(offsets[i + 1] - offsets[i])};
  }
};

LevelTransition coarsen_once(const MeshGraph& fine, MeshGraph& coarse) {
  const Index n = fine.num_nodes();
  const Adjacency adj(fine);
  const std::vector<int> depth = bfs_depths(fine);

  LevelTransition t;
  t.coarse_of_fine.assign(static_cast<std::size_t>(n), -1);
  for (Index i = 0; i < n; ++i) {
    if (depth[i] % 2 == 0) {
      t.coarse_of_fine[i] = static_cast<std::int32_t>(t.kept.size());
      t.kept.push_back(static_cast<std::int32_t>(i));
    }
  }

  t.parent_neighbors.resize(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    if (t.coarse_of_fine[i] >= 0) continue;
    for (auto j : adj.neighbors(i)) {
      if (t.coarse_of_fine[j] >= 0) t.parent_neighbors[i].push_back(j);
    }
  }

  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
  for (auto a : t.kept) {
    const auto ca = t.coarse_of_fine[a];
    for (auto b : adj.neighbors(a)) {
      if (t.coarse_of_fine[b] >= 0) pairs.emplace_back(ca, t.coarse_of_fine[b]);
      for (auto c : adj.neighbors(b)) {
        if (c != a && t.coarse_of_fine[c] >= 0) pairs.emplace_back(ca, t.coarse_of_fine[c]);
      }
    }
  }

  const auto n_coarse = static_cast<Index>(t.kept.size());
  coarse.positions.resize(n_coarse, fine.dim());
  coarse.node_types.resize(static_cast<std::size_t>(n_coarse));
  for (Index k = 0; k < n_coarse; ++k) {
    coarse.positions.row(k) = fine.positions.row(t.kept[k]);
    coarse.node_types[k] = fine.node_types[t.kept[k]];
  }
  coarse.periodic_box = fine.periodic_box;
  coarse.edges = edges_from_pairs(coarse.positions, pairs, coarse.periodic_box);

  t.restrict_op.in_rows = n;
  t.restrict_op.offsets.assign(1, 0);
  for (Index k = 0; k < n_coarse; ++k) {
    t.restrict_op.cols.push_back(t.kept[k]);
    t.restrict_op.weights.push_back(1.0);
    t.restrict_op.offsets.push_back(static_cast<Index>(t.restrict_op.cols.size()));
  }

  t.interpolate_op.in_rows = n_coarse;
  t.interpolate_op.offsets.assign(1, 0);
  for (Index i = 0; i < n; ++i) {
    if (t.coarse_of_fine[i] >= 0) {
      t.interpolate_op.cols.push_back(t.coarse_of_fine[i]);
      t.interpolate_op.weights.push_back(1.0);
    } else {
      const auto& parents = t.parent_neighbors[i];
      for (auto p : parents) {
        t.interpolate_op.cols.push_back(t.coarse_of_fine[p]);
        t.interpolate_op.weights.push_back(1.0 / static_cast<double>(parents.size()));
      }
    }
    t.interpolate_op.offsets.push_back(static_cast<Index>(t.interpolate_op.cols.size()));
  }
  return t;
}

}  // namespace

std::vector<int> bfs_depths(const MeshGraph& graph) {
  const Index n = graph.num_nodes();
  const Adjacency adj(graph);
  std::vector<int> depth(static_cast<std::size_t>(n), -1);
  std::deque<std::int32_t> queue;
  for (Index seed = 0; seed < n; ++seed) {
    if (depth[seed] >= 0) continue;
    depth[seed] = 0;
    queue.push_back(static_cast<std::int32_t>(seed));
    while (!queue.empty()) {
      const auto i = queue.front();
      queue.pop_front();
      for (auto j : adj.neighbors(i)) {
        if (depth[j] < 0) {
          depth[j] = depth[i] + 1;
          queue.push_back(j);
        }
      }
    }
  }
  return depth;
}

GraphHierarchy bistride_coarsen(const MeshGraph& graph, int depth) {
  if (depth < 1) throw ConfigError("hierarchy depth must be >= 1, got " + std::to_string(depth));
  GraphHierarchy h;
  h.levels.reserve(static_cast<std::size_t>(depth));
  h.levels.push_back(graph);
  for (int d = 1; d < depth; ++d) {
    MeshGraph coarse;
    h.transitions.push_back(coarsen_once(h.levels.back(), coarse));
    h.levels.push_back(std::move(coarse));
  }
  return h;
}

std::vector<LevelStats> hierarchy_stats(const GraphHierarchy& hierarchy) {
  std::vector<LevelStats> out;
  for (const auto& level : hierarchy.levels) out.push_back({level.num_nodes(), level.edges.size()});
  return out;
}

bool check_bistride_cover(const GraphHierarchy& hierarchy) {
  for (std::size_t d = 0; d < hierarchy.transitions.size(); ++d) {
    const MeshGraph& fine = hierarchy.levels[d];
    const LevelTransition& t = hierarchy.transitions[d];
    const std::vector<int> deg = fine.degrees();
    for (Index i = 0; i < fine.num_nodes(); ++i) {
      if (t.coarse_of_fine[i] >= 0 || deg[i] == 0) continue;
      bool covered = false;
      for (Index e = 0; e < fine.edges.size(); ++e) {
        if (fine.edges.src[e] == i && t.coarse_of_fine[fine.edges.dst[e]] >= 0) {
          covered = true;
          break;
        }
      }
      if (!covered) return false;
    }
  }
  return true;
}

}  // namespace pegnet
