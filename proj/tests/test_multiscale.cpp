#include <doctest.h>

#include "pegnet/errors.hpp"
#include "pegnet/multiscale.hpp"
#include "pegnet/verify.hpp"

#include <deque>
#include <set>

using namespace pegnet;

namespace {

MeshGraph from_pairs(int n, const std::vector<std::pair<std::int32_t, std::int32_t>>& pairs) {
  MeshGraph g;
  g.positions = Tensor::Zero(n, 2);
  for (int i = 0; i < n; ++i) g.positions(i, 0) = i;
  g.node_types.assign(static_cast<std::size_t>(n), 0);
  g.edges = edges_from_pairs(g.positions, pairs, std::nullopt);
  return g;
}

MeshGraph path5() { return from_pairs(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}}); }

std::set<std::pair<int, int>> edges_of(const MeshGraph& g) {
  std::set<std::pair<int, int>> s;
  for (Index k = 0; k < g.edges.size(); ++k) s.emplace(g.edges.src[k], g.edges.dst[k]);
  return s;
}

}  // namespace

TEST_CASE("path graph golden case") {
  const GraphHierarchy h = bistride_coarsen(path5(), 2);
  REQUIRE(h.depth() == 2);
  CHECK(h.transitions[0].kept == IndexArray{0, 2, 4});
  // coarse edges in fine labels: (0,2), (2,4)
  std::set<std::pair<int, int>> fine_labels;
  for (const auto& [a, b] : edges_of(h.levels[1])) fine_labels.emplace(h.transitions[0].kept[a], h.transitions[0].kept[b]);
  CHECK(fine_labels == std::set<std::pair<int, int>>{{0, 2}, {2, 0}, {2, 4}, {4, 2}});
  CHECK(bfs_depths(path5()) == std::vector<int>{0, 1, 2, 3, 4});
}

TEST_CASE("triangle collapses to one node") {
  const GraphHierarchy h = bistride_coarsen(from_pairs(3, {{0, 1}, {1, 2}, {2, 0}}), 2);
  CHECK(h.transitions[0].kept == IndexArray{0});
  CHECK(h.levels[1].num_nodes() == 1);
  CHECK(h.levels[1].edges.size() == 0);
}

TEST_CASE("single node hierarchy") {
  const GraphHierarchy h = bistride_coarsen(from_pairs(1, {}), 4);
  CHECK(h.depth() == 4);
  for (const auto& l : h.levels) {
    CHECK(l.num_nodes() == 1);
    CHECK(l.edges.size() == 0);
  }
  CHECK_THROWS_AS(bistride_coarsen(from_pairs(1, {}), 0), ConfigError);
}

TEST_CASE("restrict") {
  const GraphHierarchy h = bistride_coarsen(path5(), 2);
  const Tensor ids = (Tensor(5, 1) << 0, 1, 2, 3, 4).finished();
  CHECK(restrict_rows(ids, h.transitions[0]) == (Tensor(3, 1) << 0, 2, 4).finished());
  CHECK(restrict_rows(Tensor(5, 0), h.transitions[0]).cols() == 0);
  CHECK(restrict_rows(Tensor(5, 0), h.transitions[0]).rows() == 3);
  CHECK_THROWS_AS(restrict_rows(Tensor::Zero(4, 1), h.transitions[0]), ShapeError);

  // isolated nodes are all kept: identity
  const GraphHierarchy iso = bistride_coarsen(from_pairs(3, {}), 2);
  const Tensor x = (Tensor(3, 2) << 1, 2, 3, 4, 5, 6).finished();
  CHECK(restrict_rows(x, iso.transitions[0]) == x);
  CHECK(interpolate_rows(x, iso, 0) == x);
}

TEST_CASE("interpolate uses the mean of kept neighbors") {
  const GraphHierarchy h = bistride_coarsen(path5(), 2);
  const double a = 0.3, b = -1.7, c = 4.25;
  const Tensor coarse = (Tensor(3, 1) << a, b, c).finished();
  const Tensor fine = interpolate_rows(coarse, h, 0);
  CHECK(fine == (Tensor(5, 1) << a, (a + b) / 2, b, (b + c) / 2, c).finished());
  CHECK_THROWS_AS(interpolate_rows(coarse, h, 1), RangeError);

  // A dropped node without kept neighbors falls back to zero.
  GraphHierarchy manual = h;
  manual.transitions[0].parent_neighbors[1].clear();
  CHECK(interpolate_rows(coarse, manual, 0)(1, 0) == 0.0);
}

TEST_CASE("random graphs against an independent BFS-parity and two-hop oracle") {
  std::mt19937_64 rng(21);
  for (int it = 0; it < 30; ++it) {
    const MeshGraph g = make_graph(random_mesh(rng, {2, 7, 0.2, false}));
    const int n = static_cast<int>(g.num_nodes());
    std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
    for (Index k = 0; k < g.edges.size(); ++k) adj[g.edges.src[k]].push_back(g.edges.dst[k]);
    // BFS from the lowest unvisited index
    std::vector<int> depth(static_cast<std::size_t>(n), -1);
    for (int s = 0; s < n; ++s) {
      if (depth[s] >= 0) continue;
      depth[s] = 0;
      std::deque<int> q{s};
      while (!q.empty()) {
        const int u = q.front();
        q.pop_front();
        for (int v : adj[u]) {
          if (depth[v] < 0) {
            depth[v] = depth[u] + 1;
            q.push_back(v);
          }
        }
      }
    }
    IndexArray kept;
    for (int i = 0; i < n; ++i) {
      if (depth[i] % 2 == 0) kept.push_back(i);
    }
    const GraphHierarchy h = bistride_coarsen(g, 2);
    REQUIRE(h.transitions[0].kept == kept);
    // kept u, v adjacent iff a fine path of length <= 2 joins them
    Eigen::MatrixXi A = Eigen::MatrixXi::Zero(n, n);
    for (Index k = 0; k < g.edges.size(); ++k) A(g.edges.src[k], g.edges.dst[k]) = 1;
    const Eigen::MatrixXi reach = A + A * A;
    std::set<std::pair<int, int>> expect;
    for (std::size_t a = 0; a < kept.size(); ++a) {
      for (std::size_t b = 0; b < kept.size(); ++b) {
        if (a != b && reach(kept[a], kept[b]) > 0) expect.emplace(static_cast<int>(a), static_cast<int>(b));
      }
    }
    CHECK(edges_of(h.levels[1]) == expect);
  }
}

TEST_CASE("hierarchy stats and cover") {
  const GraphHierarchy h = bistride_coarsen(path5(), 3);
  const auto stats = hierarchy_stats(h);
  REQUIRE(stats.size() == 3);
  CHECK(stats[0].nodes == 5);
  CHECK(stats[0].edges == 8);
  CHECK(stats[1].nodes == 3);
  CHECK(stats[1].edges == 4);
  CHECK(stats[2].nodes == 2);
  CHECK(check_bistride_cover(h));
}

TEST_CASE("hierarchy property suite") {
  const SuiteReport r = hierarchy_suite();
  INFO(r.text());
  CHECK(r.passed());
}
