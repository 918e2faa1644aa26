#include "pegnet/meshgraph.hpp"

#include "pegnet/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pegnet {

std::vector<int> MeshGraph::degrees() const {
  std::vector<int> deg(static_cast<std::size_t>(num_nodes()), 0);
  for (auto s : edges.src) ++deg[s];
  return deg;
}

void validate(const Mesh& mesh) {
  const Index n = mesh.num_nodes();
  if (mesh.dim() != 2 && mesh.dim() != 3) {
    throw StructuralError("mesh dimension must be 2 or 3, got " + std::to_string(mesh.dim()));
  }
  if (static_cast<Index>(mesh.node_types.size()) != n) {
    throw StructuralError("node_types length does not match node count");
  }
  if (!mesh.positions.allFinite()) throw StructuralError("mesh positions contain non-finite values");
  if (mesh.num_cells() > 0 && mesh.cell_arity() != 3 && mesh.cell_arity() != 4) {
    throw StructuralError("cell arity must be 3 or 4");
  }
  if (mesh.periodic_box && mesh.periodic_box->size() != mesh.dim()) {
    throw StructuralError("periodic box dimension does not match mesh");
  }
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    for (Index a = 0; a < mesh.cell_arity(); ++a) {
      const auto v = mesh.cells(c, a);
      if (v < 0 || v >= n) {
        throw StructuralError("cell " + std::to_string(c) + " references node " + std::to_string(v) +
                              " outside [0, " + std::to_string(n) + ")");
      }
      for (Index b = 0; b < a; ++b) {
        if (mesh.cells(c, b) == v) throw StructuralError("cell " + std::to_string(c) + " repeats a vertex");
      }
    }
  }
}

Eigen::VectorXd displacement(const Eigen::Ref<const Eigen::RowVectorXd>& pos_i,
                             const Eigen::Ref<const Eigen::RowVectorXd>& pos_j,
                             const std::optional<Eigen::VectorXd>& periodic_box) {
  Eigen::VectorXd d = (pos_j - pos_i).transpose();
  if (periodic_box) {
    for (Index k = 0; k < d.size(); ++k) {
      const double len = (*periodic_box)(k);
      d(k) -= len * std::round(d(k) / len);
    }
  }
  return d;
}

EdgeSet edges_from_pairs(const Tensor& positions, const std::vector<std::pair<std::int32_t, std::int32_t>>& pairs,
                         const std::optional<Eigen::VectorXd>& periodic_box) {
  std::vector<std::pair<std::int32_t, std::int32_t>> directed;
  directed.reserve(pairs.size() * 2);
  for (auto [a, b] : pairs) {
    if (a == b) continue;
    directed.emplace_back(a, b);
    directed.emplace_back(b, a);
  }
  std::sort(directed.begin(), directed.end());
  directed.erase(std::unique(directed.begin(), directed.end()), directed.end());

  EdgeSet edges;
  const auto e_count = static_cast<Index>(directed.size());
  edges.src.resize(directed.size());
  edges.dst.resize(directed.size());
  edges.disp.resize(e_count, positions.cols());
  edges.dist.resize(e_count, 1);
  for (Index e = 0; e < e_count; ++e) {
    const auto [i, j] = directed[static_cast<std::size_t>(e)];
    edges.src[e] = i;
    edges.dst[e] = j;
    Eigen::VectorXd d = displacement(positions.row(i), positions.row(j), periodic_box);
    edges.disp.row(e) = d.transpose();
    edges.dist(e, 0) = d.norm();
    if (!(edges.dist(e, 0) > 0.0)) {
      throw StructuralError("coincident nodes " + std::to_string(i) + " and " + std::to_string(j));
    }
  }
  return edges;
}

EdgeSet build_edges(const Mesh& mesh) {
  validate(mesh);
  std::vector<std::pair<std::int32_t, std::int32_t>> pairs;
  const Index k = mesh.cell_arity();
  pairs.reserve(static_cast<std::size_t>(mesh.num_cells() * k * (k - 1) / 2));
  for (Index c = 0; c < mesh.num_cells(); ++c) {
    for (Index a = 0; a < k; ++a) {
      for (Index b = a + 1; b < k; ++b) pairs.emplace_back(mesh.cells(c, a), mesh.cells(c, b));
    }
  }
  return edges_from_pairs(mesh.positions, pairs, mesh.periodic_box);
}

MeshGraph make_graph(const Mesh& mesh) {
  MeshGraph g;
  g.edges = build_edges(mesh);
  g.positions = mesh.positions;
  g.node_types = mesh.node_types;
  g.periodic_box = mesh.periodic_box;
  return g;
}

Tensor one_hot(const std::vector<std::uint8_t>& labels, int num_classes) {
  if (num_classes < 1) throw RangeError("one_hot: class count must be >= 1");
  Tensor out = Tensor::Zero(static_cast<Index>(labels.size()), num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= num_classes) {
      throw RangeError("node type label " + std::to_string(labels[i]) + " >= class count " +
                       std::to_string(num_classes));
    }
    out(static_cast<Index>(i), labels[i]) = 1.0;
  }
  return out;
}

}  // namespace pegnet
