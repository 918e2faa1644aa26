#ifndef PEGNET_PHYSLOSS_HPP_
#define PEGNET_PHYSLOSS_HPP_

#include "pegnet/errors.hpp"
#include "pegnet/meshgraph.hpp"
#include "pegnet/tape.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace pegnet {

/// Regularizer weights of the total loss.
struct LossWeights {
  double div = 1e-2;
  double mass = 1e-2;
  void validate() const;
};

struct LossParts {
  double pred = 0.0;
  double div = 0.0;
  double mass = 0.0;
};

/// pred + w.div * div (+ w.mass * mass when the task carries a scalar).
double total_loss(const LossParts& parts, const LossWeights& weights, bool has_scalar);

/// Mean of squared differences over every entry.
template <typename DerivedA, typename DerivedB>
double l_pred(const Eigen::MatrixBase<DerivedA>& pred, const Eigen::MatrixBase<DerivedB>& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols()) throw ShapeError("l_pred: shape mismatch");
  if (pred.size() == 0) return 0.0;
  return (pred.derived().template cast<double>() - truth.derived().template cast<double>()).squaredNorm() /
         static_cast<double>(pred.size());
}

/// Unit edge direction (pos_j - pos_i) / |pos_j - pos_i| of edge e.
inline Eigen::RowVectorXd unit_direction(const EdgeSet& edges, Index e) { return edges.disp.row(e) / edges.dist(e, 0); }

/// Per-node discrete divergence: mean over neighbors of (v_j - v_i) . d_ij,
/// with d_ij the unit direction from i to j. Isolated nodes give 0.
template <typename Derived>
Eigen::VectorXd node_divergence(const Eigen::MatrixBase<Derived>& v, const MeshGraph& graph) {
  if (v.rows() != graph.num_nodes() || v.cols() != graph.dim()) throw ShapeError("divergence: velocity shape mismatch");
  const std::vector<int> deg = graph.degrees();
  Eigen::VectorXd div = Eigen::VectorXd::Zero(graph.num_nodes());
  const EdgeSet& e = graph.edges;
  for (Index k = 0; k < e.size(); ++k) {
    const auto i = e.src[k];
    const auto j = e.dst[k];
    const Eigen::RowVectorXd dv = (v.row(j) - v.row(i)).template cast<double>();
    div(i) += dv.dot(unit_direction(e, k)) / static_cast<double>(deg[i]);
  }
  return div;
}

/// Divergence regularizer: mean over nodes of the squared node divergence.
template <typename Derived>
double l_div(const Eigen::MatrixBase<Derived>& v, const MeshGraph& graph) {
  if (graph.num_nodes() == 0) return 0.0;
  return node_divergence(v, graph).squaredNorm() / static_cast<double>(graph.num_nodes());
}

/// Per-node mass residual:
///   (c1_i - c0_i) + sum_j [ (v_i . d_ij) c0_i - (v_j . d_ij) c0_j ]
/// with v the velocity at t+1 and d_ij the unit direction from i to j.
template <typename DC0, typename DC1, typename DV>
Eigen::VectorXd node_mass_residual(const Eigen::MatrixBase<DC0>& c0, const Eigen::MatrixBase<DC1>& c1,
                                   const Eigen::MatrixBase<DV>& v1, const MeshGraph& graph) {
  const Index n = graph.num_nodes();
  if (c0.rows() != n || c1.rows() != n || v1.rows() != n || c0.cols() != 1 || c1.cols() != 1 ||
      v1.cols() != graph.dim()) {
    throw ShapeError("mass residual: field shapes do not match graph");
  }
  Eigen::VectorXd r = (c1.col(0) - c0.col(0)).template cast<double>();
  const EdgeSet& e = graph.edges;
  for (Index k = 0; k < e.size(); ++k) {
    const auto i = e.src[k];
    const auto j = e.dst[k];
    const Eigen::RowVectorXd d = unit_direction(e, k);
    r(i) += v1.row(i).template cast<double>().dot(d) * static_cast<double>(c0(i, 0)) -
            v1.row(j).template cast<double>().dot(d) * static_cast<double>(c0(j, 0));
  }
  return r;
}

/// Mass-conservation regularizer: mean over nodes of the squared residual.
template <typename DC0, typename DC1, typename DV>
double l_mass(const Eigen::MatrixBase<DC0>& c0, const Eigen::MatrixBase<DC1>& c1, const Eigen::MatrixBase<DV>& v1,
              const MeshGraph& graph) {
  if (graph.num_nodes() == 0) return 0.0;
  return node_mass_residual(c0, c1, v1, graph).squaredNorm() / static_cast<double>(graph.num_nodes());
}

/// Edge stencil constants for the tape versions of the regularizers.
struct StencilVars {
  const MeshGraph* graph = nullptr;
  Var unit_dir;    // E x dim
  Var inv_degree;  // E x 1, 1 / |N(src)|
};
StencilVars record_stencil(Tape& tape, const MeshGraph& graph);

Var l_pred(Tape& tape, Var pred, Var truth);
Var l_div(Tape& tape, Var v, const StencilVars& stencil);
Var l_mass(Tape& tape, Var c0, Var c1, Var v1, const StencilVars& stencil);
/// Invalid Vars are treated as absent terms.
Var total_loss(Tape& tape, Var pred, Var div, Var mass, const LossWeights& weights);

}  // namespace pegnet

#endif  // PEGNET_PHYSLOSS_HPP_
