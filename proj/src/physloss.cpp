#include "pegnet/physloss.hpp"

namespace pegnet {

void LossWeights::validate() const {
  if (!(std::isfinite(div) && div >= 0.0) || !(std::isfinite(mass) && mass >= 0.0)) {
    throw ConfigError("loss weights must be finite and >= 0");
  }
}

double total_loss(const LossParts& parts, const LossWeights& weights, bool has_scalar) {
  double total = parts.pred + weights.div * parts.div;
  if (has_scalar) total += weights.mass * parts.mass;
  return total;
}

StencilVars record_stencil(Tape& tape, const MeshGraph& graph) {
  const EdgeSet& e = graph.edges;
  const std::vector<int> deg = graph.degrees();
  Tensor dir(e.size(), graph.dim());
  Tensor inv(e.size(), 1);
  for (Index k = 0; k < e.size(); ++k) {
    dir.row(k) = unit_direction(e, k);
    inv(k, 0) = 1.0 / static_cast<double>(deg[e.src[k]]);
  }
  return {&graph, tape.constant(std::move(dir)), tape.constant(std::move(inv))};
}

Var l_pred(Tape& tape, Var pred, Var truth) { return tape.mean_square(tape.sub(pred, truth)); }

Var l_div(Tape& tape, Var v, const StencilVars& s) {
  const MeshGraph& g = *s.graph;
  const Var dv = tape.sub(tape.gather(v, g.edges.dst), tape.gather(v, g.edges.src));
  const Var term = tape.mul(tape.row_dot(dv, s.unit_dir), s.inv_degree);
  return tape.mean_square(tape.scatter_sum(term, g.edges.src, g.num_nodes()));
}

Var l_mass(Tape& tape, Var c0, Var c1, Var v1, const StencilVars& s) {
  const MeshGraph& g = *s.graph;
  const Var out_i = tape.mul(tape.row_dot(tape.gather(v1, g.edges.src), s.unit_dir), tape.gather(c0, g.edges.src));
  const Var out_j = tape.mul(tape.row_dot(tape.gather(v1, g.edges.dst), s.unit_dir), tape.gather(c0, g.edges.dst));
  const Var flux = tape.scatter_sum(tape.sub(out_i, out_j), g.edges.src, g.num_nodes());
  return tape.mean_square(tape.add(tape.sub(c1, c0), flux));
}

Var total_loss(Tape& tape, Var pred, Var div, Var mass, const LossWeights& weights) {
  Var total = pred;
  if (div.valid()) total = tape.add(total, tape.scale(div, weights.div));
  if (mass.valid()) total = tape.add(total, tape.scale(mass, weights.mass));
  return total;
}

}  // namespace pegnet
