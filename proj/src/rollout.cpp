#include "pegnet/rollout.hpp"

#include "pegnet/errors.hpp"

#include <algorithm>

namespace pegnet {

Trajectory rollout(const Model& model, const Normalizer& normalizer, const Trajectory& truth, double dt, int frames) {
  if (frames <= 0) frames = truth.steps();
  if (truth.steps() < 1) throw DataError("rollout needs a ground-truth initial state");
  if (frames > truth.steps()) throw RangeError("rollout longer than the ground truth");
  if (truth.fields.size() != model.task().fields.size()) throw ConfigError("trajectory fields do not match model task");

  const SimContext ctx = SimContext::build(truth.mesh, model.config());
  const bool has_inlet = std::any_of(truth.mesh.node_types.begin(), truth.mesh.node_types.end(), [](std::uint8_t t) {
    return t == static_cast<std::uint8_t>(NodeType::kInlet);
  });

  Trajectory out;
  out.mesh = truth.mesh;
  out.fields.resize(truth.fields.size());
  std::vector<Tensor> state = truth.state(0);
  for (int t = 0; t < frames; ++t) {
    if (t > 0) {
      const std::vector<Tensor> prescribed = has_inlet ? truth.state(t) : std::vector<Tensor>{};
      state = step(model, normalizer, ctx, state, {dt, has_inlet ? &prescribed : nullptr});
    }
    for (std::size_t k = 0; k < state.size(); ++k) out.fields[k].push_back(state[k]);
  }
  return out;
}

}  // namespace pegnet
