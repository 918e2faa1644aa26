#ifndef PEGNET_ROLLOUT_HPP_
#define PEGNET_ROLLOUT_HPP_

#include "pegnet/dataset.hpp"
#include "pegnet/model.hpp"

namespace pegnet {

/// Autoregressive rollout from frame 0 of `truth` for `frames` frames
/// (truth.steps() when <= 0). Frame 0 is copied from the ground truth; inlet
/// nodes take ground-truth values after every step.
Trajectory rollout(const Model& model, const Normalizer& normalizer, const Trajectory& truth, double dt,
                   int frames = 0);

}  // namespace pegnet

#endif  // PEGNET_ROLLOUT_HPP_
