#ifndef PEGNET_METRICS_HPP_
#define PEGNET_METRICS_HPP_

#include "pegnet/dataset.hpp"
#include "pegnet/meshgraph.hpp"
#include "pegnet/task.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pegnet {

/// sqrt((1/N) sum_i |pred_i - truth_i|^2), the norm taken over every channel
/// of every field in the state.
double state_rmse(const std::vector<Tensor>& pred, const std::vector<Tensor>& truth);
/// Same, restricted to one field.
double field_rmse(const Tensor& pred, const Tensor& truth);

/// Metrics of one trajectory at one frame. DVE is NaN without a velocity
/// field; MCE is NaN without a concentration field or at frame 0.
struct StepMetrics {
  int traj = -1;  // -1 marks an average over trajectories
  int step = 0;
  double rmse = 0.0;
  double dve = 0.0;
  double mce = 0.0;
  std::vector<double> field_rmse;  // per task field
};

StepMetrics step_metrics(const Trajectory& pred, const Trajectory& truth, const MeshGraph& graph,
                         const TaskSpec& task, int step);

struct MetricsReport {
  std::vector<std::string> field_names;
  std::vector<StepMetrics> per_trajectory;  // trajectory-major, then requested step order
  std::vector<StepMetrics> averaged;        // one per requested step
  /// Per-field RMSE averaged over frames 1..T-1 and trajectories.
  std::vector<double> field_rmse_all_steps;
};

/// Resolves "1,50,last" against a trajectory of `frames` frames; throws
/// RangeError for an index outside [0, frames) and ConfigError on bad syntax.
std::vector<int> parse_step_list(std::string_view spec, int frames);

/// Compares aligned trajectory lists (same meshes, fields and lengths).
MetricsReport evaluate(const std::vector<Trajectory>& pred, const std::vector<Trajectory>& truth,
                       const TaskSpec& task, const std::vector<int>& steps);

/// Columns: traj_id,step,rmse,dve,mce,rmse_<field>... (averaged rows use traj_id "mean").
void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& report);
/// Columns: field,rmse_all_steps.
void write_channel_csv(const std::filesystem::path& path, const MetricsReport& report);

}  // namespace pegnet

#endif  // PEGNET_METRICS_HPP_
