#ifndef PEGNET_NORMALIZER_HPP_
#define PEGNET_NORMALIZER_HPP_

#include "pegnet/task.hpp"
#include "pegnet/tensor.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace pegnet {

/// Per-channel statistics of one field.
struct FieldStats {
  std::string name;
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd std;
  /// RMS of the per-step rate (x_{t+1} - x_t) / dt; scales decoder outputs
  /// of integrated fields. Zero-mean so a zero decoder output means "no change".
  Eigen::RowVectorXd rate_scale;
};

inline constexpr double kStdFloor = 1e-8;

/// Field normalization shared by training and inference.
struct Normalizer {
  std::vector<FieldStats> fields;  // aligned with TaskSpec::fields

  const FieldStats& at(std::size_t k) const { return fields.at(k); }
  Tensor normalize(std::size_t k, const Tensor& x) const;
  Tensor denormalize(std::size_t k, const Tensor& x) const;

  /// Identity statistics (mean 0, std 1, rate scale 1).
  static Normalizer identity(const TaskSpec& task);
  /// Verifies names and widths against the task; throws ConfigError.
  void check(const TaskSpec& task) const;
};

nlohmann::json to_json(const Normalizer& n);
Normalizer normalizer_from_json(const nlohmann::json& j);

/// Streaming accumulator for mean/std and rate RMS over trajectories.
class NormalizerBuilder {
 public:
  explicit NormalizerBuilder(const TaskSpec& task);
  /// fields[k] is a [steps][N x width] series of task field k.
  void add_trajectory(const std::vector<std::vector<Tensor>>& fields, double dt);
  Normalizer finish() const;

 private:
  TaskSpec task_;
  std::vector<Eigen::RowVectorXd> sum_, sum_sq_, rate_sq_;
  std::vector<double> count_, rate_count_;
};

}  // namespace pegnet

#endif  // PEGNET_NORMALIZER_HPP_
