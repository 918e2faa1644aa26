#ifndef PEGNET_VERIFY_HPP_
#define PEGNET_VERIFY_HPP_

#include "pegnet/meshgraph.hpp"
#include "pegnet/model.hpp"
#include "pegnet/tape.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace pegnet {

// ---------------------------------------------------------------------------
// Random instances.

struct RandomMeshOptions {
  int min_side = 2;
  int max_side = 4;
  /// Grid jitter as a fraction of the spacing.
  double jitter = 0.2;
  bool random_types = true;
};

/// Jittered, triangulated nx x ny grid with nx, ny drawn from [min_side, max_side].
Mesh random_mesh(std::mt19937_64& rng, const RandomMeshOptions& options = {});
Tensor random_tensor(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0);
/// Per-field mean, std and rate scale drawn away from zero.
Normalizer random_normalizer(std::mt19937_64& rng, const TaskSpec& task);
/// Physical fields for the task on n nodes.
std::vector<Tensor> random_fields(std::mt19937_64& rng, const TaskSpec& task, Index n);

/// Relabels nodes so that old node i becomes perm[i].
Mesh permute_mesh(const Mesh& mesh, const std::vector<int>& perm);
Tensor permute_rows(const Tensor& x, const std::vector<int>& perm);
std::vector<int> random_permutation(std::mt19937_64& rng, int n);

// ---------------------------------------------------------------------------
// Finite differences.

/// Relative error |a - f| / max(|a|, |f|, floor).
inline constexpr double kGradFloor = 1e-2;

struct FdReport {
  double max_rel_error = 0.0;
  Index checked = 0;
};

using LossBuilder = std::function<Var(Tape&, std::span<const Var>)>;

/// Central differences with step h on every entry of `inputs` and of `params`
/// (when given), compared with one reverse pass of the same tape program.
FdReport finite_difference_check(const LossBuilder& loss, const std::vector<Tensor>& inputs, ParamStore* params,
                                 double h = 1e-6, double floor = kGradFloor);

// ---------------------------------------------------------------------------
// Property suites.

struct CheckResult {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct SuiteReport {
  std::string suite;
  std::vector<CheckResult> checks;

  bool passed() const;
  std::string text() const;
};

/// Analytic vs central-difference gradients of every block, the losses and
/// one full training step, `instances` random small cases each.
SuiteReport gradcheck_suite(int instances = 20, std::uint64_t seed = 1);
/// Solver oracles: Gray-Scott fixed point and mass balance, still-flow
/// transport conservation and maximum principle.
SuiteReport conservation_suite(std::uint64_t seed = 2);
/// Bi-stride golden cases, cover property and restrict/interpolate identity.
SuiteReport hierarchy_suite(int instances = 50, std::uint64_t seed = 3);
/// One-way coupling (scalar perturbations leave fluid outputs bit-identical)
/// and pressure non-integration at dt = 0.
SuiteReport coupling_suite(int coupling_trials = 100, int pressure_trials = 20, std::uint64_t seed = 4);
/// Permutation equivariance and translation invariance of every block.
SuiteReport equivariance_suite(int instances = 50, std::uint64_t seed = 5);

/// Names accepted by run_suite.
std::vector<std::string> suite_names();
/// Throws ConfigError for an unknown name.
SuiteReport run_suite(const std::string& name);

}  // namespace pegnet

#endif  // PEGNET_VERIFY_HPP_
