#ifndef PEGNET_MODEL_HPP_
#define PEGNET_MODEL_HPP_

#include "pegnet/meshgraph.hpp"
#include "pegnet/multiscale.hpp"
#include "pegnet/normalizer.hpp"
#include "pegnet/pgmp.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <vector>

namespace pegnet {

struct ModelConfig {
  TaskKind task = TaskKind::kSinglePhase;
  int dim = 2;
  int num_node_types = kNumNodeTypes;
  int latent = 64;
  int mlp_hidden = 64;
  int hidden_layers = 3;
  int depth = 5;
  /// Replace every PGMP module with generic message passing (ablation).
  bool generic_mp = false;
  std::uint64_t seed = 0;

  void validate() const;
  BlockSizes sizes() const { return {latent, mlp_hidden, hidden_layers, dim}; }
};

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

/// Encoder -> multilevel processor -> decoder. Parameters are registered in a
/// fixed order from a seeded generator, so equal configs give equal weights.
class Model {
 public:
  explicit Model(const ModelConfig& config);

  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return config_; }
  const TaskSpec& task() const { return task_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const Encoder& encoder() const { return encoder_; }
  const Processor& processor() const { return processor_; }
  const Decoder& decoder() const { return decoder_; }

  /// Normalized field inputs -> normalized outputs (rates for integrated
  /// fields, values for pressure), one Var per task field.
  std::vector<Var> forward(Tape& tape, const GraphHierarchy& hierarchy, std::span<const Var> fields,
                           Var node_one_hot) const;

 private:
  ModelConfig config_;
  TaskSpec task_;
  ParamStore params_;
  Encoder encoder_;
  Processor processor_;
  Decoder decoder_;
};

std::vector<GraphVars> record_levels(Tape& tape, const GraphHierarchy& hierarchy);

/// Per-mesh data a model needs at every step.
struct SimContext {
  GraphHierarchy hierarchy;
  Tensor node_one_hot;
  std::vector<std::uint8_t> node_types;

  static SimContext build(const Mesh& mesh, const ModelConfig& config);
};

/// Options of one physical time step.
struct StepOptions {
  double dt = 1.0;
  /// When set, nodes of type inlet take these field values after the step.
  const std::vector<Tensor>* prescribed_next = nullptr;
};

/// One autoregressive step in physical units: integrated fields advance as
/// x + dt * rate; pressure is the decoded value. Throws ConfigError if dt < 0.
std::vector<Tensor> step(const Model& model, const Normalizer& normalizer, const SimContext& context,
                         const std::vector<Tensor>& fields, const StepOptions& options);

/// Inlet overwrite: rows of nodes typed inlet are copied from `prescribed`.
void apply_inlet_values(std::vector<Tensor>& fields, const std::vector<Tensor>& prescribed,
                        const std::vector<std::uint8_t>& node_types);

}  // namespace pegnet

#endif  // PEGNET_MODEL_HPP_
