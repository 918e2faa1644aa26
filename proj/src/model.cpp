#include "pegnet/model.hpp"

#include "pegnet/errors.hpp"

#include <random>

namespace pegnet {

void ModelConfig::validate() const {
  if (dim != 2 && dim != 3) throw ConfigError("model dim must be 2 or 3");
  if (num_node_types < 1) throw ConfigError("num_node_types must be >= 1");
  if (latent < 1 || mlp_hidden < 1) throw ConfigError("latent and hidden widths must be >= 1");
  if (hidden_layers < 0) throw ConfigError("hidden_layers must be >= 0");
  if (depth < 1) throw ConfigError("hierarchy depth must be >= 1");
}

nlohmann::json to_json(const ModelConfig& c) {
  return {{"task", to_string(c.task)},         {"dim", c.dim},
          {"num_node_types", c.num_node_types}, {"latent", c.latent},
          {"mlp_hidden", c.mlp_hidden},         {"hidden_layers", c.hidden_layers},
          {"depth", c.depth},                   {"generic_mp", c.generic_mp},
          {"seed", c.seed}};
}

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.task = task_from_string(j.at("task").get<std::string>());
  c.dim = j.at("dim").get<int>();
  c.num_node_types = j.at("num_node_types").get<int>();
  c.latent = j.at("latent").get<int>();
  c.mlp_hidden = j.at("mlp_hidden").get<int>();
  c.hidden_layers = j.at("hidden_layers").get<int>();
  c.depth = j.at("depth").get<int>();
  c.generic_mp = j.at("generic_mp").get<bool>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

Model::Model(const ModelConfig& config)
    : config_((config.validate(), config)), task_(TaskSpec::make(config.task, config.dim)) {
  // Registration order (encoder, processor, decoder) fixes the flat layout.
  std::mt19937_64 rng(config_.seed);
  const BlockSizes sizes = config_.sizes();
  encoder_ = Encoder(params_, task_, sizes, config_.num_node_types, rng);
  processor_ = Processor(params_, task_, sizes, config_.depth, config_.generic_mp, rng);
  decoder_ = Decoder(params_, task_, sizes, rng);
}

std::vector<GraphVars> record_levels(Tape& tape, const GraphHierarchy& hierarchy) {
  std::vector<GraphVars> out;
  for (const auto& level : hierarchy.levels) out.push_back(record_graph(tape, level));
  return out;
}

std::vector<Var> Model::forward(Tape& tape, const GraphHierarchy& hierarchy, std::span<const Var> fields,
                                Var node_one_hot) const {
  const std::vector<GraphVars> levels = record_levels(tape, hierarchy);
  const LatentState encoded = encoder_.encode(tape, fields, node_one_hot);
  const LatentState processed = processor_.forward(tape, encoded, hierarchy, levels);
  return decoder_.decode(tape, processed);
}

SimContext SimContext::build(const Mesh& mesh, const ModelConfig& config) {
  if (mesh.dim() != config.dim) throw ConfigError("mesh dimension does not match model");
  SimContext ctx;
  ctx.hierarchy = bistride_coarsen(make_graph(mesh), config.depth);
  ctx.node_one_hot = one_hot(mesh.node_types, config.num_node_types);
  ctx.node_types = mesh.node_types;
  return ctx;
}

void apply_inlet_values(std::vector<Tensor>& fields, const std::vector<Tensor>& prescribed,
                        const std::vector<std::uint8_t>& node_types) {
  if (prescribed.size() != fields.size()) throw ShapeError("prescribed field count mismatch");
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (prescribed[k].rows() != fields[k].rows() || prescribed[k].cols() != fields[k].cols()) {
      throw ShapeError("prescribed field shape mismatch");
    }
    for (std::size_t i = 0; i < node_types.size(); ++i) {
      if (node_types[i] == static_cast<std::uint8_t>(NodeType::kInlet)) {
        fields[k].row(static_cast<Index>(i)) = prescribed[k].row(static_cast<Index>(i));
      }
    }
  }
}

std::vector<Tensor> step(const Model& model, const Normalizer& normalizer, const SimContext& context,
                         const std::vector<Tensor>& fields, const StepOptions& options) {
  if (!(options.dt >= 0.0)) throw ConfigError("time step must be >= 0");
  const TaskSpec& task = model.task();
  if (fields.size() != task.fields.size()) throw ConfigError("field count does not match task");
  normalizer.check(task);

  Tape tape(&model.params());
  std::vector<Var> inputs;
  for (std::size_t k = 0; k < fields.size(); ++k) inputs.push_back(tape.constant(normalizer.normalize(k, fields[k])));
  const Var one_hot_var = tape.constant(context.node_one_hot);
  const std::vector<Var> out = model.forward(tape, context.hierarchy, inputs, one_hot_var);

  std::vector<Tensor> next;
  next.reserve(fields.size());
  for (std::size_t k = 0; k < fields.size(); ++k) {
    const Tensor& y = tape.value(out[k]);
    if (task.fields[k].integrated) {
      const Tensor rate = y.array().rowwise() * normalizer.at(k).rate_scale.array();
      next.push_back(fields[k] + options.dt * rate);
    } else {
      next.push_back(normalizer.denormalize(k, y));
    }
  }
  if (options.prescribed_next != nullptr) apply_inlet_values(next, *options.prescribed_next, context.node_types);
  return next;
}

}  // namespace pegnet
