#include "pegnet/nn.hpp"

#include "pegnet/errors.hpp"

#include <cmath>

namespace pegnet {

namespace {

Tensor xavier_uniform(int fan_in, int fan_out, std::mt19937_64& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Tensor w(fan_in, fan_out);
  for (Index r = 0; r < w.rows(); ++r) {
    for (Index c = 0; c < w.cols(); ++c) w(r, c) = dist(rng);
  }
  return w;
}

}  // namespace

Mlp::Mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, std::mt19937_64& rng) : spec_(spec) {
  if (spec.in_width < 1 || spec.hidden_width < 1 || spec.out_width < 1 || spec.hidden_layers < 0) {
    throw ConfigError("MLP " + prefix + ": widths must be >= 1");
  }
  int fan_in = spec.in_width;
  for (int l = 0; l <= spec.hidden_layers; ++l) {
    const int fan_out = l == spec.hidden_layers ? spec.out_width : spec.hidden_width;
    const std::string name = prefix + ".l" + std::to_string(l);
    weights_.push_back(store.add(name + ".w", xavier_uniform(fan_in, fan_out, rng)));
    biases_.push_back(store.add(name + ".b", Tensor::Zero(1, fan_out)));
    ids_.push_back(weights_.back());
    ids_.push_back(biases_.back());
    fan_in = fan_out;
  }
  if (spec.final_layer_norm) {
    ln_gamma_ = store.add(prefix + ".ln.g", Tensor::Ones(1, spec.out_width));
    ln_beta_ = store.add(prefix + ".ln.b", Tensor::Zero(1, spec.out_width));
    ids_.push_back(ln_gamma_);
    ids_.push_back(ln_beta_);
  }
}

Var Mlp::forward(Tape& tape, Var x) const {
  if (tape.cols(x) != spec_.in_width) {
    throw ShapeError("MLP input width " + std::to_string(tape.cols(x)) + " != expected " +
                     std::to_string(spec_.in_width));
  }
  Var h = x;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    h = tape.affine(h, tape.param(weights_[l]), tape.param(biases_[l]));
    if (l + 1 < weights_.size()) h = tape.relu(h);
  }
  if (spec_.final_layer_norm) h = tape.layer_norm(h, tape.param(ln_gamma_), tape.param(ln_beta_));
  return h;
}

std::vector<ParamStore::Id> Mlp::output_param_ids() const {
  std::vector<ParamStore::Id> out{weights_.back(), biases_.back()};
  if (spec_.final_layer_norm) {
    out.push_back(ln_gamma_);
    out.push_back(ln_beta_);
  }
  return out;
}

Var& LatentState::get(int k) {
  switch (k) {
    case 0: return vel;
    case 1: return pre;
    case 2: return sca;
    case 3: return u;
    case 4: return v;
    default: throw RangeError("latent group index out of range");
  }
}

const Var& LatentState::get(int k) const { return const_cast<LatentState*>(this)->get(k); }

int latent_group_of(std::string_view field) {
  if (field == "velocity") return 0;
  if (field == "pressure") return 1;
  if (field == "concentration") return 2;
  if (field == "u") return 3;
  if (field == "v") return 4;
  throw ConfigError("no latent group for field " + std::string(field));
}

GraphVars record_graph(Tape& tape, const MeshGraph& graph) {
  GraphVars g;
  g.graph = &graph;
  g.disp = tape.constant(graph.edges.disp);
  g.dist = tape.constant(graph.edges.dist);
  return g;
}

bool Encoder::takes_node_type(const TaskSpec& task, std::string_view field) {
  if (task.kind == TaskKind::kGrayScott) return true;
  return field == "velocity";
}

Encoder::Encoder(ParamStore& store, const TaskSpec& task, const BlockSizes& sizes, int num_node_types,
                 std::mt19937_64& rng)
    : task_(task) {
  for (const auto& f : task.fields) {
    MlpSpec spec;
    spec.in_width = f.width + (takes_node_type(task, f.name) ? num_node_types : 0);
    spec.hidden_width = sizes.mlp_hidden;
    spec.out_width = sizes.latent;
    spec.hidden_layers = sizes.hidden_layers;
    spec.final_layer_norm = true;
    mlps_.emplace_back(store, "enc." + f.name, spec, rng);
  }
}

LatentState Encoder::encode(Tape& tape, std::span<const Var> fields, Var node_one_hot) const {
  if (fields.size() != task_.fields.size()) {
    throw ConfigError("encoder expects " + std::to_string(task_.fields.size()) + " fields, got " +
                      std::to_string(fields.size()));
  }
  LatentState out;
  for (std::size_t k = 0; k < fields.size(); ++k) {
    const FieldSpec& f = task_.fields[k];
    if (!fields[k].valid()) throw ConfigError("missing required field " + f.name);
    Var x = fields[k];
    if (takes_node_type(task_, f.name)) x = tape.concat({x, node_one_hot});
    out.get(latent_group_of(f.name)) = mlps_[k].forward(tape, x);
  }
  return out;
}

Decoder::Decoder(ParamStore& store, const TaskSpec& task, const BlockSizes& sizes, std::mt19937_64& rng)
    : task_(task) {
  for (const auto& f : task.fields) {
    MlpSpec spec;
    spec.in_width = sizes.latent;
    spec.hidden_width = sizes.mlp_hidden;
    spec.out_width = f.width;
    spec.hidden_layers = sizes.hidden_layers;
    spec.final_layer_norm = false;
    mlps_.emplace_back(store, "dec." + f.name, spec, rng);
  }
}

std::vector<Var> Decoder::decode(Tape& tape, const LatentState& latent) const {
  std::vector<Var> out;
  for (std::size_t k = 0; k < task_.fields.size(); ++k) {
    const Var h = latent.get(latent_group_of(task_.fields[k].name));
    if (!h.valid()) throw ConfigError("latent group for " + task_.fields[k].name + " is missing");
    out.push_back(mlps_[k].forward(tape, h));
  }
  for (int g = 0; g < LatentState::kGroups; ++g) {
    if (!latent.get(g).valid()) continue;
    bool used = false;
    for (const auto& f : task_.fields) used = used || latent_group_of(f.name) == g;
    if (!used) throw ConfigError("latent state carries a group the task does not decode");
  }
  return out;
}

GenericMpBlock::GenericMpBlock(ParamStore& store, const std::string& prefix, const TaskSpec& task,
                               const BlockSizes& sizes, std::mt19937_64& rng)
    : groups_(static_cast<int>(task.fields.size())), latent_(sizes.latent) {
  const int width = groups_ * latent_;
  edge_ = Mlp(store, prefix + ".edge", {2 * width + sizes.dim + 1, sizes.mlp_hidden, width, sizes.hidden_layers, true},
              rng);
  node_ = Mlp(store, prefix + ".node", {2 * width, sizes.mlp_hidden, width, sizes.hidden_layers, true}, rng);
}

LatentState GenericMpBlock::forward(Tape& tape, const LatentState& latent, const GraphVars& graph) const {
  std::vector<Var> parts;
  std::vector<int> slots;
  for (int k = 0; k < LatentState::kGroups; ++k) {
    if (latent.get(k).valid()) {
      parts.push_back(latent.get(k));
      slots.push_back(k);
    }
  }
  if (static_cast<int>(parts.size()) != groups_) throw ShapeError("generic MP: latent group count mismatch");
  const Var h = tape.concat(parts);
  const Var hi = tape.gather(h, graph.src());
  const Var hj = tape.gather(h, graph.dst());
  const Var msg = edge_.forward(tape, tape.concat({hi, hj, graph.disp, graph.dist}));
  const Var agg = tape.scatter_sum(msg, graph.src(), graph.num_nodes());
  const Var updated = tape.add(h, node_.forward(tape, tape.concat({h, agg})));
  LatentState out;
  for (std::size_t s = 0; s < slots.size(); ++s) {
    out.get(slots[s]) = tape.slice(updated, static_cast<Index>(s) * latent_, latent_);
  }
  return out;
}

}  // namespace pegnet
