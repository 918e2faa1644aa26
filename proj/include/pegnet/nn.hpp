#ifndef PEGNET_NN_HPP_
#define PEGNET_NN_HPP_

#include "pegnet/meshgraph.hpp"
#include "pegnet/param_store.hpp"
#include "pegnet/tape.hpp"
#include "pegnet/task.hpp"

#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace pegnet {

struct MlpSpec {
  int in_width = 1;
  int hidden_width = 64;
  int out_width = 64;
  int hidden_layers = 3;
  bool final_layer_norm = true;
};

/// (Linear -> ReLU) x hidden_layers -> Linear [-> LayerNorm].
class Mlp {
 public:
  Mlp() = default;
  /// Registers "<prefix>.l<k>.w", "<prefix>.l<k>.b" (and "<prefix>.ln.g/.b").
  /// Weights are Xavier-uniform from rng, biases zero, LayerNorm affine (1, 0).
  Mlp(ParamStore& store, const std::string& prefix, const MlpSpec& spec, std::mt19937_64& rng);

  Var forward(Tape& tape, Var x) const;
  const MlpSpec& spec() const { return spec_; }
  /// Ids of every parameter of this MLP, in registration order.
  const std::vector<ParamStore::Id>& param_ids() const { return ids_; }
  /// Ids of the final linear layer and the LayerNorm (the "update" output path).
  std::vector<ParamStore::Id> output_param_ids() const;

 private:
  MlpSpec spec_;
  std::vector<ParamStore::Id> weights_;
  std::vector<ParamStore::Id> biases_;
  ParamStore::Id ln_gamma_ = 0;
  ParamStore::Id ln_beta_ = 0;
  std::vector<ParamStore::Id> ids_;
};

/// Per-node latent channel groups. Invalid Vars mark absent groups.
struct LatentState {
  Var vel;  // velocity
  Var pre;  // pressure
  Var sca;  // transported scalar
  Var u;    // Gray-Scott species u
  Var v;    // Gray-Scott species v

  /// Applies fn to every present group, returning a state with the same layout.
  template <typename Fn>
  LatentState map(Fn&& fn) const {
    LatentState out;
    for (int k = 0; k < kGroups; ++k) {
      if (get(k).valid()) out.get(k) = fn(get(k), k);
    }
    return out;
  }
  static constexpr int kGroups = 5;
  Var& get(int k);
  const Var& get(int k) const;
};

/// Latent group slot of a physical field ("velocity" -> vel, ...).
int latent_group_of(std::string_view field);

/// Edge geometry of one graph level, recorded as tape constants.
struct GraphVars {
  const MeshGraph* graph = nullptr;
  Var disp;  // E x dim, pos_j - pos_i
  Var dist;  // E x 1
  Index num_nodes() const { return graph->num_nodes(); }
  std::span<const std::int32_t> src() const { return graph->edges.src; }
  std::span<const std::int32_t> dst() const { return graph->edges.dst; }
};
GraphVars record_graph(Tape& tape, const MeshGraph& graph);

/// Sizes shared by every block of one model.
struct BlockSizes {
  int latent = 64;
  int mlp_hidden = 64;
  int hidden_layers = 3;
  int dim = 2;
};

/// One encoder MLP per task field. The one-hot node type joins the velocity
/// group (fluid tasks) or each species group (Gray-Scott).
class Encoder {
 public:
  Encoder() = default;
  Encoder(ParamStore& store, const TaskSpec& task, const BlockSizes& sizes, int num_node_types,
          std::mt19937_64& rng);

  /// fields[k] is the normalized N x width input of task field k.
  LatentState encode(Tape& tape, std::span<const Var> fields, Var node_one_hot) const;

  static bool takes_node_type(const TaskSpec& task, std::string_view field);

 private:
  TaskSpec task_;
  std::vector<Mlp> mlps_;
};

/// One decoder MLP per task field, no output LayerNorm.
class Decoder {
 public:
  Decoder() = default;
  Decoder(ParamStore& store, const TaskSpec& task, const BlockSizes& sizes, std::mt19937_64& rng);

  /// Returns one N x width output per task field (normalized rate or value).
  std::vector<Var> decode(Tape& tape, const LatentState& latent) const;
  const std::vector<Mlp>& mlps() const { return mlps_; }

 private:
  TaskSpec task_;
  std::vector<Mlp> mlps_;
};

/// MGN-style message passing over the concatenation of all latent groups:
/// edge MLP on [h_i, h_j, d_ij, |d_ij|], sum over neighbors, residual node MLP.
/// Used for the ablation models that drop the physics-guided blocks.
class GenericMpBlock {
 public:
  GenericMpBlock() = default;
  GenericMpBlock(ParamStore& store, const std::string& prefix, const TaskSpec& task, const BlockSizes& sizes,
                 std::mt19937_64& rng);

  LatentState forward(Tape& tape, const LatentState& latent, const GraphVars& graph) const;
  const Mlp& node_mlp() const { return node_; }

 private:
  int groups_ = 0;
  int latent_ = 0;
  Mlp edge_;
  Mlp node_;
};

}  // namespace pegnet

#endif  // PEGNET_NN_HPP_
