#ifndef PEGNET_PGMP_HPP_
#define PEGNET_PGMP_HPP_

#include "pegnet/multiscale.hpp"
#include "pegnet/nn.hpp"

#include <memory>
#include <optional>
#include <vector>

namespace pegnet {

/// Navier-Stokes block. Messages per edge (i receives from j):
///   pressure-gradient  phi_p([p_i - p_j, d_ij, |d_ij|])
///   viscous            phi_v([v_i - v_j, |d_ij|])
///   convective         phi_c([v_i, v_j, d_ij, |d_ij|])
/// summed into s_i. Velocity gets a residual rate update gamma_u([v_i, s_i]);
/// pressure is replaced outright by gamma_p([p_i, s_i]).
class NsBlock {
 public:
  struct Output {
    Var vel;
    Var pre;
  };

  NsBlock() = default;
  NsBlock(ParamStore& store, const std::string& prefix, const BlockSizes& sizes, std::mt19937_64& rng);

  Output forward(Tape& tape, Var vel, Var pre, const GraphVars& graph) const;

  const Mlp& phi_p() const { return phi_p_; }
  const Mlp& phi_v() const { return phi_v_; }
  const Mlp& phi_c() const { return phi_c_; }
  const Mlp& gamma_u() const { return gamma_u_; }
  const Mlp& gamma_p() const { return gamma_p_; }

 private:
  Mlp phi_p_, phi_v_, phi_c_, gamma_u_, gamma_p_;
};

/// Advection-diffusion block, fed the NS-updated velocity latent:
///   advection  phi_a([v'_i, c_j - c_i, d_ij])
///   diffusion  phi_d([c_j - c_i, |d_ij|])
///   c'_i = c_i + gamma_c([c_i, sum_j (m_a + m_d)])
class AdBlock {
 public:
  AdBlock() = default;
  AdBlock(ParamStore& store, const std::string& prefix, const BlockSizes& sizes, std::mt19937_64& rng);

  Var forward(Tape& tape, Var vel_updated, Var sca, const GraphVars& graph) const;

  const Mlp& phi_a() const { return phi_a_; }
  const Mlp& phi_d() const { return phi_d_; }
  const Mlp& gamma_c() const { return gamma_c_; }

 private:
  Mlp phi_a_, phi_d_, gamma_c_;
};

/// Gray-Scott block: one diffusion message per species,
///   phi_du([u_j - u_i, |d_ij|]), phi_dv([v_j - v_i, |d_ij|]),
/// and residual updates that see both species so the local reaction terms
/// are representable:
///   u' = u + gamma_u([u, v, sum m_du]),  v' = v + gamma_v([u, v, sum m_dv]).
class GsBlock {
 public:
  struct Output {
    Var u;
    Var v;
  };

  GsBlock() = default;
  GsBlock(ParamStore& store, const std::string& prefix, const BlockSizes& sizes, std::mt19937_64& rng);

  Output forward(Tape& tape, Var u, Var v, const GraphVars& graph) const;

  const Mlp& gamma_u() const { return gamma_u_; }
  const Mlp& gamma_v() const { return gamma_v_; }

 private:
  Mlp phi_du_, phi_dv_, gamma_u_, gamma_v_;
};

/// One processor stage at one resolution level. Dispatches on the task:
/// single-phase -> NS; advection-coupled -> NS then AD on the updated
/// velocity; gray-scott -> GS. With `generic` set, a GenericMpBlock replaces
/// the physics blocks.
class PgmpModule {
 public:
  PgmpModule() = default;
  PgmpModule(ParamStore& store, const std::string& prefix, const TaskSpec& task, const BlockSizes& sizes,
             bool generic, std::mt19937_64& rng);

  /// Throws ConfigError when the latent groups do not match the task.
  LatentState forward(Tape& tape, const LatentState& latent, const GraphVars& graph) const;

  bool generic() const { return generic_.has_value(); }
  const NsBlock* ns() const { return ns_ ? &*ns_ : nullptr; }
  const AdBlock* ad() const { return ad_ ? &*ad_ : nullptr; }
  const GsBlock* gs() const { return gs_ ? &*gs_ : nullptr; }
  const GenericMpBlock* generic_block() const { return generic_ ? &*generic_ : nullptr; }

  /// Parameter ids of every output path that feeds a latent update (gamma
  /// MLPs, or the generic node MLP).
  std::vector<ParamStore::Id> update_param_ids() const;

 private:
  TaskKind task_ = TaskKind::kSinglePhase;
  std::optional<NsBlock> ns_;
  std::optional<AdBlock> ad_;
  std::optional<GsBlock> gs_;
  std::optional<GenericMpBlock> generic_;
};

/// Checks that exactly the task's latent groups are present.
void require_task_groups(const LatentState& latent, TaskKind task);

/// U-shaped multilevel processor over a GraphHierarchy of fixed depth L:
/// PGMP at each level on the way down (storing a skip), PGMP at the bottom,
/// then on the way up the coarse-level change is interpolated, added to the
/// skip, and followed by another PGMP. 2L - 1 modules, no weight tying.
class Processor {
 public:
  Processor() = default;
  Processor(ParamStore& store, const TaskSpec& task, const BlockSizes& sizes, int depth, bool generic,
            std::mt19937_64& rng);

  /// `levels[d]` must be the recorded geometry of hierarchy.levels[d].
  LatentState forward(Tape& tape, const LatentState& latent, const GraphHierarchy& hierarchy,
                      std::span<const GraphVars> levels) const;

  int depth() const { return depth_; }
  const std::vector<PgmpModule>& down() const { return down_; }
  const PgmpModule& bottom() const { return bottom_; }
  const std::vector<PgmpModule>& up() const { return up_; }

 private:
  int depth_ = 1;
  std::vector<PgmpModule> down_;
  PgmpModule bottom_;
  std::vector<PgmpModule> up_;
};

}  // namespace pegnet

#endif  // PEGNET_PGMP_HPP_
