#include "pegnet/pgmp.hpp"

#include "pegnet/errors.hpp"

namespace pegnet {

namespace {

MlpSpec spec_for(const BlockSizes& s, int in_width) {
  return {in_width, s.mlp_hidden, s.latent, s.hidden_layers, true};
}

}  // namespace

NsBlock::NsBlock(ParamStore& store, const std::string& prefix, const BlockSizes& s, std::mt19937_64& rng) {
  const int h = s.latent;
  phi_p_ = Mlp(store, prefix + ".phi_p", spec_for(s, h + s.dim + 1), rng);
  phi_v_ = Mlp(store, prefix + ".phi_v", spec_for(s, h + 1), rng);
  phi_c_ = Mlp(store, prefix + ".phi_c", spec_for(s, 2 * h + s.dim + 1), rng);
  gamma_u_ = Mlp(store, prefix + ".gamma_u", spec_for(s, 2 * h), rng);
  gamma_p_ = Mlp(store, prefix + ".gamma_p", spec_for(s, 2 * h), rng);
}

NsBlock::Output NsBlock::forward(Tape& tape, Var vel, Var pre, const GraphVars& g) const {
  if (!vel.valid() || !pre.valid()) throw ConfigError("NS block needs velocity and pressure latents");
  const Var vi = tape.gather(vel, g.src());
  const Var vj = tape.gather(vel, g.dst());
  const Var pi = tape.gather(pre, g.src());
  const Var pj = tape.gather(pre, g.dst());

  const Var m_p = phi_p_.forward(tape, tape.concat({tape.sub(pi, pj), g.disp, g.dist}));
  const Var m_v = phi_v_.forward(tape, tape.concat({tape.sub(vi, vj), g.dist}));
  const Var m_c = phi_c_.forward(tape, tape.concat({vi, vj, g.disp, g.dist}));
  const Var s = tape.scatter_sum(tape.add(tape.add(m_p, m_v), m_c), g.src(), g.num_nodes());

  Output out;
  out.vel = tape.add(vel, gamma_u_.forward(tape, tape.concat({vel, s})));
  out.pre = gamma_p_.forward(tape, tape.concat({pre, s}));
  return out;
}

AdBlock::AdBlock(ParamStore& store, const std::string& prefix, const BlockSizes& s, std::mt19937_64& rng) {
  const int h = s.latent;
  phi_a_ = Mlp(store, prefix + ".phi_a", spec_for(s, 2 * h + s.dim), rng);
  phi_d_ = Mlp(store, prefix + ".phi_d", spec_for(s, h + 1), rng);
  gamma_c_ = Mlp(store, prefix + ".gamma_c", spec_for(s, 2 * h), rng);
}

Var AdBlock::forward(Tape& tape, Var vel_updated, Var sca, const GraphVars& g) const {
  if (!vel_updated.valid() || !sca.valid()) throw ConfigError("AD block needs velocity and scalar latents");
  const Var vi = tape.gather(vel_updated, g.src());
  const Var dc = tape.sub(tape.gather(sca, g.dst()), tape.gather(sca, g.src()));
  const Var m_a = phi_a_.forward(tape, tape.concat({vi, dc, g.disp}));
  const Var m_d = phi_d_.forward(tape, tape.concat({dc, g.dist}));
  const Var s = tape.scatter_sum(tape.add(m_a, m_d), g.src(), g.num_nodes());
  return tape.add(sca, gamma_c_.forward(tape, tape.concat({sca, s})));
}

GsBlock::GsBlock(ParamStore& store, const std::string& prefix, const BlockSizes& s, std::mt19937_64& rng) {
  const int h = s.latent;
  phi_du_ = Mlp(store, prefix + ".phi_du", spec_for(s, h + 1), rng);
  phi_dv_ = Mlp(store, prefix + ".phi_dv", spec_for(s, h + 1), rng);
  gamma_u_ = Mlp(store, prefix + ".gamma_u", spec_for(s, 3 * h), rng);
  gamma_v_ = Mlp(store, prefix + ".gamma_v", spec_for(s, 3 * h), rng);
}

GsBlock::Output GsBlock::forward(Tape& tape, Var u, Var v, const GraphVars& g) const {
  if (!u.valid() || !v.valid()) throw ConfigError("GS block needs both species latents");
  const Var du = tape.sub(tape.gather(u, g.dst()), tape.gather(u, g.src()));
  const Var dv = tape.sub(tape.gather(v, g.dst()), tape.gather(v, g.src()));
  const Var su = tape.scatter_sum(phi_du_.forward(tape, tape.concat({du, g.dist})), g.src(), g.num_nodes());
  const Var sv = tape.scatter_sum(phi_dv_.forward(tape, tape.concat({dv, g.dist})), g.src(), g.num_nodes());
  Output out;
  out.u = tape.add(u, gamma_u_.forward(tape, tape.concat({u, v, su})));
  out.v = tape.add(v, gamma_v_.forward(tape, tape.concat({u, v, sv})));
  return out;
}

void require_task_groups(const LatentState& latent, TaskKind task) {
  bool want[LatentState::kGroups] = {false, false, false, false, false};
  switch (task) {
    case TaskKind::kSinglePhase: want[0] = want[1] = true; break;
    case TaskKind::kAdvectionCoupled: want[0] = want[1] = want[2] = true; break;
    case TaskKind::kGrayScott: want[3] = want[4] = true; break;
  }
  for (int k = 0; k < LatentState::kGroups; ++k) {
    if (latent.get(k).valid() != want[k]) {
      throw ConfigError("latent groups do not match task " + to_string(task));
    }
  }
}

PgmpModule::PgmpModule(ParamStore& store, const std::string& prefix, const TaskSpec& task, const BlockSizes& sizes,
                       bool generic, std::mt19937_64& rng)
    : task_(task.kind) {
  if (generic) {
    generic_.emplace(store, prefix + ".mp", task, sizes, rng);
    return;
  }
  switch (task.kind) {
    case TaskKind::kSinglePhase:
      ns_.emplace(store, prefix + ".ns", sizes, rng);
      break;
    case TaskKind::kAdvectionCoupled:
      ns_.emplace(store, prefix + ".ns", sizes, rng);
      ad_.emplace(store, prefix + ".ad", sizes, rng);
      break;
    case TaskKind::kGrayScott:
      gs_.emplace(store, prefix + ".gs", sizes, rng);
      break;
  }
}

LatentState PgmpModule::forward(Tape& tape, const LatentState& latent, const GraphVars& graph) const {
  require_task_groups(latent, task_);
  if (generic_) return generic_->forward(tape, latent, graph);
  LatentState out;
  switch (task_) {
    case TaskKind::kSinglePhase: {
      const auto ns = ns_->forward(tape, latent.vel, latent.pre, graph);
      out.vel = ns.vel;
      out.pre = ns.pre;
      break;
    }
    case TaskKind::kAdvectionCoupled: {
      // One-way coupling: the fluid update never reads the scalar latent.
      const auto ns = ns_->forward(tape, latent.vel, latent.pre, graph);
      out.vel = ns.vel;
      out.pre = ns.pre;
      out.sca = ad_->forward(tape, ns.vel, latent.sca, graph);
      break;
    }
    case TaskKind::kGrayScott: {
      const auto gs = gs_->forward(tape, latent.u, latent.v, graph);
      out.u = gs.u;
      out.v = gs.v;
      break;
    }
  }
  return out;
}

std::vector<ParamStore::Id> PgmpModule::update_param_ids() const {
  std::vector<ParamStore::Id> ids;
  auto add = [&ids](const Mlp& m) {
    for (auto id : m.output_param_ids()) ids.push_back(id);
  };
  if (generic_) add(generic_->node_mlp());
  if (ns_) {
    add(ns_->gamma_u());
    add(ns_->gamma_p());
  }
  if (ad_) add(ad_->gamma_c());
  if (gs_) {
    add(gs_->gamma_u());
    add(gs_->gamma_v());
  }
  return ids;
}

Processor::Processor(ParamStore& store, const TaskSpec& task, const BlockSizes& sizes, int depth, bool generic,
                     std::mt19937_64& rng)
    : depth_(depth) {
  if (depth < 1) throw ConfigError("processor depth must be >= 1");
  for (int d = 0; d + 1 < depth; ++d) {
    down_.emplace_back(store, "proc.down" + std::to_string(d), task, sizes, generic, rng);
  }
  bottom_ = PgmpModule(store, "proc.bottom", task, sizes, generic, rng);
  for (int d = 0; d + 1 < depth; ++d) {
    up_.emplace_back(store, "proc.up" + std::to_string(d), task, sizes, generic, rng);
  }
}

LatentState Processor::forward(Tape& tape, const LatentState& latent, const GraphHierarchy& hierarchy,
                               std::span<const GraphVars> levels) const {
  if (hierarchy.depth() != depth_ || static_cast<int>(levels.size()) != depth_) {
    throw ShapeError("processor depth " + std::to_string(depth_) + " does not match hierarchy depth " +
                     std::to_string(hierarchy.depth()));
  }
  std::vector<LatentState> skips;
  std::vector<LatentState> sent_down;
  LatentState x = latent;
  for (int d = 0; d + 1 < depth_; ++d) {
    x = down_[d].forward(tape, x, levels[d]);
    skips.push_back(x);
    const RowMix& r = hierarchy.transitions[d].restrict_op;
    x = x.map([&](Var h, int) { return tape.row_mix(h, r); });
    sent_down.push_back(x);
  }
  x = bottom_.forward(tape, x, levels[depth_ - 1]);
  for (int d = depth_ - 2; d >= 0; --d) {
    const RowMix& p = hierarchy.transitions[d].interpolate_op;
    const LatentState& before = sent_down[d];
    const LatentState& skip = skips[d];
    x = x.map([&](Var h, int k) {
      const Var change = tape.row_mix(tape.sub(h, before.get(k)), p);
      return tape.add(skip.get(k), change);
    });
    x = up_[d].forward(tape, x, levels[d]);
  }
  return x;
}

}  // namespace pegnet
