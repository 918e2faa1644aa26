// pegnet: data generation, training, rollout, evaluation and verification.

#include "pegnet/datagen.hpp"
#include "pegnet/dataset.hpp"
#include "pegnet/errors.hpp"
#include "pegnet/manifest.hpp"
#include "pegnet/metrics.hpp"
#include "pegnet/multiscale.hpp"
#include "pegnet/rollout.hpp"
#include "pegnet/trainer.hpp"
#include "pegnet/verify.hpp"
#include "pegnet/vtk.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

namespace fs = std::filesystem;
using namespace pegnet;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kVerify = 3 };

std::vector<std::string> g_args;

RunManifest start_manifest(const std::string& command) {
  RunManifest m;
  m.command = command;
  m.args = g_args;
  m.started = utc_now();
  return m;
}

void finish_manifest(const fs::path& dir, RunManifest m) {
  m.finished = utc_now();
  write_manifest(dir, std::move(m));
}

// Artifact directories produced by this tool carry a manifest; check it
// whenever one is present.
void check_manifest_if_present(const fs::path& dir) {
  if (fs::exists(dir / kManifestName)) verify_manifest(dir);
}

void require_empty_or_new(const fs::path& dir) {
  if (fs::exists(dir) && !fs::is_directory(dir)) throw ConfigError(dir.string() + " exists and is not a directory");
  fs::create_directories(dir);
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

// --- gen-data -------------------------------------------------------------------

struct GenArgs {
  GenOptions opt;
  std::string out;
  bool full = false;
  bool steps_given = false;
  std::vector<int> grid;
};

int cmd_gen(const GenArgs& a) {
  GenOptions opt = a.opt;
  if (a.full && !a.steps_given) opt.steps = opt.case_name == "gray-scott" ? 2000 : opt.steps;
  if (!a.grid.empty()) {
    opt.nx = a.grid[0];
    opt.ny = a.grid[1];
  }
  RunManifest m = start_manifest("gen-data");
  const Dataset ds = generate_dataset(opt);
  require_empty_or_new(a.out);
  write_dataset(a.out, ds);
  m.seed = opt.seed;
  m.config = {{"case", opt.case_name}, {"trajectories", opt.trajectories}, {"steps", opt.steps},
              {"seed", opt.seed},      {"grid", {opt.nx, opt.ny}}};
  m.dataset_hash = tree_hash(a.out);
  finish_manifest(a.out, m);
  std::cout << "wrote " << opt.trajectories << " " << opt.case_name << " trajectories (" << opt.steps
            << " frames, dt " << ds.meta.dt << ") to " << a.out << '\n';
  return kOk;
}

// --- train ----------------------------------------------------------------------

struct TrainArgs {
  std::string config, data, out;
  bool no_physics = false, generic = false;
};

int cmd_train(const TrainArgs& a) {
  TrainConfig cfg = load_train_config(a.config);
  cfg.no_physics_loss = cfg.no_physics_loss || a.no_physics;
  cfg.generic_mp = cfg.generic_mp || a.generic;
  cfg.validate();
  check_manifest_if_present(a.data);
  const Dataset data = read_dataset(a.data);
  RunManifest m = start_manifest("train");
  require_empty_or_new(a.out);
  TrainIo io;
  io.out_dir = fs::path(a.out);
  io.on_log = [](const LogRow& r) {
    std::cout << "step " << r.step << " lr " << r.lr << " loss " << r.loss << " pred " << r.pred;
    if (!std::isnan(r.val_mse)) std::cout << " val_mse " << r.val_mse;
    std::cout << '\n';
  };
  const TrainResult result = train(cfg, data, io);
  m.seed = cfg.seed;
  m.config = to_json(cfg);
  m.config["variant"] = cfg.variant();
  m.config["steps_done"] = result.steps_done;
  m.config["converged"] = result.converged;
  m.dataset_hash = tree_hash(a.data);
  m.checkpoint_hash = sha256_file(fs::path(a.out) / "model.ckpt");
  finish_manifest(a.out, m);
  std::cout << "variant " << cfg.variant() << ", " << result.steps_done << " steps, checkpoint "
            << (fs::path(a.out) / "model.ckpt").string() << '\n';
  return kOk;
}

// --- rollout --------------------------------------------------------------------

struct RolloutArgs {
  std::string checkpoint, data, traj = "all", out;
};

int cmd_rollout(const RolloutArgs& a) {
  check_manifest_if_present(fs::path(a.checkpoint).parent_path());
  check_manifest_if_present(a.data);
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const std::unique_ptr<Model> model = restore_model(ck);
  const DatasetMeta meta = read_meta(a.data);
  if (task_from_string(meta.case_name) != model->config().task) {
    throw ConfigError("checkpoint task " + to_string(model->config().task) + " does not match dataset " +
                      meta.case_name);
  }
  std::vector<int> ids;
  if (a.traj == "all") {
    for (int i = 0; i < meta.num_trajectories; ++i) ids.push_back(i);
  } else {
    std::size_t used = 0;
    int i = -1;
    try {
      i = std::stoi(a.traj, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != a.traj.size()) throw ConfigError("--traj expects an index or 'all'");
    if (i < 0 || i >= meta.num_trajectories) throw RangeError("trajectory " + a.traj + " out of range");
    ids.push_back(i);
  }

  RunManifest m = start_manifest("rollout");
  Dataset pred;
  pred.meta = meta;
  pred.meta.num_trajectories = static_cast<int>(ids.size());
  pred.meta.extra = {{"source_trajectories", ids}, {"source_case", meta.case_name}};
  std::vector<Trajectory> truths;
  for (const int i : ids) {
    truths.push_back(read_trajectory(a.data, meta, i));
    pred.trajectories.push_back(rollout(*model, ck.normalizer, truths.back(), meta.dt));
  }
  require_empty_or_new(a.out);
  write_dataset(a.out, pred);

  std::ofstream csv(fs::path(a.out) / "rollout_metrics.csv", std::ios::trunc);
  const TaskSpec task = meta.task();
  csv << "traj_id,step,rmse,dve,mce\n";
  for (std::size_t k = 0; k < ids.size(); ++k) {
    const MeshGraph graph = make_graph(truths[k].mesh);
    for (int s = 0; s < truths[k].steps(); ++s) {
      const StepMetrics sm = step_metrics(pred.trajectories[k], truths[k], graph, task, s);
      csv << ids[k] << ',' << s << ',' << fmt(sm.rmse) << ',' << fmt(sm.dve) << ',' << fmt(sm.mce) << '\n';
    }
  }
  csv.close();
  m.seed = ck.model.seed;
  m.config = {{"model", to_json(ck.model)}, {"checkpoint_step", ck.step}, {"trajectories", ids}};
  m.dataset_hash = tree_hash(a.data);
  m.checkpoint_hash = sha256_file(a.checkpoint);
  finish_manifest(a.out, m);
  std::cout << "rolled out " << ids.size() << " trajectories of " << meta.steps << " frames to " << a.out << '\n';
  return kOk;
}

// --- eval -----------------------------------------------------------------------

struct EvalArgs {
  std::string pred, truth, steps = "1,50,last", out;
};

int cmd_eval(const EvalArgs& a) {
  check_manifest_if_present(a.pred);
  check_manifest_if_present(a.truth);
  const Dataset pred = read_dataset(a.pred);
  const DatasetMeta truth_meta = read_meta(a.truth);
  std::vector<int> sources;
  if (pred.meta.extra.contains("source_trajectories")) {
    sources = pred.meta.extra.at("source_trajectories").get<std::vector<int>>();
  } else {
    for (int i = 0; i < pred.meta.num_trajectories; ++i) sources.push_back(i);
  }
  if (static_cast<int>(sources.size()) != pred.meta.num_trajectories) throw DataError("source_trajectories size mismatch");
  std::vector<Trajectory> truth;
  for (const int i : sources) {
    if (i < 0 || i >= truth_meta.num_trajectories) throw DataError("prediction refers to missing trajectory " + std::to_string(i));
    truth.push_back(read_trajectory(a.truth, truth_meta, i));
  }
  if (pred.meta.steps != truth_meta.steps) throw DataError("prediction and truth lengths differ");
  const std::vector<int> steps = parse_step_list(a.steps, truth_meta.steps);
  const MetricsReport r = evaluate(pred.trajectories, truth, truth_meta.task(), steps);

  std::cout << "step,rmse,dve,mce";
  for (const auto& f : r.field_names) std::cout << ",rmse_" << f;
  std::cout << '\n';
  for (const auto& s : r.averaged) {
    std::cout << s.step << ',' << fmt(s.rmse) << ',' << fmt(s.dve) << ',' << fmt(s.mce);
    for (const double f : s.field_rmse) std::cout << ',' << fmt(f);
    std::cout << '\n';
  }
  std::cout << "field,rmse_all_steps\n";
  for (std::size_t k = 0; k < r.field_names.size(); ++k) std::cout << r.field_names[k] << ',' << fmt(r.field_rmse_all_steps[k]) << '\n';

  if (!a.out.empty()) {
    RunManifest m = start_manifest("eval");
    require_empty_or_new(a.out);
    write_metrics_csv(fs::path(a.out) / "metrics.csv", r);
    write_channel_csv(fs::path(a.out) / "channels.csv", r);
    m.config = {{"steps", steps}, {"pred", a.pred}, {"truth", a.truth}};
    m.dataset_hash = tree_hash(a.truth);
    finish_manifest(a.out, m);
  }
  return kOk;
}

// --- verify, export-vtk, hierarchy-stats ---------------------------------------

int cmd_verify(const std::string& suite) {
  const SuiteReport r = run_suite(suite);
  std::cout << r.text();
  return r.passed() ? kOk : kVerify;
}

int cmd_export(const std::string& traj_dir, const std::string& out) {
  const fs::path dir = fs::weakly_canonical(traj_dir);
  const std::string name = dir.filename().string();
  if (name.rfind("traj_", 0) != 0) throw ConfigError("--traj must name a traj_<i> directory of a dataset");
  int index = -1;
  try {
    index = std::stoi(name.substr(5));
  } catch (const std::exception&) {
    throw ConfigError("bad trajectory directory name " + name);
  }
  const fs::path root = dir.parent_path();
  const DatasetMeta meta = read_meta(root);
  if (index < 0 || index >= meta.num_trajectories) throw RangeError("trajectory index out of range");
  const Trajectory t = read_trajectory(root, meta, index);
  RunManifest m = start_manifest("export-vtk");
  const auto files = export_trajectory_vtk(t, meta, out);
  m.config = {{"trajectory", index}};
  m.dataset_hash = tree_hash(root);
  finish_manifest(out, m);
  std::cout << "wrote " << files.size() << " VTK files to " << out << '\n';
  return kOk;
}

int cmd_hierarchy(const std::string& data, int traj, int depth) {
  const DatasetMeta meta = read_meta(data);
  if (traj < 0 || traj >= meta.num_trajectories) throw RangeError("trajectory index out of range");
  const Trajectory t = read_trajectory(data, meta, traj);
  const GraphHierarchy h = bistride_coarsen(make_graph(t.mesh), depth);
  std::cout << "level,nodes,edges\n";
  const auto stats = hierarchy_stats(h);
  for (std::size_t d = 0; d < stats.size(); ++d) std::cout << d << ',' << stats[d].nodes << ',' << stats[d].edges << '\n';
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  for (int i = 1; i < argc; ++i) g_args.emplace_back(argv[i]);
  CLI::App app{"pegnet: learned mesh simulator with PDE-guided message passing"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-data", "generate a ground-truth dataset");
  g->add_option("--case", gen.opt.case_name, "gray-scott | advdiff | taylor-green")
      ->required()
      ->check(CLI::IsMember({"gray-scott", "advdiff", "taylor-green"}));
  g->add_option("--out", gen.out, "output directory")->required();
  g->add_option("--trajs", gen.opt.trajectories, "number of trajectories")->required();
  auto* steps_opt = g->add_option("--steps", gen.opt.steps, "frames per trajectory (default 300)");
  g->add_option("--seed", gen.opt.seed, "seed")->required();
  g->add_option("--grid", gen.grid, "grid size NX NY")->expected(2);
  g->add_flag("--full", gen.full, "full-length trajectories (2000 frames for gray-scott)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train a model");
  t->add_option("--config", tr.config, "key = value config file")->required()->check(CLI::ExistingFile);
  t->add_option("--data", tr.data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  t->add_option("--out", tr.out, "output directory")->required();
  t->add_flag("--no-physics-loss", tr.no_physics, "drop the divergence and mass regularizers");
  t->add_flag("--generic-mp", tr.generic, "replace PDE-guided blocks with generic message passing");

  RolloutArgs ro;
  auto* r = app.add_subcommand("rollout", "autoregressive rollout from ground-truth initial states");
  r->add_option("--checkpoint", ro.checkpoint, "checkpoint file")->required()->check(CLI::ExistingFile);
  r->add_option("--data", ro.data, "ground-truth dataset")->required()->check(CLI::ExistingDirectory);
  r->add_option("--traj", ro.traj, "trajectory index or 'all'");
  r->add_option("--out", ro.out, "output directory")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "RMSE / DVE / MCE at chosen steps");
  e->add_option("--pred", ev.pred, "rollout directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--truth", ev.truth, "ground-truth dataset")->required()->check(CLI::ExistingDirectory);
  e->add_option("--steps", ev.steps, "comma-separated steps; 'last' allowed");
  e->add_option("--out", ev.out, "directory for metrics.csv and channels.csv");

  std::string suite;
  auto* v = app.add_subcommand("verify", "run a property suite");
  v->add_option("--suite", suite, "gradcheck | conservation | hierarchy | coupling | equivariance")->required();

  std::string vtk_traj, vtk_out;
  auto* x = app.add_subcommand("export-vtk", "legacy ASCII VTK per frame");
  x->add_option("--traj", vtk_traj, "traj_<i> directory of a dataset")->required()->check(CLI::ExistingDirectory);
  x->add_option("--out", vtk_out, "output directory")->required();

  std::string hs_data;
  int hs_traj = 0, hs_depth = 5;
  auto* h = app.add_subcommand("hierarchy-stats", "node and edge counts per level");
  h->add_option("--data", hs_data, "dataset directory")->required()->check(CLI::ExistingDirectory);
  h->add_option("--traj", hs_traj, "trajectory index");
  h->add_option("--depth", hs_depth, "number of levels");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*g) {
      gen.steps_given = steps_opt->count() > 0;
      return cmd_gen(gen);
    }
    if (*t) return cmd_train(tr);
    if (*r) return cmd_rollout(ro);
    if (*e) return cmd_eval(ev);
    if (*v) return cmd_verify(suite);
    if (*x) return cmd_export(vtk_traj, vtk_out);
    if (*h) return cmd_hierarchy(hs_data, hs_traj, hs_depth);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  } catch (const RangeError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kUsage;
  } catch (const Error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kData;
  }
  return kUsage;
}
