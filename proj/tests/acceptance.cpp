// Acceptance run: one PASS/FAIL line per criterion, details indented below.
// Exit status is 0 only when every selected criterion passes.

#include "pegnet/datagen.hpp"
#include "pegnet/dataset.hpp"
#include "pegnet/errors.hpp"
#include "pegnet/metrics.hpp"
#include "pegnet/rollout.hpp"
#include "pegnet/trainer.hpp"
#include "pegnet/verify.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

using namespace pegnet;
namespace fs = std::filesystem;

namespace {

// --- pinned tolerances ---------------------------------------------------------

constexpr double kGradTol = 1e-5;
constexpr int kGradInstances = 20;
constexpr double kGradSeconds = 300.0;
constexpr int kCouplingTrials = 100;
constexpr int kPressureTrials = 20;
constexpr int kGraphInstances = 50;
constexpr double kEvalTol = 1e-12;
constexpr double kAblationHoursPerConfig = 3.0;
constexpr int kAblationSeeds = 3;
constexpr int kAblationWinsNeeded = 2;

struct Outcome {
  bool pass = false;
  std::string summary;
  std::vector<std::string> details;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string sci(double x) {
  std::ostringstream s;
  s << std::scientific << std::setprecision(3) << x;
  return s.str();
}

std::string fixed(double x, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << x;
  return s.str();
}

fs::path g_work;

fs::path work(const std::string& name) {
  const fs::path p = g_work / name;
  fs::remove_all(p);
  return p;
}

Outcome from_checks(const SuiteReport& r, const std::vector<std::string>& names) {
  Outcome o;
  o.pass = true;
  for (const auto& c : r.checks) {
    if (!names.empty() && std::find(names.begin(), names.end(), c.name) == names.end()) continue;
    o.pass = o.pass && c.pass;
    o.details.push_back((c.pass ? "ok   " : "FAIL ") + c.name + ": " + c.detail);
  }
  return o;
}

// --- criteria --------------------------------------------------------------------

Outcome gradient_integrity() {
  const auto t0 = Clock::now();
  const SuiteReport r = gradcheck_suite(kGradInstances, 1);
  const double secs = seconds_since(t0);
  Outcome o = from_checks(r, {});
  o.pass = o.pass && secs < kGradSeconds;
  o.summary = std::to_string(r.checks.size()) + " blocks x " + std::to_string(kGradInstances) +
              " instances, tol " + sci(kGradTol) + ", " + fixed(secs, 1) + " s (limit " + fixed(kGradSeconds, 0) + " s)";
  return o;
}

Outcome one_way_coupling() {
  Outcome o = from_checks(coupling_suite(kCouplingTrials, kPressureTrials, 4), {"one_way_coupling"});
  o.summary = std::to_string(kCouplingTrials) + " trials, fluid outputs bit-identical";
  return o;
}

Outcome pressure_non_integration() {
  Outcome o = from_checks(coupling_suite(kCouplingTrials, kPressureTrials, 4), {"pressure_not_integrated"});
  o.summary = std::to_string(kPressureTrials) + " trials at dt = 0";
  return o;
}

Outcome conservation() {
  Outcome o = from_checks(conservation_suite(2), {});
  o.summary = "Gray-Scott fixed point / mass balance, still-flow transport";
  return o;
}

Outcome gt_physics() {
  Outcome o;
  o.pass = true;
  struct Stats {
    std::vector<double> dve, mce;
  };
  std::map<std::string, std::map<int, Stats>> by_case;
  for (const std::string c : {"taylor-green", "advdiff"}) {
    for (const int n : {32, 64}) {
      GenOptions g;
      g.case_name = c;
      g.trajectories = 3;
      g.steps = c == "advdiff" ? 40 * n / 32 : 2;  // same physical time at both resolutions
      g.seed = 17;
      g.nx = g.ny = n;
      const Dataset ds = generate_dataset(g);
      Stats& s = by_case[c][n];
      for (const auto& e : ds.meta.extra.at("gt_stats")) {
        const double dve = e.at("dve"), dve_t = e.at("dve_threshold");
        s.dve.push_back(dve);
        bool ok = dve < dve_t;
        std::string line = c + " " + std::to_string(n) + "^2: DVE " + sci(dve) + " < " + sci(dve_t);
        if (e.contains("mce")) {
          const double mce = e.at("mce"), mce_t = e.at("mce_threshold");
          s.mce.push_back(mce);
          ok = ok && mce < mce_t;
          line += ", MCE " + sci(mce) + " < " + sci(mce_t);
        }
        o.pass = o.pass && ok;
        o.details.push_back((ok ? "ok   " : "FAIL ") + line);
      }
    }
  }
  // MCE refinement: every trajectory (same seed, same amplitude) improves 32 -> 64
  const Stats& a = by_case.at("advdiff").at(32);
  const Stats& b = by_case.at("advdiff").at(64);
  for (std::size_t i = 0; i < a.mce.size(); ++i) {
    const bool ok = b.mce[i] < a.mce[i];
    o.pass = o.pass && ok;
    o.details.push_back((ok ? "ok   " : "FAIL ") + std::string("advdiff traj ") + std::to_string(i) + ": MCE " +
                        sci(a.mce[i]) + " -> " + sci(b.mce[i]));
  }
  // On the regular periodic grid the stencil divergence of Taylor-Green is
  // zero by symmetry (the DVE above is round-off), so refinement is checked
  // on jittered periodic meshes where the truncation error is genuine.
  for (const double amp : {0.6, 1.0, 1.4}) {
    double prev = 0.0;
    for (const int n : {32, 64}) {
      const GridSpec grid{n, n, 2.0 * M_PI, 2.0 * M_PI, true};
      Mesh m = mesh_from_grid(grid);
      std::mt19937_64 rng(static_cast<std::uint64_t>(n) * 7919u + static_cast<std::uint64_t>(amp * 10));
      std::uniform_real_distribution<double> jitter(-0.25, 0.25);
      for (Index i = 0; i < m.num_nodes(); ++i) {
        m.positions(i, 0) += jitter(rng) * grid.hx();
        m.positions(i, 1) += jitter(rng) * grid.hy();
      }
      const GtCheck dve = taylor_green_divergence_check(make_graph(m), 0.01, amp, 0.0);
      const bool ok = dve.value < dve.threshold && (n == 32 || dve.value < prev);
      o.pass = o.pass && ok;
      o.details.push_back((ok ? "ok   " : "FAIL ") + std::string("jittered ") + std::to_string(n) + "^2, A = " +
                          fixed(amp, 1) + ": DVE " + sci(dve.value) + " < " + sci(dve.threshold) +
                          (n == 32 ? "" : ", below the 32^2 value"));
      prev = dve.value;
    }
  }
  o.summary = "ground-truth DVE/MCE below their discretization bounds and decreasing 32 -> 64";
  return o;
}

// Desk ablation recipe, identical for both variants. Input noise stays at
// its default of 0.
TrainConfig desk_config(std::uint64_t seed) {
  TrainConfig c;
  c.latent = 16;
  c.mlp_hidden = 16;
  c.hidden_layers = 1;
  c.depth = 3;
  c.batch_size = 4;
  c.peak_lr = 1e-3;
  c.total_steps = 3000;
  c.warmup_steps = 150;
  c.seed = seed;
  return c;
}

struct AblationRun {
  double rmse_100 = 0.0;
  double rmse_last = 0.0;
  double hours = 0.0;
};

AblationRun ablation_run(const Dataset& train_set, const Dataset& test_set, TrainConfig c) {
  const auto t0 = Clock::now();
  TrainIo io;
  io.threads = 1;
  const TrainResult r = train(c, train_set, io);
  std::vector<Trajectory> pred;
  for (const auto& t : test_set.trajectories) pred.push_back(rollout(*r.model, r.normalizer, t, test_set.meta.dt));
  const int last = test_set.meta.steps - 1;
  const MetricsReport m = evaluate(pred, test_set.trajectories, test_set.meta.task(), {100, last});
  return {m.averaged[0].rmse, m.averaged[1].rmse, seconds_since(t0) / 3600.0};
}

Outcome ablation_trend() {
  Outcome o;
  o.pass = true;
  for (const std::string c : {"gray-scott", "advdiff"}) {
    GenOptions g;
    g.case_name = c;
    g.steps = 300;
    g.trajectories = 4;
    g.seed = 1;
    const Dataset train_set = generate_dataset(g);
    g.trajectories = 2;
    g.seed = 2;
    const Dataset test_set = generate_dataset(g);
    int wins = 0;
    for (int s = 1; s <= kAblationSeeds; ++s) {
      TrainConfig ours = desk_config(static_cast<std::uint64_t>(s));
      TrainConfig base = ours;
      base.generic_mp = true;
      base.no_physics_loss = true;
      const AblationRun a = ablation_run(train_set, test_set, ours);
      const AblationRun b = ablation_run(train_set, test_set, base);
      const bool win = a.rmse_100 < b.rmse_100 && a.rmse_last < b.rmse_last;
      const bool budget = a.hours <= kAblationHoursPerConfig && b.hours <= kAblationHoursPerConfig;
      wins += win ? 1 : 0;
      o.pass = o.pass && budget;
      o.details.push_back((win ? "win  " : "loss ") + c + " seed " + std::to_string(s) + ": RMSE-100 " +
                          fixed(a.rmse_100) + " vs " + fixed(b.rmse_100) + ", RMSE-last " + fixed(a.rmse_last) +
                          " vs " + fixed(b.rmse_last) + " (ours vs model-c; " + fixed(a.hours * 60, 1) + " / " +
                          fixed(b.hours * 60, 1) + " min)");
    }
    const bool ok = wins >= kAblationWinsNeeded;
    o.pass = o.pass && ok;
    o.details.push_back((ok ? "ok   " : "FAIL ") + c + ": ours lower on " + std::to_string(wins) + "/" +
                        std::to_string(kAblationSeeds) + " seeds");
  }
  o.summary = "full model vs generic MP without physics loss, identical budgets, >= " +
              std::to_string(kAblationWinsNeeded) + "/" + std::to_string(kAblationSeeds) + " seeds per case";
  return o;
}

// Independent little-endian float32 reader for the brute-force check.
std::vector<double> read_f32(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::vector<double> out(raw.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(raw[4 * i + static_cast<std::size_t>(b)]);
    float f;
    std::memcpy(&f, &bits, 4);
    out[i] = f;
  }
  return out;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(PEGNET_CLI) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

Outcome eval_reporting() {
  Outcome o;
  const fs::path data = work("eval_data"), run = work("eval_run"), roll = work("eval_roll"), ev = work("eval_out");
  const fs::path cfg = g_work / "eval.cfg";
  std::ofstream(cfg) << "latent = 8\nmlp_hidden = 8\nhidden_layers = 1\ndepth = 2\nwarmup_steps = 2\n"
                        "total_steps = 20\nbatch_size = 2\npeak_lr = 1e-3\nseed = 5\n";
  const bool ran =
      run_cli("gen-data --case advdiff --out " + q(data) + " --trajs 2 --steps 64 --seed 9 --grid 12 12") == 0 &&
      run_cli("train --config " + q(cfg) + " --data " + q(data) + " --out " + q(run)) == 0 &&
      run_cli("rollout --checkpoint " + q(run / "model.ckpt") + " --data " + q(data) + " --out " + q(roll)) == 0 &&
      run_cli("eval --pred " + q(roll) + " --truth " + q(data) + " --steps 1,50,last --out " + q(ev)) == 0;
  if (!ran) {
    o.summary = "CLI pipeline failed";
    return o;
  }
  const nlohmann::json meta = nlohmann::json::parse(std::ifstream(data / "meta.json"));
  const auto n = meta.at("num_nodes").get<std::size_t>();
  const int frames = meta.at("steps");
  const std::vector<int> steps{1, 50, frames - 1};

  // brute force: sum over fields and channels of squared error, per node mean, sqrt
  std::map<std::pair<std::string, int>, double> expect;
  for (int t = 0; t < 2; ++t) {
    const std::string dir = "traj_" + std::to_string(t);
    for (int s : steps) {
      double acc = 0.0;
      for (const auto& f : meta.at("fields")) {
        const std::string file = f.at("name").get<std::string>() + ".f32le";
        const std::size_t w = f.at("width");
        const auto a = read_f32(roll / dir / file);
        const auto b = read_f32(data / dir / file);
        const std::size_t off = static_cast<std::size_t>(s) * n * w;
        for (std::size_t i = 0; i < n * w; ++i) acc += (a[off + i] - b[off + i]) * (a[off + i] - b[off + i]);
      }
      expect[{std::to_string(t), s}] = std::sqrt(acc / static_cast<double>(n));
    }
  }
  for (int s : steps) expect[{"mean", s}] = 0.5 * (expect[{"0", s}] + expect[{"1", s}]);

  std::ifstream csv(ev / "metrics.csv");
  std::string line;
  std::getline(csv, line);
  double worst = 0.0;
  std::size_t rows = 0;
  std::set<std::pair<std::string, int>> seen;
  while (std::getline(csv, line)) {
    std::stringstream ss(line);
    std::string id, step, rmse;
    std::getline(ss, id, ',');
    std::getline(ss, step, ',');
    std::getline(ss, rmse, ',');
    const std::pair<std::string, int> key{id, std::stoi(step)};
    if (!expect.count(key)) continue;
    seen.insert(key);
    worst = std::max(worst, std::abs(std::stod(rmse) - expect[key]));
    ++rows;
  }
  o.pass = seen.size() == expect.size() && worst <= kEvalTol;
  o.summary = "RMSE at steps 1, 50, " + std::to_string(frames - 1) + " over " + std::to_string(rows) +
              " rows, max |cli - brute force| " + sci(worst) + " (tol " + sci(kEvalTol) + ")";
  for (int s : steps) o.details.push_back("mean RMSE-" + std::to_string(s) + " " + sci(expect[{"mean", s}]));
  return o;
}

Outcome equivariance() {
  Outcome o = from_checks(equivariance_suite(kGraphInstances, 5), {});
  o.summary = std::to_string(kGraphInstances) + " random graphs, tol 1e-12";
  return o;
}

Outcome determinism() {
  Outcome o;
  GenOptions g;
  g.case_name = "advdiff";
  g.trajectories = 3;
  g.steps = 20;
  g.nx = g.ny = 16;
  g.seed = 3;
  const Dataset ds = generate_dataset(g);
  TrainConfig c = desk_config(7);
  c.total_steps = 60;
  c.warmup_steps = 6;
  c.input_noise_std = 0.01;
  c.checkpoint_every = 30;
  std::vector<std::vector<double>> traces;
  std::vector<fs::path> dirs;
  for (int run = 0; run < 2; ++run) {
    TrainIo io;
    io.threads = 1;
    io.out_dir = work("determinism_" + std::to_string(run));
    dirs.push_back(*io.out_dir);
    const TrainResult r = train(c, ds, io);
    std::vector<double> t;
    for (const auto& row : r.log) t.push_back(row.loss);
    traces.push_back(t);
  }
  bool same = traces[0] == traces[1] && traces[0].size() == 60;
  for (const char* f : {"model.ckpt", "ckpt_30.ckpt", "ckpt_60.ckpt", "train_log.csv"}) {
    const bool eq = read_file_bytes(dirs[0] / f) == read_file_bytes(dirs[1] / f);
    o.details.push_back((eq ? "ok   " : "FAIL ") + std::string(f) + " byte-identical");
    same = same && eq;
  }
  o.pass = same;
  o.summary = "two single-threaded runs, " + std::to_string(traces[0].size()) + " identical losses, final " +
              sci(traces[0].empty() ? 0.0 : traces[0].back());
  return o;
}

Outcome hierarchy() {
  Outcome o = from_checks(hierarchy_suite(kGraphInstances, 3), {});
  o.summary = "golden cases + " + std::to_string(kGraphInstances) + " random hierarchies";
  return o;
}

template <typename F>
bool throws_data_error(F&& f) {
  try {
    f();
  } catch (const DataError&) {
    return true;
  } catch (...) {
    return false;
  }
  return false;
}

Outcome serialization() {
  Outcome o;
  o.pass = true;
  auto record = [&](bool ok, const std::string& what) {
    o.pass = o.pass && ok;
    o.details.push_back((ok ? "ok   " : "FAIL ") + what);
  };
  for (const std::string c : {"gray-scott", "advdiff"}) {
    GenOptions g;
    g.case_name = c;
    g.trajectories = 2;
    g.steps = 5;
    g.nx = g.ny = 10;
    const fs::path a = work("ser_a_" + c), b = work("ser_b_" + c);
    write_dataset(a, generate_dataset(g));
    write_dataset(b, read_dataset(a));
    bool eq = true;
    for (const auto& e : fs::recursive_directory_iterator(a)) {
      if (e.is_regular_file()) eq = eq && read_file_bytes(e.path()) == read_file_bytes(b / fs::relative(e.path(), a));
    }
    record(eq, c + " dataset round trip byte-exact");

    const fs::path f = a / "traj_1" / (c == "advdiff" ? "velocity.f32le" : "v.f32le");
    std::vector<char> bytes = read_file_bytes(f);
    bytes.resize(bytes.size() - 3);
    write_file_bytes(f, bytes);
    record(throws_data_error([&] { read_dataset(a); }), c + " truncated field -> DataError");
    std::ofstream(a / "meta.json") << "{\"case_name\": ";
    record(throws_data_error([&] { read_meta(a); }), c + " corrupt meta -> DataError");

    TrainConfig tc = desk_config(1);
    tc.total_steps = 0;
    const TrainResult r = train(tc, read_dataset(b));
    const std::vector<char> ck = serialize_checkpoint(*r.model, r.normalizer, 0, to_json(tc));
    const Checkpoint parsed = parse_checkpoint(ck);
    const auto restored = restore_model(parsed);
    record(serialize_checkpoint(*restored, parsed.normalizer, parsed.step, parsed.train_config) == ck,
           c + " checkpoint round trip byte-exact");
    std::vector<char> bad = ck;
    bad.resize(bad.size() - 8);
    record(throws_data_error([&] { parse_checkpoint(bad); }), c + " truncated checkpoint -> DataError");
    bad = ck;
    bad[3] ^= 0x20;
    record(throws_data_error([&] { parse_checkpoint(bad); }), c + " corrupt magic -> DataError");
  }
  o.summary = "datasets and checkpoints";
  return o;
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  std::vector<int> only;
  std::string work_dir = (fs::temp_directory_path() / "pegnet_acceptance").string();
  app.add_option("--only", only, "criterion ids to run (default: all)")->delimiter(',');
  app.add_option("--work", work_dir, "scratch directory");
  CLI11_PARSE(app, argc, argv);
  g_work = work_dir;
  fs::create_directories(g_work);

  const std::vector<Criterion> criteria{
      {1, "gradient integrity", gradient_integrity},
      {2, "one-way coupling", one_way_coupling},
      {3, "pressure non-integration", pressure_non_integration},
      {4, "conservation oracles", conservation},
      {5, "ground-truth physics smallness", gt_physics},
      {6, "ablation trend", ablation_trend},
      {7, "error-accumulation reporting", eval_reporting},
      {8, "equivariance/invariance", equivariance},
      {9, "determinism", determinism},
      {10, "hierarchy correctness", hierarchy},
      {11, "serialization", serialization},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.summary = std::string("exception: ") + e.what();
    }
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.summary << " ["
              << fixed(seconds_since(t0), 1) << " s]\n";
    for (const auto& d : o.details) std::cout << "    " << d << '\n';
    std::cout.flush();
    failed += o.pass ? 0 : 1;
  }
  return failed == 0 ? 0 : 1;
}
