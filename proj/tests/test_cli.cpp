#include <doctest.h>

#include "pegnet/datagen.hpp"
#include "pegnet/dataset.hpp"
#include "pegnet/manifest.hpp"
#include "pegnet/metrics.hpp"
#include "pegnet/trainer.hpp"
#include "pegnet/vtk.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace pegnet;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(PEGNET_CLI) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  Run r;
  std::array<char, 4096> buf{};
  while (const std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

const fs::path& root() {
  static const fs::path r = [] {
    const fs::path p = fs::temp_directory_path() / "pegnet_test_cli";
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return r;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

nlohmann::json manifest(const fs::path& dir) {
  std::ifstream in(dir / kManifestName);
  return nlohmann::json::parse(in);
}

fs::path write_config(const std::string& name, const std::string& body) {
  const fs::path p = root() / name;
  std::ofstream(p) << body;
  return p;
}

const char* kTinyConfig =
    "latent = 8\nmlp_hidden = 8\nhidden_layers = 1\ndepth = 2\nwarmup_steps = 1\ntotal_steps = 3\n"
    "batch_size = 2\npeak_lr = 1e-3\nseed = 3\n";

// Small advdiff dataset shared by the train/rollout/eval cases.
const fs::path& advdiff_data() {
  static const fs::path d = [] {
    const fs::path p = root() / "advdiff";
    const Run r = run("gen-data --case advdiff --out " + q(p) + " --trajs 2 --steps 6 --seed 4 --grid 8 8");
    REQUIRE_MESSAGE(r.code == 0, r.out);
    return p;
  }();
  return d;
}

const fs::path& trained() {
  static const fs::path d = [] {
    const fs::path p = root() / "run_ours";
    const Run r = run("train --config " + q(write_config("tiny.cfg", kTinyConfig)) + " --data " +
                      q(advdiff_data()) + " --out " + q(p));
    REQUIRE_MESSAGE(r.code == 0, r.out);
    return p;
  }();
  return d;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream s(line);
    std::string c;
    while (std::getline(s, c, ',')) cells.push_back(c);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("gen-data") {
  const fs::path d = root() / "gs";
  const Run r = run("gen-data --case gray-scott --out " + q(d) + " --trajs 2 --steps 3 --seed 1 --grid 8 8");
  REQUIRE_MESSAGE(r.code == 0, r.out);
  const DatasetMeta meta = read_meta(d);
  CHECK(meta.dt == 1.0);
  CHECK(meta.steps == 3);
  CHECK(meta.num_nodes == 64);
  CHECK_NOTHROW(verify_manifest(d));
  const nlohmann::json m = manifest(d);
  CHECK(m.at("command") == "gen-data");
  CHECK(m.at("seed") == 1);

  // same seed, same bytes
  const fs::path d2 = root() / "gs_again";
  REQUIRE(run("gen-data --case gray-scott --out " + q(d2) + " --trajs 2 --steps 3 --seed 1 --grid 8 8").code == 0);
  CHECK(read_file_bytes(d / "traj_1" / "u.f32le") == read_file_bytes(d2 / "traj_1" / "u.f32le"));
}

TEST_CASE("exit codes") {
  CHECK(run("").code == 1);
  CHECK(run("frobnicate").code == 1);
  CHECK(run("gen-data --case gray-scott --out " + q(root() / "x")).code == 1);
  CHECK(run("gen-data --case airway --out " + q(root() / "x") + " --trajs 1 --seed 1").code == 1);
  CHECK(run("gen-data --case gray-scott --out " + q(root() / "x") + " --trajs 0 --seed 1").code == 1);
  CHECK(run("verify --suite everything").code == 1);
  CHECK(run("train --config " + q(write_config("bad.cfg", "learning_rate = 1\n")) + " --data " + q(advdiff_data()) +
            " --out " + q(root() / "bad_run"))
            .code == 1);
  CHECK(run("eval --pred " + q(advdiff_data()) + " --truth " + q(advdiff_data()) + " --steps 99").code == 1);

  const Run ok = run("verify --suite hierarchy");
  CHECK(ok.code == 0);
  CHECK(ok.out.find("PASS") != std::string::npos);

  // tampered artifact: the manifest no longer matches
  const fs::path d = root() / "tampered";
  REQUIRE(run("gen-data --case gray-scott --out " + q(d) + " --trajs 1 --steps 3 --seed 2 --grid 6 6").code == 0);
  std::vector<char> bytes = read_file_bytes(d / "traj_0" / "v.f32le");
  bytes[0] ^= 0x40;
  write_file_bytes(d / "traj_0" / "v.f32le", bytes);
  CHECK_THROWS_AS(verify_manifest(d), DataError);
  CHECK(run("eval --pred " + q(d) + " --truth " + q(d)).code == 2);
}

TEST_CASE("train records the ablation variant") {
  const fs::path cfg = write_config("tiny.cfg", kTinyConfig);
  const std::array<std::pair<const char*, const char*>, 4> cases{
      {{"", "ours"}, {"--no-physics-loss", "model-a"}, {"--generic-mp", "model-b"},
       {"--no-physics-loss --generic-mp", "model-c"}}};
  for (const auto& [flags, variant] : cases) {
    const fs::path out = root() / (std::string("run_") + variant);
    const Run r = run("train --config " + q(cfg) + " --data " + q(advdiff_data()) + " --out " + q(out) + " " + flags);
    REQUIRE_MESSAGE(r.code == 0, r.out);
    const nlohmann::json m = manifest(out);
    CHECK(m.at("config").at("variant") == variant);
    CHECK(m.at("config").at("steps_done") == 3);
    const Checkpoint ck = load_checkpoint(out / "model.ckpt");
    CHECK(ck.model.generic_mp == (std::string(variant) == "model-b" || std::string(variant) == "model-c"));
    CHECK(ck.train_config.at("no_physics_loss") ==
          (std::string(variant) == "model-a" || std::string(variant) == "model-c"));
    CHECK(fs::exists(out / "train_log.csv"));
    CHECK_NOTHROW(verify_manifest(out));
  }
}

TEST_CASE("rollout and eval") {
  const fs::path ck = trained() / "model.ckpt";
  const fs::path a = root() / "roll_a", b = root() / "roll_b";
  REQUIRE(run("rollout --checkpoint " + q(ck) + " --data " + q(advdiff_data()) + " --traj all --out " + q(a)).code == 0);
  REQUIRE(run("rollout --checkpoint " + q(ck) + " --data " + q(advdiff_data()) + " --traj all --out " + q(b)).code == 0);
  const Dataset truth = read_dataset(advdiff_data());
  const Dataset pred = read_dataset(a);
  REQUIRE(pred.trajectories.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(pred.trajectories[i].steps() == truth.trajectories[i].steps());
    for (std::size_t k = 0; k < 3; ++k) CHECK(pred.trajectories[i].fields[k][0] == truth.trajectories[i].fields[k][0]);
    for (const char* f : {"velocity.f32le", "pressure.f32le", "concentration.f32le"}) {
      const fs::path rel = fs::path("traj_" + std::to_string(i)) / f;
      CHECK(read_file_bytes(a / rel) == read_file_bytes(b / rel));
    }
  }
  CHECK(fs::exists(a / "rollout_metrics.csv"));
  CHECK(manifest(a).at("checkpoint_hash") == sha256_file(ck));

  const fs::path one = root() / "roll_one";
  REQUIRE(run("rollout --checkpoint " + q(ck) + " --data " + q(advdiff_data()) + " --traj 1 --out " + q(one)).code == 0);
  const Dataset single = read_dataset(one);
  REQUIRE(single.trajectories.size() == 1);
  CHECK(single.trajectories[0].fields[2].back() == pred.trajectories[1].fields[2].back());
  CHECK(run("rollout --checkpoint " + q(ck) + " --data " + q(advdiff_data()) + " --traj 5 --out " +
            q(root() / "roll_bad"))
            .code == 1);

  // eval output equals the library metrics on the same files
  const fs::path ev = root() / "eval";
  const Run r = run("eval --pred " + q(a) + " --truth " + q(advdiff_data()) + " --steps 1,last --out " + q(ev));
  REQUIRE_MESSAGE(r.code == 0, r.out);
  const MetricsReport lib = evaluate(pred.trajectories, truth.trajectories, truth.meta.task(), {1, 5});
  const auto rows = read_csv(ev / "metrics.csv");
  REQUIRE(rows.size() == 1 + lib.per_trajectory.size() + lib.averaged.size());
  for (std::size_t i = 0; i < lib.per_trajectory.size(); ++i) {
    CHECK(std::stod(rows[1 + i][2]) == lib.per_trajectory[i].rmse);
    CHECK(std::stod(rows[1 + i][3]) == lib.per_trajectory[i].dve);
    CHECK(std::stod(rows[1 + i][4]) == lib.per_trajectory[i].mce);
  }
  CHECK(rows.back()[0] == "mean");
  CHECK(std::stod(rows.back()[2]) == lib.averaged.back().rmse);
  CHECK(fs::exists(ev / "channels.csv"));
  CHECK(r.out.find("step,rmse,dve,mce") != std::string::npos);
}

TEST_CASE("export-vtk") {
  const fs::path out = root() / "vtk_tri";
  const Run r = run("export-vtk --traj " + q(advdiff_data() / "traj_0") + " --out " + q(out));
  REQUIRE_MESSAGE(r.code == 0, r.out);
  const Dataset ds = read_dataset(advdiff_data());
  const Trajectory& t = ds.trajectories[0];
  for (int s = 0; s < t.steps(); ++s) {
    const VtkData v = read_vtk(out / ("step_" + std::to_string(s) + ".vtk"));
    CHECK(v.cells.size() == static_cast<std::size_t>(t.mesh.num_cells()));
    for (int ct : v.cell_types) CHECK(ct == kVtkTriangle);
    CHECK(v.points.leftCols(2) == t.mesh.positions);
    CHECK(v.points.col(2).isZero(0.0));
    for (const auto& [name, data] : v.point_data) {
      if (name == "velocity") {
        CHECK(data.leftCols(2) == t.fields[0][s]);
        CHECK(data.col(2).isZero(0.0));
      } else if (name == "concentration") {
        CHECK(data == t.fields[2][s]);
      }
    }
  }
  std::ifstream raw(out / "step_0.vtk");
  std::stringstream text;
  text << raw.rdbuf();
  CHECK(text.str().rfind("# vtk DataFile Version", 0) == 0);
  CHECK(text.str().find("CELL_TYPES " + std::to_string(t.mesh.num_cells())) != std::string::npos);

  // a tetrahedral dataset: unit cube split into six tets
  Dataset tet;
  tet.meta.case_name = "advdiff";
  tet.meta.dim = 3;
  tet.meta.steps = 2;
  tet.meta.num_nodes = 8;
  tet.meta.num_cells = 6;
  tet.meta.cell_arity = 4;
  tet.meta.fields = {{"velocity", 3}, {"pressure", 1}, {"concentration", 1}};
  tet.meta.num_trajectories = 1;
  Trajectory tr;
  tr.mesh.positions.resize(8, 3);
  for (int i = 0; i < 8; ++i) tr.mesh.positions.row(i) << (i & 1), ((i >> 1) & 1), ((i >> 2) & 1);
  tr.mesh.cells.resize(6, 4);
  tr.mesh.cells << 0, 1, 3, 7, 0, 1, 5, 7, 0, 2, 3, 7, 0, 2, 6, 7, 0, 4, 5, 7, 0, 4, 6, 7;
  tr.mesh.node_types.assign(8, 0);
  for (int w : {3, 1, 1}) {
    std::vector<Tensor> series;
    for (int s = 0; s < 2; ++s) series.push_back(Tensor::Constant(8, w, 0.25 * (s + 1)));
    tr.fields.push_back(series);
  }
  tet.trajectories.push_back(tr);
  const fs::path td = root() / "tet";
  write_dataset(td, tet);
  const fs::path tout = root() / "vtk_tet";
  REQUIRE(run("export-vtk --traj " + q(td / "traj_0") + " --out " + q(tout)).code == 0);
  const VtkData v = read_vtk(tout / "step_1.vtk");
  REQUIRE(v.cell_types.size() == 6);
  for (int ct : v.cell_types) CHECK(ct == kVtkTetra);
  CHECK(v.points == tr.mesh.positions);
  CHECK(v.cells[3] == std::vector<std::int32_t>{0, 2, 6, 7});

  CHECK(run("export-vtk --traj " + q(td) + " --out " + q(root() / "vtk_bad")).code == 1);
}

TEST_CASE("hierarchy-stats") {
  const Run r = run("hierarchy-stats --data " + q(advdiff_data()) + " --depth 3");
  REQUIRE_MESSAGE(r.code == 0, r.out);
  CHECK(r.out.find("level,nodes,edges") != std::string::npos);
  CHECK(r.out.find("\n0,64,") != std::string::npos);
}
