#include <doctest.h>

#include "pegnet/datagen.hpp"
#include "pegnet/errors.hpp"
#include "pegnet/metrics.hpp"
#include "pegnet/rollout.hpp"
#include "pegnet/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

using namespace pegnet;
namespace fs = std::filesystem;

namespace {

Dataset tiny(const std::string& case_name, int trajs = 2, int steps = 5) {
  GenOptions o;
  o.case_name = case_name;
  o.trajectories = trajs;
  o.steps = steps;
  o.nx = o.ny = 6;
  return generate_dataset(o);
}

Trajectory shifted(Trajectory t, double offset) {
  for (auto& f : t.fields) {
    for (auto& x : f) x.array() += offset;
  }
  return t;
}

// Neighbor sets straight from the cells, independent of the edge builder.
std::vector<std::set<int>> neighbors(const Mesh& m) {
  std::vector<std::set<int>> nb(static_cast<std::size_t>(m.num_nodes()));
  for (Index c = 0; c < m.cells.rows(); ++c) {
    for (Index a = 0; a < m.cells.cols(); ++a) {
      for (Index b = 0; b < m.cells.cols(); ++b) {
        if (a != b) nb[static_cast<std::size_t>(m.cells(c, a))].insert(m.cells(c, b));
      }
    }
  }
  return nb;
}

Eigen::RowVectorXd min_image(Eigen::RowVectorXd d, const std::optional<Eigen::VectorXd>& box) {
  if (box) {
    for (Index k = 0; k < d.size(); ++k) d(k) -= (*box)(k) * std::round(d(k) / (*box)(k));
  }
  return d;
}

double brute_dve(const Tensor& v, const Mesh& m) {
  const auto nb = neighbors(m);
  double acc = 0.0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    double div = 0.0;
    for (int j : nb[i]) {
      const Eigen::RowVectorXd d = min_image(m.positions.row(j) - m.positions.row(i), m.periodic_box);
      div += (v.row(j) - v.row(static_cast<Index>(i))).dot(d.normalized());
    }
    div /= static_cast<double>(nb[i].size());
    acc += div * div;
  }
  return std::sqrt(acc / static_cast<double>(nb.size()));
}

double brute_mce(const Tensor& c0, const Tensor& c1, const Tensor& v, const Mesh& m) {
  const auto nb = neighbors(m);
  double acc = 0.0;
  for (std::size_t i = 0; i < nb.size(); ++i) {
    const auto ii = static_cast<Index>(i);
    double r = c1(ii, 0) - c0(ii, 0);
    for (int j : nb[i]) {
      const Eigen::RowVectorXd d = min_image(m.positions.row(j) - m.positions.row(ii), m.periodic_box).normalized();
      r += v.row(ii).dot(d) * c0(ii, 0) - v.row(j).dot(d) * c0(j, 0);
    }
    acc += r * r;
  }
  return std::sqrt(acc / static_cast<double>(nb.size()));
}

}  // namespace

TEST_CASE("RMSE hand cases") {
  Tensor a = Tensor::Zero(4, 1), b = Tensor::Zero(4, 2);
  CHECK(state_rmse({a, b}, {a, b}) == 0.0);
  CHECK(state_rmse({a}, {Tensor::Constant(4, 1, 2.0)}) == 2.0);
  // offset on every channel: |e_i|^2 = 3 * 4
  CHECK(state_rmse({a, b}, {Tensor::Constant(4, 1, 2.0), Tensor::Constant(4, 2, 2.0)}) ==
        doctest::Approx(std::sqrt(12.0)));
  Tensor one = Tensor::Zero(4, 1);
  one(2, 0) = 4.0;
  CHECK(field_rmse(one, a) == 2.0);
  CHECK_THROWS_AS(state_rmse({a}, {b}), ShapeError);
  CHECK_THROWS_AS(state_rmse({a}, {a, b}), ShapeError);
}

TEST_CASE("step list") {
  CHECK(parse_step_list("1,50,last", 100) == std::vector<int>{1, 50, 99});
  CHECK(parse_step_list("0", 1) == std::vector<int>{0});
  CHECK_THROWS_AS(parse_step_list("1,50,last", 50), RangeError);
  CHECK_THROWS_AS(parse_step_list("-1", 5), RangeError);
  CHECK_THROWS_AS(parse_step_list("", 5), ConfigError);
  CHECK_THROWS_AS(parse_step_list("1,,2", 5), ConfigError);
  CHECK_THROWS_AS(parse_step_list("2x", 5), ConfigError);
}

TEST_CASE("metrics against brute-force recomputation") {
  const Dataset ds = tiny("advdiff");
  const TaskSpec task = ds.meta.task();
  std::vector<Trajectory> pred;
  for (const auto& t : ds.trajectories) pred.push_back(shifted(t, 0.0));
  // perturb the prediction with a deterministic pattern
  for (auto& t : pred) {
    for (auto& f : t.fields) {
      for (std::size_t s = 1; s < f.size(); ++s) {
        for (Index i = 0; i < f[s].size(); ++i) f[s].data()[i] += 0.01 * std::sin(1.7 * i + 0.3 * s);
      }
    }
  }
  const std::vector<int> steps{1, 4};
  const MetricsReport r = evaluate(pred, ds.trajectories, task, steps);
  REQUIRE(r.per_trajectory.size() == 4);
  REQUIRE(r.averaged.size() == 2);
  for (const auto& m : r.per_trajectory) {
    const Trajectory& p = pred[static_cast<std::size_t>(m.traj)];
    const Trajectory& t = ds.trajectories[static_cast<std::size_t>(m.traj)];
    double sq = 0.0;
    for (Index i = 0; i < ds.meta.num_nodes; ++i) {
      for (std::size_t k = 0; k < p.fields.size(); ++k) {
        const auto& a = p.fields[k][static_cast<std::size_t>(m.step)];
        const auto& b = t.fields[k][static_cast<std::size_t>(m.step)];
        for (Index c = 0; c < a.cols(); ++c) sq += (a(i, c) - b(i, c)) * (a(i, c) - b(i, c));
      }
    }
    CHECK(m.rmse == doctest::Approx(std::sqrt(sq / ds.meta.num_nodes)).epsilon(1e-12));
    CHECK(m.dve == doctest::Approx(brute_dve(p.fields[0][static_cast<std::size_t>(m.step)], t.mesh)).epsilon(1e-12));
    const auto& c = p.fields[2];
    CHECK(m.mce == doctest::Approx(brute_mce(c[static_cast<std::size_t>(m.step - 1)],
                                             c[static_cast<std::size_t>(m.step)],
                                             p.fields[0][static_cast<std::size_t>(m.step)], t.mesh))
                       .epsilon(1e-12));
  }
  for (std::size_t s = 0; s < steps.size(); ++s) {
    CHECK(r.averaged[s].traj == -1);
    CHECK(r.averaged[s].rmse ==
          doctest::Approx(0.5 * (r.per_trajectory[s].rmse + r.per_trajectory[2 + s].rmse)).epsilon(1e-14));
  }
}

TEST_CASE("identical and offset trajectories") {
  const Dataset ds = tiny("gray-scott");
  const TaskSpec task = ds.meta.task();
  const MetricsReport same = evaluate(ds.trajectories, ds.trajectories, task, {0, 2, 4});
  for (const auto& m : same.per_trajectory) {
    CHECK(m.rmse == 0.0);
    CHECK(std::isnan(m.dve));
    CHECK(std::isnan(m.mce));
  }
  for (double f : same.field_rmse_all_steps) CHECK(f == 0.0);

  std::vector<Trajectory> off;
  for (const auto& t : ds.trajectories) off.push_back(shifted(t, 2.0));
  const MetricsReport r = evaluate(off, ds.trajectories, task, {3});
  // two unit-width fields offset by 2: sqrt(4 + 4)
  for (const auto& m : r.per_trajectory) CHECK(m.rmse == doctest::Approx(std::sqrt(8.0)));
  for (double f : r.field_rmse_all_steps) CHECK(f == doctest::Approx(2.0));
  CHECK_THROWS_AS(evaluate(off, {ds.trajectories[0]}, task, {1}), ShapeError);
  CHECK_THROWS_AS(evaluate(off, ds.trajectories, task, {5}), RangeError);
}

TEST_CASE("csv output") {
  const Dataset ds = tiny("advdiff");
  const MetricsReport r = evaluate(ds.trajectories, ds.trajectories, ds.meta.task(), {1, 4});
  const fs::path dir = fs::temp_directory_path() / "pegnet_test_metrics";
  fs::create_directories(dir);
  write_metrics_csv(dir / "metrics.csv", r);
  write_channel_csv(dir / "channels.csv", r);
  std::ifstream in(dir / "metrics.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header == "traj_id,step,rmse,dve,mce,rmse_velocity,rmse_pressure,rmse_concentration");
  int rows = 0;
  std::string line, last;
  while (std::getline(in, line)) {
    ++rows;
    last = line;
  }
  CHECK(rows == 6);
  CHECK(last.rfind("mean,4,0,", 0) == 0);
  std::ifstream ch(dir / "channels.csv");
  std::getline(ch, header);
  CHECK(header == "field,rmse_all_steps");
  fs::remove_all(dir);
}

TEST_CASE("rollout") {
  const Dataset ds = tiny("advdiff", 1, 6);
  TrainConfig c;
  c.latent = 8;
  c.mlp_hidden = 8;
  c.hidden_layers = 1;
  c.depth = 2;
  Model model(model_config_for(c, ds.meta));
  const Normalizer norm = *ds.meta.normalization;
  const Trajectory& truth = ds.trajectories[0];
  const Trajectory a = rollout(model, norm, truth, ds.meta.dt);
  CHECK(a.steps() == 6);
  for (std::size_t k = 0; k < a.fields.size(); ++k) CHECK(a.fields[k][0] == truth.fields[k][0]);
  CHECK(a.mesh.positions == truth.mesh.positions);
  const Trajectory b = rollout(model, norm, truth, ds.meta.dt);
  for (std::size_t k = 0; k < a.fields.size(); ++k) {
    for (int t = 0; t < a.steps(); ++t) CHECK(a.fields[k][t] == b.fields[k][t]);
  }
  // autoregressive: step 2 is one model step from the predicted step 1
  const SimContext ctx = SimContext::build(truth.mesh, model.config());
  const auto two = step(model, norm, ctx, a.state(1), {ds.meta.dt});
  for (std::size_t k = 0; k < two.size(); ++k) CHECK(two[k] == a.fields[k][2]);
  const Trajectory short_run = rollout(model, norm, truth, ds.meta.dt, 3);
  CHECK(short_run.steps() == 3);
  CHECK(short_run.fields[1][2] == a.fields[1][2]);
}
