#include <doctest.h>

#include "pegnet/datagen.hpp"
#include "pegnet/dataset.hpp"
#include "pegnet/errors.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

using namespace pegnet;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pegnet_test_dataset_" + name);
  fs::remove_all(p);
  return p;
}

Dataset small_dataset(const std::string& case_name) {
  GenOptions o;
  o.case_name = case_name;
  o.trajectories = 3;
  o.steps = 4;
  o.nx = o.ny = 6;
  return generate_dataset(o);
}

}  // namespace

TEST_CASE("write/read round trip") {
  for (const std::string c : {"gray-scott", "advdiff"}) {
    const Dataset ds = small_dataset(c);
    const fs::path a = scratch("a_" + c), b = scratch("b_" + c);
    write_dataset(a, ds);
    const Dataset back = read_dataset(a);
    CHECK(to_json(back.meta) == to_json(ds.meta));
    REQUIRE(back.trajectories.size() == ds.trajectories.size());
    for (std::size_t i = 0; i < ds.trajectories.size(); ++i) {
      const Trajectory& x = ds.trajectories[i];
      const Trajectory& y = back.trajectories[i];
      CHECK(y.mesh.cells == x.mesh.cells);
      CHECK(y.mesh.node_types == x.mesh.node_types);
      CHECK(y.mesh.positions == x.mesh.positions.cast<float>().cast<double>());
      for (std::size_t k = 0; k < x.fields.size(); ++k) {
        for (int t = 0; t < x.steps(); ++t) CHECK(y.fields[k][t] == x.fields[k][t].cast<float>().cast<double>());
      }
    }
    // a second write of what was read is byte-identical
    write_dataset(b, back);
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
      if (!entry.is_regular_file()) continue;
      const fs::path rel = fs::relative(entry.path(), a);
      CHECK_MESSAGE(read_file_bytes(entry.path()) == read_file_bytes(b / rel), rel.string());
    }
    fs::remove_all(a);
    fs::remove_all(b);
  }
}

TEST_CASE("stored floats are little-endian float32") {
  const Dataset ds = small_dataset("gray-scott");
  const fs::path d = scratch("layout");
  write_dataset(d, ds);
  const std::vector<char> bytes = read_file_bytes(d / "traj_0" / "pos.f32le");
  REQUIRE(bytes.size() == static_cast<std::size_t>(ds.meta.num_nodes * ds.meta.dim * 4));
  // reassemble the second coordinate of node 1 by hand
  std::uint32_t bits = 0;
  for (int b = 3; b >= 0; --b) bits = (bits << 8) | static_cast<unsigned char>(bytes[(1 * 2 + 1) * 4 + b]);
  float v;
  std::memcpy(&v, &bits, 4);
  CHECK(v == static_cast<float>(ds.trajectories[0].mesh.positions(1, 1)));
  fs::remove_all(d);
}

TEST_CASE("truncated or missing arrays are rejected") {
  const Dataset ds = small_dataset("advdiff");
  const fs::path d = scratch("trunc");
  write_dataset(d, ds);
  const fs::path f = d / "traj_1" / "concentration.f32le";
  std::vector<char> bytes = read_file_bytes(f);
  bytes.pop_back();
  write_file_bytes(f, bytes);
  const DatasetMeta meta = read_meta(d);
  CHECK_NOTHROW(read_trajectory(d, meta, 0));
  CHECK_THROWS_AS(read_trajectory(d, meta, 1), DataError);
  CHECK_THROWS_AS(read_dataset(d), DataError);
  fs::remove(f);
  CHECK_THROWS_AS(read_trajectory(d, meta, 1), DataError);
  CHECK_THROWS_AS(read_trajectory(d, meta, 7), Error);
  fs::remove_all(d);
}

TEST_CASE("bad meta is rejected") {
  const fs::path d = scratch("meta");
  fs::create_directories(d);
  CHECK_THROWS_AS(read_meta(d), DataError);
  std::ofstream(d / "meta.json") << "{ not json";
  CHECK_THROWS_AS(read_meta(d), DataError);
  std::ofstream(d / "meta.json") << R"({"case_name": "x"})";
  CHECK_THROWS_AS(read_meta(d), DataError);
  fs::remove_all(d);
}

TEST_CASE("inconsistent datasets are not written") {
  Dataset ds = small_dataset("gray-scott");
  ds.meta.num_trajectories = 5;
  CHECK_THROWS_AS(validate_dataset(ds), DataError);
  ds = small_dataset("gray-scott");
  ds.trajectories[2].fields[0].pop_back();
  CHECK_THROWS_AS(validate_dataset(ds), DataError);
  const fs::path d = scratch("invalid");
  CHECK_THROWS_AS(write_dataset(d, ds), DataError);
  fs::remove_all(d);
}

TEST_CASE("meta describes the task") {
  const Dataset gs = small_dataset("gray-scott");
  const TaskSpec t = gs.meta.task();
  CHECK(t.kind == TaskKind::kGrayScott);
  const Dataset ad = small_dataset("advdiff");
  CHECK(ad.meta.task().kind == TaskKind::kAdvectionCoupled);
  CHECK(ad.meta.periodic_box.has_value());
  CHECK(meta_from_json(to_json(ad.meta)).periodic_box->isApprox(*ad.meta.periodic_box));
  const Trajectory& tr = ad.trajectories[0];
  const auto s = tr.state(2);
  REQUIRE(s.size() == 3);
  CHECK(s[2] == tr.fields[2][2]);
}
