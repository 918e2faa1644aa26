#include <doctest.h>

#include "pegnet/errors.hpp"
#include "pegnet/verify.hpp"

#include <algorithm>
#include <numeric>

using namespace pegnet;

TEST_CASE("every suite passes") {
  for (const auto& name : suite_names()) {
    const SuiteReport r = run_suite(name);
    INFO(r.text());
    CHECK(r.suite == name);
    CHECK_FALSE(r.checks.empty());
    CHECK(r.passed());
  }
}

TEST_CASE("suites hold on other seeds") {
  const SuiteReport g = gradcheck_suite(5, 101);
  INFO(g.text());
  CHECK(g.passed());
  const SuiteReport h = hierarchy_suite(20, 102);
  INFO(h.text());
  CHECK(h.passed());
  const SuiteReport e = equivariance_suite(10, 103);
  INFO(e.text());
  CHECK(e.passed());
  const SuiteReport c = coupling_suite(30, 5, 104);
  INFO(c.text());
  CHECK(c.passed());
}

TEST_CASE("unknown suite") {
  CHECK_THROWS_AS(run_suite("everything"), ConfigError);
  const auto names = suite_names();
  for (const char* n : {"gradcheck", "conservation", "hierarchy", "coupling", "equivariance"}) {
    CHECK(std::find(names.begin(), names.end(), n) != names.end());
  }
}

TEST_CASE("finite differences of a known function") {
  // f = sum(x * x) + sum(w * x): df/dx = 2x + w, df/dw = x
  ParamStore ps;
  ps.add("w", Tensor::Constant(2, 3, 0.5));
  std::mt19937_64 rng(3);
  const Tensor x = random_tensor(rng, 2, 3);
  const FdReport r = finite_difference_check(
      [](Tape& t, std::span<const Var> in) {
        return t.add(t.sum(t.mul(in[0], in[0])), t.sum(t.mul(t.param(0), in[0])));
      },
      {x}, &ps);
  CHECK(r.checked == 12);
  CHECK(r.max_rel_error < 1e-8);
}

TEST_CASE("permutation helpers") {
  std::mt19937_64 rng(7);
  const std::vector<int> p = random_permutation(rng, 9);
  std::vector<int> sorted = p;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> iota(9);
  std::iota(iota.begin(), iota.end(), 0);
  CHECK(sorted == iota);

  const Tensor x = random_tensor(rng, 9, 2);
  const Tensor y = permute_rows(x, p);
  for (int i = 0; i < 9; ++i) CHECK(y.row(p[static_cast<std::size_t>(i)]) == x.row(i));

  const Mesh m = random_mesh(rng);
  const std::vector<int> q = random_permutation(rng, static_cast<int>(m.num_nodes()));
  const Mesh pm = permute_mesh(m, q);
  CHECK(pm.positions == permute_rows(m.positions, q));
  for (Index c = 0; c < m.cells.rows(); ++c) {
    for (Index a = 0; a < m.cells.cols(); ++a) CHECK(pm.cells(c, a) == q[static_cast<std::size_t>(m.cells(c, a))]);
  }
  for (std::size_t i = 0; i < q.size(); ++i) CHECK(pm.node_types[static_cast<std::size_t>(q[i])] == m.node_types[i]);
}
