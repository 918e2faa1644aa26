#include "pegnet/datagen.hpp"

#include "pegnet/errors.hpp"
#include "pegnet/physloss.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace pegnet {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

inline int wrap(int i, int n) { return ((i % n) + n) % n; }

// Periodic 5-point Laplacian of a grid field stored row-major (j * nx + i).
Eigen::VectorXd laplacian(const Eigen::VectorXd& f, const GridSpec& g) {
  const double ax = 1.0 / (g.hx() * g.hx());
  const double ay = 1.0 / (g.hy() * g.hy());
  Eigen::VectorXd out(f.size());
  for (int j = 0; j < g.ny; ++j) {
    const int jm = wrap(j - 1, g.ny), jp = wrap(j + 1, g.ny);
    for (int i = 0; i < g.nx; ++i) {
      const int im = wrap(i - 1, g.nx), ip = wrap(i + 1, g.nx);
      const double c = f(j * g.nx + i);
      out(j * g.nx + i) = ax * (f(j * g.nx + ip) + f(j * g.nx + im) - 2.0 * c) +
                          ay * (f(jp * g.nx + i) + f(jm * g.nx + i) - 2.0 * c);
    }
  }
  return out;
}

// Bilinear sample at fractional grid indices (fi, fj), periodic.
double sample_index(const Eigen::VectorXd& f, const GridSpec& g, double fi, double fj) {
  const double i0f = std::floor(fi), j0f = std::floor(fj);
  const double a = fi - i0f, b = fj - j0f;
  const int i0 = wrap(static_cast<int>(i0f), g.nx), j0 = wrap(static_cast<int>(j0f), g.ny);
  const int i1 = wrap(i0 + 1, g.nx), j1 = wrap(j0 + 1, g.ny);
  return (1.0 - a) * (1.0 - b) * f(j0 * g.nx + i0) + a * (1.0 - b) * f(j0 * g.nx + i1) +
         (1.0 - a) * b * f(j1 * g.nx + i0) + a * b * f(j1 * g.nx + i1);
}

Tensor column(const Eigen::VectorXd& v) { return Tensor(v); }

double periodic_delta(double d, double length) { return d - length * std::round(d / length); }

}  // namespace

void GridSpec::validate() const {
  const int min_n = periodic ? 3 : 2;
  if (nx < min_n || ny < min_n) {
    throw ConfigError("grid needs at least " + std::to_string(min_n) + " nodes per side");
  }
  if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly)) {
    throw ConfigError("grid lengths must be positive");
  }
}

Mesh mesh_from_grid(const GridSpec& g) {
  g.validate();
  Mesh mesh;
  const Index n = g.num_nodes();
  mesh.positions.resize(n, 2);
  mesh.node_types.assign(static_cast<std::size_t>(n), static_cast<std::uint8_t>(NodeType::kInterior));
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const Index id = static_cast<Index>(j) * g.nx + i;
      mesh.positions(id, 0) = i * g.hx();
      mesh.positions(id, 1) = j * g.hy();
      if (!g.periodic && (i == 0 || j == 0 || i == g.nx - 1 || j == g.ny - 1)) {
        mesh.node_types[static_cast<std::size_t>(id)] = static_cast<std::uint8_t>(NodeType::kWall);
      }
    }
  }
  const int cx = g.periodic ? g.nx : g.nx - 1;
  const int cy = g.periodic ? g.ny : g.ny - 1;
  mesh.cells.resize(2 * static_cast<Index>(cx) * cy, 3);
  Index c = 0;
  for (int j = 0; j < cy; ++j) {
    for (int i = 0; i < cx; ++i) {
      const int ip = (i + 1) % g.nx, jp = (j + 1) % g.ny;
      const auto a = j * g.nx + i, b = j * g.nx + ip, cc = jp * g.nx + i, d = jp * g.nx + ip;
      mesh.cells.row(c++) << a, b, d;
      mesh.cells.row(c++) << a, d, cc;
    }
  }
  if (g.periodic) mesh.periodic_box = Eigen::Vector2d(g.lx, g.ly);
  return mesh;
}

// --- Gray-Scott -------------------------------------------------------------

void GrayScottParams::validate() const {
  if (!(Du > 0.0) || !(Dv > 0.0)) throw ConfigError("Gray-Scott diffusion coefficients must be > 0");
  if (!(F >= 0.0) || !(k >= 0.0)) throw ConfigError("Gray-Scott F and k must be >= 0");
  if (!(dt > 0.0)) throw ConfigError("Gray-Scott dt must be > 0");
  if (steps < 1 || save_stride < 1) throw ConfigError("Gray-Scott steps and save_stride must be >= 1");
  if (min_blobs < 0 || max_blobs < min_blobs) throw ConfigError("Gray-Scott blob count range is invalid");
  if (!(blob_radius > 0.0) || !(blob_noise >= 0.0)) throw ConfigError("Gray-Scott blob shape is invalid");
  grid().validate();
  const double h = std::min(grid().hx(), grid().hy());
  const double limit = 0.9 * h * h / (4.0 * std::max(Du, Dv));
  if (dt > limit) {
    throw ConfigError("Gray-Scott dt " + std::to_string(dt) + " exceeds stability limit " + std::to_string(limit));
  }
}

GrayScottState gray_scott_initial(const GrayScottParams& p, std::uint64_t seed) {
  p.validate();
  const GridSpec g = p.grid();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> count(p.min_blobs, p.max_blobs);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> noise(-1.0, 1.0);

  const int nblobs = count(rng);
  std::vector<Eigen::Vector2d> centers;
  for (int b = 0; b < nblobs; ++b) {
    const double cx = unit(rng) * g.lx;
    const double cy = unit(rng) * g.ly;
    centers.emplace_back(cx, cy);
  }

  GrayScottState s{Eigen::VectorXd::Ones(g.num_nodes()), Eigen::VectorXd::Zero(g.num_nodes())};
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double x = i * g.hx(), y = j * g.hy();
      bool inside = false;
      for (const auto& c : centers) {
        const double dx = periodic_delta(x - c.x(), g.lx), dy = periodic_delta(y - c.y(), g.ly);
        inside = inside || (dx * dx + dy * dy <= p.blob_radius * p.blob_radius);
      }
      if (!inside) continue;
      const Index id = static_cast<Index>(j) * g.nx + i;
      const double du = p.blob_noise * noise(rng);
      const double dv = p.blob_noise * noise(rng);
      s.u(id) = 0.5 + du;
      s.v(id) = 0.25 + dv;
    }
  }
  return s;
}

GrayScottState gray_scott_step(const GrayScottState& s, const GrayScottParams& p) {
  const GridSpec g = p.grid();
  const Eigen::VectorXd lu = laplacian(s.u, g);
  const Eigen::VectorXd lv = laplacian(s.v, g);
  const Eigen::ArrayXd uvv = s.u.array() * s.v.array().square();
  GrayScottState next;
  next.u = s.u.array() + p.dt * (p.Du * lu.array() - uvv + p.F * (1.0 - s.u.array()));
  next.v = s.v.array() + p.dt * (p.Dv * lv.array() + uvv - (p.F + p.k) * s.v.array());
  return next;
}

Trajectory gray_scott_rollout(const GrayScottParams& p, const GrayScottState& init) {
  p.validate();
  const GridSpec g = p.grid();
  if (init.u.size() != g.num_nodes() || init.v.size() != g.num_nodes()) {
    throw ShapeError("Gray-Scott initial state does not match grid");
  }
  Trajectory t;
  t.mesh = mesh_from_grid(g);
  t.fields.resize(2);
  GrayScottState s = init;
  for (int f = 0; f < p.steps; ++f) {
    if (f > 0) {
      for (int k = 0; k < p.save_stride; ++k) s = gray_scott_step(s, p);
    }
    t.fields[0].push_back(column(s.u));
    t.fields[1].push_back(column(s.v));
  }
  return t;
}

// --- Taylor-Green and transport ----------------------------------------------

FlowSource FlowSource::taylor_green(double nu, double amplitude) {
  FlowSource f;
  f.velocity = [nu, amplitude](double x, double y, double t) {
    const double decay = amplitude * std::exp(-2.0 * nu * t);
    return Eigen::Vector2d(decay * std::sin(x) * std::cos(y), -decay * std::cos(x) * std::sin(y));
  };
  f.pressure = [nu, amplitude](double x, double y, double t) {
    return 0.25 * amplitude * amplitude * (std::cos(2.0 * x) + std::cos(2.0 * y)) * std::exp(-4.0 * nu * t);
  };
  f.max_speed = std::abs(amplitude);
  return f;
}

FlowSource FlowSource::still() {
  FlowSource f;
  f.velocity = [](double, double, double) { return Eigen::Vector2d::Zero().eval(); };
  f.pressure = [](double, double, double) { return 0.0; };
  f.max_speed = 0.0;
  return f;
}

TaylorGreenFields taylor_green_fields(double nu, double t, const Tensor& positions, double amplitude) {
  if (positions.cols() != 2) throw ShapeError("Taylor-Green fields need 2D positions");
  const FlowSource flow = FlowSource::taylor_green(nu, amplitude);
  TaylorGreenFields out{Tensor(positions.rows(), 2), Tensor(positions.rows(), 1)};
  for (Index i = 0; i < positions.rows(); ++i) {
    out.velocity.row(i) = flow.velocity(positions(i, 0), positions(i, 1), t).transpose();
    out.pressure(i, 0) = flow.pressure(positions(i, 0), positions(i, 1), t);
  }
  return out;
}

GridSpec FluidParams::grid() const { return {nx, ny, kTwoPi, kTwoPi, true}; }

void FluidParams::validate() const {
  if (!(nu >= 0.0) || !(D >= 0.0)) throw ConfigError("viscosity and diffusion must be >= 0");
  if (rho != 1.0) throw ConfigError("density is fixed to 1");
  if (!(dt > 0.0)) throw ConfigError("fluid dt must be > 0");
  if (steps < 1) throw ConfigError("fluid steps must be >= 1");
  if (!(amplitude_min <= amplitude_max)) throw ConfigError("amplitude range is invalid");
  if (!(blob_sigma > 0.0)) throw ConfigError("blob width must be > 0");
  grid().validate();
}

Eigen::VectorXd gaussian_blob(const GridSpec& g, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double cx = unit(rng) * g.lx;
  const double cy = unit(rng) * g.ly;
  Eigen::VectorXd c(g.num_nodes());
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const double dx = periodic_delta(i * g.hx() - cx, g.lx), dy = periodic_delta(j * g.hy() - cy, g.ly);
      c(j * g.nx + i) = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
    }
  }
  return c;
}

double bilinear_periodic(const Eigen::VectorXd& f, const GridSpec& g, double x, double y) {
  return sample_index(f, g, x / g.hx(), y / g.hy());
}

namespace {

void append_flow_frame(Trajectory& t, const GridSpec& g, const FlowSource& flow, double time) {
  Tensor v(g.num_nodes(), 2), p(g.num_nodes(), 1);
  for (int j = 0; j < g.ny; ++j) {
    for (int i = 0; i < g.nx; ++i) {
      const Index id = static_cast<Index>(j) * g.nx + i;
      const double x = i * g.hx(), y = j * g.hy();
      v.row(id) = flow.velocity(x, y, time).transpose();
      p(id, 0) = flow.pressure(x, y, time);
    }
  }
  t.fields[0].push_back(std::move(v));
  t.fields[1].push_back(std::move(p));
}

}  // namespace

Trajectory advect_diffuse_rollout(const FluidParams& p, const Eigen::VectorXd& init_c, const FlowSource& flow) {
  p.validate();
  const GridSpec g = p.grid();
  if (init_c.size() != g.num_nodes()) throw ShapeError("initial concentration does not match grid");
  const double h = std::min(g.hx(), g.hy());
  if (flow.max_speed * p.dt / h > 1.0) throw ConfigError("advection CFL number exceeds 1");
  const double diff = p.D * p.dt * (1.0 / (g.hx() * g.hx()) + 1.0 / (g.hy() * g.hy()));
  if (diff > 0.5) throw ConfigError("explicit diffusion number exceeds 1/2");

  Trajectory t;
  t.mesh = mesh_from_grid(g);
  t.fields.resize(3);
  Eigen::VectorXd c = init_c;
  for (int n = 0; n < p.steps; ++n) {
    if (n > 0) {
      // Backtrace from t_n to t_{n-1}, working in grid-index space so that a
      // zero displacement samples the node value exactly.
      const double t1 = n * p.dt, tm = t1 - 0.5 * p.dt;
      Eigen::VectorXd star(g.num_nodes());
      for (int j = 0; j < g.ny; ++j) {
        for (int i = 0; i < g.nx; ++i) {
          const double x = i * g.hx(), y = j * g.hy();
          const Eigen::Vector2d v1 = flow.velocity(x, y, t1);
          const Eigen::Vector2d vm = flow.velocity(x - 0.5 * p.dt * v1.x(), y - 0.5 * p.dt * v1.y(), tm);
          star(j * g.nx + i) = sample_index(c, g, i - p.dt * vm.x() / g.hx(), j - p.dt * vm.y() / g.hy());
        }
      }
      c = star + p.dt * p.D * laplacian(star, g);
    }
    append_flow_frame(t, g, flow, n * p.dt);
    t.fields[2].push_back(column(c));
  }
  return t;
}

Trajectory taylor_green_rollout(const FluidParams& p, const FlowSource& flow) {
  p.validate();
  const GridSpec g = p.grid();
  Trajectory t;
  t.mesh = mesh_from_grid(g);
  t.fields.resize(2);
  for (int n = 0; n < p.steps; ++n) append_flow_frame(t, g, flow, n * p.dt);
  return t;
}

// --- ground-truth checks -----------------------------------------------------

GtCheck taylor_green_divergence_check(const MeshGraph& graph, double nu, double amplitude, double t) {
  if (graph.dim() != 2) throw ShapeError("Taylor-Green check needs a 2D graph");
  const TaylorGreenFields f = taylor_green_fields(nu, t, graph.positions, amplitude);
  const Index n = graph.num_nodes();
  GtCheck check;
  check.value = std::sqrt(l_div(f.velocity, graph));

  const double a = amplitude * std::exp(-2.0 * nu * t);
  const double m2 = 2.0 * std::sqrt(2.0) * std::abs(a);
  const std::vector<int> deg = graph.degrees();
  Eigen::VectorXd first = Eigen::VectorXd::Zero(n), second = Eigen::VectorXd::Zero(n);
  const EdgeSet& e = graph.edges;
  for (Index k = 0; k < e.size(); ++k) {
    const auto i = e.src[k];
    const double x = graph.positions(i, 0), y = graph.positions(i, 1);
    Eigen::Matrix2d jac;
    jac << std::cos(x) * std::cos(y), -std::sin(x) * std::sin(y), std::sin(x) * std::sin(y), -std::cos(x) * std::cos(y);
    jac *= a;
    const Eigen::Vector2d d = e.disp.row(k).transpose();
    const double len = e.dist(k, 0);
    first(i) += (d / len).dot(jac * d) / deg[i];
    second(i) += 0.5 * m2 * len * len / deg[i];
  }
  double acc = 0.0;
  for (Index i = 0; i < n; ++i) acc += std::pow(std::abs(first(i)) + second(i), 2);
  check.threshold = n > 0 ? std::sqrt(acc / static_cast<double>(n)) : 0.0;
  return check;
}

GtCheck advection_mass_check(const Trajectory& traj, const MeshGraph& graph, const GridSpec& g, double nu,
                             double amplitude, double dt) {
  if (traj.fields.size() != 3) throw ShapeError("advection check needs velocity, pressure, concentration");
  const int steps = traj.steps();
  const Index n = graph.num_nodes();
  if (steps < 2 || n == 0) return {};
  const std::vector<int> deg = graph.degrees();
  Eigen::VectorXd edge_len_sum = Eigen::VectorXd::Zero(n);
  for (Index k = 0; k < graph.edges.size(); ++k) edge_len_sum(graph.edges.src[k]) += graph.edges.dist(k, 0);

  double value_acc = 0.0, bound_acc = 0.0;
  for (int s = 0; s + 1 < steps; ++s) {
    const Tensor& c0 = traj.fields[2][static_cast<std::size_t>(s)];
    const Tensor& c1 = traj.fields[2][static_cast<std::size_t>(s + 1)];
    const Tensor& v1 = traj.fields[0][static_cast<std::size_t>(s + 1)];
    value_acc += node_mass_residual(c0, c1, v1, graph).squaredNorm();

    // Lipschitz bound of (v . d) c along an edge: |J| |c| + |v| |grad c|.
    double gx = 0.0, gy = 0.0;
    for (int j = 0; j < g.ny; ++j) {
      for (int i = 0; i < g.nx; ++i) {
        const double cij = c0(j * g.nx + i, 0);
        gx = std::max(gx, std::abs(c0(j * g.nx + wrap(i + 1, g.nx), 0) - cij) / g.hx());
        gy = std::max(gy, std::abs(c0(wrap(j + 1, g.ny) * g.nx + i, 0) - cij) / g.hy());
      }
    }
    const double a_t = std::abs(amplitude) * std::exp(-2.0 * nu * (s + 1) * dt);
    const double lip = std::sqrt(2.0) * a_t * c0.cwiseAbs().maxCoeff() + a_t * std::hypot(gx, gy);
    for (Index i = 0; i < n; ++i) {
      const double b = std::abs(c1(i, 0) - c0(i, 0)) + edge_len_sum(i) * lip;
      bound_acc += b * b;
    }
  }
  const double count = static_cast<double>(n) * (steps - 1);
  return {std::sqrt(value_acc / count), std::sqrt(bound_acc / count)};
}

// --- datasets -----------------------------------------------------------------

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

DatasetMeta base_meta(const std::string& case_name, const TaskSpec& task, const Trajectory& first, double dt,
                      int steps, int trajectories) {
  DatasetMeta m;
  m.case_name = case_name;
  m.dim = task.dim;
  m.dt = dt;
  m.steps = steps;
  m.num_nodes = first.mesh.num_nodes();
  m.num_cells = first.mesh.num_cells();
  m.cell_arity = static_cast<int>(first.mesh.cell_arity());
  for (const auto& f : task.fields) m.fields.push_back({f.name, f.width});
  m.num_trajectories = trajectories;
  m.periodic_box = first.mesh.periodic_box;
  return m;
}

double draw_amplitude(const FluidParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return std::uniform_real_distribution<double>(p.amplitude_min, p.amplitude_max)(rng);
}

}  // namespace

Dataset generate_dataset(const GenOptions& o) {
  if (o.trajectories < 1) throw ConfigError("need at least one trajectory");
  if (o.steps < 1) throw ConfigError("need at least one step");
  const TaskSpec task = TaskSpec::make(task_from_string(o.case_name), 2);
  Dataset ds;
  nlohmann::json extra = {{"seed", o.seed}, {"grid", {o.nx, o.ny}}};
  double dt = 1.0;

  if (o.case_name == "gray-scott") {
    GrayScottParams p;
    p.steps = o.steps;
    p.nx = o.nx;
    p.ny = o.ny;
    p.validate();
    dt = p.dt * p.save_stride;
    for (int i = 0; i < o.trajectories; ++i) {
      const auto init = gray_scott_initial(p, derive_seed(o.seed, static_cast<std::uint64_t>(i)));
      ds.trajectories.push_back(gray_scott_rollout(p, init));
    }
    extra["params"] = {{"Du", p.Du}, {"Dv", p.Dv}, {"F", p.F}, {"k", p.k}, {"save_stride", p.save_stride}};
  } else if (o.case_name == "advdiff" || o.case_name == "taylor-green") {
    FluidParams p;
    p.steps = o.steps;
    p.nx = o.nx;
    p.ny = o.ny;
    // Keep the advective CFL number fixed under refinement.
    p.dt = 0.05 * 32.0 / std::max(o.nx, o.ny);
    p.validate();
    dt = p.dt;
    nlohmann::json amps = nlohmann::json::array();
    nlohmann::json gt = nlohmann::json::array();
    for (int i = 0; i < o.trajectories; ++i) {
      const std::uint64_t s = derive_seed(o.seed, static_cast<std::uint64_t>(i));
      const double amp = draw_amplitude(p, s);
      const FlowSource flow = FlowSource::taylor_green(p.nu, amp);
      Trajectory t = o.case_name == "advdiff"
                         ? advect_diffuse_rollout(p, gaussian_blob(p.grid(), p.blob_sigma, derive_seed(s, 1)), flow)
                         : taylor_green_rollout(p, flow);
      const MeshGraph graph = make_graph(t.mesh);
      const GtCheck dve = taylor_green_divergence_check(graph, p.nu, amp, 0.0);
      nlohmann::json entry = {{"dve", dve.value}, {"dve_threshold", dve.threshold}};
      if (o.case_name == "advdiff") {
        const GtCheck mce = advection_mass_check(t, graph, p.grid(), p.nu, amp, p.dt);
        entry["mce"] = mce.value;
        entry["mce_threshold"] = mce.threshold;
      }
      amps.push_back(amp);
      gt.push_back(entry);
      ds.trajectories.push_back(std::move(t));
    }
    extra["params"] = {{"nu", p.nu}, {"rho", p.rho}, {"D", p.D}, {"amplitudes", amps}, {"blob_sigma", p.blob_sigma}};
    extra["gt_stats"] = gt;
  } else {
    throw ConfigError("unknown case: " + o.case_name);
  }

  ds.meta = base_meta(o.case_name, task, ds.trajectories.front(), dt, o.steps, o.trajectories);
  ds.meta.extra = extra;
  NormalizerBuilder nb(task);
  for (const auto& t : ds.trajectories) nb.add_trajectory(t.fields, dt);
  ds.meta.normalization = nb.finish();
  return ds;
}

}  // namespace pegnet
