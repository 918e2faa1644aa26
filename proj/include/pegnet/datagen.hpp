#ifndef PEGNET_DATAGEN_HPP_
#define PEGNET_DATAGEN_HPP_

#include "pegnet/dataset.hpp"
#include "pegnet/meshgraph.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <string>

namespace pegnet {

/// Regular nx x ny grid on [0,lx) x [0,ly) (periodic, spacing l/n) or
/// [0,lx] x [0,ly] (spacing l/(n-1)). Node (i, j) has index j*nx + i; each
/// cell is split into two triangles along its (1,1) diagonal.
struct GridSpec {
  int nx = 32;
  int ny = 32;
  double lx = 1.0;
  double ly = 1.0;
  bool periodic = true;

  double hx() const { return periodic ? lx / nx : lx / (nx - 1); }
  double hy() const { return periodic ? ly / ny : ly / (ny - 1); }
  Index num_nodes() const { return static_cast<Index>(nx) * ny; }
  void validate() const;
};

/// Periodic meshes carry periodic_box = (lx, ly) and all-interior node types;
/// non-periodic boundary nodes are typed wall.
Mesh mesh_from_grid(const GridSpec& grid);

// ---------------------------------------------------------------------------
// Gray-Scott reaction-diffusion on the periodic unit square.

struct GrayScottParams {
  double Du = 2e-5;
  double Dv = 0.5e-5;
  double F = 0.055;
  double k = 0.062;
  double dt = 1.0;
  /// Saved frames per trajectory (including the initial state).
  int steps = 2000;
  int save_stride = 1;
  int nx = 32;
  int ny = 32;
  int min_blobs = 1;
  int max_blobs = 3;
  double blob_radius = 0.1;
  /// Uniform perturbation amplitude inside blobs.
  double blob_noise = 0.01;

  GridSpec grid() const { return {nx, ny, 1.0, 1.0, true}; }
  /// Throws ConfigError on bad values or dt above 0.9 * h^2 / (4 max(Du, Dv)).
  void validate() const;
};

struct GrayScottState {
  Eigen::VectorXd u;
  Eigen::VectorXd v;
};

/// u = 1, v = 0 with seeded circular blobs (u ~ 0.5, v ~ 0.25).
GrayScottState gray_scott_initial(const GrayScottParams& params, std::uint64_t seed);
/// One explicit Euler step with the 5-point periodic Laplacian.
GrayScottState gray_scott_step(const GrayScottState& s, const GrayScottParams& params);
/// Fields u, v for params.steps frames starting at `init`.
Trajectory gray_scott_rollout(const GrayScottParams& params, const GrayScottState& init);

// ---------------------------------------------------------------------------
// Taylor-Green vortex and scalar transport on the periodic box [0, 2pi)^2.

/// Analytic flow: velocity (x, y, t) and pressure (x, y, t), rho = 1.
struct FlowSource {
  std::function<Eigen::Vector2d(double, double, double)> velocity;
  std::function<double(double, double, double)> pressure;
  /// Upper bound of |v| over space at t >= 0 (for the CFL check).
  double max_speed = 0.0;

  static FlowSource taylor_green(double nu, double amplitude);
  static FlowSource still();
};

struct TaylorGreenFields {
  Tensor velocity;  // N x 2
  Tensor pressure;  // N x 1
};

/// v = A (sin x cos y, -cos x sin y) e^{-2 nu t}, p = A^2/4 (cos 2x + cos 2y) e^{-4 nu t}.
TaylorGreenFields taylor_green_fields(double nu, double t, const Tensor& positions, double amplitude = 1.0);

struct FluidParams {
  double nu = 0.01;
  double rho = 1.0;
  double D = 0.01;
  double dt = 0.05;
  /// Saved frames per trajectory (including the initial state).
  int steps = 300;
  int nx = 32;
  int ny = 32;
  double amplitude = 1.0;
  /// Per-trajectory amplitude is drawn from [amplitude_min, amplitude_max].
  double amplitude_min = 0.5;
  double amplitude_max = 1.5;
  double blob_sigma = 0.5;

  GridSpec grid() const;
  void validate() const;
};

/// Gaussian blob of width blob_sigma at a seeded center (periodic distance).
Eigen::VectorXd gaussian_blob(const GridSpec& grid, double sigma, std::uint64_t seed);

/// Semi-Lagrangian advection (midpoint backtrace, bilinear periodic
/// interpolation) followed by one explicit diffusion step. Fields velocity,
/// pressure, concentration. Throws ConfigError when max|v| dt / h > 1 or
/// D dt (1/hx^2 + 1/hy^2) > 1/2.
Trajectory advect_diffuse_rollout(const FluidParams& params, const Eigen::VectorXd& init_c, const FlowSource& flow);

/// Fields velocity, pressure sampled from the analytic vortex at t = n dt.
Trajectory taylor_green_rollout(const FluidParams& params, const FlowSource& flow);

/// Bilinear periodic interpolation of a grid field at (x, y).
double bilinear_periodic(const Eigen::VectorXd& f, const GridSpec& grid, double x, double y);

// ---------------------------------------------------------------------------
// Ground-truth smallness checks.

/// A ground-truth diagnostic and the a-priori discretization bound it must stay under.
struct GtCheck {
  double value = 0.0;
  double threshold = 0.0;
  bool ok() const { return value <= threshold; }
};

/// DVE of the analytic vortex sampled on `graph` at time t. The threshold is
/// the Taylor bound: per node, |mean_j d.J_i d| + mean_j M2 |d|^2 / 2 with
/// M2 = 2 sqrt(2) A e^{-2 nu t}, rms over nodes.
GtCheck taylor_green_divergence_check(const MeshGraph& graph, double nu, double amplitude, double t);

/// MCE of an advection trajectory, rms over consecutive frame pairs. The
/// threshold bounds each residual by |dc_i| + sum_j |d_ij| G with G a grid
/// estimate of max |grad((v.d) c)| for the vortex of amplitude A, frame spacing dt.
GtCheck advection_mass_check(const Trajectory& trajectory, const MeshGraph& graph, const GridSpec& grid,
                             double nu, double amplitude, double dt);

// ---------------------------------------------------------------------------
// Whole datasets.

struct GenOptions {
  std::string case_name = "gray-scott";
  int trajectories = 1;
  int steps = 300;
  std::uint64_t seed = 0;
  int nx = 32;
  int ny = 32;
};

/// Seeded dataset of the named case with normalization statistics and
/// ground-truth diagnostics in meta.extra. Throws ConfigError on bad options.
Dataset generate_dataset(const GenOptions& options);

/// Subsystem seed derivation (splitmix64 of seed and stream id).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace pegnet

#endif  // PEGNET_DATAGEN_HPP_
