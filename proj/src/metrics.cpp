#include "pegnet/metrics.hpp"

#include "pegnet/errors.hpp"
#include "pegnet/physloss.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace pegnet {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_shapes(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw ShapeError("metric: field shape mismatch");
}

std::string fmt(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

}  // namespace

double field_rmse(const Tensor& pred, const Tensor& truth) {
  check_shapes(pred, truth);
  if (pred.rows() == 0) return 0.0;
  return std::sqrt((pred - truth).squaredNorm() / static_cast<double>(pred.rows()));
}

double state_rmse(const std::vector<Tensor>& pred, const std::vector<Tensor>& truth) {
  if (pred.size() != truth.size() || pred.empty()) throw ShapeError("metric: field count mismatch");
  double acc = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    check_shapes(pred[k], truth[k]);
    acc += (pred[k] - truth[k]).squaredNorm();
  }
  const Index n = pred.front().rows();
  return n == 0 ? 0.0 : std::sqrt(acc / static_cast<double>(n));
}

StepMetrics step_metrics(const Trajectory& pred, const Trajectory& truth, const MeshGraph& graph,
                         const TaskSpec& task, int step) {
  if (step < 0 || step >= pred.steps() || step >= truth.steps()) throw RangeError("metric step out of range");
  StepMetrics m;
  m.step = step;
  const std::vector<Tensor> p = pred.state(step);
  m.rmse = state_rmse(p, truth.state(step));
  for (std::size_t k = 0; k < p.size(); ++k) {
    m.field_rmse.push_back(field_rmse(p[k], truth.fields[k][static_cast<std::size_t>(step)]));
  }
  const int vel = task.field_index("velocity");
  const int conc = task.field_index("concentration");
  m.dve = vel >= 0 ? std::sqrt(l_div(p[static_cast<std::size_t>(vel)], graph)) : kNaN;
  if (vel >= 0 && conc >= 0 && step >= 1) {
    const auto& c = pred.fields[static_cast<std::size_t>(conc)];
    m.mce = std::sqrt(l_mass(c[static_cast<std::size_t>(step - 1)], c[static_cast<std::size_t>(step)],
                             p[static_cast<std::size_t>(vel)], graph));
  } else {
    m.mce = kNaN;
  }
  return m;
}

std::vector<int> parse_step_list(std::string_view spec, int frames) {
  std::vector<int> out;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    const std::size_t comma = spec.find(',', pos);
    const std::string_view tok = spec.substr(pos, comma == std::string_view::npos ? spec.npos : comma - pos);
    int k = 0;
    if (tok == "last") {
      k = frames - 1;
    } else {
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), k);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || tok.empty()) {
        throw ConfigError("bad step index '" + std::string(tok) + "'");
      }
    }
    if (k < 0 || k >= frames) {
      throw RangeError("step " + std::string(tok) + " outside trajectory of " + std::to_string(frames) + " frames");
    }
    out.push_back(k);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

MetricsReport evaluate(const std::vector<Trajectory>& pred, const std::vector<Trajectory>& truth,
                       const TaskSpec& task, const std::vector<int>& steps) {
  if (pred.size() != truth.size() || pred.empty()) throw ShapeError("evaluate: trajectory count mismatch");
  MetricsReport r;
  for (const auto& f : task.fields) r.field_names.push_back(f.name);
  const std::size_t nf = task.fields.size();
  r.field_rmse_all_steps.assign(nf, 0.0);
  std::vector<StepMetrics> sums(steps.size());
  double frame_count = 0.0;

  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i].fields.size() != nf || truth[i].fields.size() != nf) throw ShapeError("evaluate: field count mismatch");
    if (pred[i].steps() != truth[i].steps()) throw ShapeError("evaluate: trajectory lengths differ");
    const MeshGraph graph = make_graph(truth[i].mesh);
    for (std::size_t s = 0; s < steps.size(); ++s) {
      StepMetrics m = step_metrics(pred[i], truth[i], graph, task, steps[s]);
      m.traj = static_cast<int>(i);
      StepMetrics& acc = sums[s];
      acc.step = m.step;
      acc.rmse += m.rmse;
      acc.dve += m.dve;
      acc.mce += m.mce;
      acc.field_rmse.resize(nf, 0.0);
      for (std::size_t k = 0; k < nf; ++k) acc.field_rmse[k] += m.field_rmse[k];
      r.per_trajectory.push_back(std::move(m));
    }
    for (int t = 1; t < truth[i].steps(); ++t) {
      for (std::size_t k = 0; k < nf; ++k) {
        r.field_rmse_all_steps[k] += field_rmse(pred[i].fields[k][static_cast<std::size_t>(t)],
                                                truth[i].fields[k][static_cast<std::size_t>(t)]);
      }
      frame_count += 1.0;
    }
  }
  const double n = static_cast<double>(pred.size());
  for (auto& acc : sums) {
    acc.traj = -1;
    acc.rmse /= n;
    acc.dve /= n;
    acc.mce /= n;
    for (auto& f : acc.field_rmse) f /= n;
    r.averaged.push_back(acc);
  }
  for (auto& f : r.field_rmse_all_steps) f = frame_count > 0 ? f / frame_count : 0.0;
  return r;
}

void write_metrics_csv(const std::filesystem::path& path, const MetricsReport& r) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "traj_id,step,rmse,dve,mce";
  for (const auto& f : r.field_names) out << ",rmse_" << f;
  out << '\n';
  auto row = [&](const StepMetrics& m) {
    out << (m.traj < 0 ? std::string("mean") : std::to_string(m.traj)) << ',' << m.step << ',' << fmt(m.rmse) << ','
        << fmt(m.dve) << ',' << fmt(m.mce);
    for (double f : m.field_rmse) out << ',' << fmt(f);
    out << '\n';
  };
  for (const auto& m : r.per_trajectory) row(m);
  for (const auto& m : r.averaged) row(m);
}

void write_channel_csv(const std::filesystem::path& path, const MetricsReport& r) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "field,rmse_all_steps\n";
  for (std::size_t k = 0; k < r.field_names.size(); ++k) out << r.field_names[k] << ',' << fmt(r.field_rmse_all_steps[k]) << '\n';
}

}  // namespace pegnet
