#include "pegnet/vtk.hpp"

#include "pegnet/errors.hpp"

#include <fstream>
#include <iomanip>
#include <sstream>

namespace fs = std::filesystem;

namespace pegnet {

int vtk_cell_type(int arity) {
  if (arity == 3) return kVtkTriangle;
  if (arity == 4) return kVtkTetra;
  throw ConfigError("no VTK cell type for arity " + std::to_string(arity));
}

void write_vtk(const fs::path& path, const Mesh& mesh, const std::vector<std::pair<std::string, Tensor>>& point_data) {
  const int type = vtk_cell_type(static_cast<int>(mesh.cell_arity()));
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17);
  out << "# vtk DataFile Version 3.0\npegnet\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  const Index n = mesh.num_nodes();
  out << "POINTS " << n << " double\n";
  for (Index i = 0; i < n; ++i) {
    for (Index d = 0; d < 3; ++d) out << (d < mesh.dim() ? mesh.positions(i, d) : 0.0) << (d < 2 ? ' ' : '\n');
  }
  const Index c = mesh.num_cells(), a = mesh.cell_arity();
  out << "CELLS " << c << ' ' << c * (a + 1) << '\n';
  for (Index k = 0; k < c; ++k) {
    out << a;
    for (Index j = 0; j < a; ++j) out << ' ' << mesh.cells(k, j);
    out << '\n';
  }
  out << "CELL_TYPES " << c << '\n';
  for (Index k = 0; k < c; ++k) out << type << '\n';
  if (point_data.empty()) return;
  out << "POINT_DATA " << n << '\n';
  for (const auto& [name, values] : point_data) {
    if (values.rows() != n) throw ShapeError("vtk: field " + name + " has wrong row count");
    if (values.cols() == 1) {
      out << "SCALARS " << name << " double 1\nLOOKUP_TABLE default\n";
      for (Index i = 0; i < n; ++i) out << values(i, 0) << '\n';
    } else if (values.cols() <= 3) {
      out << "VECTORS " << name << " double\n";
      for (Index i = 0; i < n; ++i) {
        for (Index d = 0; d < 3; ++d) out << (d < values.cols() ? values(i, d) : 0.0) << (d < 2 ? ' ' : '\n');
      }
    } else {
      throw ShapeError("vtk: field " + name + " wider than 3");
    }
  }
}

VtkData read_vtk(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  auto fail = [&](const std::string& what) { return DataError("vtk " + path.string() + ": " + what); };
  std::string line;
  for (int k = 0; k < 4; ++k) {
    if (!std::getline(in, line)) throw fail("truncated header");
  }
  if (line != "DATASET UNSTRUCTURED_GRID") throw fail("not an unstructured grid");
  VtkData d;
  std::string word;
  Index n = 0;
  auto expect = [&](const std::string& w) {
    if (!(in >> word) || word != w) throw fail("expected " + w);
  };
  expect("POINTS");
  in >> n >> word;
  d.points.resize(n, 3);
  for (Index i = 0; i < 3 * n; ++i) in >> d.points.data()[i];
  Index c = 0, total = 0;
  expect("CELLS");
  in >> c >> total;
  d.cells.resize(static_cast<std::size_t>(c));
  for (auto& cell : d.cells) {
    int a = 0;
    in >> a;
    cell.resize(static_cast<std::size_t>(a));
    for (auto& v : cell) in >> v;
  }
  expect("CELL_TYPES");
  in >> c;
  d.cell_types.resize(static_cast<std::size_t>(c));
  for (auto& t : d.cell_types) in >> t;
  if (!in) throw fail("truncated cells");
  if (!(in >> word)) return d;
  if (word != "POINT_DATA") throw fail("expected POINT_DATA");
  in >> n;
  while (in >> word) {
    std::string name, type;
    in >> name >> type;
    Tensor values;
    if (word == "SCALARS") {
      int comps = 0;
      in >> comps;
      expect("LOOKUP_TABLE");
      in >> word;
      values.resize(n, 1);
    } else if (word == "VECTORS") {
      values.resize(n, 3);
    } else {
      throw fail("unknown section " + word);
    }
    for (Index i = 0; i < values.size(); ++i) in >> values.data()[i];
    if (!in) throw fail("truncated data for " + name);
    d.point_data.emplace_back(name, std::move(values));
  }
  return d;
}

std::vector<fs::path> export_trajectory_vtk(const Trajectory& t, const DatasetMeta& meta, const fs::path& out) {
  fs::create_directories(out);
  std::vector<fs::path> written;
  Tensor types(t.mesh.num_nodes(), 1);
  for (Index i = 0; i < types.rows(); ++i) types(i, 0) = t.mesh.node_types[static_cast<std::size_t>(i)];
  for (int s = 0; s < t.steps(); ++s) {
    std::vector<std::pair<std::string, Tensor>> data{{"node_type", types}};
    for (std::size_t k = 0; k < meta.fields.size(); ++k) data.emplace_back(meta.fields[k].name, t.fields[k][static_cast<std::size_t>(s)]);
    written.push_back(out / ("step_" + std::to_string(s) + ".vtk"));
    write_vtk(written.back(), t.mesh, data);
  }
  return written;
}

}  // namespace pegnet
