#include "pegnet/dataset.hpp"

#include "pegnet/errors.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace pegnet {

namespace fs = std::filesystem;

namespace {

template <typename T>
T byteswap_value(T value) {
  char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

template <typename T>
void append_le(std::vector<char>& out, T value) {
  if constexpr (std::endian::native == std::endian::big) value = byteswap_value(value);
  const auto* p = reinterpret_cast<const char*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

template <typename T>
T load_le(const char* p) {
  T value;
  std::memcpy(&value, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) value = byteswap_value(value);
  return value;
}

std::vector<char> read_exact(const fs::path& path, std::size_t expected) {
  std::vector<char> bytes = read_file_bytes(path);
  if (bytes.size() != expected) {
    throw DataError(path.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                    std::to_string(bytes.size()));
  }
  return bytes;
}

fs::path traj_dir(const fs::path& dir, int i) { return dir / ("traj_" + std::to_string(i)); }

}  // namespace

TaskSpec DatasetMeta::task() const {
  TaskSpec t = TaskSpec::make(task_from_string(case_name), dim);
  if (t.fields.size() != fields.size()) throw DataError("dataset fields do not match case " + case_name);
  for (std::size_t k = 0; k < fields.size(); ++k) {
    if (fields[k].name != t.fields[k].name || fields[k].width != t.fields[k].width) {
      throw DataError("dataset field " + fields[k].name + " does not match case " + case_name);
    }
  }
  return t;
}

std::vector<Tensor> Trajectory::state(int t) const {
  std::vector<Tensor> s;
  s.reserve(fields.size());
  for (const auto& f : fields) s.push_back(f.at(static_cast<std::size_t>(t)));
  return s;
}

nlohmann::json to_json(const DatasetMeta& meta) {
  nlohmann::json fields = nlohmann::json::array();
  for (const auto& f : meta.fields) fields.push_back({{"name", f.name}, {"width", f.width}});
  nlohmann::json j = {{"case", meta.case_name},
                      {"dim", meta.dim},
                      {"dt", meta.dt},
                      {"steps", meta.steps},
                      {"num_nodes", meta.num_nodes},
                      {"num_cells", meta.num_cells},
                      {"cell_arity", meta.cell_arity},
                      {"fields", fields},
                      {"num_trajectories", meta.num_trajectories}};
  j["normalization"] = meta.normalization ? to_json(*meta.normalization) : nlohmann::json(nullptr);
  if (meta.periodic_box) {
    j["periodic_box"] = std::vector<double>(meta.periodic_box->data(), meta.periodic_box->data() + meta.periodic_box->size());
  } else {
    j["periodic_box"] = nullptr;
  }
  j["extra"] = meta.extra;
  return j;
}

DatasetMeta meta_from_json(const nlohmann::json& j) {
  try {
    DatasetMeta m;
    m.case_name = j.at("case").get<std::string>();
    m.dim = j.at("dim").get<int>();
    m.dt = j.at("dt").get<double>();
    m.steps = j.at("steps").get<int>();
    m.num_nodes = j.at("num_nodes").get<Index>();
    m.num_cells = j.at("num_cells").get<Index>();
    m.cell_arity = j.at("cell_arity").get<int>();
    for (const auto& f : j.at("fields")) m.fields.push_back({f.at("name").get<std::string>(), f.at("width").get<int>()});
    m.num_trajectories = j.at("num_trajectories").get<int>();
    if (j.contains("normalization") && !j["normalization"].is_null()) {
      m.normalization = normalizer_from_json(j["normalization"]);
    }
    if (j.contains("periodic_box") && !j["periodic_box"].is_null()) {
      const auto box = j["periodic_box"].get<std::vector<double>>();
      m.periodic_box = Eigen::Map<const Eigen::VectorXd>(box.data(), static_cast<Index>(box.size()));
    }
    if (j.contains("extra")) m.extra = j["extra"];
    if (m.dim != 2 && m.dim != 3) throw DataError("meta: dim must be 2 or 3");
    if (m.steps < 0 || m.num_nodes < 0 || m.num_cells < 0 || m.num_trajectories < 0) {
      throw DataError("meta: negative count");
    }
    if (m.cell_arity != 3 && m.cell_arity != 4) throw DataError("meta: cell_arity must be 3 or 4");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("meta.json: ") + e.what());
  }
}

std::vector<char> read_file_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return std::vector<char>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file_bytes(const fs::path& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

void validate_dataset(const Dataset& ds) {
  const DatasetMeta& m = ds.meta;
  if (static_cast<int>(ds.trajectories.size()) != m.num_trajectories) {
    throw DataError("trajectory count does not match meta");
  }
  for (const auto& t : ds.trajectories) {
    if (t.mesh.num_nodes() != m.num_nodes || t.mesh.dim() != m.dim || t.mesh.num_cells() != m.num_cells ||
        (m.num_cells > 0 && t.mesh.cell_arity() != m.cell_arity)) {
      throw DataError("trajectory mesh does not match meta");
    }
    if (t.fields.size() != m.fields.size()) throw DataError("trajectory field count does not match meta");
    for (std::size_t k = 0; k < m.fields.size(); ++k) {
      if (static_cast<int>(t.fields[k].size()) != m.steps) throw DataError("trajectory step count does not match meta");
      for (const auto& x : t.fields[k]) {
        if (x.rows() != m.num_nodes || x.cols() != m.fields[k].width) {
          throw DataError("field " + m.fields[k].name + " has the wrong shape");
        }
      }
    }
  }
}

void write_dataset(const fs::path& dir, const Dataset& ds) {
  validate_dataset(ds);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "meta.json", std::ios::trunc);
    if (!out) throw DataError("cannot write meta.json in " + dir.string());
    out << to_json(ds.meta).dump(2) << '\n';
  }
  for (int i = 0; i < ds.meta.num_trajectories; ++i) {
    const Trajectory& t = ds.trajectories[static_cast<std::size_t>(i)];
    const fs::path td = traj_dir(dir, i);
    fs::create_directories(td);

    std::vector<char> buf;
    for (Index c = 0; c < t.mesh.num_cells(); ++c) {
      for (Index a = 0; a < t.mesh.cell_arity(); ++a) append_le<std::int32_t>(buf, t.mesh.cells(c, a));
    }
    write_file_bytes(td / "cells.i32le", buf);

    buf.clear();
    for (Index n = 0; n < t.mesh.num_nodes(); ++n) {
      for (Index d = 0; d < t.mesh.dim(); ++d) append_le<float>(buf, static_cast<float>(t.mesh.positions(n, d)));
    }
    write_file_bytes(td / "pos.f32le", buf);

    buf.assign(t.mesh.node_types.begin(), t.mesh.node_types.end());
    write_file_bytes(td / "node_type.u8", buf);

    for (std::size_t k = 0; k < ds.meta.fields.size(); ++k) {
      buf.clear();
      buf.reserve(static_cast<std::size_t>(ds.meta.steps * ds.meta.num_nodes * ds.meta.fields[k].width) * 4);
      for (const Tensor& x : t.fields[k]) {
        for (Index n = 0; n < x.rows(); ++n) {
          for (Index c = 0; c < x.cols(); ++c) append_le<float>(buf, static_cast<float>(x(n, c)));
        }
      }
      write_file_bytes(td / (ds.meta.fields[k].name + ".f32le"), buf);
    }
  }
}

DatasetMeta read_meta(const fs::path& dir) {
  const std::vector<char> bytes = read_file_bytes(dir / "meta.json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(bytes.begin(), bytes.end());
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / "meta.json").string() + ": " + e.what());
  }
  return meta_from_json(j);
}

Trajectory read_trajectory(const fs::path& dir, const DatasetMeta& m, int index) {
  if (index < 0 || index >= m.num_trajectories) throw RangeError("trajectory index out of range");
  const fs::path td = traj_dir(dir, index);
  const auto n = static_cast<std::size_t>(m.num_nodes);
  Trajectory t;

  const auto cells = read_exact(td / "cells.i32le", static_cast<std::size_t>(m.num_cells) * m.cell_arity * 4);
  t.mesh.cells.resize(m.num_cells, m.cell_arity);
  for (Index c = 0; c < m.num_cells; ++c) {
    for (Index a = 0; a < m.cell_arity; ++a) {
      t.mesh.cells(c, a) = load_le<std::int32_t>(cells.data() + 4 * (c * m.cell_arity + a));
    }
  }

  const auto pos = read_exact(td / "pos.f32le", n * static_cast<std::size_t>(m.dim) * 4);
  t.mesh.positions.resize(m.num_nodes, m.dim);
  for (Index i = 0; i < m.num_nodes; ++i) {
    for (Index d = 0; d < m.dim; ++d) t.mesh.positions(i, d) = load_le<float>(pos.data() + 4 * (i * m.dim + d));
  }

  const auto types = read_exact(td / "node_type.u8", n);
  t.mesh.node_types.assign(types.begin(), types.end());
  t.mesh.periodic_box = m.periodic_box;
  try {
    validate(t.mesh);
  } catch (const StructuralError& e) {
    throw DataError(td.string() + ": " + e.what());
  }

  for (const auto& f : m.fields) {
    const std::size_t per_step = n * static_cast<std::size_t>(f.width);
    const auto raw = read_exact(td / (f.name + ".f32le"), per_step * static_cast<std::size_t>(m.steps) * 4);
    std::vector<Tensor> series;
    series.reserve(static_cast<std::size_t>(m.steps));
    for (int s = 0; s < m.steps; ++s) {
      Tensor x(m.num_nodes, f.width);
      const char* base = raw.data() + 4 * per_step * static_cast<std::size_t>(s);
      for (Index i = 0; i < m.num_nodes; ++i) {
        for (Index c = 0; c < f.width; ++c) x(i, c) = load_le<float>(base + 4 * (i * f.width + c));
      }
      series.push_back(std::move(x));
    }
    t.fields.push_back(std::move(series));
  }
  return t;
}

Dataset read_dataset(const fs::path& dir) {
  Dataset ds;
  ds.meta = read_meta(dir);
  for (int i = 0; i < ds.meta.num_trajectories; ++i) ds.trajectories.push_back(read_trajectory(dir, ds.meta, i));
  return ds;
}

}  // namespace pegnet
