#include "pegnet/param_store.hpp"

#include "pegnet/errors.hpp"

namespace pegnet {

ParamStore::Id ParamStore::add(std::string name, Tensor init) {
  if (index_.contains(name)) {
    throw ConfigError("duplicate parameter name: " + name);
  }
  const Id id = entries_.size();
  index_.emplace(name, id);
  entries_.push_back({std::move(name), std::move(init)});
  return id;
}

std::optional<ParamStore::Id> ParamStore::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Index ParamStore::numel() const {
  Index n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

Eigen::VectorXd ParamStore::flatten() const {
  Eigen::VectorXd flat(numel());
  Index offset = 0;
  for (const auto& e : entries_) {
    flat.segment(offset, e.value.size()) = e.value.reshaped<Eigen::RowMajor>();
    offset += e.value.size();
  }
  return flat;
}

void ParamStore::assign_flat(const Eigen::Ref<const Eigen::VectorXd>& flat) {
  if (flat.size() != numel()) {
    throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) +
                     " entries, store holds " + std::to_string(numel()));
  }
  Index offset = 0;
  for (auto& e : entries_) {
    e.value.reshaped<Eigen::RowMajor>() = flat.segment(offset, e.value.size());
    offset += e.value.size();
  }
}

Gradients ParamStore::zeros_like() const {
  Gradients g;
  g.reserve(entries_.size());
  for (const auto& e : entries_) g.push_back(Tensor::Zero(e.value.rows(), e.value.cols()));
  return g;
}

Eigen::VectorXd ParamStore::flatten(const Gradients& grads) {
  Index n = 0;
  for (const auto& g : grads) n += g.size();
  Eigen::VectorXd flat(n);
  Index offset = 0;
  for (const auto& g : grads) {
    flat.segment(offset, g.size()) = g.reshaped<Eigen::RowMajor>();
    offset += g.size();
  }
  return flat;
}

void accumulate(Gradients& a, const Gradients& b) {
  if (a.size() != b.size()) throw ShapeError("gradient set size mismatch");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].rows() != b[i].rows() || a[i].cols() != b[i].cols()) {
      throw ShapeError("gradient tensor shape mismatch");
    }
    a[i] += b[i];
  }
}

}  // namespace pegnet
