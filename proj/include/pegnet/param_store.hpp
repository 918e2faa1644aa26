#ifndef PEGNET_PARAM_STORE_HPP_
#define PEGNET_PARAM_STORE_HPP_

#include "pegnet/tensor.hpp"

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pegnet {

/// Per-parameter gradient tensors, aligned with ParamStore registration order.
using Gradients = std::vector<Tensor>;

/// Flat registry of learnable tensors. Registration order is the canonical
/// order for flattening, checkpoints and the optimizer.
class ParamStore {
 public:
  using Id = std::size_t;

  /// Registers a new tensor; throws ConfigError on a duplicate name.
  Id add(std::string name, Tensor init);

  std::size_t size() const { return entries_.size(); }
  const std::string& name(Id id) const { return entries_.at(id).name; }
  Tensor& value(Id id) { return entries_.at(id).value; }
  const Tensor& value(Id id) const { return entries_.at(id).value; }
  std::optional<Id> find(std::string_view name) const;

  /// Total scalar count across all tensors.
  Index numel() const;

  /// Concatenation of every tensor in registration order (row-major inside).
  Eigen::VectorXd flatten() const;
  /// Inverse of flatten(); throws ShapeError on a length mismatch.
  void assign_flat(const Eigen::Ref<const Eigen::VectorXd>& flat);

  Gradients zeros_like() const;
  static Eigen::VectorXd flatten(const Gradients& grads);

 private:
  struct Entry {
    std::string name;
    Tensor value;
  };
  std::vector<Entry> entries_;
  std::unordered_map<std::string, Id> index_;
};

/// a += b for every tensor; shapes must match.
void accumulate(Gradients& a, const Gradients& b);

}  // namespace pegnet

#endif  // PEGNET_PARAM_STORE_HPP_
