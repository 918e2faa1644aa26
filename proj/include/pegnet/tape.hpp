#ifndef PEGNET_TAPE_HPP_
#define PEGNET_TAPE_HPP_

#include "pegnet/param_store.hpp"
#include "pegnet/tensor.hpp"

#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace pegnet {

/// Handle to a value recorded on a Tape.
struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Sparse row-combination operator: out[r] = sum_k weight[k] * in[col[k]]
/// for k in [offsets[r], offsets[r+1]). Used for restriction/interpolation
/// between hierarchy levels.
struct RowMix {
  Index in_rows = 0;
  std::vector<Index> offsets{0};
  IndexArray cols;
  std::vector<double> weights;

  Index out_rows() const { return static_cast<Index>(offsets.size()) - 1; }
  Tensor apply(const Tensor& x) const;
  Tensor apply_transpose(const Tensor& y) const;
};

/// Reverse-mode differentiation over rank-2 float64 tensors.
///
/// Each primitive evaluates eagerly and records a backward closure. A tape is
/// single-threaded and single-use: call backward() once on a 1x1 loss.
/// Parameters enter through param(), which reads from the bound ParamStore;
/// param_grads() then returns gradients aligned with the store (zero for
/// parameters the loss does not reach).
class Tape {
 public:
  explicit Tape(const ParamStore* params = nullptr) : params_(params) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  Var param(ParamStore::Id id);

  const Tensor& value(Var v) const;
  Index rows(Var v) const { return value(v).rows(); }
  Index cols(Var v) const { return value(v).cols(); }
  std::size_t size() const { return nodes_.size(); }

  // Primitives.
  Var matmul(Var a, Var b);
  /// x * w + b, with b a 1 x out row broadcast over rows.
  Var affine(Var x, Var w, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  /// Elementwise product.
  Var mul(Var a, Var b);
  Var scale(Var a, double s);
  /// Adds a 1 x C row to every row.
  Var add_row(Var x, Var row);
  /// Scales row r of x by col(r, 0).
  Var mul_col(Var x, Var col);
  Var relu(Var x);
  Var layer_norm(Var x, Var gamma, Var beta, double eps = 1e-5);
  Var concat(std::span<const Var> parts);
  Var concat(std::initializer_list<Var> parts) { return concat(std::span<const Var>(parts.begin(), parts.size())); }
  Var slice(Var x, Index col, Index width);
  /// out[e] = x[index[e]]
  Var gather(Var x, std::span<const std::int32_t> index);
  /// out[i] = sum_{e : index[e] == i} m[e]; rows with no contributions are zero.
  Var scatter_sum(Var m, std::span<const std::int32_t> index, Index n);
  Var row_mix(Var x, const RowMix& mix);
  /// Row-wise dot product of equally shaped a and b, as an R x 1 column.
  Var row_dot(Var a, Var b);
  Var sum(Var x);
  /// Mean of squared entries (0 for an empty tensor).
  Var mean_square(Var x);

  /// Runs reverse accumulation from a 1x1 loss. Throws ShapeError otherwise.
  void backward(Var loss);
  /// Gradient of the loss w.r.t. any recorded value (zeros if unreached).
  Tensor grad(Var v) const;
  /// Parameter gradients in ParamStore order.
  Gradients param_grads() const;

  /// Throw NumericError on any non-finite op output. Always on in debug builds.
  void set_check_finite(bool on) { check_finite_ = on; }

 private:
  using Backward = std::function<void(const Tensor& grad_out, std::vector<Tensor>& grads)>;
  struct Node {
    Tensor value;
    Backward back;
  };

  Var push(Tensor value, Backward back);
  static void accum(std::vector<Tensor>& grads, int id, const Tensor& g);
  static void accum(std::vector<Tensor>& grads, int id, Tensor&& g);
  void check(Var v) const;

  const ParamStore* params_;
  std::vector<Node> nodes_;
  std::vector<int> param_nodes_;  // ParamStore id -> node id (-1 if unused)
  std::vector<Tensor> grads_;
#ifdef NDEBUG
  bool check_finite_ = false;
#else
  bool check_finite_ = true;
#endif
};

}  // namespace pegnet

#endif  // PEGNET_TAPE_HPP_
