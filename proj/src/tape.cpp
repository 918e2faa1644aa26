#include "pegnet/tape.hpp"

#include "pegnet/errors.hpp"

#include <memory>
#include <string>

namespace pegnet {

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()) + ")");
  }
}

}  // namespace

Tensor RowMix::apply(const Tensor& x) const {
  if (x.rows() != in_rows) throw ShapeError("row_mix: input rows do not match operator");
  Tensor out = Tensor::Zero(out_rows(), x.cols());
  for (Index r = 0; r < out_rows(); ++r) {
    for (Index k = offsets[r]; k < offsets[r + 1]; ++k) {
      out.row(r) += weights[k] * x.row(cols[k]);
    }
  }
  return out;
}

Tensor RowMix::apply_transpose(const Tensor& y) const {
  if (y.rows() != out_rows()) throw ShapeError("row_mix: gradient rows do not match operator");
  Tensor out = Tensor::Zero(in_rows, y.cols());
  for (Index r = 0; r < out_rows(); ++r) {
    for (Index k = offsets[r]; k < offsets[r + 1]; ++k) {
      out.row(cols[k]) += weights[k] * y.row(r);
    }
  }
  return out;
}

Var Tape::push(Tensor value, Backward back) {
  if (check_finite_ && !value.allFinite()) {
    throw NumericError("non-finite value produced at tape node " + std::to_string(nodes_.size()));
  }
  nodes_.push_back({std::move(value), std::move(back)});
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Tape::check(Var v) const {
  if (v.id < 0 || static_cast<std::size_t>(v.id) >= nodes_.size()) {
    throw RangeError("invalid tape variable " + std::to_string(v.id));
  }
}

const Tensor& Tape::value(Var v) const {
  check(v);
  return nodes_[v.id].value;
}

void Tape::accum(std::vector<Tensor>& grads, int id, const Tensor& g) {
  if (grads[id].size() == 0 && g.size() != 0) {
    grads[id] = g;
  } else {
    grads[id] += g;
  }
}

void Tape::accum(std::vector<Tensor>& grads, int id, Tensor&& g) {
  if (grads[id].size() == 0 && g.size() != 0) {
    grads[id] = std::move(g);
  } else {
    grads[id] += g;
  }
}

Var Tape::constant(Tensor value) { return push(std::move(value), nullptr); }

Var Tape::param(ParamStore::Id id) {
  if (params_ == nullptr) throw ConfigError("tape has no ParamStore bound");
  if (id >= params_->size()) throw RangeError("parameter id out of range");
  if (param_nodes_.size() < params_->size()) param_nodes_.resize(params_->size(), -1);
  if (param_nodes_[id] >= 0) return Var{param_nodes_[id]};
  Var v = push(params_->value(id), nullptr);
  param_nodes_[id] = v.id;
  return v;
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.cols() != B.rows()) throw ShapeError("matmul: inner dimensions differ");
  return push(A * B, [this, a, b](const Tensor& G, std::vector<Tensor>& g) {
    accum(g, a.id, Tensor(G * nodes_[b.id].value.transpose()));
    accum(g, b.id, Tensor(nodes_[a.id].value.transpose() * G));
  });
}

Var Tape::affine(Var x, Var w, Var b) {
  const Tensor& X = value(x);
  const Tensor& W = value(w);
  const Tensor& B = value(b);
  if (X.cols() != W.rows()) {
    throw ShapeError("affine: input width " + std::to_string(X.cols()) + " does not match weight rows " +
                     std::to_string(W.rows()));
  }
  if (B.rows() != 1 || B.cols() != W.cols()) throw ShapeError("affine: bias must be 1 x out");
  Tensor out = X * W;
  out.rowwise() += B.row(0);
  return push(std::move(out), [this, x, w, b](const Tensor& G, std::vector<Tensor>& g) {
    accum(g, x.id, Tensor(G * nodes_[w.id].value.transpose()));
    accum(g, w.id, Tensor(nodes_[x.id].value.transpose() * G));
    accum(g, b.id, Tensor(G.colwise().sum()));
  });
}

Var Tape::add(Var a, Var b) {
  require_same_shape(value(a), value(b), "add");
  return push(value(a) + value(b), [a, b](const Tensor& G, std::vector<Tensor>& g) {
    accum(g, a.id, G);
    accum(g, b.id, G);
  });
}

Var Tape::sub(Var a, Var b) {
  require_same_shape(value(a), value(b), "sub");
  return push(value(a) - value(b), [a, b](const Tensor& G, std::vector<Tensor>& g) {
    accum(g, a.id, G);
    accum(g, b.id, Tensor(-G));
  });
}

Var Tape::mul(Var a, Var b) {
  require_same_shape(value(a), value(b), "mul");
  return push(value(a).cwiseProduct(value(b)), [this, a, b](const Tensor& G, std::vector<Tensor>& g) {
    accum(g, a.id, Tensor(G.cwiseProduct(nodes_[b.id].value)));
    accum(g, b.id, Tensor(G.cwiseProduct(nodes_[a.id].value)));
  });
}

Var Tape::scale(Var a, double s) {
  return push(value(a) * s, [a, s](const Tensor& G, std::vector<Tensor>& g) { accum(g, a.id, Tensor(G * s)); });
}

Var Tape::add_row(Var x, Var row) {
  const Tensor& X = value(x);
  const Tensor& R = value(row);
  if (R.rows() != 1 || R.cols() != X.cols()) throw ShapeError("add_row: row must be 1 x cols");
  Tensor out = X;
  out.rowwise() += R.row(0);
  return push(std::move(out), [x, row](const Tensor& G, std::vector<Tensor>& g) {
    accum(g, x.id, G);
    accum(g, row.id, Tensor(G.colwise().sum()));
  });
}

Var Tape::mul_col(Var x, Var col) {
  const Tensor& X = value(x);
  const Tensor& C = value(col);
  if (C.cols() != 1 || C.rows() != X.rows()) throw ShapeError("mul_col: column must be rows x 1");
  Tensor out = C.col(0).asDiagonal() * X;
  return push(std::move(out), [this, x, col](const Tensor& G, std::vector<Tensor>& g) {
    const Tensor& Xv = nodes_[x.id].value;
    const Tensor& Cv = nodes_[col.id].value;
    accum(g, x.id, Tensor(Cv.col(0).asDiagonal() * G));
    accum(g, col.id, Tensor(G.cwiseProduct(Xv).rowwise().sum()));
  });
}

Var Tape::relu(Var x) {
  // Subgradient at exactly zero is zero.
  Tensor out = value(x).cwiseMax(0.0);
  return push(std::move(out), [this, x](const Tensor& G, std::vector<Tensor>& g) {
    const Tensor& X = nodes_[x.id].value;
    accum(g, x.id, Tensor((X.array() > 0.0).select(G, 0.0)));
  });
}

Var Tape::layer_norm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& X = value(x);
  const Tensor& Ga = value(gamma);
  const Tensor& Be = value(beta);
  const Index h = X.cols();
  if (h < 1) throw ShapeError("layer_norm: width must be >= 1");
  if (Ga.rows() != 1 || Ga.cols() != h || Be.rows() != 1 || Be.cols() != h) {
    throw ShapeError("layer_norm: gamma/beta must be 1 x width");
  }
  const double inv_h = 1.0 / static_cast<double>(h);
  const Eigen::VectorXd mean = X.rowwise().sum() * inv_h;
  auto xhat = std::make_shared<Tensor>(X.colwise() - mean);
  auto inv_std = std::make_shared<Eigen::VectorXd>(
      ((xhat->array().square().rowwise().sum() * inv_h) + eps).rsqrt().matrix());
  xhat->array().colwise() *= inv_std->array();
  Tensor out = xhat->array().rowwise() * Ga.row(0).array();
  out.rowwise() += Be.row(0);
  return push(std::move(out), [this, x, gamma, beta, xhat, inv_std, inv_h](const Tensor& G, std::vector<Tensor>& g) {
    const Tensor& Gam = nodes_[gamma.id].value;
    const Tensor& Xh = *xhat;
    accum(g, gamma.id, Tensor(G.cwiseProduct(Xh).colwise().sum()));
    accum(g, beta.id, Tensor(G.colwise().sum()));
    const Tensor dxhat = G.array().rowwise() * Gam.row(0).array();
    const Eigen::ArrayXd m1 = dxhat.rowwise().sum().array() * inv_h;
    const Eigen::ArrayXd m2 = dxhat.cwiseProduct(Xh).rowwise().sum().array() * inv_h;
    Tensor dx = (dxhat.array().colwise() - m1) - Xh.array().colwise() * m2;
    dx.array().colwise() *= inv_std->array();
    accum(g, x.id, std::move(dx));
  });
}

Var Tape::concat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat: no inputs");
  const Index r = value(parts[0]).rows();
  Index c = 0;
  for (Var p : parts) {
    if (value(p).rows() != r) throw ShapeError("concat: row counts differ");
    c += value(p).cols();
  }
  Tensor out(r, c);
  std::vector<Var> ids(parts.begin(), parts.end());
  Index offset = 0;
  for (Var p : ids) {
    out.middleCols(offset, value(p).cols()) = value(p);
    offset += value(p).cols();
  }
  return push(std::move(out), [this, ids](const Tensor& G, std::vector<Tensor>& g) {
    Index off = 0;
    for (Var p : ids) {
      const Index w = nodes_[p.id].value.cols();
      accum(g, p.id, Tensor(G.middleCols(off, w)));
      off += w;
    }
  });
}

Var Tape::slice(Var x, Index col, Index width) {
  const Tensor& X = value(x);
  if (col < 0 || width < 0 || col + width > X.cols()) throw ShapeError("slice: column range out of bounds");
  return push(X.middleCols(col, width), [this, x, col, width](const Tensor& G, std::vector<Tensor>& g) {
    Tensor full = Tensor::Zero(nodes_[x.id].value.rows(), nodes_[x.id].value.cols());
    full.middleCols(col, width) = G;
    accum(g, x.id, std::move(full));
  });
}

Var Tape::gather(Var x, std::span<const std::int32_t> index) {
  const Tensor& X = value(x);
  Tensor out(static_cast<Index>(index.size()), X.cols());
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (index[e] < 0 || index[e] >= X.rows()) throw RangeError("gather: index out of range");
    out.row(static_cast<Index>(e)) = X.row(index[e]);
  }
  IndexArray idx(index.begin(), index.end());
  const Index n = X.rows();
  return push(std::move(out), [x, idx = std::move(idx), n](const Tensor& G, std::vector<Tensor>& g) {
    Tensor gx = Tensor::Zero(n, G.cols());
    for (std::size_t e = 0; e < idx.size(); ++e) gx.row(idx[e]) += G.row(static_cast<Index>(e));
    accum(g, x.id, std::move(gx));
  });
}

Var Tape::scatter_sum(Var m, std::span<const std::int32_t> index, Index n) {
  const Tensor& M = value(m);
  if (static_cast<Index>(index.size()) != M.rows()) throw ShapeError("scatter_sum: index length != message rows");
  Tensor out = Tensor::Zero(n, M.cols());
  for (std::size_t e = 0; e < index.size(); ++e) {
    if (index[e] < 0 || index[e] >= n) throw RangeError("scatter_sum: index out of range");
    out.row(index[e]) += M.row(static_cast<Index>(e));
  }
  IndexArray idx(index.begin(), index.end());
  return push(std::move(out), [m, idx = std::move(idx)](const Tensor& G, std::vector<Tensor>& g) {
    Tensor gm(static_cast<Index>(idx.size()), G.cols());
    for (std::size_t e = 0; e < idx.size(); ++e) gm.row(static_cast<Index>(e)) = G.row(idx[e]);
    accum(g, m.id, std::move(gm));
  });
}

Var Tape::row_mix(Var x, const RowMix& mix) {
  Tensor out = mix.apply(value(x));
  return push(std::move(out), [x, mix](const Tensor& G, std::vector<Tensor>& g) {
    accum(g, x.id, mix.apply_transpose(G));
  });
}

Var Tape::row_dot(Var a, Var b) {
  require_same_shape(value(a), value(b), "row_dot");
  Tensor out = value(a).cwiseProduct(value(b)).rowwise().sum();
  return push(std::move(out), [this, a, b](const Tensor& G, std::vector<Tensor>& g) {
    accum(g, a.id, Tensor(G.col(0).asDiagonal() * nodes_[b.id].value));
    accum(g, b.id, Tensor(G.col(0).asDiagonal() * nodes_[a.id].value));
  });
}

Var Tape::sum(Var x) {
  Tensor out(1, 1);
  out(0, 0) = value(x).sum();
  return push(std::move(out), [this, x](const Tensor& G, std::vector<Tensor>& g) {
    const Tensor& X = nodes_[x.id].value;
    accum(g, x.id, Tensor(Tensor::Constant(X.rows(), X.cols(), G(0, 0))));
  });
}

Var Tape::mean_square(Var x) {
  const Tensor& X = value(x);
  Tensor out(1, 1);
  out(0, 0) = X.size() == 0 ? 0.0 : X.squaredNorm() / static_cast<double>(X.size());
  return push(std::move(out), [this, x](const Tensor& G, std::vector<Tensor>& g) {
    const Tensor& Xv = nodes_[x.id].value;
    if (Xv.size() == 0) return;
    accum(g, x.id, Tensor(Xv * (2.0 * G(0, 0) / static_cast<double>(Xv.size()))));
  });
}

void Tape::backward(Var loss) {
  const Tensor& L = value(loss);
  if (L.rows() != 1 || L.cols() != 1) throw ShapeError("backward: loss must be a 1x1 scalar");
  grads_.assign(nodes_.size(), Tensor());
  grads_[loss.id] = Tensor::Ones(1, 1);
  for (int id = loss.id; id >= 0; --id) {
    const Node& node = nodes_[id];
    if (!node.back || grads_[id].size() == 0) continue;
    node.back(grads_[id], grads_);
  }
}

Tensor Tape::grad(Var v) const {
  const Tensor& x = value(v);
  if (static_cast<std::size_t>(v.id) >= grads_.size() || grads_[v.id].size() == 0) {
    return Tensor::Zero(x.rows(), x.cols());
  }
  return grads_[v.id];
}

Gradients Tape::param_grads() const {
  if (params_ == nullptr) return {};
  Gradients out = params_->zeros_like();
  for (std::size_t p = 0; p < param_nodes_.size(); ++p) {
    const int node = param_nodes_[p];
    if (node >= 0 && static_cast<std::size_t>(node) < grads_.size() && grads_[node].size() != 0) {
      out[p] = grads_[node];
    }
  }
  return out;
}

}  // namespace pegnet
