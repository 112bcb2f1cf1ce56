#include "clothsr/nn/autodiff.hpp"

#include <cmath>
#include <unordered_set>

#include "clothsr/error.hpp"

namespace clothsr::nn {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

Matrix& grad_of(Node& n, std::size_t parent) { return n.parents[parent]->grad_buffer(); }
bool wants(const Node& n, std::size_t parent) { return n.parents[parent]->requires_grad; }

}  // namespace

Tensor Tensor::constant(Matrix value) {
  Tensor t;
  t.node_ = std::make_shared<Node>();
  t.node_->value = std::move(value);
  return t;
}

Tensor Tensor::parameter(Matrix value) {
  Tensor t = constant(std::move(value));
  t.node_->requires_grad = true;
  t.zero_grad();
  return t;
}

Tensor Tensor::make(Matrix value, std::vector<Tensor> parents, std::function<void(Node&)> backward) {
  Tensor t = constant(std::move(value));
  for (const auto& p : parents) t.node_->requires_grad = t.node_->requires_grad || p.requires_grad();
  if (t.node_->requires_grad) {
    for (auto& p : parents) t.node_->parents.push_back(p.node_);
    t.node_->backward = std::move(backward);
  }
  return t;
}

void backward(const Tensor& loss) {
  if (loss.rows() != 1 || loss.cols() != 1) throw ShapeError("backward: loss must be 1x1");
  if (!loss.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  loss.node()->grad_buffer()(0, 0) += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && n->grad.size() > 0) n->backward(*n);
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  return Tensor::make(a.value() + b.value(), {a, b}, [](Node& n) {
    if (wants(n, 0)) grad_of(n, 0) += n.grad;
    if (wants(n, 1)) grad_of(n, 1) += n.grad;
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  return Tensor::make(a.value() - b.value(), {a, b}, [](Node& n) {
    if (wants(n, 0)) grad_of(n, 0) += n.grad;
    if (wants(n, 1)) grad_of(n, 1) -= n.grad;
  });
}

Tensor scale(const Tensor& a, double s) {
  return Tensor::make(s * a.value(), {a}, [s](Node& n) { grad_of(n, 0) += s * n.grad; });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) throw ShapeError("matmul: inner dimensions differ");
  return Tensor::make(a.value() * b.value(), {a, b}, [](Node& n) {
    const Matrix& av = n.parents[0]->value;
    const Matrix& bv = n.parents[1]->value;
    if (wants(n, 0)) grad_of(n, 0).noalias() += n.grad * bv.transpose();
    if (wants(n, 1)) grad_of(n, 1).noalias() += av.transpose() * n.grad;
  });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  if (x.cols() != weight.cols()) {
    throw ShapeError("linear: input width " + std::to_string(x.cols()) + " does not match weight " +
                     std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()));
  }
  Matrix y = x.value() * weight.value().transpose();
  if (bias.defined()) {
    if (bias.rows() != 1 || bias.cols() != weight.rows()) throw ShapeError("linear: bias shape");
    y.rowwise() += bias.value().row(0);
  }
  std::vector<Tensor> parents{x, weight};
  if (bias.defined()) parents.push_back(bias);
  return Tensor::make(std::move(y), std::move(parents), [](Node& n) {
    const Matrix& xv = n.parents[0]->value;
    const Matrix& wv = n.parents[1]->value;
    if (wants(n, 0)) grad_of(n, 0).noalias() += n.grad * wv;
    if (wants(n, 1)) grad_of(n, 1).noalias() += n.grad.transpose() * xv;
    if (n.parents.size() > 2 && wants(n, 2)) grad_of(n, 2) += n.grad.colwise().sum();
  });
}

Tensor tanh(const Tensor& a) {
  Matrix y = a.value().array().tanh().matrix();
  return Tensor::make(y, {a}, [y](Node& n) {
    grad_of(n, 0).array() += n.grad.array() * (1.0 - y.array().square());
  });
}

Tensor relu(const Tensor& a) {
  return Tensor::make(a.value().cwiseMax(0.0), {a}, [](Node& n) {
    const Matrix& x = n.parents[0]->value;
    grad_of(n, 0).array() += (x.array() > 0.0).select(n.grad.array(), 0.0);
  });
}

Tensor sparse_matmul(std::shared_ptr<const SparseMatrix> s, const Tensor& a) {
  if (s->cols() != a.rows()) throw ShapeError("sparse_matmul: dimension mismatch");
  Matrix y = *s * a.value();
  return Tensor::make(std::move(y), {a}, [s = std::move(s)](Node& n) { grad_of(n, 0).noalias() += s->transpose() * n.grad; });
}

Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols) {
  if (rows * cols != a.rows() * a.cols()) throw ShapeError("reshape: element count changes");
  const RowMajor src = a.value();
  Matrix y = Eigen::Map<const RowMajor>(src.data(), rows, cols);
  const Eigen::Index r0 = a.rows();
  const Eigen::Index c0 = a.cols();
  return Tensor::make(std::move(y), {a}, [r0, c0](Node& n) {
    const RowMajor g = n.grad;
    grad_of(n, 0) += Eigen::Map<const RowMajor>(g.data(), r0, c0);
  });
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps) {
  const Eigen::Index d = x.cols();
  if (gain.cols() != d || shift.cols() != d || gain.rows() != 1 || shift.rows() != 1) {
    throw ShapeError("layer_norm: gain/shift must be 1 x " + std::to_string(d));
  }
  const Matrix& xv = x.value();
  Matrix normalized(xv.rows(), d);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    normalized.row(r) = (xv.row(r).array() - mean) * inv_std(r);
  }
  Matrix y = normalized.array().rowwise() * gain.value().row(0).array();
  y.rowwise() += shift.value().row(0);
  return Tensor::make(std::move(y), {x, gain, shift}, [normalized, inv_std](Node& n) {
    const Matrix& g = n.parents[1]->value;
    const auto d = static_cast<double>(normalized.cols());
    if (wants(n, 0)) {
      Matrix& gx = grad_of(n, 0);
      for (Eigen::Index r = 0; r < normalized.rows(); ++r) {
        const Eigen::RowVectorXd dn = n.grad.row(r).array() * g.row(0).array();
        const double mean_dn = dn.sum() / d;
        const double mean_dn_n = dn.dot(normalized.row(r)) / d;
        gx.row(r).array() += inv_std(r) * (dn.array() - mean_dn - normalized.row(r).array() * mean_dn_n);
      }
    }
    if (wants(n, 1)) grad_of(n, 1) += (n.grad.array() * normalized.array()).colwise().sum().matrix();
    if (wants(n, 2)) grad_of(n, 2) += n.grad.colwise().sum();
  });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int batch, int heads, bool causal,
                 std::vector<Matrix>* weights_out) {
  const Eigen::Index d = q.cols();
  if (k.cols() != d || v.cols() != d || k.rows() != v.rows()) throw ShapeError("attention: q/k/v widths differ");
  if (batch <= 0 || heads <= 0 || d % heads != 0 || q.rows() % batch != 0 || k.rows() % batch != 0) {
    throw ShapeError("attention: batch/head split does not divide the inputs");
  }
  const Eigen::Index lq = q.rows() / batch;
  const Eigen::Index lk = k.rows() / batch;
  const Eigen::Index dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  std::vector<Matrix> weights;
  weights.reserve(static_cast<std::size_t>(batch * heads));
  Matrix out(q.rows(), d);
  for (int b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      const auto qh = q.value().block(b * lq, h * dh, lq, dh);
      const auto kh = k.value().block(b * lk, h * dh, lk, dh);
      const auto vh = v.value().block(b * lk, h * dh, lk, dh);
      Matrix scores = inv_sqrt * (qh * kh.transpose());
      for (Eigen::Index i = 0; i < lq; ++i) {
        double top = -std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < lk; ++j) {
          if (causal && j > i) continue;
          top = std::max(top, scores(i, j));
        }
        double total = 0.0;
        for (Eigen::Index j = 0; j < lk; ++j) {
          scores(i, j) = (causal && j > i) ? 0.0 : std::exp(scores(i, j) - top);
          total += scores(i, j);
        }
        scores.row(i) /= total;
      }
      out.block(b * lq, h * dh, lq, dh) = scores * vh;
      weights.push_back(std::move(scores));
    }
  }
  if (weights_out) *weights_out = weights;

  return Tensor::make(std::move(out), {q, k, v},
                      [weights = std::move(weights), batch, heads, lq, lk, dh, inv_sqrt](Node& n) {
                        const Matrix& qv = n.parents[0]->value;
                        const Matrix& kv = n.parents[1]->value;
                        const Matrix& vv = n.parents[2]->value;
                        Matrix* gq = wants(n, 0) ? &grad_of(n, 0) : nullptr;
                        Matrix* gk = wants(n, 1) ? &grad_of(n, 1) : nullptr;
                        Matrix* gv = wants(n, 2) ? &grad_of(n, 2) : nullptr;
                        for (int b = 0; b < batch; ++b) {
                          for (int h = 0; h < heads; ++h) {
                            const Matrix& a = weights[static_cast<std::size_t>(b * heads + h)];
                            const Matrix go = n.grad.block(b * lq, h * dh, lq, dh);
                            const auto vh = vv.block(b * lk, h * dh, lk, dh);
                            if (gv) gv->block(b * lk, h * dh, lk, dh).noalias() += a.transpose() * go;
                            const Matrix ga = go * vh.transpose();
                            // Softmax Jacobian: dS = A .* (dA - rowsum(dA .* A)); masked entries have A = 0.
                            const Eigen::VectorXd inner = (ga.array() * a.array()).rowwise().sum();
                            const Matrix gs = inv_sqrt * (a.array() * (ga.array().colwise() - inner.array())).matrix();
                            if (gq) gq->block(b * lq, h * dh, lq, dh).noalias() += gs * kv.block(b * lk, h * dh, lk, dh);
                            if (gk) gk->block(b * lk, h * dh, lk, dh).noalias() += gs.transpose() * qv.block(b * lq, h * dh, lq, dh);
                          }
                        }
                      });
}

Tensor mse(const Tensor& a, const Matrix& target) {
  if (a.rows() != target.rows() || a.cols() != target.cols()) throw ShapeError("mse: target shape mismatch");
  const Matrix diff = a.value() - target;
  const double count = static_cast<double>(diff.size());
  Matrix y(1, 1);
  y(0, 0) = diff.squaredNorm() / count;
  return Tensor::make(std::move(y), {a}, [diff, count](Node& n) { grad_of(n, 0) += (2.0 * n.grad(0, 0) / count) * diff; });
}

Tensor sum(const Tensor& a) {
  Matrix y(1, 1);
  y(0, 0) = a.value().sum();
  return Tensor::make(std::move(y), {a}, [](Node& n) { grad_of(n, 0).array() += n.grad(0, 0); });
}

}  // namespace clothsr::nn
