#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

namespace clothsr::nn {

using Matrix = Eigen::MatrixXd;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// One value in the computation graph. Gradients are accumulated into `grad`
/// by the backward closures of the node's consumers.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;

  /// Lazily sized accumulator.
  Matrix& grad_buffer() {
    if (grad.rows() != value.rows() || grad.cols() != value.cols()) grad = Matrix::Zero(value.rows(), value.cols());
    return grad;
  }
};

/// Shared handle to a graph node. Copies alias the same node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Matrix value);
  /// Leaf that receives gradients and survives across graphs (a trainable weight).
  static Tensor parameter(Matrix value);

  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  /// Gradient after backward(); zero-sized if no gradient reached this node.
  const Matrix& grad() const { return node_->grad; }
  void zero_grad() { node_->grad.setZero(node_->value.rows(), node_->value.cols()); }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_ && node_->requires_grad; }
  bool defined() const noexcept { return static_cast<bool>(node_); }

  const std::shared_ptr<Node>& node() const { return node_; }

  /// Internal: builds an op node from parents and a backward closure.
  static Tensor make(Matrix value, std::vector<Tensor> parents, std::function<void(Node&)> backward);

 private:
  std::shared_ptr<Node> node_;
};

/// Reverse sweep from a 1x1 `loss`, accumulating into every reachable node
/// that requires gradients.
void backward(const Tensor& loss);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor matmul(const Tensor& a, const Tensor& b);
/// x W^T + b with W (out x in) and b (1 x out), broadcast over rows. `b` may be undefined.
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);
Tensor tanh(const Tensor& a);
Tensor relu(const Tensor& a);
/// S a with a constant sparse S, which the graph keeps alive until backward.
Tensor sparse_matmul(std::shared_ptr<const SparseMatrix> s, const Tensor& a);
/// Row-major reshape: element (r, c) keeps its position in the row-major stream.
Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols);
/// Row-wise layer normalization with affine gain/shift (1 x d each).
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& shift, double eps = 1e-5);

/// Scaled dot-product attention over `batch` independent sequences, split in
/// `heads` column groups. q is (batch * len_q) x d, k and v are (batch * len_k) x d.
/// With `causal`, query position i only sees key positions <= i.
/// If `weights_out` is given, receives the attention matrices per (batch, head).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int batch, int heads, bool causal,
                 std::vector<Matrix>* weights_out = nullptr);

/// Mean of squared differences to a constant target (1 x 1).
Tensor mse(const Tensor& a, const Matrix& target);
/// Sum of all entries (1 x 1).
Tensor sum(const Tensor& a);

}  // namespace clothsr::nn
