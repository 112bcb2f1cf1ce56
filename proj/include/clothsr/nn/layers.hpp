#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <vector>

#include "clothsr/mesh.hpp"
#include "clothsr/nn/autodiff.hpp"
#include "clothsr/rng.hpp"

namespace clothsr::nn {

/// Fully connected layer y = x W^T + b.
struct Linear {
  Tensor weight;  ///< out x in
  Tensor bias;    ///< 1 x out

  Linear() = default;
  /// Uniform init in +-1/sqrt(in).
  Linear(int in, int out, Rng& rng);

  Tensor forward(const Tensor& x) const { return linear(x, weight, bias); }
  void collect(std::vector<Tensor>& out) const;
};

/// Row-stochastic one-ring averaging operator (1/D_i) sum_j f_j for a mesh,
/// replicated block-diagonally for batches of frames.
class NeighborAverage {
 public:
  NeighborAverage() = default;
  /// Throws StructuralError if a vertex has no neighbours.
  explicit NeighborAverage(const Mesh& mesh);

  std::size_t vertex_count() const noexcept { return vertices_; }
  /// Operator for `batch` stacked frames, built on first use.
  std::shared_ptr<const SparseMatrix> batched(int batch) const;

 private:
  std::size_t vertices_ = 0;
  std::vector<std::vector<int>> rings_;
  mutable std::map<int, std::shared_ptr<const SparseMatrix>> cache_;
};

/// f_i' = W_point f_i + W_neighbor (1/D_i) sum_j f_j + b
struct GraphConv {
  Tensor w_point;     ///< out x in
  Tensor w_neighbor;  ///< out x in
  Tensor bias;        ///< 1 x out

  GraphConv() = default;
  GraphConv(int in, int out, Rng& rng);

  /// x holds one row per vertex (batches stacked frame by frame); `average` is
  /// the matching NeighborAverage::batched operator.
  Tensor forward(const Tensor& x, const std::shared_ptr<const SparseMatrix>& average) const;
  void collect(std::vector<Tensor>& out) const;
};

struct LayerNorm {
  Tensor gain;
  Tensor shift;

  LayerNorm() = default;
  explicit LayerNorm(int dim);

  Tensor forward(const Tensor& x) const { return layer_norm(x, gain, shift); }
  void collect(std::vector<Tensor>& out) const;
};

struct MultiHeadAttention {
  Linear query, key, value, output;
  int heads = 1;

  MultiHeadAttention() = default;
  MultiHeadAttention(int dim, int heads, Rng& rng);

  Tensor forward(const Tensor& x, const Tensor& memory, int batch, bool causal,
                 std::vector<Matrix>* weights_out = nullptr) const;
  void collect(std::vector<Tensor>& out) const;
};

struct FeedForward {
  Linear inner, outer;

  FeedForward() = default;
  FeedForward(int dim, int hidden, Rng& rng);

  Tensor forward(const Tensor& x) const { return outer.forward(relu(inner.forward(x))); }
  void collect(std::vector<Tensor>& out) const;
};

/// Two graph convolutions (tanh, then linear) followed by a dense map from
/// the concatenated per-vertex outputs to one latent vector per frame.
struct FrameEncoder {
  GraphConv conv1, conv2;
  Linear to_latent;
  int vertices = 0;
  int channels = 0;

  FrameEncoder() = default;
  FrameEncoder(int vertices, int feature_dim, int channels, int latent_dim, Rng& rng);

  /// x: (batch * vertices) x feature_dim -> batch x latent_dim
  Tensor forward(const Tensor& x, const NeighborAverage& average) const;
  void collect(std::vector<Tensor>& out) const;
};

/// Dense map from latent to per-vertex channels, then a tanh graph convolution
/// and a final linear graph convolution back to feature_dim.
struct FrameDecoder {
  Linear from_latent;
  GraphConv conv1, conv2;
  int vertices = 0;
  int channels = 0;

  FrameDecoder() = default;
  FrameDecoder(int vertices, int feature_dim, int channels, int latent_dim, Rng& rng);

  /// z: batch x latent_dim -> (batch * vertices) x feature_dim
  Tensor forward(const Tensor& z, const NeighborAverage& average) const;
  void collect(std::vector<Tensor>& out) const;
};

void zero_grads(const std::vector<Tensor>& params);

}  // namespace clothsr::nn
