#include "clothsr/nn/layers.hpp"

#include <cmath>
#include <string>

#include "clothsr/error.hpp"

namespace clothsr::nn {

namespace {

Matrix uniform_matrix(Eigen::Index rows, Eigen::Index cols, double bound, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = rng.uniform(-bound, bound);
  }
  return m;
}

}  // namespace

Linear::Linear(int in, int out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  weight = Tensor::parameter(uniform_matrix(out, in, bound, rng));
  bias = Tensor::parameter(uniform_matrix(1, out, bound, rng));
}

void Linear::collect(std::vector<Tensor>& out) const {
  out.push_back(weight);
  out.push_back(bias);
}

NeighborAverage::NeighborAverage(const Mesh& mesh) : vertices_(mesh.vertex_count()), rings_(vertices_) {
  for (std::size_t i = 0; i < vertices_; ++i) {
    const auto ring = mesh.neighbors(i);
    if (ring.empty()) throw StructuralError("vertex " + std::to_string(i) + " has no neighbours");
    rings_[i].assign(ring.begin(), ring.end());
  }
}

std::shared_ptr<const SparseMatrix> NeighborAverage::batched(int batch) const {
  if (batch <= 0) throw ShapeError("batch must be positive");
  auto it = cache_.find(batch);
  if (it != cache_.end()) return it->second;

  std::vector<Eigen::Triplet<double>> entries;
  std::size_t nnz = 0;
  for (const auto& ring : rings_) nnz += ring.size();
  entries.reserve(nnz * static_cast<std::size_t>(batch));
  const auto v = static_cast<int>(vertices_);
  for (int b = 0; b < batch; ++b) {
    for (int i = 0; i < v; ++i) {
      const auto& ring = rings_[static_cast<std::size_t>(i)];
      const double w = 1.0 / static_cast<double>(ring.size());
      for (int j : ring) entries.emplace_back(b * v + i, b * v + j, w);
    }
  }
  auto op = std::make_shared<SparseMatrix>(batch * v, batch * v);
  op->setFromTriplets(entries.begin(), entries.end());
  op->makeCompressed();
  return cache_.emplace(batch, std::move(op)).first->second;
}

GraphConv::GraphConv(int in, int out, Rng& rng) {
  // Fan-in counts both the point and the neighbour inputs.
  const double bound = 1.0 / std::sqrt(2.0 * in);
  w_point = Tensor::parameter(uniform_matrix(out, in, bound, rng));
  w_neighbor = Tensor::parameter(uniform_matrix(out, in, bound, rng));
  bias = Tensor::parameter(uniform_matrix(1, out, bound, rng));
}

Tensor GraphConv::forward(const Tensor& x, const std::shared_ptr<const SparseMatrix>& average) const {
  if (average->rows() != x.rows()) {
    throw ShapeError("graph conv: " + std::to_string(x.rows()) + " rows for an operator over " +
                     std::to_string(average->rows()) + " vertices");
  }
  return add(linear(x, w_point, bias), linear(sparse_matmul(average, x), w_neighbor, Tensor{}));
}

void GraphConv::collect(std::vector<Tensor>& out) const {
  out.push_back(w_point);
  out.push_back(w_neighbor);
  out.push_back(bias);
}

LayerNorm::LayerNorm(int dim)
    : gain(Tensor::parameter(Matrix::Ones(1, dim))), shift(Tensor::parameter(Matrix::Zero(1, dim))) {}

void LayerNorm::collect(std::vector<Tensor>& out) const {
  out.push_back(gain);
  out.push_back(shift);
}

MultiHeadAttention::MultiHeadAttention(int dim, int heads_, Rng& rng)
    : query(dim, dim, rng), key(dim, dim, rng), value(dim, dim, rng), output(dim, dim, rng), heads(heads_) {
  if (heads <= 0 || dim % heads != 0) throw ShapeError("attention: heads must divide the model width");
}

Tensor MultiHeadAttention::forward(const Tensor& x, const Tensor& memory, int batch, bool causal,
                                   std::vector<Matrix>* weights_out) const {
  const Tensor mixed = attention(query.forward(x), key.forward(memory), value.forward(memory), batch, heads, causal,
                                 weights_out);
  return output.forward(mixed);
}

void MultiHeadAttention::collect(std::vector<Tensor>& out) const {
  query.collect(out);
  key.collect(out);
  value.collect(out);
  output.collect(out);
}

FeedForward::FeedForward(int dim, int hidden, Rng& rng) : inner(dim, hidden, rng), outer(hidden, dim, rng) {}

void FeedForward::collect(std::vector<Tensor>& out) const {
  inner.collect(out);
  outer.collect(out);
}

FrameEncoder::FrameEncoder(int vertices_, int feature_dim, int channels_, int latent_dim, Rng& rng)
    : conv1(feature_dim, channels_, rng),
      conv2(channels_, channels_, rng),
      to_latent(vertices_ * channels_, latent_dim, rng),
      vertices(vertices_),
      channels(channels_) {}

Tensor FrameEncoder::forward(const Tensor& x, const NeighborAverage& average) const {
  if (static_cast<int>(average.vertex_count()) != vertices || x.rows() % vertices != 0) {
    throw ShapeError("encoder built for " + std::to_string(vertices) + " vertices got " + std::to_string(x.rows()) +
                     " rows / mesh of " + std::to_string(average.vertex_count()));
  }
  const int batch = static_cast<int>(x.rows() / vertices);
  const auto op = average.batched(batch);
  const Tensor h = conv2.forward(tanh(conv1.forward(x, op)), op);
  return to_latent.forward(reshape(h, batch, static_cast<Eigen::Index>(vertices) * channels));
}

void FrameEncoder::collect(std::vector<Tensor>& out) const {
  conv1.collect(out);
  conv2.collect(out);
  to_latent.collect(out);
}

FrameDecoder::FrameDecoder(int vertices_, int feature_dim, int channels_, int latent_dim, Rng& rng)
    : from_latent(latent_dim, vertices_ * channels_, rng),
      conv1(channels_, channels_, rng),
      conv2(channels_, feature_dim, rng),
      vertices(vertices_),
      channels(channels_) {}

Tensor FrameDecoder::forward(const Tensor& z, const NeighborAverage& average) const {
  if (static_cast<int>(average.vertex_count()) != vertices) throw ShapeError("decoder: mesh vertex count mismatch");
  const int batch = static_cast<int>(z.rows());
  const auto op = average.batched(batch);
  const Tensor h = reshape(from_latent.forward(z), static_cast<Eigen::Index>(batch) * vertices, channels);
  return conv2.forward(tanh(conv1.forward(h, op)), op);
}

void FrameDecoder::collect(std::vector<Tensor>& out) const {
  from_latent.collect(out);
  conv1.collect(out);
  conv2.collect(out);
}

void zero_grads(const std::vector<Tensor>& params) {
  for (Tensor t : params) t.zero_grad();
}

}  // namespace clothsr::nn
