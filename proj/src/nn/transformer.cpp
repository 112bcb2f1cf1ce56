#include "clothsr/nn/transformer.hpp"

#include <cmath>
#include <string>

#include "clothsr/error.hpp"

namespace clothsr::nn {

Matrix positional_encoding(int length, int dim) {
  Matrix pe(length, dim);
  for (int p = 0; p < length; ++p) {
    for (int k = 0; k < dim; ++k) {
      const double freq = std::pow(10000.0, -static_cast<double>(k - k % 2) / dim);
      pe(p, k) = (k % 2 == 0) ? std::sin(p * freq) : std::cos(p * freq);
    }
  }
  return pe;
}

EncoderBlock::EncoderBlock(const TransformerConfig& c, Rng& rng)
    : self_attention(c.dim, c.heads, rng), norm1(c.dim), norm2(c.dim), feed_forward(c.dim, c.hidden, rng) {}

Tensor EncoderBlock::forward(const Tensor& x, int batch) const {
  const Tensor h = norm1.forward(add(x, self_attention.forward(x, x, batch, false)));
  return norm2.forward(add(h, feed_forward.forward(h)));
}

void EncoderBlock::collect(std::vector<Tensor>& out) const {
  self_attention.collect(out);
  norm1.collect(out);
  norm2.collect(out);
  feed_forward.collect(out);
}

DecoderBlock::DecoderBlock(const TransformerConfig& c, Rng& rng)
    : self_attention(c.dim, c.heads, rng),
      cross_attention(c.dim, c.heads, rng),
      norm1(c.dim),
      norm2(c.dim),
      norm3(c.dim),
      feed_forward(c.dim, c.hidden, rng) {}

Tensor DecoderBlock::forward(const Tensor& y, const Tensor& memory, int batch) const {
  const Tensor h1 = norm1.forward(add(y, self_attention.forward(y, y, batch, true)));
  const Tensor h2 = norm2.forward(add(h1, cross_attention.forward(h1, memory, batch, false)));
  return norm3.forward(add(h2, feed_forward.forward(h2)));
}

void DecoderBlock::collect(std::vector<Tensor>& out) const {
  self_attention.collect(out);
  cross_attention.collect(out);
  norm1.collect(out);
  norm2.collect(out);
  norm3.collect(out);
  feed_forward.collect(out);
}

DeformTransformer::DeformTransformer(const TransformerConfig& config, Rng& rng) : config_(config) {
  if (config.blocks <= 0 || config.hidden <= 0) throw ShapeError("transformer: blocks and hidden must be positive");
  for (int b = 0; b < config.blocks; ++b) encoder.emplace_back(config, rng);
  for (int b = 0; b < config.blocks; ++b) decoder.emplace_back(config, rng);
  head = Linear(config.dim, config.dim, rng);
}

namespace {

Tensor with_positions(const Tensor& x, int batch, int dim) {
  const auto length = static_cast<int>(x.rows() / batch);
  const Matrix pe = positional_encoding(length, dim);
  Matrix stacked(x.rows(), dim);
  for (int b = 0; b < batch; ++b) stacked.middleRows(static_cast<Eigen::Index>(b) * length, length) = pe;
  return add(x, Tensor::constant(std::move(stacked)));
}

}  // namespace

Tensor DeformTransformer::forward(const Tensor& source, const Tensor& target, int batch) const {
  const int d = config_.dim;
  if (source.cols() != d || target.cols() != d) {
    throw ShapeError("transformer expects width " + std::to_string(d) + ", got " + std::to_string(source.cols()) +
                     " / " + std::to_string(target.cols()));
  }
  if (batch <= 0 || source.rows() % batch != 0 || target.rows() % batch != 0 || target.rows() == 0) {
    throw ShapeError("transformer: rows do not split into the batch");
  }
  Tensor memory = with_positions(source, batch, d);
  for (const auto& block : encoder) memory = block.forward(memory, batch);
  Tensor y = with_positions(target, batch, d);
  for (const auto& block : decoder) y = block.forward(y, memory, batch);
  return head.forward(y);
}

std::vector<Tensor> DeformTransformer::parameters() const {
  std::vector<Tensor> out;
  for (const auto& block : encoder) block.collect(out);
  for (const auto& block : decoder) block.collect(out);
  head.collect(out);
  return out;
}

}  // namespace clothsr::nn
