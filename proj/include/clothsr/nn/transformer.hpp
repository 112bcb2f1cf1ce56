#pragma once

#include <vector>

#include "clothsr/nn/layers.hpp"

namespace clothsr::nn {

struct TransformerConfig {
  int dim = 16;
  int heads = 8;
  int blocks = 2;
  int hidden = 64;
};

struct EncoderBlock {
  MultiHeadAttention self_attention;
  LayerNorm norm1, norm2;
  FeedForward feed_forward;

  EncoderBlock() = default;
  EncoderBlock(const TransformerConfig& config, Rng& rng);
  Tensor forward(const Tensor& x, int batch) const;
  void collect(std::vector<Tensor>& out) const;
};

struct DecoderBlock {
  MultiHeadAttention self_attention, cross_attention;
  LayerNorm norm1, norm2, norm3;
  FeedForward feed_forward;

  DecoderBlock() = default;
  DecoderBlock(const TransformerConfig& config, Rng& rng);
  Tensor forward(const Tensor& y, const Tensor& memory, int batch) const;
  void collect(std::vector<Tensor>& out) const;
};

/// Encoder-decoder transformer over short latent sequences. Residual
/// connections are followed by layer normalization; positions are added as
/// sinusoidal embeddings; decoder self-attention is causal.
class DeformTransformer {
 public:
  DeformTransformer() = default;
  DeformTransformer(const TransformerConfig& config, Rng& rng);

  /// source: (batch * len_s) x dim, target: (batch * len_t) x dim, sequences
  /// stacked one after another. Returns (batch * len_t) x dim predictions;
  /// row t of a sequence depends on all source rows and on target rows <= t.
  /// Callers shift the target right so that prediction t sees only targets < t.
  Tensor forward(const Tensor& source, const Tensor& target, int batch) const;

  const TransformerConfig& config() const noexcept { return config_; }
  std::vector<Tensor> parameters() const;

  std::vector<EncoderBlock> encoder;
  std::vector<DecoderBlock> decoder;
  Linear head;

 private:
  TransformerConfig config_;
};

/// Standard sinusoidal position table, one row per position.
Matrix positional_encoding(int length, int dim);

}  // namespace clothsr::nn
