#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "clothsr/mesh.hpp"
#include "clothsr/nn/layers.hpp"
#include "clothsr/nn/transformer.hpp"
#include "clothsr/tsacap.hpp"

namespace clothsr::nn {

struct ModelConfig {
  int conv_channels = 9;
  int latent_dim = 16;
  int heads = 8;
  int blocks = 2;
  int hidden = 64;
  int window = 3;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;

  /// Throws ShapeError for inconsistent sizes (e.g. heads not dividing latent_dim).
  void validate() const;
};

/// Per-dimension affine map sending the observed [min, max] of each feature
/// to [-0.95, 0.95]. Default-constructed it is the identity.
struct Normalizer {
  using Row = Eigen::Matrix<double, 1, tsacap::kFeatureDim>;
  Row center = Row::Zero();
  Row half_range = Row::Constant(0.95);

  static Normalizer fit(std::span<const tsacap::FeatureFrame> frames);
  Matrix apply(const tsacap::FeatureFrame& frame) const;
  tsacap::FeatureFrame invert(const Matrix& normalized) const;
};

/// Encoder/decoder pair for one mesh resolution.
struct AutoEncoder {
  FrameEncoder encoder;
  FrameDecoder decoder;
  Normalizer normalizer;
  bool trained = false;

  std::vector<Tensor> parameters() const;
};

struct ModelParams {
  ModelConfig config;
  int coarse_vertices = 0;
  int fine_vertices = 0;
  AutoEncoder coarse;
  AutoEncoder fine;
  DeformTransformer transformer;
  bool transformer_trained = false;

  /// Fresh weights drawn from config.seed.
  static ModelParams init(const ModelConfig& config, int coarse_vertices, int fine_vertices);

  /// Fixed order: coarse encoder, coarse decoder, fine encoder, fine decoder, transformer.
  std::vector<Tensor> parameters() const;
  bool ready() const noexcept { return coarse.trained && fine.trained && transformer_trained; }
};

/// `DTFM0001` checkpoint: magic, hyperparameter header, normalizers, then every
/// parameter as u32 rows, u32 cols and column-major little-endian float64 values.
std::vector<std::uint8_t> serialize_model(const ModelParams& model);
ModelParams deserialize_model(std::span<const std::uint8_t> bytes);
void write_checkpoint(const std::filesystem::path& path, const ModelParams& model);
ModelParams read_checkpoint(const std::filesystem::path& path);

/// Normalized frames stacked vertex-major into one (frames * V) x 9 matrix.
Matrix stack_frames(std::span<const tsacap::FeatureFrame> frames, const Normalizer& normalizer);

/// One latent row per frame.
Matrix encode_frames(const AutoEncoder& ae, const NeighborAverage& average,
                     std::span<const tsacap::FeatureFrame> frames);
Eigen::VectorXd encode_frame(const AutoEncoder& ae, const NeighborAverage& average, const tsacap::FeatureFrame& frame);
/// Decodes each latent row and undoes the normalization.
std::vector<tsacap::FeatureFrame> decode_latents(const AutoEncoder& ae, const NeighborAverage& average,
                                                 const Matrix& latents);

/// Autoregressive fine latents for a coarse latent sequence. The first window
/// is generated position by position from a zero start token; afterwards each
/// window slides by one frame and contributes its last prediction.
Matrix predict_fine_latents(const DeformTransformer& transformer, const Matrix& coarse_latents, int window);

/// Coarse frames -> features -> latents -> fine latents -> fine features ->
/// fine positions, with fine vertex 0 pinned at its reference position.
/// Throws StateError for an untrained model and ShapeError for a topology mismatch.
MeshSequence synthesize_sequence(const ModelParams& model, const Mesh& coarse_reference, const Mesh& fine_reference,
                                 const std::vector<Positions>& coarse_frames);

}  // namespace clothsr::nn
