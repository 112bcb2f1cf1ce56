#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "clothsr/nn/model.hpp"

namespace clothsr::nn {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// Adaptive-moment gradient descent over a fixed set of parameters.
class Adam {
 public:
  Adam(std::vector<Tensor> params, const AdamConfig& config = {});

  void zero_grad();
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  /// Applies one update from the accumulated gradients.
  void step();
  long steps() const noexcept { return steps_; }

 private:
  std::vector<Tensor> params_;
  std::vector<Matrix> m_, v_;
  AdamConfig config_;
  long steps_ = 0;
};

struct TrainConfig {
  int epochs = 1000;
  /// Samples per step; 0 trains full-batch. Minibatches are drawn from a
  /// seeded shuffle each epoch.
  int batch_size = 0;
  AdamConfig adam;
  /// Learning rate at the last epoch as a fraction of adam.learning_rate,
  /// reached by cosine annealing; 1 keeps the rate constant.
  double final_rate_fraction = 1.0;
  std::uint64_t seed = 1;
  /// Called after every epoch with (epoch, mean loss).
  std::function<void(int, double)> on_epoch;
};

struct TrainResult {
  std::vector<double> losses;  ///< mean training loss per epoch, before that epoch's updates
};

/// Reconstruction-MSE training in normalized feature space. The normalizer of
/// `ae` is used as is. Marks `ae` trained. Throws DivergenceError on a
/// non-finite loss.
TrainResult train_autoencoder(AutoEncoder& ae, const NeighborAverage& average,
                              std::span<const tsacap::FeatureFrame> frames, const TrainConfig& config);

/// Teacher-forced training on every `window`-frame slice: source = coarse
/// latents, decoder input = start token followed by the ground-truth fine
/// latents, loss = MSE between the frozen fine decoder's output and the
/// normalized ground-truth fine features. `fine_frames` are raw features,
/// normalized with `fine.normalizer`. Throws AlignmentError when the three
/// sequences differ in length.
TrainResult train_transformer(DeformTransformer& transformer, const Matrix& coarse_latents, const Matrix& fine_latents,
                              const AutoEncoder& fine, const NeighborAverage& fine_average,
                              std::span<const tsacap::FeatureFrame> fine_frames, int window,
                              const TrainConfig& config);

/// Windowed fine-feature MSE of a transformer under teacher forcing (the
/// training loss, evaluated without updates).
double transformer_loss(const DeformTransformer& transformer, const Matrix& coarse_latents, const Matrix& fine_latents,
                        const AutoEncoder& fine, const NeighborAverage& fine_average,
                        std::span<const tsacap::FeatureFrame> fine_frames, int window);

}  // namespace clothsr::nn
