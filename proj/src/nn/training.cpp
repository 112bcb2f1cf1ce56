#include "clothsr/nn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "clothsr/error.hpp"
#include "clothsr/rng.hpp"

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace clothsr::nn {

Adam::Adam(std::vector<Tensor> params, const AdamConfig& config) : params_(std::move(params)), config_(config) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

void Adam::step() {
  ++steps_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    const Matrix& g = params_[k].grad();
    if (g.size() == 0) continue;
    m_[k] = config_.beta1 * m_[k] + (1.0 - config_.beta1) * g;
    v_[k] = config_.beta2 * v_[k] + (1.0 - config_.beta2) * g.cwiseAbs2();
    params_[k].mutable_value().array() -=
        config_.learning_rate * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + config_.epsilon);
  }
}

namespace {

// Training allocates and frees multi-megabyte activations every step. glibc
// would serve those with fresh mmap calls and trim the heap after each free,
// which costs more than the arithmetic; keep them on the heap instead.
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
  static const bool done = [] {
    mallopt(M_MMAP_THRESHOLD, 256 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 512 * 1024 * 1024);
    return true;
  }();
  (void)done;
#endif
}

std::vector<int> epoch_order(int n, const TrainConfig& config, Rng& rng) {
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  if (config.batch_size > 0 && config.batch_size < n) {
    for (int i = n - 1; i > 0; --i) std::swap(order[i], order[rng.next() % static_cast<std::uint64_t>(i + 1)]);
  }
  return order;
}

// Runs `config.epochs` epochs over `n` samples; `step_loss` builds the graph
// for a list of sample indices and returns its 1x1 loss.
TrainResult run_epochs(int n, const std::vector<Tensor>& params, const TrainConfig& config,
                       const std::function<Tensor(std::span<const int>)>& step_loss) {
  TrainResult result;
  if (config.epochs <= 0 || n == 0) return result;
  keep_large_blocks_on_heap();
  Adam adam(params, config.adam);
  Rng rng(config.seed);
  const int batch = (config.batch_size > 0) ? std::min(config.batch_size, n) : n;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.final_rate_fraction != 1.0 && config.epochs > 1) {
      const double progress = static_cast<double>(epoch) / (config.epochs - 1);
      const double fraction = config.final_rate_fraction +
                              (1.0 - config.final_rate_fraction) * 0.5 * (1.0 + std::cos(3.14159265358979323846 * progress));
      adam.set_learning_rate(config.adam.learning_rate * fraction);
    }
    const auto order = epoch_order(n, config, rng);
    double total = 0.0;
    for (int first = 0; first < n; first += batch) {
      const int count = std::min(batch, n - first);
      adam.zero_grad();
      const Tensor loss = step_loss(std::span(order).subspan(static_cast<std::size_t>(first), static_cast<std::size_t>(count)));
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) throw DivergenceError("training loss is not finite", static_cast<std::size_t>(epoch));
      backward(loss);
      adam.step();
      total += value * count;
    }
    result.losses.push_back(total / n);
    if (config.on_epoch) config.on_epoch(epoch, result.losses.back());
  }
  return result;
}

FrameDecoder frozen(const FrameDecoder& d) {
  auto freeze = [](const Tensor& t) { return Tensor::constant(t.value()); };
  FrameDecoder out = d;
  out.from_latent.weight = freeze(d.from_latent.weight);
  out.from_latent.bias = freeze(d.from_latent.bias);
  for (GraphConv* c : {&out.conv1, &out.conv2}) {
    c->w_point = freeze(c->w_point);
    c->w_neighbor = freeze(c->w_neighbor);
    c->bias = freeze(c->bias);
  }
  return out;
}

struct Windows {
  int length = 0;
  int count = 0;
};

Windows check_alignment(const Matrix& coarse_latents, const Matrix& fine_latents,
                        std::span<const tsacap::FeatureFrame> fine_frames, int window, int dim) {
  const auto frames = coarse_latents.rows();
  if (fine_latents.rows() != frames || static_cast<Eigen::Index>(fine_frames.size()) != frames) {
    throw AlignmentError("paired sequences differ in length: coarse " + std::to_string(frames) + ", fine latents " +
                         std::to_string(fine_latents.rows()) + ", fine frames " + std::to_string(fine_frames.size()));
  }
  if (coarse_latents.cols() != dim || fine_latents.cols() != dim) {
    throw ShapeError("latent width must be " + std::to_string(dim));
  }
  if (window <= 0) throw ShapeError("window must be positive");
  Windows w;
  w.length = static_cast<int>(std::min<Eigen::Index>(window, frames));
  w.count = frames == 0 ? 0 : static_cast<int>(frames) - w.length + 1;
  return w;
}

// Teacher-forced loss over the windows starting at `starts`.
Tensor window_loss(const DeformTransformer& transformer, const FrameDecoder& decoder, const NeighborAverage& average,
                   const Matrix& coarse_latents, const Matrix& fine_latents, const std::vector<Matrix>& targets,
                   int length, std::span<const int> starts) {
  const auto d = coarse_latents.cols();
  const auto batch = static_cast<Eigen::Index>(starts.size());
  const Eigen::Index v = decoder.vertices;
  Matrix source(batch * length, d);
  Matrix target_in = Matrix::Zero(batch * length, d);
  Matrix expected(batch * length * v, tsacap::kFeatureDim);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int first = starts[static_cast<std::size_t>(b)];
    for (int p = 0; p < length; ++p) {
      const Eigen::Index row = b * length + p;
      source.row(row) = coarse_latents.row(first + p);
      if (p > 0) target_in.row(row) = fine_latents.row(first + p - 1);
      expected.middleRows(row * v, v) = targets[static_cast<std::size_t>(first + p)];
    }
  }
  const Tensor predicted =
      transformer.forward(Tensor::constant(std::move(source)), Tensor::constant(std::move(target_in)), static_cast<int>(batch));
  return mse(decoder.forward(predicted, average), expected);
}

std::vector<Matrix> normalized_targets(const AutoEncoder& fine, std::span<const tsacap::FeatureFrame> frames) {
  std::vector<Matrix> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    if (f.rows() != fine.decoder.vertices) throw ShapeError("fine frame vertex count does not match the decoder");
    out.push_back(fine.normalizer.apply(f));
  }
  return out;
}

}  // namespace

TrainResult train_autoencoder(AutoEncoder& ae, const NeighborAverage& average,
                              std::span<const tsacap::FeatureFrame> frames, const TrainConfig& config) {
  std::vector<Matrix> inputs;
  inputs.reserve(frames.size());
  for (const auto& f : frames) {
    if (f.rows() != ae.encoder.vertices) throw ShapeError("frame vertex count does not match the autoencoder");
    inputs.push_back(ae.normalizer.apply(f));
  }
  const Eigen::Index v = ae.encoder.vertices;
  auto step_loss = [&](std::span<const int> ids) {
    Matrix x(static_cast<Eigen::Index>(ids.size()) * v, tsacap::kFeatureDim);
    for (std::size_t k = 0; k < ids.size(); ++k) x.middleRows(static_cast<Eigen::Index>(k) * v, v) = inputs[static_cast<std::size_t>(ids[k])];
    const Tensor input = Tensor::constant(x);
    return mse(ae.decoder.forward(ae.encoder.forward(input, average), average), x);
  };
  TrainResult result = run_epochs(static_cast<int>(inputs.size()), ae.parameters(), config, step_loss);
  if (!result.losses.empty()) ae.trained = true;
  return result;
}

TrainResult train_transformer(DeformTransformer& transformer, const Matrix& coarse_latents, const Matrix& fine_latents,
                              const AutoEncoder& fine, const NeighborAverage& fine_average,
                              std::span<const tsacap::FeatureFrame> fine_frames, int window,
                              const TrainConfig& config) {
  const Windows w = check_alignment(coarse_latents, fine_latents, fine_frames, window, transformer.config().dim);
  const auto targets = normalized_targets(fine, fine_frames);
  const FrameDecoder decoder = frozen(fine.decoder);
  auto step_loss = [&](std::span<const int> starts) {
    return window_loss(transformer, decoder, fine_average, coarse_latents, fine_latents, targets, w.length, starts);
  };
  return run_epochs(w.count, transformer.parameters(), config, step_loss);
}

double transformer_loss(const DeformTransformer& transformer, const Matrix& coarse_latents, const Matrix& fine_latents,
                        const AutoEncoder& fine, const NeighborAverage& fine_average,
                        std::span<const tsacap::FeatureFrame> fine_frames, int window) {
  const Windows w = check_alignment(coarse_latents, fine_latents, fine_frames, window, transformer.config().dim);
  if (w.count == 0) return 0.0;
  const auto targets = normalized_targets(fine, fine_frames);
  std::vector<int> starts(static_cast<std::size_t>(w.count));
  std::iota(starts.begin(), starts.end(), 0);
  return window_loss(transformer, frozen(fine.decoder), fine_average, coarse_latents, fine_latents, targets, w.length,
                     starts)
      .value()(0, 0);
}

}  // namespace clothsr::nn
