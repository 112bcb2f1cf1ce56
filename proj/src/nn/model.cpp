#include "clothsr/nn/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "clothsr/binary.hpp"
#include "clothsr/error.hpp"
#include "clothsr/reconstruct.hpp"

namespace clothsr::nn {

namespace {

constexpr char kMagic[] = "DTFM0001";
constexpr double kNormalizedBound = 0.95;

void write_normalizer(binary::Writer& w, const Normalizer& n) {
  for (int k = 0; k < tsacap::kFeatureDim; ++k) w.f64(n.center(k));
  for (int k = 0; k < tsacap::kFeatureDim; ++k) w.f64(n.half_range(k));
}

Normalizer read_normalizer(binary::Reader& r) {
  Normalizer n;
  for (int k = 0; k < tsacap::kFeatureDim; ++k) n.center(k) = r.f64();
  for (int k = 0; k < tsacap::kFeatureDim; ++k) n.half_range(k) = r.f64();
  return n;
}

AutoEncoder make_autoencoder(const ModelConfig& c, int vertices, Rng& rng) {
  AutoEncoder ae;
  ae.encoder = FrameEncoder(vertices, tsacap::kFeatureDim, c.conv_channels, c.latent_dim, rng);
  ae.decoder = FrameDecoder(vertices, tsacap::kFeatureDim, c.conv_channels, c.latent_dim, rng);
  return ae;
}

}  // namespace

void ModelConfig::validate() const {
  if (conv_channels <= 0 || latent_dim <= 0 || heads <= 0 || blocks <= 0 || hidden <= 0 || window <= 0) {
    throw ShapeError("model sizes must be positive");
  }
  if (latent_dim % heads != 0) throw ShapeError("heads must divide latent_dim");
  if (!(learning_rate > 0.0)) throw ShapeError("learning rate must be positive");
}

Normalizer Normalizer::fit(std::span<const tsacap::FeatureFrame> frames) {
  Normalizer n;
  if (frames.empty()) return n;
  Row lo = Row::Constant(std::numeric_limits<double>::infinity());
  Row hi = -lo;
  for (const auto& f : frames) {
    if (f.rows() == 0) continue;
    lo = lo.cwiseMin(f.colwise().minCoeff());
    hi = hi.cwiseMax(f.colwise().maxCoeff());
  }
  for (int k = 0; k < tsacap::kFeatureDim; ++k) {
    if (!std::isfinite(lo(k)) || !std::isfinite(hi(k))) continue;
    n.center(k) = 0.5 * (lo(k) + hi(k));
    const double half = 0.5 * (hi(k) - lo(k));
    // A constant feature only needs centring.
    n.half_range(k) = half > 1e-9 ? half / kNormalizedBound : 1.0;
  }
  return n;
}

Matrix Normalizer::apply(const tsacap::FeatureFrame& frame) const {
  return ((frame.rowwise() - center).array().rowwise() / half_range.array()).matrix();
}

tsacap::FeatureFrame Normalizer::invert(const Matrix& normalized) const {
  if (normalized.cols() != tsacap::kFeatureDim) throw ShapeError("normalizer: expected 9 columns");
  tsacap::FeatureFrame out = (normalized.array().rowwise() * half_range.array()).matrix();
  out.rowwise() += center;
  return out;
}

std::vector<Tensor> AutoEncoder::parameters() const {
  std::vector<Tensor> out;
  encoder.collect(out);
  decoder.collect(out);
  return out;
}

ModelParams ModelParams::init(const ModelConfig& config, int coarse_vertices, int fine_vertices) {
  config.validate();
  if (coarse_vertices <= 0 || fine_vertices <= 0) throw ShapeError("vertex counts must be positive");
  ModelParams m;
  m.config = config;
  m.coarse_vertices = coarse_vertices;
  m.fine_vertices = fine_vertices;
  Rng rng(config.seed);
  m.coarse = make_autoencoder(config, coarse_vertices, rng);
  m.fine = make_autoencoder(config, fine_vertices, rng);
  m.transformer = DeformTransformer({config.latent_dim, config.heads, config.blocks, config.hidden}, rng);
  return m;
}

std::vector<Tensor> ModelParams::parameters() const {
  std::vector<Tensor> out = coarse.parameters();
  for (const auto& t : fine.parameters()) out.push_back(t);
  for (const auto& t : transformer.parameters()) out.push_back(t);
  return out;
}

std::vector<std::uint8_t> serialize_model(const ModelParams& model) {
  const ModelConfig& c = model.config;
  binary::Writer w;
  w.magic(kMagic);
  w.u32(static_cast<std::uint32_t>(c.conv_channels));
  w.u32(static_cast<std::uint32_t>(c.latent_dim));
  w.u32(static_cast<std::uint32_t>(c.heads));
  w.u32(static_cast<std::uint32_t>(c.blocks));
  w.u32(static_cast<std::uint32_t>(c.hidden));
  w.u32(static_cast<std::uint32_t>(c.window));
  w.f64(c.learning_rate);
  w.u64(c.seed);
  w.u32(static_cast<std::uint32_t>(model.coarse_vertices));
  w.u32(static_cast<std::uint32_t>(model.fine_vertices));
  w.u32((model.coarse.trained ? 1u : 0u) | (model.fine.trained ? 2u : 0u) | (model.transformer_trained ? 4u : 0u));
  write_normalizer(w, model.coarse.normalizer);
  write_normalizer(w, model.fine.normalizer);
  const auto params = model.parameters();
  w.u64(params.size());
  for (const auto& p : params) {
    w.u32(static_cast<std::uint32_t>(p.rows()));
    w.u32(static_cast<std::uint32_t>(p.cols()));
    const Matrix& v = p.value();
    for (Eigen::Index k = 0; k < v.size(); ++k) w.f64(v.data()[k]);
  }
  return w.take();
}

ModelParams deserialize_model(std::span<const std::uint8_t> bytes) {
  binary::Reader r(bytes);
  r.expect_magic(kMagic);
  ModelConfig c;
  c.conv_channels = static_cast<int>(r.u32());
  c.latent_dim = static_cast<int>(r.u32());
  c.heads = static_cast<int>(r.u32());
  c.blocks = static_cast<int>(r.u32());
  c.hidden = static_cast<int>(r.u32());
  c.window = static_cast<int>(r.u32());
  c.learning_rate = r.f64();
  c.seed = r.u64();
  const auto coarse_vertices = static_cast<int>(r.u32());
  const auto fine_vertices = static_cast<int>(r.u32());
  const std::uint32_t flags = r.u32();
  try {
    c.validate();
  } catch (const ShapeError& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (coarse_vertices <= 0 || fine_vertices <= 0) throw FormatError("checkpoint header: bad vertex counts");

  ModelParams m = ModelParams::init(c, coarse_vertices, fine_vertices);
  m.coarse.trained = (flags & 1u) != 0;
  m.fine.trained = (flags & 2u) != 0;
  m.transformer_trained = (flags & 4u) != 0;
  m.coarse.normalizer = read_normalizer(r);
  m.fine.normalizer = read_normalizer(r);

  auto params = m.parameters();
  if (r.u64() != params.size()) throw FormatError("checkpoint: parameter count does not match the header");
  for (auto& p : params) {
    const auto rows = static_cast<Eigen::Index>(r.u32());
    const auto cols = static_cast<Eigen::Index>(r.u32());
    if (rows != p.rows() || cols != p.cols()) throw FormatError("checkpoint: parameter shape does not match the header");
    Matrix& v = p.mutable_value();
    for (Eigen::Index k = 0; k < v.size(); ++k) v.data()[k] = r.f64();
  }
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes");
  return m;
}

void write_checkpoint(const std::filesystem::path& path, const ModelParams& model) {
  binary::write_file(path, serialize_model(model));
}

ModelParams read_checkpoint(const std::filesystem::path& path) { return deserialize_model(binary::read_file(path)); }

Matrix stack_frames(std::span<const tsacap::FeatureFrame> frames, const Normalizer& normalizer) {
  if (frames.empty()) return Matrix(0, tsacap::kFeatureDim);
  const Eigen::Index v = frames.front().rows();
  Matrix out(v * static_cast<Eigen::Index>(frames.size()), tsacap::kFeatureDim);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].rows() != v) throw ShapeError("frames disagree on vertex count");
    out.middleRows(static_cast<Eigen::Index>(t) * v, v) = normalizer.apply(frames[t]);
  }
  return out;
}

Matrix encode_frames(const AutoEncoder& ae, const NeighborAverage& average,
                     std::span<const tsacap::FeatureFrame> frames) {
  if (frames.empty()) return Matrix(0, ae.encoder.to_latent.weight.rows());
  for (const auto& f : frames) {
    if (f.rows() != ae.encoder.vertices) {
      throw ShapeError("encoder built for " + std::to_string(ae.encoder.vertices) + " vertices, frame has " +
                       std::to_string(f.rows()));
    }
  }
  return ae.encoder.forward(Tensor::constant(stack_frames(frames, ae.normalizer)), average).value();
}

Eigen::VectorXd encode_frame(const AutoEncoder& ae, const NeighborAverage& average, const tsacap::FeatureFrame& frame) {
  return encode_frames(ae, average, std::span(&frame, 1)).row(0).transpose();
}

std::vector<tsacap::FeatureFrame> decode_latents(const AutoEncoder& ae, const NeighborAverage& average,
                                                 const Matrix& latents) {
  std::vector<tsacap::FeatureFrame> out;
  if (latents.rows() == 0) return out;
  const Matrix decoded = ae.decoder.forward(Tensor::constant(latents), average).value();
  const Eigen::Index v = ae.decoder.vertices;
  for (Eigen::Index t = 0; t < latents.rows(); ++t) out.push_back(ae.normalizer.invert(decoded.middleRows(t * v, v)));
  return out;
}

Matrix predict_fine_latents(const DeformTransformer& transformer, const Matrix& coarse_latents, int window) {
  const Eigen::Index frames = coarse_latents.rows();
  const Eigen::Index d = coarse_latents.cols();
  Matrix fine = Matrix::Zero(frames, d);
  if (frames == 0) return fine;
  if (window <= 0) throw ShapeError("window must be positive");
  const Eigen::Index w = std::min<Eigen::Index>(window, frames);

  auto run = [&](Eigen::Index first, Eigen::Index length) {
    // Decoder input: start token, then the fine latents generated so far.
    Matrix target = Matrix::Zero(length, d);
    for (Eigen::Index p = 1; p < length; ++p) target.row(p) = fine.row(first + p - 1);
    const Tensor source = Tensor::constant(coarse_latents.middleRows(first, w));
    return transformer.forward(source, Tensor::constant(std::move(target)), 1).value();
  };

  for (Eigen::Index p = 0; p < w; ++p) fine.row(p) = run(0, p + 1).row(p);
  for (Eigen::Index t = w; t < frames; ++t) fine.row(t) = run(t - w + 1, w).row(w - 1);
  return fine;
}

MeshSequence synthesize_sequence(const ModelParams& model, const Mesh& coarse_reference, const Mesh& fine_reference,
                                 const std::vector<Positions>& coarse_frames) {
  if (!model.ready()) throw StateError("model is not trained (autoencoders and transformer required)");
  if (static_cast<int>(coarse_reference.vertex_count()) != model.coarse_vertices ||
      static_cast<int>(fine_reference.vertex_count()) != model.fine_vertices) {
    throw ShapeError("mesh vertex counts do not match the model");
  }
  MeshSequence out{fine_reference, {}};
  if (coarse_frames.empty()) return out;

  const Mesh coarse = coarse_reference.has_weights() ? coarse_reference : compute_weights(coarse_reference);
  const Mesh fine = fine_reference.has_weights() ? fine_reference : compute_weights(fine_reference);
  const NeighborAverage coarse_avg(coarse);
  const NeighborAverage fine_avg(fine);

  const tsacap::FeatureSequence features = tsacap::encode_sequence(coarse, coarse_frames);
  const Matrix coarse_latents = encode_frames(model.coarse, coarse_avg, features.frames);
  const Matrix fine_latents = predict_fine_latents(model.transformer, coarse_latents, model.config.window);
  const auto fine_features = decode_latents(model.fine, fine_avg, fine_latents);

  const reconstruct::Reconstructor solver(fine, 0);
  const Vec3 anchor = fine.vertices()[0];
  out.frames.reserve(fine_features.size());
  for (const auto& f : fine_features) out.frames.push_back(solver.solve(f, anchor));
  return out;
}

}  // namespace clothsr::nn
