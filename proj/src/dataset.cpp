#include "clothsr/dataset.hpp"

#include <cmath>
#include <limits>

#include <Eigen/Geometry>

#include "clothsr/error.hpp"

namespace clothsr::dataset {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

std::string_view to_string(Motion m) {
  switch (m) {
    case Motion::Bend: return "bend";
    case Motion::Twist: return "twist";
    case Motion::Wave: return "wave";
    case Motion::Spin: return "spin";
  }
  return "bend";
}

Motion parse_motion(std::string_view name) {
  if (name == "bend") return Motion::Bend;
  if (name == "twist") return Motion::Twist;
  if (name == "wave") return Motion::Wave;
  if (name == "spin") return Motion::Spin;
  throw Error("unknown motion family '" + std::string(name) + "' (bend | twist | wave | spin)");
}

void SyntheticConfig::validate() const {
  if (coarse_resolution < 2) throw Error("coarse resolution must be at least 2");
  if (fine_resolution <= coarse_resolution) throw Error("fine resolution must exceed coarse resolution");
  if (frame_count < 4) throw Error("frame_count must be at least 4");
  if (!(size > 0.0)) throw Error("size must be positive");
}

Mesh make_grid(int n, double size) {
  if (n < 2) throw Error("grid needs at least 2 vertices per side");
  Positions v;
  v.reserve(static_cast<std::size_t>(n * n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) v.emplace_back(size * i / (n - 1), size * j / (n - 1), 0.0);
  }
  std::vector<Face> f;
  f.reserve(static_cast<std::size_t>(2 * (n - 1) * (n - 1)));
  for (int j = 0; j + 1 < n; ++j) {
    for (int i = 0; i + 1 < n; ++i) {
      const int a = j * n + i;
      const int b = a + 1;
      const int c = a + n;
      const int d = c + 1;
      f.push_back({a, b, d});
      f.push_back({a, d, c});
    }
  }
  return Mesh(std::move(v), std::move(f));
}

Vec3 drive(const Vec3& rest, const MotionParams& params, double s, double size) {
  const double x = rest.x();
  const double y = rest.y();
  switch (params.motion) {
    case Motion::Bend: {
      // Roll the sheet around an axis parallel to y; arc length along x is preserved.
      const double kappa = params.total_angle * s / size;
      if (std::abs(kappa) < 1e-12) return rest;
      return {std::sin(kappa * x) / kappa, y, (1.0 - std::cos(kappa * x)) / kappa};
    }
    case Motion::Twist: {
      const double c = 0.5 * size;
      const double alpha = params.total_angle * s * x / size;
      return {x, c + (y - c) * std::cos(alpha), (y - c) * std::sin(alpha)};
    }
    case Motion::Wave: {
      const double u = x / size;
      const double z = params.wave_amplitude * size * s * u *
                       std::sin(2.0 * kPi * (params.wave_cycles * u - 0.5 * s));
      return {x, y, z};
    }
    case Motion::Spin: {
      const double a = params.total_angle * s;
      return {std::cos(a) * x - std::sin(a) * y, std::sin(a) * x + std::cos(a) * y, rest.z()};
    }
  }
  return rest;
}

Positions drive_positions(const Mesh& rest, const MotionParams& params, double s, double size) {
  Positions out;
  out.reserve(rest.vertex_count());
  for (const auto& p : rest.vertices()) out.push_back(drive(p, params, s, size));
  return out;
}

double progress(std::size_t t, std::size_t n) {
  return n <= 1 ? 0.0 : static_cast<double>(t) / static_cast<double>(n - 1);
}

PairedSequences gen_dataset(const SyntheticConfig& config) {
  config.validate();
  Rng rng(config.seed);
  const double direction = rng.uniform(0.0, kPi);
  const double phase = rng.uniform(0.0, 2.0 * kPi);
  const Vec3 wave_dir(std::cos(direction), std::sin(direction), 0.0);

  PairedSequences out;
  out.coarse.reference = make_grid(config.coarse_resolution, config.size);
  out.fine.reference = make_grid(config.fine_resolution, config.size);
  const auto n = static_cast<std::size_t>(config.frame_count);
  for (std::size_t t = 0; t < n; ++t) {
    const double s = progress(t, n);
    out.coarse.frames.push_back(drive_positions(out.coarse.reference, config.driver, s, config.size));

    Positions fine = drive_positions(out.fine.reference, config.driver, s, config.size);
    const Positions normals = vertex_normals(out.fine.reference, fine);
    const auto& rest = out.fine.reference.vertices();
    for (std::size_t i = 0; i < fine.size(); ++i) {
      const double u = rest[i].x() / config.size;
      const double w = std::sin(2.0 * kPi * config.wrinkle_frequency * rest[i].dot(wave_dir) / config.size + phase);
      fine[i] += config.wrinkle_amplitude * config.size * s * u * w * normals[i];
    }
    out.fine.frames.push_back(std::move(fine));
  }
  return out;
}

Upsampler::Upsampler(const Mesh& coarse_rest, const Mesh& fine_rest) {
  levels_meshes_.push_back(coarse_rest);
  // Subdivide while doing so does not overshoot the fine edge density.
  const double coarse_edges = std::sqrt(static_cast<double>(coarse_rest.vertex_count())) - 1.0;
  const double fine_edges = std::sqrt(static_cast<double>(fine_rest.vertex_count())) - 1.0;
  double edges = coarse_edges;
  while (edges * 2.0 <= fine_edges + 1e-9) {
    levels_meshes_.push_back(subdivide_midpoint(levels_meshes_.back()));
    edges *= 2.0;
    ++levels_;
  }

  const Mesh& host = levels_meshes_.back();
  const auto& hv = host.vertices();
  for (const auto& q : fine_rest.vertices()) {
    double best = std::numeric_limits<double>::infinity();
    Face best_face{};
    Vec3 best_bary = Vec3::Zero();
    for (const Face& f : host.faces()) {
      const Eigen::Vector2d a = hv[f[0]].head<2>();
      const Eigen::Vector2d b = hv[f[1]].head<2>();
      const Eigen::Vector2d c = hv[f[2]].head<2>();
      Eigen::Matrix2d m;
      m.col(0) = b - a;
      m.col(1) = c - a;
      const Eigen::Vector2d uv = m.colPivHouseholderQr().solve(q.head<2>() - a);
      const Vec3 bary(1.0 - uv.x() - uv.y(), uv.x(), uv.y());
      // Distance outside the triangle in barycentric units; 0 when inside.
      const double outside = std::max(0.0, -bary.minCoeff());
      if (outside < best) {
        best = outside;
        best_face = f;
        best_bary = bary;
        if (outside == 0.0) break;
      }
    }
    host_.push_back(best_face);
    barycentric_.push_back(best_bary);
  }
}

Positions Upsampler::apply(std::span<const Vec3> coarse_positions) const {
  Positions level(coarse_positions.begin(), coarse_positions.end());
  for (int k = 0; k < levels_; ++k) level = subdivide_positions(levels_meshes_[k], level);
  Positions out;
  out.reserve(host_.size());
  for (std::size_t i = 0; i < host_.size(); ++i) {
    const Face& f = host_[i];
    const Vec3& w = barycentric_[i];
    out.push_back(w(0) * level[f[0]] + w(1) * level[f[1]] + w(2) * level[f[2]]);
  }
  return out;
}

}  // namespace clothsr::dataset
