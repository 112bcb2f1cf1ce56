#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Geometry>

#include "clothsr/dataset.hpp"
#include "clothsr/mesh.hpp"
#include "clothsr/nn/autodiff.hpp"
#include "clothsr/rng.hpp"

namespace testing {

using namespace clothsr;

inline constexpr double kPi = 3.14159265358979323846;

inline Mat3 rot(const Vec3& axis, double angle) { return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix(); }
inline Mat3 rot_x(double a) { return rot(Vec3::UnitX(), a); }
inline Mat3 rot_z(double a) { return rot(Vec3::UnitZ(), a); }

inline Vec3 random_unit(Rng& rng) {
  Vec3 v;
  do {
    v = Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  } while (v.norm() < 0.1 || v.norm() > 1.0);
  return v.normalized();
}

inline Mat3 random_rotation(Rng& rng) { return rot(random_unit(rng), rng.uniform(0.0, kPi)); }

inline Mat3 random_spd(Rng& rng) {
  Mat3 a;
  for (int k = 0; k < 9; ++k) a(k / 3, k % 3) = rng.uniform(-0.4, 0.4);
  return Mat3::Identity() + a * a.transpose();
}

inline Mesh weighted_grid(int n, double size = 1.0) { return compute_weights(dataset::make_grid(n, size)); }

inline double max_distance(const Positions& a, const Positions& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, (a[i] - b[i]).norm());
  return m;
}

inline Positions transformed(const Positions& p, const Mat3& m, const Vec3& shift = Vec3::Zero()) {
  Positions out;
  for (const auto& x : p) out.push_back(m * x + shift);
  return out;
}

inline nn::Matrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  nn::Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-scale, scale);
  }
  return m;
}

struct GradCheck {
  double worst = 0.0;  ///< largest per-tensor relative error
  std::size_t entries = 0;
};

/// Compares analytic gradients of `loss()` against central differences for
/// every entry of every tensor in `params`. The error of one tensor is
/// |g_analytic - g_numeric| / max(|g_analytic|, |g_numeric|, 1e-5) in the 2-norm;
/// the floor keeps gradients that vanish identically (attention key biases)
/// from turning difference noise into a ratio of 1.
inline GradCheck check_gradients(const std::function<nn::Tensor()>& loss, std::vector<nn::Tensor> params,
                                 double h = 1e-5) {
  for (auto& p : params) p.zero_grad();
  nn::backward(loss());
  GradCheck out;
  for (auto& p : params) {
    const nn::Matrix analytic = p.grad();
    nn::Matrix numeric(p.rows(), p.cols());
    for (Eigen::Index k = 0; k < p.value().size(); ++k) {
      double& w = p.mutable_value().data()[k];
      const double saved = w;
      w = saved + h;
      const double up = loss().value()(0, 0);
      w = saved - h;
      const double down = loss().value()(0, 0);
      w = saved;
      numeric.data()[k] = (up - down) / (2.0 * h);
    }
    const double scale = std::max({analytic.norm(), numeric.norm(), 1e-5});
    out.worst = std::max(out.worst, (analytic - numeric).norm() / scale);
    out.entries += static_cast<std::size_t>(p.value().size());
  }
  return out;
}

/// Vertices within `rings` edges of any vertex in `seeds`.
inline std::vector<char> ring_neighbourhood(const Mesh& m, const std::vector<std::size_t>& seeds, int rings) {
  std::vector<int> dist(m.vertex_count(), -1);
  std::vector<std::size_t> frontier = seeds;
  for (auto s : seeds) dist[s] = 0;
  for (int r = 1; r <= rings; ++r) {
    std::vector<std::size_t> next;
    for (auto v : frontier) {
      for (int w : m.neighbors(v)) {
        if (dist[w] < 0) {
          dist[w] = r;
          next.push_back(static_cast<std::size_t>(w));
        }
      }
    }
    frontier = std::move(next);
  }
  std::vector<char> near(m.vertex_count());
  for (std::size_t i = 0; i < near.size(); ++i) near[i] = dist[i] >= 0;
  return near;
}

}  // namespace testing
