#pragma once

// Brute-force reference implementations shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "clothsr/mesh.hpp"
#include "clothsr/rng.hpp"
#include "clothsr/tsacap.hpp"
#include "support.hpp"

namespace oracle {

using namespace clothsr;

// ---------------------------------------------------------------- rotations

struct TinyInstance {
  Mesh mesh;
  tsacap::RotationResolution res;
};

/// Triangle strip of `n` vertices carrying `frames` frames of canonical
/// axis-angle rotations sampled from a noisy, slowly turning field whose
/// angles sweep past pi and 2 pi (so canonical angles fold).
inline TinyInstance tiny_instance(Rng& rng, int n, int frames) {
  Positions v;
  for (int k = 0; k < n; ++k) v.emplace_back(0.5 * k, (k % 2) * 1.0, 0.0);
  std::vector<Face> f;
  for (int k = 0; k + 2 < n; ++k) f.push_back(k % 2 == 0 ? Face{k, k + 1, k + 2} : Face{k + 1, k, k + 2});
  TinyInstance out{Mesh(v, f), tsacap::RotationResolution(static_cast<std::size_t>(frames), static_cast<std::size_t>(n))};

  const Vec3 axis = testing::random_unit(rng);
  const double start = rng.uniform(0.0, 2.5 * testing::kPi);
  const double step = rng.uniform(-0.6, 0.6);
  std::vector<double> offset(n);
  std::vector<Vec3> tilt(n);
  for (int i = 0; i < n; ++i) {
    offset[i] = rng.uniform(-1.2, 1.2);
    tilt[i] = 0.8 * Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
  }
  for (int t = 0; t < frames; ++t) {
    for (int i = 0; i < n; ++i) {
      double angle = start + step * t + offset[i] + rng.uniform(-0.2, 0.2);
      // Occasional near-identity rotations exercise the undecided branch.
      if (rng.uniform() < 0.05) angle = 2.0 * testing::kPi * std::round(angle / (2.0 * testing::kPi)) + 1e-4;
      const Vec3 w = (axis + tilt[i] + 0.1 * testing::random_unit(rng)).normalized();
      const auto aa = tsacap::to_axis_angle(testing::rot(w, angle));
      out.res.axis(t, i) = aa.axis;
      out.res.angle(t, i) = aa.angle;
    }
  }
  return out;
}

inline int consistency(double dot, double a, double b, const tsacap::ResolveOptions& opts) {
  if (a < opts.angle_threshold || b < opts.angle_threshold) return 0;
  if (dot > opts.axis_threshold) return 1;
  if (dot < -opts.axis_threshold) return -1;
  return 0;
}

/// Best orientation objective of frame t over every flag assignment, with the
/// gauge vertex fixed when the frame is gauged. Earlier frames are taken as resolved.
inline int best_orientation_objective(const Mesh& mesh, const tsacap::RotationResolution& res, std::size_t t,
                                      const tsacap::ResolveOptions& opts) {
  const std::size_t n = res.vertex_count();
  const bool temporal = opts.temporal && t > 0;
  const auto edges = mesh.edges();
  std::vector<int> s_edge;
  for (const auto& [i, j] : edges) {
    s_edge.push_back(oracle::consistency(res.axis(t, i).dot(res.axis(t, j)), res.angle(t, i), res.angle(t, j), opts));
  }
  std::vector<int> s_time(n, 0);
  if (temporal) {
    for (std::size_t i = 0; i < n; ++i) {
      s_time[i] = oracle::consistency(res.axis(t, i).dot(res.orient(t - 1, i) * res.axis(t - 1, i)), res.angle(t, i),
                              res.angle(t - 1, i), opts);
    }
  }
  const bool gauged = !temporal;
  int best = std::numeric_limits<int>::min();
  for (unsigned mask = 0; mask < (1u << n); ++mask) {
    if (gauged && (mask & 1u)) continue;
    auto o = [&](std::size_t i) { return (mask >> i) & 1u ? -1 : 1; };
    int total = 0;
    for (std::size_t e = 0; e < edges.size(); ++e) total += o(edges[e].first) * o(edges[e].second) * s_edge[e];
    for (std::size_t i = 0; i < n; ++i) total += o(i) * s_time[i];
    best = std::max(best, total);
  }
  return best;
}

/// Cycle objective of frame t for counts `r`, summed in a fixed order.
inline double cycle_objective(const Mesh& mesh, const tsacap::RotationResolution& res, std::size_t t,
                              const std::vector<int>& r, const tsacap::ResolveOptions& opts) {
  auto resolved = [&](std::size_t i) { return res.orient(t, i) * res.angle(t, i) + tsacap::kTwoPi * r[i]; };
  double total = 0.0;
  for (const auto& [i, j] : mesh.edges()) {
    const double d = resolved(i) - resolved(j);
    total += d * d;
  }
  if (opts.temporal && t > 0) {
    for (std::size_t i = 0; i < res.vertex_count(); ++i) {
      const double d = resolved(i) - res.resolved_angle(t - 1, i);
      total += d * d;
    }
  }
  return total;
}

/// Exhaustive minimization over r in {-2..2}^n (gauge vertex fixed at 0 when
/// gauged) with orientations taken from `res`. Returns the minimizing counts.
inline std::vector<int> best_cycles(const Mesh& mesh, const tsacap::RotationResolution& res, std::size_t t,
                                    const tsacap::ResolveOptions& opts) {
  const std::size_t n = res.vertex_count();
  const bool temporal = opts.temporal && t > 0;
  std::vector<double> base(n);
  for (std::size_t i = 0; i < n; ++i) base[i] = res.orient(t, i) * res.angle(t, i);
  // Edges grouped by their later endpoint so partial sums are complete once it is assigned.
  std::vector<std::vector<int>> earlier(n);
  for (const auto& [i, j] : mesh.edges()) earlier[std::max(i, j)].push_back(std::min(i, j));

  std::vector<int> r(n, 0), best_r(n, 0);
  std::vector<double> value(n, 0.0);
  double best = std::numeric_limits<double>::infinity();
  auto recurse = [&](auto&& self, std::size_t k, double partial) -> void {
    if (partial >= best) return;
    if (k == n) {
      best = partial;
      best_r = r;
      return;
    }
    const bool fixed = k == 0 && !temporal;
    for (int c = fixed ? 0 : -2; c <= (fixed ? 0 : 2); ++c) {
      r[k] = c;
      value[k] = base[k] + tsacap::kTwoPi * c;
      double add = 0.0;
      for (int j : earlier[k]) {
        const double d = value[k] - value[j];
        add += d * d;
      }
      if (temporal) {
        const double d = value[k] - res.resolved_angle(t - 1, k);
        add += d * d;
      }
      self(self, k + 1, partial + add);
    }
    r[k] = 0;
  };
  recurse(recurse, 0, 0.0);
  return best_r;
}

// ---------------------------------------------------------------- metrics

inline double rmse(const MeshSequence& a, const MeshSequence& b) {
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    for (std::size_t i = 0; i < a.frames[t].size(); ++i) {
      const Vec3 d = a.frames[t][i] - b.frames[t][i];
      sum += d.x() * d.x() + d.y() * d.y() + d.z() * d.z();
      count += 1.0;
    }
  }
  return std::sqrt(sum / count);
}

inline double segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double s = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + s * ab)).norm();
}

/// Plane projection, inside test by barycentric signs, else nearest edge.
inline double point_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = (b - a).cross(c - a);
  const double area2 = n.squaredNorm();
  const Vec3 q = p - n * ((p - a).dot(n) / area2);
  const double u = (c - b).cross(q - b).dot(n);
  const double v = (a - c).cross(q - c).dot(n);
  const double w = (b - a).cross(q - a).dot(n);
  if (u >= 0 && v >= 0 && w >= 0) return (p - q).norm();
  return std::min({segment_distance(p, a, b), segment_distance(p, b, c), segment_distance(p, c, a)});
}

inline double directed_hausdorff(const Mesh& from, const Mesh& to) {
  double worst = 0.0;
  for (const auto& p : from.vertices()) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& f : to.faces()) {
      best = std::min(best, point_triangle(p, to.vertices()[f[0]], to.vertices()[f[1]], to.vertices()[f[2]]));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

inline double hausdorff(const Mesh& a, const Mesh& b) { return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a)); }

/// Relative edge-length error and velocity error summed term by term.
inline double sted(const MeshSequence& a, const MeshSequence& b) {
  const auto& faces = a.reference.faces();
  std::vector<std::pair<int, int>> edges;
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) edges.emplace_back(std::min(f[k], f[(k + 1) % 3]), std::max(f[k], f[(k + 1) % 3]));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());

  const std::size_t frames = a.frames.size();
  const std::size_t verts = a.frames[0].size();
  double spatial = 0.0;
  for (std::size_t t = 0; t < frames; ++t) {
    for (const auto& [i, j] : edges) {
      spatial += std::abs((b.frames[t][i] - b.frames[t][j]).norm() / (a.frames[t][i] - a.frames[t][j]).norm() - 1.0);
    }
  }
  spatial /= static_cast<double>(frames * edges.size());

  double rest = 0.0;
  for (const auto& [i, j] : edges) rest += (a.frames[0][i] - a.frames[0][j]).norm();
  rest /= static_cast<double>(edges.size());
  double temporal = 0.0;
  for (std::size_t t = 1; t < frames; ++t) {
    for (std::size_t i = 0; i < verts; ++i) {
      temporal += ((b.frames[t][i] - b.frames[t - 1][i]) - (a.frames[t][i] - a.frames[t - 1][i])).norm();
    }
  }
  temporal /= static_cast<double>((frames - 1) * verts) * rest;
  return std::sqrt(spatial * spatial + temporal * temporal);
}

}  // namespace oracle
