#include "clothsr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Geometry>

#include "clothsr/error.hpp"

namespace clothsr::metrics {

namespace {

void check_same_shape(const MeshSequence& a, const MeshSequence& b) {
  if (a.frame_count() != b.frame_count()) {
    throw ShapeError("frame counts differ (" + std::to_string(a.frame_count()) + " vs " +
                     std::to_string(b.frame_count()) + ")");
  }
  if (a.vertex_count() != b.vertex_count()) {
    throw ShapeError("vertex counts differ (" + std::to_string(a.vertex_count()) + " vs " +
                     std::to_string(b.vertex_count()) + ")");
  }
  a.validate();
  b.validate();
}

// Closest point on triangle by Voronoi-region classification.
Vec3 closest_point(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  if (d1 <= 0.0 && d2 <= 0.0) return a;

  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return b;

  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) return a + (d1 / (d1 - d3)) * ab;

  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return c;

  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) return a + (d2 / (d2 - d6)) * ac;

  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    return b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b);
  }
  const double denom = 1.0 / (va + vb + vc);
  return a + ab * (vb * denom) + ac * (vc * denom);
}

}  // namespace

double rmse(const MeshSequence& a, const MeshSequence& b) {
  check_same_shape(a, b);
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < a.frame_count(); ++t) {
    for (std::size_t i = 0; i < a.vertex_count(); ++i) {
      sum += (a.frames[t][i] - b.frames[t][i]).squaredNorm();
      ++count;
    }
  }
  return count == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(count));
}

double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  return (p - closest_point(p, a, b, c)).norm();
}

double directed_hausdorff(const Mesh& from, const Mesh& to) {
  const auto& tv = to.vertices();
  const auto& faces = to.faces();
  std::vector<Eigen::AlignedBox3d> boxes;
  boxes.reserve(faces.size());
  for (const Face& f : faces) {
    Eigen::AlignedBox3d box(tv[f[0]]);
    box.extend(tv[f[1]]);
    box.extend(tv[f[2]]);
    boxes.push_back(box);
  }
  double worst = 0.0;
  for (const auto& p : from.vertices()) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < faces.size(); ++k) {
      // A box farther than the best triangle so far cannot contain a closer point.
      if (boxes[k].squaredExteriorDistance(p) >= best * best) continue;
      best = std::min(best, point_triangle_distance(p, tv[faces[k][0]], tv[faces[k][1]], tv[faces[k][2]]));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

double hausdorff(const Mesh& a, const Mesh& b) {
  if (a.vertex_count() == 0 || b.vertex_count() == 0 || a.face_count() == 0 || b.face_count() == 0) {
    throw Error("hausdorff: empty mesh");
  }
  return std::max(directed_hausdorff(a, b), directed_hausdorff(b, a));
}

double mean_hausdorff(const MeshSequence& a, const MeshSequence& b) {
  if (a.frame_count() != b.frame_count()) throw ShapeError("hausdorff: frame counts differ");
  if (a.frame_count() == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t t = 0; t < a.frame_count(); ++t) {
    sum += hausdorff(a.reference.with_positions(a.frames[t]), b.reference.with_positions(b.frames[t]));
  }
  return sum / static_cast<double>(a.frame_count());
}

StedTerms sted_terms(const MeshSequence& a, const MeshSequence& b, double temporal_weight) {
  check_same_shape(a, b);
  if (a.reference.faces() != b.reference.faces()) throw ShapeError("sted: topologies differ");
  StedTerms out;
  const auto edges = a.reference.edges();
  if (a.frame_count() == 0 || edges.empty()) return out;

  double spatial = 0.0;
  std::size_t spatial_terms = 0;
  for (std::size_t t = 0; t < a.frame_count(); ++t) {
    for (const auto& [i, j] : edges) {
      const double la = (a.frames[t][i] - a.frames[t][j]).norm();
      if (la <= 0.0) continue;
      const double lb = (b.frames[t][i] - b.frames[t][j]).norm();
      spatial += std::abs(lb / la - 1.0);
      ++spatial_terms;
    }
  }
  out.spatial = spatial_terms == 0 ? 0.0 : spatial / static_cast<double>(spatial_terms);

  double mean_edge = 0.0;
  for (const auto& [i, j] : edges) mean_edge += (a.frames[0][i] - a.frames[0][j]).norm();
  mean_edge /= static_cast<double>(edges.size());

  if (a.frame_count() > 1 && mean_edge > 0.0) {
    double temporal = 0.0;
    for (std::size_t t = 1; t < a.frame_count(); ++t) {
      for (std::size_t i = 0; i < a.vertex_count(); ++i) {
        const Vec3 va = a.frames[t][i] - a.frames[t - 1][i];
        const Vec3 vb = b.frames[t][i] - b.frames[t - 1][i];
        temporal += (vb - va).norm();
      }
    }
    out.temporal = temporal / static_cast<double>((a.frame_count() - 1) * a.vertex_count()) / mean_edge;
  }
  out.combined = std::sqrt(out.spatial * out.spatial + temporal_weight * temporal_weight * out.temporal * out.temporal);
  return out;
}

double sted(const MeshSequence& a, const MeshSequence& b, double temporal_weight) {
  return sted_terms(a, b, temporal_weight).combined;
}

}  // namespace clothsr::metrics
