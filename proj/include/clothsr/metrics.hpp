#pragma once

#include <span>

#include "clothsr/mesh.hpp"

namespace clothsr::metrics {

/// sqrt of the mean squared per-vertex distance over all frames and vertices.
/// Throws ShapeError when frame or vertex counts differ.
double rmse(const MeshSequence& a, const MeshSequence& b);

/// Closest-point distance from p to triangle (a, b, c).
double point_triangle_distance(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

/// Largest distance from a vertex of `from` to the surface of `to`.
double directed_hausdorff(const Mesh& from, const Mesh& to);

/// Symmetric Hausdorff distance over vertex-to-nearest-triangle distances.
/// Vertex counts may differ. Throws Error for empty meshes.
double hausdorff(const Mesh& a, const Mesh& b);

/// Per-frame Hausdorff averaged over frames; topologies may differ between a and b.
double mean_hausdorff(const MeshSequence& a, const MeshSequence& b);

struct StedTerms {
  double spatial = 0.0;   ///< mean |l_b / l_a - 1| over frames and edges
  double temporal = 0.0;  ///< mean per-vertex velocity difference / mean rest edge length of a
  double combined = 0.0;  ///< sqrt(spatial^2 + w^2 temporal^2)
};

/// Spatio-temporal edge difference with `a` as the reference sequence.
/// Velocities use a one-frame window. Requires shared topology and frame counts.
StedTerms sted_terms(const MeshSequence& a, const MeshSequence& b, double temporal_weight = 1.0);
double sted(const MeshSequence& a, const MeshSequence& b, double temporal_weight = 1.0);

}  // namespace clothsr::metrics
