#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "clothsr/mesh.hpp"

namespace clothsr::postprocess {

enum class Shape { Sphere, Capsule, Cylinder };

struct SurfacePoint {
  Vec3 point;
  Vec3 normal;             ///< outward unit normal
  double signed_distance;  ///< negative inside
};

/// Analytic solid the cloth must stay outside of.
///
/// Sphere: center a, radius. Capsule: segment a-b swept by radius. Cylinder:
/// base center a, unit axis, radius and height, with flat caps.
class Obstacle {
 public:
  static Obstacle sphere(const Vec3& center, double radius);
  static Obstacle capsule(const Vec3& p0, const Vec3& p1, double radius);
  static Obstacle cylinder(const Vec3& base, const Vec3& axis, double radius, double height);

  Shape shape() const noexcept { return shape_; }
  double radius() const noexcept { return radius_; }

  /// Closest surface point. Degenerate queries (a point on the sphere center
  /// or capsule axis) resolve toward +x, or +y when +x is along the axis.
  SurfacePoint closest(const Vec3& p) const;
  double signed_distance(const Vec3& p) const { return closest(p).signed_distance; }

  std::string describe() const;

 private:
  Obstacle(Shape s, Vec3 a, Vec3 b, double radius, double height);
  Shape shape_;
  Vec3 a_;
  Vec3 b_;  // capsule end point, or cylinder axis
  double radius_;
  double height_;
};

struct Contact {
  std::size_t vertex;
  Vec3 point;
  Vec3 normal;
  double signed_distance;
};

/// Every vertex with signed distance below `margin`, in vertex order.
std::vector<Contact> detect_collisions(const Positions& positions, const Obstacle& obstacle, double margin);

struct RefineOptions {
  double lambda = 1.0;
  /// Weight of |p - p_init|^2 on vertices that are not pinned.
  double stay = 20.0;
  int max_iterations = 10;
  /// Collision margin; negative means 1e-3 of the bounding-box diagonal.
  double margin = -1.0;
};

struct RefineResult {
  Positions positions;
  int iterations = 0;
  bool collision_free = false;
  std::size_t constrained = 0;  ///< vertices pinned to the obstacle surface
  double margin = 0.0;
};

/// Pushes colliding vertices to `margin` outside the obstacle while keeping
/// the rest of the mesh close to its input: colliding vertices are pinned to
/// their offset closest points, every other vertex is pulled toward its input
/// position, and lambda weighs the change of the cotangent Laplacian of the
/// input surface. Repeats detection and solve until no vertex collides or
/// max_iterations solves were made; a failure is reported in the result, not thrown.
RefineResult refine(const Mesh& mesh, const Positions& initial, const Obstacle& obstacle,
                    const RefineOptions& options = {});

}  // namespace clothsr::postprocess
