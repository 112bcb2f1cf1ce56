#include "clothsr/postprocess.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "clothsr/error.hpp"

namespace clothsr::postprocess {

namespace {

// Re-detection tolerance for vertices pinned exactly at the margin.
constexpr double kPinnedSlack = 1e-12;

Vec3 fallback_direction(const Vec3& axis) {
  const Vec3 x = Vec3::UnitX();
  const Vec3 off = x - axis.dot(x) * axis;
  if (off.norm() > 1e-9) return off.normalized();
  const Vec3 y = Vec3::UnitY();
  return (y - axis.dot(y) * axis).normalized();
}

SurfacePoint around_point(const Vec3& p, const Vec3& c, double r, const Vec3& fallback) {
  const Vec3 d = p - c;
  const double len = d.norm();
  const Vec3 n = len > 0.0 ? Vec3(d / len) : fallback;
  return {c + r * n, n, len - r};
}

}  // namespace

Obstacle::Obstacle(Shape s, Vec3 a, Vec3 b, double radius, double height)
    : shape_(s), a_(std::move(a)), b_(std::move(b)), radius_(radius), height_(height) {
  if (!(radius_ > 0.0)) throw Error("obstacle radius must be positive");
}

Obstacle Obstacle::sphere(const Vec3& center, double radius) { return {Shape::Sphere, center, center, radius, 0.0}; }

Obstacle Obstacle::capsule(const Vec3& p0, const Vec3& p1, double radius) {
  return {Shape::Capsule, p0, p1, radius, 0.0};
}

Obstacle Obstacle::cylinder(const Vec3& base, const Vec3& axis, double radius, double height) {
  if (axis.norm() < 1e-12) throw Error("cylinder axis must be non-zero");
  if (!(height > 0.0)) throw Error("cylinder height must be positive");
  return {Shape::Cylinder, base, axis.normalized(), radius, height};
}

SurfacePoint Obstacle::closest(const Vec3& p) const {
  switch (shape_) {
    case Shape::Sphere:
      return around_point(p, a_, radius_, Vec3::UnitX());
    case Shape::Capsule: {
      const Vec3 seg = b_ - a_;
      const double len2 = seg.squaredNorm();
      const double t = len2 > 0.0 ? std::clamp((p - a_).dot(seg) / len2, 0.0, 1.0) : 0.0;
      const Vec3 axis = len2 > 0.0 ? Vec3(seg / std::sqrt(len2)) : Vec3::UnitZ();
      return around_point(p, a_ + t * seg, radius_, fallback_direction(axis));
    }
    case Shape::Cylinder: {
      const Vec3& axis = b_;
      const Vec3 rel = p - a_;
      const double h = rel.dot(axis);
      const Vec3 radial = rel - h * axis;
      const double rho = radial.norm();
      const Vec3 out = rho > 0.0 ? Vec3(radial / rho) : fallback_direction(axis);
      const bool inside = h >= 0.0 && h <= height_ && rho <= radius_;
      if (inside) {
        // Nearest of side wall, bottom cap and top cap.
        const double to_side = radius_ - rho;
        const double to_bottom = h;
        const double to_top = height_ - h;
        if (to_side <= to_bottom && to_side <= to_top) return {a_ + h * axis + radius_ * out, out, -to_side};
        if (to_bottom <= to_top) return {p - h * axis, -axis, -to_bottom};
        return {p + to_top * axis, axis, -to_top};
      }
      const double hc = std::clamp(h, 0.0, height_);
      const double rc = std::min(rho, radius_);
      const Vec3 q = a_ + hc * axis + rc * out;
      const Vec3 d = p - q;
      return {q, d.normalized(), d.norm()};
    }
  }
  throw Error("unknown obstacle shape");
}

std::string Obstacle::describe() const {
  std::ostringstream s;
  auto v = [&](const Vec3& x) { s << "(" << x.x() << ", " << x.y() << ", " << x.z() << ")"; };
  switch (shape_) {
    case Shape::Sphere:
      s << "sphere center ";
      v(a_);
      break;
    case Shape::Capsule:
      s << "capsule ";
      v(a_);
      s << " - ";
      v(b_);
      break;
    case Shape::Cylinder:
      s << "cylinder base ";
      v(a_);
      s << " axis ";
      v(b_);
      s << " height " << height_;
      break;
  }
  s << " radius " << radius_;
  return s.str();
}

std::vector<Contact> detect_collisions(const Positions& positions, const Obstacle& obstacle, double margin) {
  std::vector<Contact> out;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const SurfacePoint s = obstacle.closest(positions[i]);
    if (s.signed_distance < margin) out.push_back({i, s.point, s.normal, s.signed_distance});
  }
  return out;
}

RefineResult refine(const Mesh& mesh, const Positions& initial, const Obstacle& obstacle, const RefineOptions& options) {
  if (initial.size() != mesh.vertex_count()) throw ShapeError("refine: position count does not match the mesh");
  if (options.lambda < 0.0 || options.stay <= 0.0 || options.max_iterations < 0) {
    throw Error("refine: lambda and max_iterations must be >= 0, stay > 0");
  }

  RefineResult result;
  result.positions = initial;
  result.margin = options.margin >= 0.0 ? options.margin : 1e-3 * bbox_diagonal(initial);

  auto contacts = detect_collisions(initial, obstacle, result.margin);
  if (contacts.empty()) {
    result.collision_free = true;
    return result;
  }

  // Cotangent Laplacian of the input surface and its normal matrix L^T L.
  const Mesh weighted = compute_weights(mesh.with_positions(initial));
  const auto n = static_cast<Eigen::Index>(mesh.vertex_count());
  std::vector<Eigen::Triplet<double>> entries;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto ring = weighted.neighbors(static_cast<std::size_t>(i));
    const auto w = weighted.neighbor_weights(static_cast<std::size_t>(i));
    double diag = 0.0;
    for (std::size_t k = 0; k < ring.size(); ++k) {
      entries.emplace_back(i, ring[k], -w[k]);
      diag += w[k];
    }
    entries.emplace_back(i, i, diag);
  }
  Eigen::SparseMatrix<double> lap(n, n);
  lap.setFromTriplets(entries.begin(), entries.end());
  const Eigen::SparseMatrix<double> normal = Eigen::SparseMatrix<double>(lap.transpose() * lap) * options.lambda;

  // Pinned vertex -> target position; accumulated over iterations.
  std::map<std::size_t, Vec3> pinned;
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    for (const Contact& c : contacts) pinned[c.vertex] = c.point + result.margin * c.normal;

    std::vector<Eigen::Index> free_index(static_cast<std::size_t>(n), -1);
    Eigen::Index free_count = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!pinned.count(static_cast<std::size_t>(i))) free_index[static_cast<std::size_t>(i)] = free_count++;
    }

    // Unknowns are displacements d = p - p_init of the free vertices:
    // (stay I + lambda L^T L)_ff d_f = -(lambda L^T L)_fc d_c.
    Eigen::MatrixXd pinned_d = Eigen::MatrixXd::Zero(n, 3);
    for (const auto& [v, target] : pinned) pinned_d.row(static_cast<Eigen::Index>(v)) = (target - initial[v]).transpose();
    std::vector<Eigen::Triplet<double>> sys;
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(free_count, 3);
    for (Eigen::Index col = 0; col < normal.outerSize(); ++col) {
      const Eigen::Index fc = free_index[static_cast<std::size_t>(col)];
      for (Eigen::SparseMatrix<double>::InnerIterator it(normal, col); it; ++it) {
        const Eigen::Index fr = free_index[static_cast<std::size_t>(it.row())];
        if (fr < 0) continue;
        if (fc >= 0) {
          sys.emplace_back(fr, fc, it.value());
        } else {
          rhs.row(fr) -= it.value() * pinned_d.row(col);
        }
      }
    }
    for (Eigen::Index k = 0; k < free_count; ++k) sys.emplace_back(k, k, options.stay);
    Eigen::SparseMatrix<double> a(free_count, free_count);
    a.setFromTriplets(sys.begin(), sys.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(a);
    if (solver.info() != Eigen::Success) throw NumericError("refine: factorization failed");
    const Eigen::MatrixXd d = solver.solve(rhs);

    for (Eigen::Index i = 0; i < n; ++i) {
      const auto v = static_cast<std::size_t>(i);
      const Eigen::Index f = free_index[v];
      result.positions[v] = f >= 0 ? Vec3(initial[v] + d.row(f).transpose()) : pinned[v];
    }
    result.iterations = iter;
    result.constrained = pinned.size();
    contacts = detect_collisions(result.positions, obstacle, result.margin - kPinnedSlack);
    if (contacts.empty()) {
      result.collision_free = true;
      break;
    }
  }
  return result;
}

}  // namespace clothsr::postprocess
