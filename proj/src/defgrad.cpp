#include "clothsr/defgrad.hpp"

#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "clothsr/error.hpp"

namespace clothsr::defgrad {

Mat3 fit_gradient(const Mesh& reference, std::span<const Vec3> frame, std::size_t i) {
  const Positions n0 = vertex_normals(reference, reference.vertices());
  const Positions nt = vertex_normals(reference, frame);
  return fit_gradient(reference, frame, i, n0[i], nt[i]);
}

Mat3 fit_gradient(const Mesh& reference, std::span<const Vec3> frame, std::size_t i,
                  const Vec3& reference_normal, const Vec3& frame_normal) {
  if (!reference.has_weights()) throw StateError("fit_gradient needs cotangent weights on the reference");
  if (frame.size() != reference.vertex_count()) throw ShapeError("frame vertex count does not match reference");

  const auto& rest = reference.vertices();
  const auto ring = reference.neighbors(i);
  const auto weights = reference.neighbor_weights(i);

  Mat3 a = Mat3::Zero();
  Mat3 b = Mat3::Zero();
  double mean_weight = 0.0;
  for (std::size_t k = 0; k < ring.size(); ++k) {
    const int j = ring[k];
    const Vec3 e0 = rest[i] - rest[j];
    const Vec3 et = frame[i] - frame[j];
    a += weights[k] * e0 * e0.transpose();
    b += weights[k] * et * e0.transpose();
    mean_weight += std::abs(weights[k]);
  }
  mean_weight /= static_cast<double>(ring.size());

  Eigen::SelfAdjointEigenSolver<Mat3> eig(a, Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double scale = ev.cwiseAbs().maxCoeff();
  if (std::abs(ev(0)) <= kPlanarRingThreshold * scale || std::abs(ev(1)) <= kPlanarRingThreshold * scale) {
    const double w = mean_weight;
    a += w * reference_normal * reference_normal.transpose();
    b += w * frame_normal * reference_normal.transpose();
  }

  Eigen::FullPivLU<Mat3> lu(a);
  lu.setThreshold(1e-12);
  if (lu.rank() < 3) {
    throw DegenerateNeighborhoodError("vertex " + std::to_string(i) + " has a degenerate one-ring", i);
  }
  // T A = B with A symmetric  =>  T = (A^{-1} B^T)^T.
  return lu.solve(b.transpose()).transpose();
}

Polar polar_decompose(const Mat3& t) {
  if (!t.allFinite()) throw NumericError("polar_decompose: non-finite matrix");
  Eigen::JacobiSVD<Mat3> svd(t, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Vec3 d(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  Polar out;
  out.rotation = u * d.asDiagonal() * v.transpose();
  const Mat3 s = out.rotation.transpose() * t;
  out.stretch = 0.5 * (s + s.transpose());
  return out;
}

DeformField compute_field(const Mesh& reference, std::span<const Vec3> frame) {
  const Positions n0 = vertex_normals(reference, reference.vertices());
  const Positions nt = vertex_normals(reference, frame);
  DeformField field;
  const std::size_t n = reference.vertex_count();
  field.gradient.resize(n);
  field.rotation.resize(n);
  field.stretch.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    field.gradient[i] = fit_gradient(reference, frame, i, n0[i], nt[i]);
    const Polar p = polar_decompose(field.gradient[i]);
    field.rotation[i] = p.rotation;
    field.stretch[i] = p.stretch;
  }
  return field;
}

}  // namespace clothsr::defgrad
