#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "clothsr/mesh.hpp"

namespace clothsr::defgrad {

struct Polar {
  Mat3 rotation;  ///< proper rotation, det = +1
  Mat3 stretch;   ///< symmetric scale/shear, rotation * stretch == input
};

/// Per-vertex deformation gradients of one frame and their polar factors.
struct DeformField {
  std::vector<Mat3> gradient;
  std::vector<Mat3> rotation;
  std::vector<Mat3> stretch;

  std::size_t size() const noexcept { return gradient.size(); }
};

/// Relative threshold on the smallest eigenvalue of the one-ring edge moment
/// matrix below which the ring is treated as planar and the normal pair is added.
inline constexpr double kPlanarRingThreshold = 1e-10;

/// Weighted least-squares deformation gradient of vertex `i`:
///   argmin_T  sum_j c_ij |(p_i - p_j) - T (q_i - q_j)|^2
/// with q the reference and p the frame. A planar reference one-ring is
/// completed by mapping the reference vertex normal to the deformed one,
/// weighted by the ring's mean |c_ij|.
///
/// `reference` must carry cotangent weights.
Mat3 fit_gradient(const Mesh& reference, std::span<const Vec3> frame, std::size_t i);

/// Same fit with precomputed unit normals (reference and frame) for vertex `i`.
Mat3 fit_gradient(const Mesh& reference, std::span<const Vec3> frame, std::size_t i,
                  const Vec3& reference_normal, const Vec3& frame_normal);

/// T = R * S with R a proper rotation. Reflections end up in S.
/// Throws NumericError on non-finite input.
Polar polar_decompose(const Mat3& t);

/// Gradients and polar factors for every vertex of `frame`.
DeformField compute_field(const Mesh& reference, std::span<const Vec3> frame);

}  // namespace clothsr::defgrad
