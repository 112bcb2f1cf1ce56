#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "clothsr/mesh.hpp"
#include "clothsr/tsacap.hpp"

namespace clothsr::reconstruct {

/// Which least-squares problem maps per-vertex gradients back to positions.
enum class Energy {
  /// sum_i |sum_j c_ij ((p_i - p_j) - T_i (q_i - q_j)) (q_i - q_j)^T|_F^2, i.e. the
  /// residual of the per-vertex gradient fit's normal equations. Exact inverse of
  /// the encoder: positions that produced T are a zero-energy solution.
  FitConsistent,
  /// sum_i sum_j c_ij |(p_i - p_j) - T_i (q_i - q_j)|^2. Exact only for
  /// piecewise-affine deformations.
  EdgeResidual,
};

/// Sparse solver for one reference mesh. The system matrix depends only on the
/// reference and the anchor vertex, so it is factored once and reused for
/// every frame; solve() is const and may be called concurrently.
class Reconstructor {
 public:
  /// `reference` must carry cotangent weights. Throws ConnectivityError when a
  /// component of the mesh is not connected to the anchor.
  Reconstructor(const Mesh& reference, std::size_t anchor_vertex = 0, Energy energy = Energy::FitConsistent);
  ~Reconstructor();
  Reconstructor(Reconstructor&&) noexcept;
  Reconstructor& operator=(Reconstructor&&) noexcept;

  /// Positions whose gradients best match `gradients`, with the anchor vertex pinned.
  Positions solve(const std::vector<Mat3>& gradients, const Vec3& anchor_position) const;
  /// Unpacks T = R S from features and solves.
  Positions solve(const tsacap::FeatureFrame& frame, const Vec3& anchor_position) const;

  std::size_t anchor_vertex() const noexcept { return anchor_; }
  Energy energy() const noexcept { return energy_; }
  const Mesh& reference() const noexcept { return reference_; }

 private:
  struct Factorization;
  Mesh reference_;
  std::size_t anchor_;
  Energy energy_;
  std::unique_ptr<Factorization> factor_;
};

/// One-shot convenience wrapper around Reconstructor.
Positions reconstruct_frame(const Mesh& reference, const tsacap::FeatureFrame& frame, std::size_t anchor_vertex,
                            const Vec3& anchor_position, Energy energy = Energy::FitConsistent);

/// (1 - t) a + t b, component-wise. Throws ShapeError on vertex-count mismatch.
tsacap::FeatureFrame interpolate(const tsacap::FeatureFrame& a, const tsacap::FeatureFrame& b, double t);

}  // namespace clothsr::reconstruct
