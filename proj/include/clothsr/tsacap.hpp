#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "clothsr/defgrad.hpp"
#include "clothsr/mesh.hpp"

namespace clothsr::tsacap {

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

struct ResolveOptions {
  /// |w_i . w_j| at or below this makes two axes incomparable.
  double axis_threshold = 0.5;
  /// Rotations with angle below this have no meaningful axis.
  double angle_threshold = 1e-3;
  /// false = frame-independent ACAP resolution (each frame gauged on its own).
  bool temporal = true;
};

struct AxisAngle {
  Vec3 axis;     ///< unit vector
  double angle;  ///< radians in [0, pi]
};

/// Canonical axis-angle of a proper rotation, angle in [0, pi].
///
/// The axis comes from the skew part of R except close to pi, where the
/// symmetric part is used and the sign is taken from the skew part (or, at
/// exactly pi, by making the first non-zero component positive). The exact
/// identity maps to axis (0, 0, 1).
AxisAngle to_axis_angle(const Mat3& r);

Mat3 rodrigues(const Vec3& axis, double angle);
/// Rotation by |v| about v / |v|; identity for |v| < 1e-12.
Mat3 exp_rotation(const Vec3& v);

/// Orientation consistency of two axes with angles: 0, +1 or -1.
int consistency(double axis_dot, double angle_a, double angle_b, const ResolveOptions& opts);

/// Axes, angles, orientation flags and cycle counts for every (frame, vertex),
/// stored frame-major.
class RotationResolution {
 public:
  RotationResolution() = default;
  RotationResolution(std::size_t frames, std::size_t vertices);

  std::size_t frame_count() const noexcept { return frames_; }
  std::size_t vertex_count() const noexcept { return vertices_; }

  Vec3& axis(std::size_t t, std::size_t i) { return axis_[at(t, i)]; }
  const Vec3& axis(std::size_t t, std::size_t i) const { return axis_[at(t, i)]; }
  double& angle(std::size_t t, std::size_t i) { return angle_[at(t, i)]; }
  double angle(std::size_t t, std::size_t i) const { return angle_[at(t, i)]; }
  int& orient(std::size_t t, std::size_t i) { return orient_[at(t, i)]; }
  int orient(std::size_t t, std::size_t i) const { return orient_[at(t, i)]; }
  int& cycles(std::size_t t, std::size_t i) { return cycles_[at(t, i)]; }
  int cycles(std::size_t t, std::size_t i) const { return cycles_[at(t, i)]; }

  /// o * w
  Vec3 resolved_axis(std::size_t t, std::size_t i) const { return orient(t, i) * axis(t, i); }
  /// o * theta + 2 pi r
  double resolved_angle(std::size_t t, std::size_t i) const {
    return orient(t, i) * angle(t, i) + kTwoPi * cycles(t, i);
  }

 private:
  std::size_t at(std::size_t t, std::size_t i) const { return t * vertices_ + i; }

  std::size_t frames_ = 0;
  std::size_t vertices_ = 0;
  std::vector<Vec3> axis_;
  std::vector<double> angle_;
  std::vector<int> orient_;
  std::vector<int> cycles_;
};

/// Canonical axis-angle for each rotation; o = +1 and r = 0 everywhere.
RotationResolution extract_axis_angles(const std::vector<std::vector<Mat3>>& rotations);

/// Orientation objective of frame t (to be maximized): spatial agreement over
/// mesh edges plus, in temporal mode and t > 0, agreement with the already
/// resolved axes of frame t - 1.
int orientation_objective(const Mesh& mesh, const RotationResolution& res, std::size_t t,
                          const ResolveOptions& opts);

/// Cycle objective of frame t (to be minimized): squared resolved-angle
/// differences over mesh edges plus, in temporal mode and t > 0, squared
/// differences to the resolved angles of frame t - 1.
double cycle_objective(const Mesh& mesh, const RotationResolution& res, std::size_t t,
                       const ResolveOptions& opts);

/// True when frame t carries the gauge o = +1, r = 0 at vertex 0. Every
/// frame is gauged in ACAP mode; only frame 0 in temporal mode.
bool is_gauged(std::size_t t, const ResolveOptions& opts);

/// Chooses orientation flags frame by frame: propagation along consistent
/// edges, then single-vertex and subtree flips until no flip improves the objective.
void resolve_orientations(RotationResolution& res, const Mesh& mesh, const ResolveOptions& opts = {});
void resolve_orientations_frame(RotationResolution& res, const Mesh& mesh, std::size_t t,
                                const ResolveOptions& opts);

/// Chooses cycle counts frame by frame: nearest-integer propagation, then
/// +-1 moves on single vertices and subtrees until no move improves the objective.
void resolve_cycles(RotationResolution& res, const Mesh& mesh, const ResolveOptions& opts = {});
void resolve_cycles_frame(RotationResolution& res, const Mesh& mesh, std::size_t t,
                          const ResolveOptions& opts);

/// Extract, orient and cycle-resolve the rotations of a whole sequence.
RotationResolution resolve(const Mesh& mesh, const std::vector<defgrad::DeformField>& fields,
                           const ResolveOptions& opts = {});

/// Per-vertex 9-vectors, one row per vertex: resolved log-rotation (3) then
/// the upper triangle of S in row-major order (s11 s12 s13 s22 s23 s33).
using FeatureFrame = Eigen::Matrix<double, Eigen::Dynamic, 9>;
inline constexpr int kFeatureDim = 9;

struct FeatureSequence {
  std::vector<FeatureFrame> frames;

  std::size_t frame_count() const noexcept { return frames.size(); }
  std::size_t vertex_count() const noexcept {
    return frames.empty() ? 0 : static_cast<std::size_t>(frames.front().rows());
  }
  /// Throws ShapeError if frames disagree on vertex count.
  void validate() const;
};

FeatureFrame pack_features(const defgrad::DeformField& field, const RotationResolution& res, std::size_t t);

struct Unpacked {
  std::vector<Mat3> rotation;
  std::vector<Mat3> stretch;
};
/// Throws NumericError on non-finite entries.
Unpacked unpack_features(const FeatureFrame& frame);

/// Full encoding: gradients, resolution and packing for every frame of `frames`
/// relative to `reference` (which must carry cotangent weights).
FeatureSequence encode_sequence(const Mesh& reference, const std::vector<Positions>& frames,
                                const ResolveOptions& opts = {});

/// `TSACAP01` binary format: magic, u32 frame_count, u32 vertex_count, then
/// frame-major, vertex-major little-endian float64 9-vectors.
std::vector<std::uint8_t> serialize_features(const FeatureSequence& seq);
FeatureSequence deserialize_features(std::span<const std::uint8_t> bytes);
void write_features(const std::filesystem::path& path, const FeatureSequence& seq);
FeatureSequence read_features(const std::filesystem::path& path);

}  // namespace clothsr::tsacap
