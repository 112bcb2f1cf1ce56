#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "clothsr/mesh.hpp"
#include "clothsr/rng.hpp"

namespace clothsr::dataset {

enum class Motion { Bend, Twist, Wave, Spin };

std::string_view to_string(Motion m);
/// Throws Error for unknown names.
Motion parse_motion(std::string_view name);

/// Parameters of the low-frequency driver shared by both resolutions.
struct MotionParams {
  Motion motion = Motion::Bend;
  /// Total rotation reached at the last frame (radians). Bend: arc angle of the
  /// rolled sheet; twist: end-to-end twist; spin: rigid rotation about +z.
  double total_angle = 1.5 * 3.14159265358979323846;
  /// Wave height relative to sheet size.
  double wave_amplitude = 0.15;
  double wave_cycles = 1.0;
};

struct SyntheticConfig {
  int coarse_resolution = 9;  ///< vertices per side
  int fine_resolution = 33;
  int frame_count = 60;
  std::uint64_t seed = 1;
  MotionParams driver;
  double size = 1.0;
  double wrinkle_amplitude = 0.02;  ///< relative to size
  double wrinkle_frequency = 4.0;   ///< cycles across the sheet

  /// Throws Error unless fine > coarse >= 2 and frame_count >= 4.
  void validate() const;
};

/// Flat n x n grid on [0, size]^2 in the z = 0 plane; vertex j * n + i sits at
/// (i, j) * size / (n - 1). Each cell is split along its (i, j)-(i+1, j+1) diagonal.
Mesh make_grid(int n, double size = 1.0);

/// Maps a rest-plane point to the driver's shape at progress s in [0, 1].
/// The edge x = 0 is held: points there never move.
Vec3 drive(const Vec3& rest, const MotionParams& params, double s, double size = 1.0);

Positions drive_positions(const Mesh& rest, const MotionParams& params, double s, double size = 1.0);

struct PairedSequences {
  MeshSequence coarse;
  MeshSequence fine;
};

/// Coarse and fine sequences driven by the same analytic field; the fine one
/// additionally carries a deterministic normal-direction wrinkle pattern whose
/// direction and phase come from the seed. Frame 0 of both is the flat grid.
PairedSequences gen_dataset(const SyntheticConfig& config);

/// Progress of frame t in a sequence of n frames: t / (n - 1).
double progress(std::size_t t, std::size_t n);

/// Linear resampling from a subdivided coarse mesh onto the fine rest grid.
///
/// The coarse mesh is midpoint-subdivided until its edge count per side reaches
/// the fine one; each fine rest vertex is then located in the subdivided rest
/// mesh (in the rest plane) and evaluated barycentrically.
class Upsampler {
 public:
  Upsampler(const Mesh& coarse_rest, const Mesh& fine_rest);
  Positions apply(std::span<const Vec3> coarse_positions) const;
  int subdivision_levels() const noexcept { return levels_; }

 private:
  std::vector<Mesh> levels_meshes_;  // levels_meshes_[k] is the coarse mesh after k subdivisions
  int levels_ = 0;
  std::vector<Face> host_;                 // containing triangle in the finest level
  std::vector<Vec3> barycentric_;
};

}  // namespace clothsr::dataset
