#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Core>

namespace clothsr {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Positions = std::vector<Vec3>;
using Face = std::array<int, 3>;

/// Cotangent weights are clamped into this range after accumulation.
inline constexpr double kMinCotWeight = -1e4;
inline constexpr double kMaxCotWeight = 1e4;

/// Shared-topology triangle mesh.
///
/// Construction validates the face list (index range, at most two faces per
/// edge, no isolated vertices) and builds a compressed one-ring adjacency in
/// ascending neighbor order. Cotangent weights are attached separately by
/// compute_weights() and are stored parallel to the adjacency lists, so
/// weight(i, j) == weight(j, i) by construction.
class Mesh {
 public:
  Mesh() = default;
  Mesh(Positions vertices, std::vector<Face> faces);

  std::size_t vertex_count() const noexcept { return vertices_.size(); }
  std::size_t face_count() const noexcept { return faces_.size(); }
  const Positions& vertices() const noexcept { return vertices_; }
  const std::vector<Face>& faces() const noexcept { return faces_; }

  std::span<const int> neighbors(std::size_t i) const;
  /// Weights aligned with neighbors(i); empty until weights are computed.
  std::span<const double> neighbor_weights(std::size_t i) const;
  std::size_t degree(std::size_t i) const { return offsets_[i + 1] - offsets_[i]; }

  bool has_weights() const noexcept { return !weights_.empty(); }
  /// Cotangent weight of edge (i, j). Throws StructuralError if (i, j) is not an edge.
  double weight(int i, int j) const;
  bool is_edge(int i, int j) const;

  /// Undirected edges (i < j), sorted lexicographically.
  std::vector<std::pair<int, int>> edges() const;
  std::size_t edge_count() const noexcept { return adjacency_.size() / 2; }

  /// Same topology, new positions. Weights are dropped because they depend on geometry.
  Mesh with_positions(Positions vertices) const;

 private:
  friend Mesh compute_weights(const Mesh& mesh);
  std::ptrdiff_t slot(int i, int j) const;

  Positions vertices_;
  std::vector<Face> faces_;
  std::vector<std::size_t> offsets_{0};
  std::vector<int> adjacency_;
  std::vector<double> weights_;
};

/// Fixed topology with one position array per frame.
struct MeshSequence {
  Mesh reference;
  std::vector<Positions> frames;

  std::size_t frame_count() const noexcept { return frames.size(); }
  std::size_t vertex_count() const noexcept { return reference.vertex_count(); }
  /// Throws ShapeError when any frame's vertex count differs from the reference.
  void validate() const;
};

/// Returns a copy of `mesh` with cotangent weights c_ij = cot(alpha_ij) + cot(beta_ij).
/// Boundary edges use their single opposite angle. Throws DegenerateGeometryError
/// on zero-area faces.
Mesh compute_weights(const Mesh& mesh);

double bbox_diagonal(std::span<const Vec3> positions);

/// Area-weighted unit vertex normals for `positions` on the topology of `mesh`.
Positions vertex_normals(const Mesh& mesh, std::span<const Vec3> positions);

/// One level of midpoint subdivision: every triangle splits into four, new
/// vertices at edge midpoints (appended after the original vertices in edge order).
Mesh subdivide_midpoint(const Mesh& mesh);

/// Applies the same midpoint subdivision to an arbitrary position array of `mesh`.
Positions subdivide_positions(const Mesh& mesh, std::span<const Vec3> positions);

Mesh load_obj(const std::filesystem::path& path);
void save_obj(const std::filesystem::path& path, const Mesh& mesh);
void save_obj(const std::filesystem::path& path, const Mesh& mesh, std::span<const Vec3> positions);

/// Parses OBJ text from memory; used by load_obj.
Mesh parse_obj(std::string_view text);

/// Writes frames as `frame_%05d.obj` into `dir` (created if missing).
void save_obj_sequence(const std::filesystem::path& dir, const Mesh& topology,
                       const std::vector<Positions>& frames);
/// Loads every `frame_%05d.obj` in `dir` in index order.
MeshSequence load_obj_sequence(const std::filesystem::path& dir);

}  // namespace clothsr
