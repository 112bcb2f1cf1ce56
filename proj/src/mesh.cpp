#include "clothsr/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include <Eigen/Geometry>

#include "clothsr/error.hpp"

namespace clothsr {

Mesh::Mesh(Positions vertices, std::vector<Face> faces)
    : vertices_(std::move(vertices)), faces_(std::move(faces)) {
  const auto n = static_cast<int>(vertices_.size());
  std::map<std::pair<int, int>, int> edge_faces;
  for (std::size_t f = 0; f < faces_.size(); ++f) {
    const Face& face = faces_[f];
    for (int k = 0; k < 3; ++k) {
      if (face[k] < 0 || face[k] >= n) {
        throw StructuralError("face " + std::to_string(f) + " references vertex " +
                              std::to_string(face[k]) + " outside [0, " + std::to_string(n) + ")");
      }
    }
    if (face[0] == face[1] || face[1] == face[2] || face[0] == face[2]) {
      throw StructuralError("face " + std::to_string(f) + " repeats a vertex");
    }
    for (int k = 0; k < 3; ++k) {
      int a = face[k];
      int b = face[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      if (++edge_faces[{a, b}] > 2) {
        throw StructuralError("non-manifold edge (" + std::to_string(a) + ", " + std::to_string(b) +
                              ") has more than two incident faces");
      }
    }
  }

  std::vector<std::vector<int>> rings(vertices_.size());
  for (const auto& [edge, count] : edge_faces) {
    rings[edge.first].push_back(edge.second);
    rings[edge.second].push_back(edge.first);
  }
  offsets_.assign(1, 0);
  adjacency_.clear();
  adjacency_.reserve(edge_faces.size() * 2);
  for (std::size_t i = 0; i < rings.size(); ++i) {
    auto& ring = rings[i];
    if (ring.size() < 2) {
      throw StructuralError("vertex " + std::to_string(i) + " has fewer than two neighbors");
    }
    std::sort(ring.begin(), ring.end());
    adjacency_.insert(adjacency_.end(), ring.begin(), ring.end());
    offsets_.push_back(adjacency_.size());
  }
}

std::span<const int> Mesh::neighbors(std::size_t i) const {
  return {adjacency_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

std::span<const double> Mesh::neighbor_weights(std::size_t i) const {
  if (weights_.empty()) return {};
  return {weights_.data() + offsets_[i], offsets_[i + 1] - offsets_[i]};
}

std::ptrdiff_t Mesh::slot(int i, int j) const {
  if (i < 0 || static_cast<std::size_t>(i) >= vertices_.size()) return -1;
  auto ring = neighbors(static_cast<std::size_t>(i));
  auto it = std::lower_bound(ring.begin(), ring.end(), j);
  if (it == ring.end() || *it != j) return -1;
  return static_cast<std::ptrdiff_t>(offsets_[i]) + (it - ring.begin());
}

bool Mesh::is_edge(int i, int j) const { return slot(i, j) >= 0; }

double Mesh::weight(int i, int j) const {
  const auto s = slot(i, j);
  if (s < 0) {
    throw StructuralError("(" + std::to_string(i) + ", " + std::to_string(j) + ") is not an edge");
  }
  if (weights_.empty()) throw StateError("cotangent weights have not been computed");
  return weights_[static_cast<std::size_t>(s)];
}

std::vector<std::pair<int, int>> Mesh::edges() const {
  std::vector<std::pair<int, int>> out;
  out.reserve(edge_count());
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    for (int j : neighbors(i)) {
      if (static_cast<int>(i) < j) out.emplace_back(static_cast<int>(i), j);
    }
  }
  return out;
}

Mesh Mesh::with_positions(Positions vertices) const {
  if (vertices.size() != vertices_.size()) {
    throw ShapeError("position count " + std::to_string(vertices.size()) +
                     " does not match mesh vertex count " + std::to_string(vertices_.size()));
  }
  Mesh out = *this;
  out.vertices_ = std::move(vertices);
  out.weights_.clear();
  return out;
}

void MeshSequence::validate() const {
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (frames[t].size() != reference.vertex_count()) {
      throw ShapeError("frame " + std::to_string(t) + " has " + std::to_string(frames[t].size()) +
                       " vertices, expected " + std::to_string(reference.vertex_count()));
    }
  }
}

Mesh compute_weights(const Mesh& mesh) {
  Mesh out = mesh;
  out.weights_.assign(out.adjacency_.size(), 0.0);
  const auto& p = mesh.vertices();
  for (std::size_t f = 0; f < mesh.faces().size(); ++f) {
    const Face& face = mesh.faces()[f];
    for (int k = 0; k < 3; ++k) {
      const int corner = face[k];
      const int a = face[(k + 1) % 3];
      const int b = face[(k + 2) % 3];
      const Vec3 u = p[a] - p[corner];
      const Vec3 v = p[b] - p[corner];
      const double cross = u.cross(v).norm();
      const double scale = u.norm() * v.norm();
      if (!(cross > 1e-12 * scale) || scale == 0.0) {
        throw DegenerateGeometryError("face " + std::to_string(f) + " has zero area", f);
      }
      const double cot = u.dot(v) / cross;
      out.weights_[static_cast<std::size_t>(out.slot(a, b))] += cot;
      out.weights_[static_cast<std::size_t>(out.slot(b, a))] += cot;
    }
  }
  for (double& w : out.weights_) w = std::clamp(w, kMinCotWeight, kMaxCotWeight);
  return out;
}

double bbox_diagonal(std::span<const Vec3> positions) {
  if (positions.empty()) return 0.0;
  Vec3 lo = positions[0];
  Vec3 hi = positions[0];
  for (const auto& q : positions) {
    lo = lo.cwiseMin(q);
    hi = hi.cwiseMax(q);
  }
  return (hi - lo).norm();
}

Positions vertex_normals(const Mesh& mesh, std::span<const Vec3> positions) {
  Positions normals(positions.size(), Vec3::Zero());
  for (const Face& face : mesh.faces()) {
    const Vec3 n = (positions[face[1]] - positions[face[0]]).cross(positions[face[2]] - positions[face[0]]);
    for (int v : face) normals[v] += n;
  }
  for (auto& n : normals) {
    const double len = n.norm();
    if (len > 0.0) n /= len;
  }
  return normals;
}

namespace {

// Midpoint vertex index for every undirected edge, assigned in lexicographic edge order.
std::map<std::pair<int, int>, int> midpoint_indices(const Mesh& mesh) {
  std::map<std::pair<int, int>, int> index;
  int next = static_cast<int>(mesh.vertex_count());
  for (const auto& e : mesh.edges()) index[e] = next++;
  return index;
}

int midpoint(const std::map<std::pair<int, int>, int>& index, int a, int b) {
  return index.at({std::min(a, b), std::max(a, b)});
}

}  // namespace

Positions subdivide_positions(const Mesh& mesh, std::span<const Vec3> positions) {
  Positions out(positions.begin(), positions.end());
  for (const auto& [i, j] : mesh.edges()) out.push_back(0.5 * (positions[i] + positions[j]));
  return out;
}

Mesh subdivide_midpoint(const Mesh& mesh) {
  const auto index = midpoint_indices(mesh);
  std::vector<Face> faces;
  faces.reserve(mesh.face_count() * 4);
  for (const Face& f : mesh.faces()) {
    const int ab = midpoint(index, f[0], f[1]);
    const int bc = midpoint(index, f[1], f[2]);
    const int ca = midpoint(index, f[2], f[0]);
    faces.push_back({f[0], ab, ca});
    faces.push_back({ab, f[1], bc});
    faces.push_back({ca, bc, f[2]});
    faces.push_back({ab, bc, ca});
  }
  return Mesh(subdivide_positions(mesh, mesh.vertices()), std::move(faces));
}

}  // namespace clothsr
