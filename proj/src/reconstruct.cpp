#include "clothsr/reconstruct.hpp"

#include <cmath>
#include <deque>
#include <string>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include "clothsr/error.hpp"

namespace clothsr::reconstruct {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

struct Reconstructor::Factorization {
  // Rows of the fit-consistency operator: 3 per vertex (one per reference axis).
  SparseMatrix fit_operator;
  // Coupling of every free vertex to the anchor, for moving the pinned value to the rhs.
  Eigen::VectorXd anchor_column;
  std::vector<Eigen::Index> free_index;  // vertex -> reduced index, -1 for the anchor
  std::vector<Mat3> edge_moments;        // A_i = sum_j c_ij e0 e0^T
  Eigen::SimplicialLDLT<SparseMatrix> ldlt;
};

namespace {

void check_connected(const Mesh& mesh, std::size_t anchor) {
  std::vector<char> seen(mesh.vertex_count(), 0);
  std::deque<int> queue{static_cast<int>(anchor)};
  seen[anchor] = 1;
  std::size_t reached = 1;
  while (!queue.empty()) {
    const int v = queue.front();
    queue.pop_front();
    for (int w : mesh.neighbors(v)) {
      if (!seen[w]) {
        seen[w] = 1;
        ++reached;
        queue.push_back(w);
      }
    }
  }
  if (reached != mesh.vertex_count()) {
    throw ConnectivityError(std::to_string(mesh.vertex_count() - reached) +
                            " vertices are not connected to anchor vertex " + std::to_string(anchor));
  }
}

}  // namespace

Reconstructor::Reconstructor(const Mesh& reference, std::size_t anchor_vertex, Energy energy)
    : reference_(reference), anchor_(anchor_vertex), energy_(energy), factor_(std::make_unique<Factorization>()) {
  if (!reference_.has_weights()) throw StateError("Reconstructor needs cotangent weights on the reference");
  const std::size_t n = reference_.vertex_count();
  if (anchor_ >= n) throw ShapeError("anchor vertex out of range");
  check_connected(reference_, anchor_);

  const auto& rest = reference_.vertices();
  auto& f = *factor_;
  f.edge_moments.assign(n, Mat3::Zero());
  std::vector<Triplet> fit_entries;
  std::vector<Triplet> edge_entries;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ring = reference_.neighbors(i);
    const auto w = reference_.neighbor_weights(i);
    const auto row = static_cast<Eigen::Index>(3 * i);
    Vec3 diagonal = Vec3::Zero();
    for (std::size_t k = 0; k < ring.size(); ++k) {
      const int j = ring[k];
      const Vec3 e0 = rest[i] - rest[j];
      f.edge_moments[i] += w[k] * e0 * e0.transpose();
      diagonal += w[k] * e0;
      for (int m = 0; m < 3; ++m) fit_entries.emplace_back(row + m, j, -w[k] * e0(m));
      // Directed term (i, j) of the edge residual energy contributes c (e_i - e_j)(e_i - e_j)^T.
      const auto ii = static_cast<Eigen::Index>(i);
      edge_entries.emplace_back(ii, ii, w[k]);
      edge_entries.emplace_back(j, j, w[k]);
      edge_entries.emplace_back(ii, j, -w[k]);
      edge_entries.emplace_back(j, ii, -w[k]);
    }
    for (int m = 0; m < 3; ++m) fit_entries.emplace_back(row + m, static_cast<Eigen::Index>(i), diagonal(m));
  }
  const auto nv = static_cast<Eigen::Index>(n);
  f.fit_operator.resize(3 * nv, nv);
  f.fit_operator.setFromTriplets(fit_entries.begin(), fit_entries.end());

  SparseMatrix system(nv, nv);
  if (energy_ == Energy::FitConsistent) {
    system = (f.fit_operator.transpose() * f.fit_operator).pruned();
  } else {
    system.setFromTriplets(edge_entries.begin(), edge_entries.end());
  }

  // Eliminate the anchor.
  f.free_index.assign(n, -1);
  Eigen::Index next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i != anchor_) f.free_index[i] = next++;
  }
  f.anchor_column = Eigen::VectorXd::Zero(next);
  std::vector<Triplet> reduced;
  for (Eigen::Index col = 0; col < system.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(system, col); it; ++it) {
      const auto r = f.free_index[static_cast<std::size_t>(it.row())];
      const auto c = f.free_index[static_cast<std::size_t>(it.col())];
      if (r >= 0 && c >= 0) {
        reduced.emplace_back(r, c, it.value());
      } else if (r >= 0) {
        f.anchor_column(r) += it.value();
      }
    }
  }
  SparseMatrix reduced_system(next, next);
  reduced_system.setFromTriplets(reduced.begin(), reduced.end());
  f.ldlt.compute(reduced_system);
  if (f.ldlt.info() != Eigen::Success) throw NumericError("reconstruction system factorization failed");
  const Eigen::VectorXd d = f.ldlt.vectorD().cwiseAbs();
  if (next > 0 && !(d.minCoeff() > 1e-14 * d.maxCoeff())) {
    throw NumericError("reconstruction system is singular for this reference mesh");
  }
}

Reconstructor::~Reconstructor() = default;
Reconstructor::Reconstructor(Reconstructor&&) noexcept = default;
Reconstructor& Reconstructor::operator=(Reconstructor&&) noexcept = default;

Positions Reconstructor::solve(const std::vector<Mat3>& gradients, const Vec3& anchor_position) const {
  const std::size_t n = reference_.vertex_count();
  if (gradients.size() != n) throw ShapeError("gradient count does not match reference vertex count");
  const auto& f = *factor_;
  const auto nv = static_cast<Eigen::Index>(n);

  Eigen::MatrixXd rhs_full = Eigen::MatrixXd::Zero(nv, 3);
  if (energy_ == Energy::FitConsistent) {
    Eigen::MatrixXd target(3 * nv, 3);
    for (std::size_t i = 0; i < n; ++i) {
      // Row m of the operator at vertex i pairs with column m of T_i A_i.
      const Mat3 ta = gradients[i] * f.edge_moments[i];
      target.block<3, 3>(static_cast<Eigen::Index>(3 * i), 0) = ta.transpose();
    }
    rhs_full = f.fit_operator.transpose() * target;
  } else {
    const auto& rest = reference_.vertices();
    for (std::size_t i = 0; i < n; ++i) {
      const auto ring = reference_.neighbors(i);
      const auto w = reference_.neighbor_weights(i);
      for (std::size_t k = 0; k < ring.size(); ++k) {
        const Vec3 g = w[k] * (gradients[i] * (rest[i] - rest[ring[k]]));
        rhs_full.row(static_cast<Eigen::Index>(i)) += g.transpose();
        rhs_full.row(ring[k]) -= g.transpose();
      }
    }
  }

  Eigen::MatrixXd rhs(nv - 1, 3);
  for (std::size_t i = 0; i < n; ++i) {
    if (f.free_index[i] >= 0) rhs.row(f.free_index[i]) = rhs_full.row(static_cast<Eigen::Index>(i));
  }
  rhs -= f.anchor_column * anchor_position.transpose();
  const Eigen::MatrixXd x = f.ldlt.solve(rhs);

  Positions out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = f.free_index[i] >= 0 ? Vec3(x.row(f.free_index[i]).transpose()) : anchor_position;
  }
  return out;
}

Positions Reconstructor::solve(const tsacap::FeatureFrame& frame, const Vec3& anchor_position) const {
  if (static_cast<std::size_t>(frame.rows()) != reference_.vertex_count()) {
    throw ShapeError("feature frame vertex count does not match reference");
  }
  const tsacap::Unpacked u = tsacap::unpack_features(frame);
  std::vector<Mat3> gradients(u.rotation.size());
  for (std::size_t i = 0; i < gradients.size(); ++i) gradients[i] = u.rotation[i] * u.stretch[i];
  return solve(gradients, anchor_position);
}

Positions reconstruct_frame(const Mesh& reference, const tsacap::FeatureFrame& frame, std::size_t anchor_vertex,
                            const Vec3& anchor_position, Energy energy) {
  return Reconstructor(reference, anchor_vertex, energy).solve(frame, anchor_position);
}

tsacap::FeatureFrame interpolate(const tsacap::FeatureFrame& a, const tsacap::FeatureFrame& b, double t) {
  if (a.rows() != b.rows()) {
    throw ShapeError("interpolate: vertex counts differ (" + std::to_string(a.rows()) + " vs " +
                     std::to_string(b.rows()) + ")");
  }
  // Endpoints are returned verbatim so t = 0 and t = 1 are bit-exact.
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  return (1.0 - t) * a + t * b;
}

}  // namespace clothsr::reconstruct
