#include "clothsr/tsacap.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "clothsr/error.hpp"

namespace clothsr::tsacap {

namespace {

constexpr double kPi = 3.14159265358979323846264338327950288;
// Below this a rotation angle carries no axis information.
constexpr double kNullAngle = 1e-12;

// Spanning forest over mesh edges, breadth-first from the lowest unvisited
// index with neighbors in ascending order. Subtrees are contiguous ranges of
// the depth-first preorder.
struct SpanningForest {
  std::vector<int> preorder;
  std::vector<std::size_t> position;  // vertex -> index in preorder
  std::vector<std::size_t> size;      // subtree size per vertex
  std::vector<int> parent;

  std::span<const int> subtree(int v) const { return {preorder.data() + position[v], size[v]}; }
};

SpanningForest build_forest(const Mesh& mesh) {
  const std::size_t n = mesh.vertex_count();
  SpanningForest f;
  f.parent.assign(n, -1);
  std::vector<std::vector<int>> children(n);
  std::vector<char> seen(n, 0);
  std::vector<int> roots;
  for (std::size_t r = 0; r < n; ++r) {
    if (seen[r]) continue;
    roots.push_back(static_cast<int>(r));
    seen[r] = 1;
    std::deque<int> queue{static_cast<int>(r)};
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      for (int w : mesh.neighbors(v)) {
        if (seen[w]) continue;
        seen[w] = 1;
        f.parent[w] = v;
        children[v].push_back(w);
        queue.push_back(w);
      }
    }
  }
  f.position.assign(n, 0);
  f.size.assign(n, 1);
  // Iterative DFS preorder; sizes accumulated in reverse preorder.
  for (int r : roots) {
    std::vector<int> stack{r};
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      f.position[v] = f.preorder.size();
      f.preorder.push_back(v);
      for (auto it = children[v].rbegin(); it != children[v].rend(); ++it) stack.push_back(*it);
    }
  }
  for (auto it = f.preorder.rbegin(); it != f.preorder.rend(); ++it) {
    if (f.parent[*it] >= 0) f.size[f.parent[*it]] += f.size[*it];
  }
  return f;
}

bool temporal_frame(std::size_t t, const ResolveOptions& opts) { return opts.temporal && t > 0; }

// Temporal consistency term of vertex i at frame t (against the resolved axis of t - 1).
int temporal_consistency(const RotationResolution& res, std::size_t t, std::size_t i, const ResolveOptions& opts) {
  return consistency(res.axis(t, i).dot(res.resolved_axis(t - 1, i)), res.angle(t, i), res.angle(t - 1, i), opts);
}

}  // namespace

Mat3 rodrigues(const Vec3& axis, double angle) {
  Mat3 k;
  k << 0.0, -axis.z(), axis.y(),  //
      axis.z(), 0.0, -axis.x(),   //
      -axis.y(), axis.x(), 0.0;
  return Mat3::Identity() + std::sin(angle) * k + (1.0 - std::cos(angle)) * (k * k);
}

Mat3 exp_rotation(const Vec3& v) {
  const double n = v.norm();
  if (n < 1e-12) return Mat3::Identity();
  return rodrigues(v / n, n);
}

AxisAngle to_axis_angle(const Mat3& r) {
  const Vec3 skew(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double c = std::clamp((r.trace() - 1.0) / 2.0, -1.0, 1.0);
  const double s = 0.5 * skew.norm();
  // Same value as arccos(c), accurate near 0 and pi.
  const double theta = std::atan2(s, c);
  const double eps2 = ResolveOptions{}.angle_threshold;

  if (s == 0.0 && c > 0.0) return {Vec3(0.0, 0.0, 1.0), 0.0};
  if (theta < kPi - eps2) return {skew.normalized(), theta};

  // Near pi the skew part vanishes; w w^T = (sym(R) - c I) / (1 - c).
  const Mat3 b = 0.5 * (r + r.transpose()) - c * Mat3::Identity();
  Eigen::Index k = 0;
  b.diagonal().maxCoeff(&k);
  Vec3 axis = b.col(k).normalized();
  if (skew.norm() > 1e-12) {
    if (axis.dot(skew) < 0.0) axis = -axis;
  } else {
    for (int d = 0; d < 3; ++d) {
      if (std::abs(axis(d)) > 1e-12) {
        if (axis(d) < 0.0) axis = -axis;
        break;
      }
    }
  }
  return {axis, theta};
}

int consistency(double axis_dot, double angle_a, double angle_b, const ResolveOptions& opts) {
  if (std::abs(axis_dot) <= opts.axis_threshold || angle_a < opts.angle_threshold ||
      angle_b < opts.angle_threshold) {
    return 0;
  }
  return axis_dot > opts.axis_threshold ? 1 : -1;
}

RotationResolution::RotationResolution(std::size_t frames, std::size_t vertices)
    : frames_(frames),
      vertices_(vertices),
      axis_(frames * vertices, Vec3(0.0, 0.0, 1.0)),
      angle_(frames * vertices, 0.0),
      orient_(frames * vertices, 1),
      cycles_(frames * vertices, 0) {}

RotationResolution extract_axis_angles(const std::vector<std::vector<Mat3>>& rotations) {
  const std::size_t n = rotations.empty() ? 0 : rotations.front().size();
  RotationResolution res(rotations.size(), n);
  for (std::size_t t = 0; t < rotations.size(); ++t) {
    if (rotations[t].size() != n) throw ShapeError("frame " + std::to_string(t) + " has a different vertex count");
    for (std::size_t i = 0; i < n; ++i) {
      const AxisAngle aa = to_axis_angle(rotations[t][i]);
      res.axis(t, i) = aa.axis;
      res.angle(t, i) = aa.angle;
    }
  }
  return res;
}

bool is_gauged(std::size_t t, const ResolveOptions& opts) { return !temporal_frame(t, opts); }

int orientation_objective(const Mesh& mesh, const RotationResolution& res, std::size_t t,
                          const ResolveOptions& opts) {
  int total = 0;
  for (const auto& [i, j] : mesh.edges()) {
    total += res.orient(t, i) * res.orient(t, j) *
             consistency(res.axis(t, i).dot(res.axis(t, j)), res.angle(t, i), res.angle(t, j), opts);
  }
  if (temporal_frame(t, opts)) {
    for (std::size_t i = 0; i < res.vertex_count(); ++i) total += res.orient(t, i) * temporal_consistency(res, t, i, opts);
  }
  return total;
}

double cycle_objective(const Mesh& mesh, const RotationResolution& res, std::size_t t, const ResolveOptions& opts) {
  double total = 0.0;
  for (const auto& [i, j] : mesh.edges()) {
    const double d = res.resolved_angle(t, i) - res.resolved_angle(t, j);
    total += d * d;
  }
  if (temporal_frame(t, opts)) {
    for (std::size_t i = 0; i < res.vertex_count(); ++i) {
      const double d = res.resolved_angle(t, i) - res.resolved_angle(t - 1, i);
      total += d * d;
    }
  }
  return total;
}

void resolve_orientations_frame(RotationResolution& res, const Mesh& mesh, std::size_t t,
                                const ResolveOptions& opts) {
  const std::size_t n = res.vertex_count();
  const bool temporal = temporal_frame(t, opts);
  const bool gauged = is_gauged(t, opts);

  // Edge consistencies, aligned with mesh adjacency, and temporal terms.
  std::vector<std::vector<int>> s(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (int j : mesh.neighbors(i)) {
      s[i].push_back(consistency(res.axis(t, i).dot(res.axis(t, j)), res.angle(t, i), res.angle(t, j), opts));
    }
  }
  std::vector<int> s_time(n, 0);
  if (temporal) {
    for (std::size_t i = 0; i < n; ++i) s_time[i] = temporal_consistency(res, t, i, opts);
  }

  // Greedy propagation along decisive edges.
  std::vector<int> o(n, 0);
  std::deque<int> queue;
  auto propagate = [&] {
    while (!queue.empty()) {
      const int v = queue.front();
      queue.pop_front();
      const auto ring = mesh.neighbors(v);
      for (std::size_t k = 0; k < ring.size(); ++k) {
        const int w = ring[k];
        if (o[w] != 0 || s[v][k] == 0) continue;
        o[w] = o[v] * s[v][k];
        queue.push_back(w);
      }
    }
  };
  if (gauged && n > 0) {
    o[0] = 1;
    queue.push_back(0);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      if (s_time[i] != 0) {
        o[i] = s_time[i];
        queue.push_back(static_cast<int>(i));
      }
    }
  }
  propagate();
  for (std::size_t i = 0; i < n; ++i) {
    if (o[i] != 0) continue;
    o[i] = 1;
    queue.push_back(static_cast<int>(i));
    propagate();
  }

  // Local refinement: flip single vertices or whole subtrees of the spanning forest.
  const SpanningForest forest = build_forest(mesh);
  std::vector<char> in_set(n, 0);
  auto flip_gain = [&](std::span<const int> set) {
    for (int v : set) in_set[v] = 1;
    int gain = 0;
    for (int v : set) {
      const auto ring = mesh.neighbors(v);
      for (std::size_t k = 0; k < ring.size(); ++k) {
        if (!in_set[ring[k]]) gain -= 2 * o[v] * o[ring[k]] * s[v][k];
      }
      gain -= 2 * o[v] * s_time[v];
    }
    for (int v : set) in_set[v] = 0;
    return gain;
  };
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t v = 0; v < n; ++v) {
      const int single[1] = {static_cast<int>(v)};
      for (std::span<const int> set : {std::span<const int>(single), forest.subtree(static_cast<int>(v))}) {
        if (flip_gain(set) > 0) {
          for (int w : set) o[w] = -o[w];
          improved = true;
        }
      }
    }
  }
  // Vertices below the angle threshold take no part in the objective, so their
  // flags are free; follow the previous frame so that 2 pi r keeps its direction.
  // A numerically zero angle has no usable axis at all and inherits the old one.
  if (temporal) {
    for (std::size_t i = 0; i < n; ++i) {
      if (res.angle(t, i) >= opts.angle_threshold) continue;
      const Vec3 previous = res.resolved_axis(t - 1, i);
      if (res.angle(t, i) < kNullAngle) {
        res.axis(t, i) = previous;
        o[i] = 1;
      } else if (res.axis(t, i).dot(previous) != 0.0) {
        o[i] = res.axis(t, i).dot(previous) > 0.0 ? 1 : -1;
      }
    }
  }
  // A gauged frame has no temporal term, so a global flip costs nothing: the
  // search may move the gauge vertex and the result is flipped back afterwards.
  if (gauged && n > 0 && o[0] < 0) {
    for (auto& x : o) x = -x;
  }
  for (std::size_t i = 0; i < n; ++i) res.orient(t, i) = o[i];
}

void resolve_orientations(RotationResolution& res, const Mesh& mesh, const ResolveOptions& opts) {
  if (res.vertex_count() != mesh.vertex_count()) throw ShapeError("resolution and mesh vertex counts differ");
  for (std::size_t t = 0; t < res.frame_count(); ++t) resolve_orientations_frame(res, mesh, t, opts);
}

void resolve_cycles_frame(RotationResolution& res, const Mesh& mesh, std::size_t t, const ResolveOptions& opts) {
  const std::size_t n = res.vertex_count();
  const bool temporal = temporal_frame(t, opts);
  const bool gauged = is_gauged(t, opts);

  std::vector<double> base(n);  // o * theta
  for (std::size_t i = 0; i < n; ++i) base[i] = res.orient(t, i) * res.angle(t, i);
  std::vector<double> previous(n, 0.0);
  if (temporal) {
    for (std::size_t i = 0; i < n; ++i) previous[i] = res.resolved_angle(t - 1, i);
  }
  auto nearest_cycle = [](double target, double value) {
    return static_cast<int>(std::lround((target - value) / kTwoPi));
  };

  std::vector<int> r(n, 0);
  if (temporal) {
    // Every vertex hangs directly off its resolved predecessor.
    for (std::size_t i = 0; i < n; ++i) r[i] = nearest_cycle(previous[i], base[i]);
  } else {
    std::vector<char> seen(n, 0);
    for (std::size_t root = 0; root < n; ++root) {
      if (seen[root]) continue;
      seen[root] = 1;
      r[root] = 0;
      std::deque<int> queue{static_cast<int>(root)};
      while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        const double resolved_v = base[v] + kTwoPi * r[v];
        for (int w : mesh.neighbors(v)) {
          if (seen[w]) continue;
          seen[w] = 1;
          r[w] = nearest_cycle(resolved_v, base[w]);
          queue.push_back(w);
        }
      }
    }
  }

  const SpanningForest forest = build_forest(mesh);
  std::vector<char> in_set(n, 0);
  auto resolved = [&](int v) { return base[v] + kTwoPi * r[v]; };
  auto shift_delta = [&](std::span<const int> set, int step) {
    const double shift = kTwoPi * step;
    for (int v : set) in_set[v] = 1;
    double delta = 0.0;
    for (int v : set) {
      for (int w : mesh.neighbors(v)) {
        if (in_set[w]) continue;
        const double d = resolved(v) - resolved(w);
        delta += (d + shift) * (d + shift) - d * d;
      }
      if (temporal) {
        const double d = resolved(v) - previous[v];
        delta += (d + shift) * (d + shift) - d * d;
      }
    }
    for (int v : set) in_set[v] = 0;
    return delta;
  };
  bool improved = true;
  while (improved) {
    improved = false;
    for (std::size_t v = 0; v < n; ++v) {
      const int single[1] = {static_cast<int>(v)};
      for (std::span<const int> set : {std::span<const int>(single), forest.subtree(static_cast<int>(v))}) {
        for (int step : {1, -1}) {
          // Strict decrease with a margin well above rounding noise.
          if (shift_delta(set, step) < -1e-9) {
            for (int w : set) r[w] += step;
            improved = true;
          }
        }
      }
    }
  }
  if (gauged && n > 0) {
    const int offset = r[0];
    for (auto& x : r) x -= offset;
  }
  for (std::size_t i = 0; i < n; ++i) res.cycles(t, i) = r[i];
}

void resolve_cycles(RotationResolution& res, const Mesh& mesh, const ResolveOptions& opts) {
  if (res.vertex_count() != mesh.vertex_count()) throw ShapeError("resolution and mesh vertex counts differ");
  for (std::size_t t = 0; t < res.frame_count(); ++t) resolve_cycles_frame(res, mesh, t, opts);
}

RotationResolution resolve(const Mesh& mesh, const std::vector<defgrad::DeformField>& fields,
                           const ResolveOptions& opts) {
  std::vector<std::vector<Mat3>> rotations;
  rotations.reserve(fields.size());
  for (const auto& f : fields) rotations.push_back(f.rotation);
  RotationResolution res = extract_axis_angles(rotations);
  if (res.frame_count() > 0 && res.vertex_count() != mesh.vertex_count()) {
    throw ShapeError("deformation fields and mesh vertex counts differ");
  }
  // Orientation and cycles of frame t both feed frame t + 1.
  for (std::size_t t = 0; t < res.frame_count(); ++t) {
    resolve_orientations_frame(res, mesh, t, opts);
    resolve_cycles_frame(res, mesh, t, opts);
  }
  return res;
}

void FeatureSequence::validate() const {
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (static_cast<std::size_t>(frames[t].rows()) != vertex_count()) {
      throw ShapeError("feature frame " + std::to_string(t) + " has a different vertex count");
    }
  }
}

FeatureFrame pack_features(const defgrad::DeformField& field, const RotationResolution& res, std::size_t t) {
  const std::size_t n = field.size();
  if (n != res.vertex_count()) throw ShapeError("field and resolution vertex counts differ");
  FeatureFrame out(static_cast<Eigen::Index>(n), kFeatureDim);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 log_rotation = res.resolved_axis(t, i) * res.resolved_angle(t, i);
    const Mat3& s = field.stretch[i];
    const auto row = static_cast<Eigen::Index>(i);
    out.row(row) << log_rotation.x(), log_rotation.y(), log_rotation.z(), s(0, 0), s(0, 1), s(0, 2), s(1, 1),
        s(1, 2), s(2, 2);
  }
  return out;
}

Unpacked unpack_features(const FeatureFrame& frame) {
  if (!frame.allFinite()) throw NumericError("unpack_features: non-finite feature entries");
  Unpacked out;
  out.rotation.reserve(static_cast<std::size_t>(frame.rows()));
  out.stretch.reserve(static_cast<std::size_t>(frame.rows()));
  for (Eigen::Index i = 0; i < frame.rows(); ++i) {
    out.rotation.push_back(exp_rotation(frame.row(i).head<3>().transpose()));
    Mat3 s;
    s << frame(i, 3), frame(i, 4), frame(i, 5),  //
        frame(i, 4), frame(i, 6), frame(i, 7),   //
        frame(i, 5), frame(i, 7), frame(i, 8);
    out.stretch.push_back(s);
  }
  return out;
}

FeatureSequence encode_sequence(const Mesh& reference, const std::vector<Positions>& frames,
                                const ResolveOptions& opts) {
  std::vector<defgrad::DeformField> fields;
  fields.reserve(frames.size());
  for (const auto& f : frames) fields.push_back(defgrad::compute_field(reference, f));
  const RotationResolution res = resolve(reference, fields, opts);
  FeatureSequence seq;
  seq.frames.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) seq.frames.push_back(pack_features(fields[t], res, t));
  return seq;
}

}  // namespace clothsr::tsacap
