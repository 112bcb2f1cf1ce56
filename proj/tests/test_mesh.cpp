#include <doctest.h>

#include <filesystem>
#include <map>

#include "clothsr/error.hpp"
#include "support.hpp"

using namespace clothsr;
using namespace testing;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("clothsr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Per-triangle accumulation of cot(angle) onto the opposite edge.
std::map<std::pair<int, int>, double> cot_oracle(const Mesh& m) {
  std::map<std::pair<int, int>, double> w;
  const auto& v = m.vertices();
  for (const auto& f : m.faces()) {
    for (int k = 0; k < 3; ++k) {
      const int o = f[k], a = f[(k + 1) % 3], b = f[(k + 2) % 3];
      const Vec3 u = v[a] - v[o], s = v[b] - v[o];
      const double c = u.dot(s) / u.cross(s).norm();
      w[{std::min(a, b), std::max(a, b)}] += c;
    }
  }
  return w;
}

}  // namespace

TEST_SUITE("mesh") {
  TEST_CASE("single triangle from obj text") {
    const Mesh m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
    CHECK(m.vertex_count() == 3);
    CHECK(m.face_count() == 1);
    const auto ring = m.neighbors(0);
    REQUIRE(ring.size() == 2);
    CHECK(ring[0] == 1);
    CHECK(ring[1] == 2);
    CHECK_FALSE(m.has_weights());
  }

  TEST_CASE("quad faces are fan triangulated") {
    const Mesh m = parse_obj("# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
    REQUIRE(m.face_count() == 2);
    CHECK(m.faces()[0] == Face{0, 1, 2});
    CHECK(m.faces()[1] == Face{0, 2, 3});
  }

  TEST_CASE("slash-separated face indices") {
    const Mesh m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3\n");
    CHECK(m.faces()[0] == Face{0, 1, 2});
  }

  TEST_CASE("out of range face index is a structural error") {
    CHECK_THROWS_AS(parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n"), StructuralError);
  }

  TEST_CASE("malformed lines report their line number") {
    try {
      parse_obj("v 0 0 0\nv 1 0\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(parse_obj("v 0 0 0\nv 1 x 0\nv 0 1 0\nf 1 2 3\n"), ParseError);
  }

  TEST_CASE("non-manifold edges and isolated vertices are rejected") {
    const Positions v{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}};
    CHECK_THROWS_AS(Mesh(v, {{0, 1, 2}, {0, 1, 3}, {0, 1, 4}}), StructuralError);
    CHECK_THROWS_AS(Mesh(v, {{0, 1, 2}, {0, 1, 3}}), StructuralError);
  }

  TEST_CASE("adjacency and weights are symmetric") {
    Rng rng(3);
    Positions v = dataset::make_grid(5).vertices();
    for (auto& p : v) p.z() = rng.uniform(-0.1, 0.1);
    const Mesh m = compute_weights(dataset::make_grid(5).with_positions(v));
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
      for (int j : m.neighbors(i)) {
        CHECK(m.is_edge(j, static_cast<int>(i)));
        CHECK(m.weight(static_cast<int>(i), j) == m.weight(j, static_cast<int>(i)));
      }
    }
    CHECK(m.edges().size() == m.edge_count());
  }

  TEST_CASE("equilateral pair gives 2 cot 60") {
    const double h = std::sqrt(3.0) / 2.0;
    const Mesh m = compute_weights(Mesh({{0, 0, 0}, {1, 0, 0}, {0.5, h, 0}, {0.5, -h, 0}}, {{0, 1, 2}, {1, 0, 3}}));
    CHECK(m.weight(0, 1) == doctest::Approx(2.0 / std::tan(kPi / 3.0)).epsilon(1e-12));
    CHECK(m.weight(0, 1) == doctest::Approx(1.1547005).epsilon(1e-7));
  }

  TEST_CASE("boundary edge opposite a right angle has zero weight") {
    const Mesh m = compute_weights(Mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 1, 2}}));
    CHECK(std::abs(m.weight(1, 2)) < 1e-15);
    CHECK(m.weight(0, 1) == doctest::Approx(1.0));
  }

  TEST_CASE("opposite angles of 120 and 30 degrees") {
    const double h120 = 0.5 / std::tan(kPi / 3.0);
    const double h30 = 0.5 / std::tan(kPi / 12.0);
    const Mesh m =
        compute_weights(Mesh({{0, 0, 0}, {1, 0, 0}, {0.5, h120, 0}, {0.5, -h30, 0}}, {{0, 1, 2}, {1, 0, 3}}));
    const double expected = 1.0 / std::tan(2.0 * kPi / 3.0) + 1.0 / std::tan(kPi / 6.0);
    CHECK(m.weight(0, 1) == doctest::Approx(expected).epsilon(1e-12));
    CHECK(m.weight(0, 1) == doctest::Approx(1.1547).epsilon(1e-4));
  }

  TEST_CASE("weights match a per-triangle accumulation") {
    Rng rng(11);
    Positions v = dataset::make_grid(6).vertices();
    for (auto& p : v) p += Vec3(rng.uniform(-0.03, 0.03), rng.uniform(-0.03, 0.03), rng.uniform(-0.1, 0.1));
    const Mesh m = compute_weights(dataset::make_grid(6).with_positions(v));
    const auto oracle = cot_oracle(m);
    REQUIRE(oracle.size() == m.edge_count());
    for (const auto& [e, w] : oracle) CHECK(m.weight(e.first, e.second) == doctest::Approx(w).epsilon(1e-12));
  }

  TEST_CASE("zero-area face names the face") {
    try {
      compute_weights(Mesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {2, 0, 0}}, {{0, 1, 2}, {0, 3, 1}}));
      FAIL("expected a degenerate-geometry error");
    } catch (const DegenerateGeometryError& e) {
      CHECK(e.face() == 1);
    }
  }

  TEST_CASE("flat grid normals point along z") {
    const Mesh m = dataset::make_grid(4);
    for (const auto& n : vertex_normals(m, m.vertices())) CHECK(std::abs(std::abs(n.z()) - 1.0) < 1e-12);
  }

  TEST_CASE("midpoint subdivision counts and midpoints") {
    const Mesh m = dataset::make_grid(3);
    const Mesh s = subdivide_midpoint(m);
    CHECK(s.vertex_count() == m.vertex_count() + m.edge_count());
    CHECK(s.face_count() == 4 * m.face_count());
    const auto edges = m.edges();
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const Vec3 mid = 0.5 * (m.vertices()[edges[k].first] + m.vertices()[edges[k].second]);
      CHECK((s.vertices()[m.vertex_count() + k] - mid).norm() < 1e-15);
    }
  }

  TEST_CASE("obj save and load round trip") {
    Rng rng(5);
    Positions v = dataset::make_grid(4).vertices();
    for (auto& p : v) p += Vec3(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const Mesh m = dataset::make_grid(4).with_positions(v);
    const auto dir = scratch("obj");
    save_obj(dir / "m.obj", m);
    const Mesh back = load_obj(dir / "m.obj");
    CHECK(back.faces() == m.faces());
    for (std::size_t i = 0; i < v.size(); ++i) CHECK((back.vertices()[i] - v[i]).norm() <= 1e-8 * (1.0 + v[i].norm()));
  }

  TEST_CASE("obj sequence round trip and frame naming") {
    const Mesh m = dataset::make_grid(3);
    std::vector<Positions> frames{m.vertices(), transformed(m.vertices(), rot_z(0.3))};
    const auto dir = scratch("seq");
    save_obj_sequence(dir, m, frames);
    CHECK(std::filesystem::exists(dir / "frame_00000.obj"));
    CHECK(std::filesystem::exists(dir / "frame_00001.obj"));
    const MeshSequence back = load_obj_sequence(dir);
    REQUIRE(back.frame_count() == 2);
    CHECK(max_distance(back.frames[1], frames[1]) < 1e-8);
  }

  TEST_CASE("sequence validation catches vertex-count mismatch") {
    MeshSequence s{dataset::make_grid(3), {dataset::make_grid(3).vertices(), Positions(4)}};
    CHECK_THROWS_AS(s.validate(), ShapeError);
  }
}
