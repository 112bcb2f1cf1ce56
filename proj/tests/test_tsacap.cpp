#include <doctest.h>

#include <cstring>
#include <limits>

#include "clothsr/defgrad.hpp"
#include "clothsr/error.hpp"
#include "clothsr/tsacap.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace clothsr;
using namespace testing;

namespace {

defgrad::DeformField single(const Mat3& r, const Mat3& s) {
  defgrad::DeformField f;
  f.rotation = {r};
  f.stretch = {s};
  f.gradient = {r * s};
  return f;
}

MeshSequence spin(int n, double total, int frames) {
  dataset::MotionParams p;
  p.motion = dataset::Motion::Spin;
  p.total_angle = total;
  MeshSequence seq{dataset::make_grid(n), {}};
  for (int t = 0; t < frames; ++t) {
    seq.frames.push_back(dataset::drive_positions(seq.reference, p, dataset::progress(t, frames)));
  }
  return seq;
}

tsacap::RotationResolution uniform_field(std::size_t frames, std::size_t n, const Vec3& axis, double angle) {
  tsacap::RotationResolution res(frames, n);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t i = 0; i < n; ++i) {
      res.axis(t, i) = axis;
      res.angle(t, i) = angle;
    }
  }
  return res;
}

}  // namespace

TEST_SUITE("tsacap") {
  TEST_CASE("axis-angle of simple rotations") {
    auto aa = tsacap::to_axis_angle(Mat3::Identity());
    CHECK(aa.angle == 0.0);
    CHECK(aa.axis == Vec3(0, 0, 1));

    aa = tsacap::to_axis_angle(rot_z(kPi / 2));
    CHECK(aa.angle == doctest::Approx(kPi / 2).epsilon(1e-14));
    CHECK((aa.axis - Vec3(0, 0, 1)).norm() < 1e-14);

    const Mat3 rx = rot_x(kPi);
    aa = tsacap::to_axis_angle(rx);
    CHECK(aa.angle == doctest::Approx(kPi).epsilon(1e-14));
    CHECK((aa.axis - Vec3(1, 0, 0)).norm() < 1e-12);
    CHECK((tsacap::rodrigues(aa.axis, aa.angle) - rx).norm() < 1e-12);
  }

  TEST_CASE("axis-angle round trip on random and near-pi rotations") {
    Rng rng(23);
    for (int k = 0; k < 500; ++k) {
      const Vec3 w = random_unit(rng);
      const double a = k % 5 == 0 ? kPi - rng.uniform(0.0, 2e-3) : rng.uniform(0.0, kPi);
      const Mat3 r = rot(w, a);
      const auto aa = tsacap::to_axis_angle(r);
      CHECK(aa.angle >= 0.0);
      CHECK(aa.angle <= kPi);
      CHECK(std::abs(aa.axis.norm() - 1.0) < 1e-12);
      CHECK((tsacap::rodrigues(aa.axis, aa.angle) - r).norm() < 1e-9);
    }
  }

  TEST_CASE("pack examples") {
    tsacap::RotationResolution res(1, 1);
    auto f = tsacap::pack_features(single(Mat3::Identity(), Mat3::Identity()), res, 0);
    Eigen::Matrix<double, 1, 9> expected;
    expected << 0, 0, 0, 1, 0, 0, 1, 0, 1;
    CHECK(f.row(0) == expected);

    res.axis(0, 0) = Vec3(0, 0, 1);
    res.angle(0, 0) = kPi / 2;
    f = tsacap::pack_features(single(rot_z(kPi / 2), Mat3::Identity()), res, 0);
    expected(2) = kPi / 2;
    CHECK((f.row(0) - expected).norm() < 1e-15);

    res.cycles(0, 0) = 1;
    f = tsacap::pack_features(single(rot_z(kPi / 2), Mat3::Identity()), res, 0);
    CHECK(f(0, 2) == doctest::Approx(kPi / 2 + 2 * kPi).epsilon(1e-15));
    CHECK(f(0, 2) == doctest::Approx(7.8540).epsilon(1e-4));
  }

  TEST_CASE("unpack examples") {
    tsacap::FeatureFrame f(1, 9);
    f << 0, 0, 0, 1, 0, 0, 1, 0, 1;
    auto u = tsacap::unpack_features(f);
    CHECK(u.rotation[0] == Mat3::Identity());
    CHECK(u.stretch[0] == Mat3::Identity());

    f(0, 2) = kPi / 2 + 2 * kPi;
    u = tsacap::unpack_features(f);
    CHECK((u.rotation[0] - rot_z(kPi / 2)).norm() < 1e-14);

    f(0, 4) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(tsacap::unpack_features(f), NumericError);
  }

  TEST_CASE("pack and unpack round trip") {
    Rng rng(29);
    const std::size_t n = 200;
    defgrad::DeformField field;
    tsacap::RotationResolution res(1, n);
    for (std::size_t i = 0; i < n; ++i) {
      const Mat3 r = random_rotation(rng);
      const Mat3 s = random_spd(rng);
      field.rotation.push_back(r);
      field.stretch.push_back(s);
      field.gradient.push_back(r * s);
      const auto aa = tsacap::to_axis_angle(r);
      res.axis(0, i) = aa.axis;
      res.angle(0, i) = aa.angle;
      res.orient(0, i) = i % 2 ? -1 : 1;
      res.cycles(0, i) = static_cast<int>(i % 5) - 2;
    }
    const auto u = tsacap::unpack_features(tsacap::pack_features(field, res, 0));
    for (std::size_t i = 0; i < n; ++i) {
      CHECK((u.rotation[i] - field.rotation[i]).norm() < 1e-10);
      CHECK((u.stretch[i] - field.stretch[i]).norm() < 1e-10);
    }
  }

  TEST_CASE("uniform field keeps every flag positive") {
    const Mesh m = dataset::make_grid(4);
    const std::size_t frames = 3;
    auto res = uniform_field(frames, m.vertex_count(), Vec3(0, 0, 1), 1.0);
    tsacap::resolve_orientations(res, m);
    int total = 0;
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t i = 0; i < m.vertex_count(); ++i) CHECK(res.orient(t, i) == 1);
      total += tsacap::orientation_objective(m, res, t, {});
    }
    CHECK(total == static_cast<int>(frames * m.edge_count() + m.vertex_count() * (frames - 1)));
  }

  TEST_CASE("a pre-negated axis gets its flag flipped") {
    const Mesh m = dataset::make_grid(4);
    auto res = uniform_field(1, m.vertex_count(), Vec3(0.6, 0, 0.8), 1.0);
    res.axis(0, 5) = -res.axis(0, 5);
    tsacap::resolve_orientations(res, m);
    for (std::size_t i = 0; i < m.vertex_count(); ++i) CHECK(res.orient(0, i) == (i == 5 ? -1 : 1));
  }

  TEST_CASE("near-identity rotations are undecided") {
    const Mesh m = dataset::make_grid(3);
    Rng rng(31);
    tsacap::RotationResolution res(2, m.vertex_count());
    for (std::size_t t = 0; t < 2; ++t) {
      for (std::size_t i = 0; i < m.vertex_count(); ++i) {
        res.axis(t, i) = random_unit(rng);
        res.angle(t, i) = 1e-4;
      }
    }
    tsacap::resolve_orientations(res, m);
    for (std::size_t t = 0; t < 2; ++t) CHECK(tsacap::orientation_objective(m, res, t, {}) == 0);
    // Undecided flags default to +1 in the gauged frame and follow the previous axis later.
    for (std::size_t i = 0; i < m.vertex_count(); ++i) {
      CHECK(res.orient(0, i) == 1);
      CHECK(res.resolved_axis(1, i).dot(res.resolved_axis(0, i)) >= 0.0);
    }
  }

  TEST_CASE("constant rotation needs no cycles") {
    const Mesh m = dataset::make_grid(4);
    auto res = uniform_field(4, m.vertex_count(), Vec3(0, 1, 0), 0.5);
    tsacap::resolve_orientations(res, m);
    tsacap::resolve_cycles(res, m);
    for (std::size_t t = 0; t < 4; ++t) {
      for (std::size_t i = 0; i < m.vertex_count(); ++i) CHECK(res.cycles(t, i) == 0);
    }
  }

  TEST_CASE("a spin ending on a whole number of turns keeps its axis") {
    // The last frame is the identity rotation, so its raw axis is noise.
    const auto seq = spin(4, 2 * kPi, 9);
    const auto features = tsacap::encode_sequence(compute_weights(seq.reference), seq.frames);
    for (Eigen::Index i = 0; i < features.frames[8].rows(); ++i) {
      CHECK((features.frames[8].row(i).head<3>() - Eigen::RowVector3d(0, 0, 2 * kPi)).norm() < 1e-9);
    }
  }

  TEST_CASE("spin to 3 pi accumulates the analytic angle") {
    const auto seq = spin(4, 3 * kPi, 60);
    const auto features = tsacap::encode_sequence(compute_weights(seq.reference), seq.frames);
    REQUIRE(features.frame_count() == 60);
    for (std::size_t t = 0; t < 60; ++t) {
      const double expected = 3 * kPi * static_cast<double>(t) / 59.0;
      for (Eigen::Index i = 0; i < features.frames[t].rows(); ++i) {
        CHECK(std::abs(features.frames[t](i, 2) - expected) < 1e-9);
        CHECK(features.frames[t].row(i).head<2>().norm() < 1e-9);
      }
    }
  }

  TEST_CASE("frame-independent mode folds the same spin") {
    const auto seq = spin(4, 3 * kPi, 60);
    tsacap::ResolveOptions acap;
    acap.temporal = false;
    const auto features = tsacap::encode_sequence(compute_weights(seq.reference), seq.frames, acap);
    double jump = 0.0;
    for (std::size_t t = 1; t < 60; ++t) jump = std::max(jump, std::abs(features.frames[t](0, 2) - features.frames[t - 1](0, 2)));
    CHECK(jump > kPi);
  }

  TEST_CASE("gauge, reconstruction invariance and temporal smoothness on a rolled sheet") {
    const Mesh m = weighted_grid(7);
    dataset::MotionParams p;
    p.total_angle = 3.5 * kPi;
    std::vector<defgrad::DeformField> fields;
    for (int t = 0; t < 30; ++t) fields.push_back(defgrad::compute_field(m, dataset::drive_positions(m, p, dataset::progress(t, 30))));
    const tsacap::ResolveOptions opts;
    const auto res = tsacap::resolve(m, fields, opts);
    double worst_step = 0.0;
    for (std::size_t t = 0; t < res.frame_count(); ++t) {
      if (tsacap::is_gauged(t, opts)) {
        CHECK(res.orient(t, 0) == 1);
        CHECK(res.cycles(t, 0) == 0);
      }
      for (std::size_t i = 0; i < res.vertex_count(); ++i) {
        CHECK((tsacap::rodrigues(res.resolved_axis(t, i), res.resolved_angle(t, i)) - fields[t].rotation[i]).norm() < 1e-9);
        if (t > 0) worst_step = std::max(worst_step, std::abs(res.resolved_angle(t, i) - res.resolved_angle(t - 1, i)));
      }
    }
    CHECK(worst_step <= kPi / 2);
  }

  TEST_CASE("greedy objectives match exhaustive enumeration on tiny graphs") {
    Rng rng(37);
    for (int trial = 0; trial < 12; ++trial) {
      auto inst = oracle::tiny_instance(rng, 3 + trial % 6, 3);
      for (bool temporal : {true, false}) {
        tsacap::ResolveOptions opts;
        opts.temporal = temporal;
        auto res = inst.res;
        tsacap::resolve_orientations(res, inst.mesh, opts);
        tsacap::resolve_cycles(res, inst.mesh, opts);
        for (std::size_t t = 0; t < 3; ++t) {
          CHECK(tsacap::orientation_objective(inst.mesh, res, t, opts) ==
                oracle::best_orientation_objective(inst.mesh, res, t, opts));
          std::vector<int> greedy(res.vertex_count());
          for (std::size_t i = 0; i < greedy.size(); ++i) greedy[i] = res.cycles(t, i);
          const auto best = oracle::best_cycles(inst.mesh, res, t, opts);
          CHECK(oracle::cycle_objective(inst.mesh, res, t, greedy, opts) ==
                oracle::cycle_objective(inst.mesh, res, t, best, opts));
        }
      }
    }
  }

  TEST_CASE("feature file round trip is bit exact") {
    Rng rng(41);
    tsacap::FeatureSequence seq;
    for (int t = 0; t < 3; ++t) seq.frames.push_back(random_matrix(rng, 5, 9, 10.0));
    seq.frames[1](2, 3) = -0.0;
    seq.frames[2](0, 0) = std::numeric_limits<double>::denorm_min();
    const auto bytes = tsacap::serialize_features(seq);
    REQUIRE(bytes.size() == 16 + 3 * 5 * 9 * 8);
    CHECK(std::memcmp(bytes.data(), "TSACAP01", 8) == 0);
    CHECK(bytes[8] == 3);
    CHECK(bytes[12] == 5);
    const auto back = tsacap::deserialize_features(bytes);
    CHECK(tsacap::serialize_features(back) == bytes);
    for (int t = 0; t < 3; ++t) CHECK(std::memcmp(back.frames[t].data(), seq.frames[t].data(), 5 * 9 * 8) == 0);

    const auto path = std::filesystem::temp_directory_path() / "clothsr_test_features.tsacap";
    tsacap::write_features(path, seq);
    CHECK(tsacap::serialize_features(tsacap::read_features(path)) == bytes);
  }

  TEST_CASE("malformed feature files are rejected") {
    tsacap::FeatureSequence seq;
    seq.frames.push_back(tsacap::FeatureFrame::Zero(2, 9));
    auto bytes = tsacap::serialize_features(seq);
    auto truncated = bytes;
    truncated.pop_back();
    CHECK_THROWS_AS(tsacap::deserialize_features(truncated), FormatError);
    auto bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(tsacap::deserialize_features(bad), FormatError);
    bytes.push_back(0);
    CHECK_THROWS_AS(tsacap::deserialize_features(bytes), FormatError);
  }
}
