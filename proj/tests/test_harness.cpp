#include <doctest.h>

#include <sstream>

#include "clothsr/binary.hpp"
#include "clothsr/config.hpp"
#include "clothsr/error.hpp"
#include "clothsr/pipeline.hpp"
#include "support.hpp"

using namespace clothsr;
using namespace testing;

namespace {

pipeline::PipelineConfig tiny_config() {
  pipeline::PipelineConfig c;
  c.data.coarse_resolution = 3;
  c.data.fine_resolution = 5;
  c.data.frame_count = 6;
  c.schedule.ae_epochs = 20;
  c.schedule.ae_batch = 3;
  c.schedule.xf_epochs = 10;
  c.schedule.xf_batch = 2;
  c.write_meshes = false;
  return c;
}

}  // namespace

TEST_SUITE("dataset") {
  TEST_CASE("frame 0 is the flat rest grid") {
    dataset::SyntheticConfig c;
    c.frame_count = 5;
    for (auto motion : {dataset::Motion::Bend, dataset::Motion::Twist, dataset::Motion::Wave, dataset::Motion::Spin}) {
      c.driver.motion = motion;
      const auto d = dataset::gen_dataset(c);
      CHECK(d.coarse.frames[0] == d.coarse.reference.vertices());
      CHECK(d.fine.frames[0] == d.fine.reference.vertices());
      CHECK(d.coarse.vertex_count() == 81);
      CHECK(d.fine.vertex_count() == 33 * 33);
    }
  }

  TEST_CASE("spin angle follows the driver") {
    dataset::SyntheticConfig c;
    c.frame_count = 9;
    c.driver.motion = dataset::Motion::Spin;
    c.driver.total_angle = 4 * kPi;
    const auto d = dataset::gen_dataset(c);
    const std::size_t probe = 8;  // vertex (1, 0) * size
    for (std::size_t t = 0; t < 9; ++t) {
      const double expected = 4 * kPi * static_cast<double>(t) / 8.0;
      const Vec3 p = d.coarse.frames[t][probe];
      CHECK((p - Vec3(std::cos(expected), std::sin(expected), 0)).norm() < 1e-12);
    }
  }

  TEST_CASE("fixed seed reproduces the data, another seed changes the wrinkles") {
    dataset::SyntheticConfig c;
    c.frame_count = 4;
    const auto a = dataset::gen_dataset(c), b = dataset::gen_dataset(c);
    CHECK(a.fine.frames == b.fine.frames);
    c.seed = 2;
    const auto other = dataset::gen_dataset(c);
    CHECK(other.fine.frames[3] != a.fine.frames[3]);
    CHECK(other.coarse.frames == a.coarse.frames);
  }

  TEST_CASE("config validation and motion names") {
    dataset::SyntheticConfig c;
    c.fine_resolution = 9;
    CHECK_THROWS_AS(c.validate(), Error);
    c = {};
    c.frame_count = 3;
    CHECK_THROWS_AS(c.validate(), Error);
    CHECK(dataset::parse_motion("twist") == dataset::Motion::Twist);
    CHECK(dataset::to_string(dataset::Motion::Wave) == "wave");
    CHECK_THROWS_AS(dataset::parse_motion("fold"), Error);
  }

  TEST_CASE("upsampling reproduces affine coarse frames") {
    const Mesh coarse = dataset::make_grid(9);
    const Mesh fine = dataset::make_grid(33);
    const dataset::Upsampler up(coarse, fine);
    CHECK(up.subdivision_levels() == 2);
    CHECK(max_distance(up.apply(coarse.vertices()), fine.vertices()) < 1e-14);
    const Mat3 a = rot_x(0.4) * Vec3(1.5, 0.5, 1.0).asDiagonal();
    CHECK(max_distance(up.apply(transformed(coarse.vertices(), a)), transformed(fine.vertices(), a)) < 1e-13);
  }
}

TEST_SUITE("config") {
  TEST_CASE("key value parsing") {
    const Config c = Config::parse("# comment\n\n seed = 7 \nmotion=twist\nobstacle_center = 1, 2 3\nflag = yes\nseed = 9\n");
    CHECK(c.get_int("seed", 0) == 9);
    CHECK(c.get("motion", "") == "twist");
    CHECK(c.get_vec3("obstacle_center", Vec3::Zero()) == Vec3(1, 2, 3));
    CHECK(c.get_bool("flag", false));
    CHECK(c.get_double("missing", 0.5) == 0.5);
    CHECK(c.unknown_keys({"seed", "motion", "flag"}) == std::vector<std::string>{"obstacle_center"});
  }

  TEST_CASE("bad lines and values") {
    try {
      Config::parse("a = 1\njust words\n");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.line() == 2);
    }
    CHECK_THROWS_AS(Config::parse(" = 3\n"), ParseError);
    const Config c = Config::parse("n = 3.5\nv = 1 2\nb = maybe\n");
    CHECK_THROWS_AS(c.get_int("n", 0), Error);
    CHECK_THROWS_AS(c.get_vec3("v", Vec3::Zero()), Error);
    CHECK_THROWS_AS(c.get_bool("b", false), Error);
  }

  TEST_CASE("pipeline settings") {
    const auto p = pipeline::PipelineConfig::from_config(
        Config::parse("frames = 12\nmotion = wave\nlatent_dim = 8\nheads = 4\nobstacle = capsule\nobstacle_radius = 0.1\n"));
    CHECK(p.data.frame_count == 12);
    CHECK(p.data.driver.motion == dataset::Motion::Wave);
    CHECK(p.model.latent_dim == 8);
    REQUIRE(p.obstacle.has_value());
    CHECK(p.obstacle->shape() == postprocess::Shape::Capsule);
    CHECK(p.obstacle->radius() == 0.1);
    CHECK_THROWS_AS(pipeline::PipelineConfig::from_config(Config::parse("frame_count = 3\n")), Error);
    CHECK_THROWS_AS(pipeline::PipelineConfig::from_config(Config::parse("obstacle = cube\n")), Error);
  }

  TEST_CASE("the printed defaults parse back to the defaults") {
    const auto p = pipeline::PipelineConfig::from_config(Config::parse(pipeline::default_config_text()));
    const pipeline::PipelineConfig d;
    CHECK(p.data.frame_count == d.data.frame_count);
    CHECK(p.data.fine_resolution == d.data.fine_resolution);
    CHECK(p.schedule.ae_epochs == d.schedule.ae_epochs);
    CHECK(p.schedule.xf_final_rate == d.schedule.xf_final_rate);
    CHECK(p.model.learning_rate == d.model.learning_rate);
    CHECK_FALSE(p.obstacle.has_value());
  }
}

TEST_SUITE("pipeline") {
  TEST_CASE("metrics csv schema") {
    const std::string csv = pipeline::format_metrics_csv({{"bend", "synth", 0.1, 0.2, 0.3, 0.4}});
    CHECK(csv == "dataset,method,rmse,hausdorff,sted,seconds_per_frame\nbend,synth,0.10000000000000001,"
                 "0.20000000000000001,0.29999999999999999,0.40000000000000002\n");
  }

  TEST_CASE("tiny run writes every artifact and reproduces itself") {
    const auto out_a = std::filesystem::temp_directory_path() / "clothsr_test_pipe_a";
    const auto out_b = std::filesystem::temp_directory_path() / "clothsr_test_pipe_b";
    std::filesystem::remove_all(out_a);
    std::filesystem::remove_all(out_b);
    auto config = tiny_config();
    config.obstacle = postprocess::Obstacle::sphere(Vec3(0.5, 0.5, -0.3), 0.35);
    config.write_meshes = true;
    const auto a = pipeline::run_pipeline(config, out_a);
    const auto b = pipeline::run_pipeline(config, out_b);
    for (const char* f : {"coarse.tsacap", "fine.tsacap", "model.dtfm", "metrics.csv", "coarse", "fine", "synth", "refined"}) {
      CHECK(std::filesystem::exists(out_a / f));
    }
    REQUIRE(a.rows.size() == 3);
    CHECK(a.rows[0].method == "synth");
    CHECK(a.rows[1].method == "baseline");
    CHECK(a.rows[2].method == "refined");
    CHECK(a.refine_collision_free);
    CHECK(binary::read_file(out_a / "model.dtfm") == binary::read_file(out_b / "model.dtfm"));
    for (std::size_t k = 0; k < a.rows.size(); ++k) {
      CHECK(a.rows[k].rmse == b.rows[k].rmse);
      CHECK(a.rows[k].hausdorff == b.rows[k].hausdorff);
      CHECK(a.rows[k].sted == b.rows[k].sted);
    }
    CHECK(a.training.transformer == b.training.transformer);
    const std::vector<std::string> stages{"gen-data", "encode", "train-ae", "train-xf", "synth", "refine", "metrics"};
    REQUIRE(a.timings.size() == stages.size());
    for (std::size_t k = 0; k < stages.size(); ++k) CHECK(a.timings[k].stage == stages[k]);
  }

  TEST_CASE("a failing stage is named") {
    auto config = tiny_config();
    config.data.frame_count = 2;
    try {
      pipeline::run_pipeline(config, std::filesystem::temp_directory_path() / "clothsr_test_pipe_fail");
      FAIL("expected a stage error");
    } catch (const pipeline::StageError& e) {
      CHECK(e.stage() == "gen-data");
    }
  }

  TEST_CASE("progress goes to the given stream") {
    std::ostringstream log;
    pipeline::run_pipeline(tiny_config(), std::filesystem::temp_directory_path() / "clothsr_test_pipe_log", &log);
    CHECK(log.str().find("[train-xf]") != std::string::npos);
  }
}
