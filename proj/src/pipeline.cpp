#include "clothsr/pipeline.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <ostream>
#include <sstream>

#include "clothsr/binary.hpp"
#include "clothsr/error.hpp"
#include "clothsr/metrics.hpp"
#include "clothsr/nn/training.hpp"

namespace clothsr::pipeline {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "seed",          "coarse_resolution", "fine_resolution", "frames",         "motion",
      "total_angle",   "wave_amplitude",    "wave_cycles",     "size",           "wrinkle_amplitude",
      "wrinkle_frequency", "conv_channels", "latent_dim",      "heads",          "blocks",
      "hidden",        "window",            "learning_rate",   "ae_epochs",      "ae_batch",
      "xf_epochs",     "xf_batch",          "ae_final_rate",   "xf_final_rate",          "obstacle",        "obstacle_center", "obstacle_p0",
      "obstacle_p1",   "obstacle_axis",     "obstacle_radius", "obstacle_height", "refine_lambda", "refine_stay",
      "refine_max_iterations", "collision_margin", "write_meshes"};
  return keys;
}

// Runs one stage, rethrowing failures as StageError and recording the time.
template <typename F>
auto stage(const std::string& name, std::vector<StageTime>& timings, std::ostream* progress, F&& body) {
  if (progress) *progress << "[" << name << "]" << std::endl;
  const auto start = Clock::now();
  try {
    if constexpr (std::is_void_v<decltype(body())>) {
      body();
      timings.push_back({name, seconds_since(start)});
    } else {
      auto result = body();
      timings.push_back({name, seconds_since(start)});
      return result;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::function<void(int, double)> reporter(std::ostream* progress, const std::string& label, int epochs) {
  if (!progress) return {};
  const int every = std::max(1, epochs / 10);
  return [progress, label, every, epochs](int epoch, double loss) {
    if ((epoch + 1) % every == 0 || epoch + 1 == epochs) {
      *progress << "  " << label << " epoch " << epoch + 1 << "/" << epochs << " loss " << loss << std::endl;
    }
  };
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

PipelineConfig PipelineConfig::from_config(const Config& c) {
  const auto unknown = c.unknown_keys(known_keys());
  if (!unknown.empty()) {
    std::string list;
    for (const auto& k : unknown) list += (list.empty() ? "" : ", ") + k;
    throw Error("unknown config keys: " + list);
  }
  PipelineConfig p;
  auto& d = p.data;
  d.seed = c.get_u64("seed", d.seed);
  d.coarse_resolution = c.get_int("coarse_resolution", d.coarse_resolution);
  d.fine_resolution = c.get_int("fine_resolution", d.fine_resolution);
  d.frame_count = c.get_int("frames", d.frame_count);
  d.driver.motion = dataset::parse_motion(c.get("motion", std::string(dataset::to_string(d.driver.motion))));
  d.driver.total_angle = c.get_double("total_angle", d.driver.total_angle);
  d.driver.wave_amplitude = c.get_double("wave_amplitude", d.driver.wave_amplitude);
  d.driver.wave_cycles = c.get_double("wave_cycles", d.driver.wave_cycles);
  d.size = c.get_double("size", d.size);
  d.wrinkle_amplitude = c.get_double("wrinkle_amplitude", d.wrinkle_amplitude);
  d.wrinkle_frequency = c.get_double("wrinkle_frequency", d.wrinkle_frequency);
  d.validate();

  auto& m = p.model;
  m.seed = d.seed;
  m.conv_channels = c.get_int("conv_channels", m.conv_channels);
  m.latent_dim = c.get_int("latent_dim", m.latent_dim);
  m.heads = c.get_int("heads", m.heads);
  m.blocks = c.get_int("blocks", m.blocks);
  m.hidden = c.get_int("hidden", m.hidden);
  m.window = c.get_int("window", m.window);
  m.learning_rate = c.get_double("learning_rate", m.learning_rate);
  m.validate();

  auto& s = p.schedule;
  s.ae_epochs = c.get_int("ae_epochs", s.ae_epochs);
  s.ae_batch = c.get_int("ae_batch", s.ae_batch);
  s.xf_epochs = c.get_int("xf_epochs", s.xf_epochs);
  s.xf_batch = c.get_int("xf_batch", s.xf_batch);
  s.ae_final_rate = c.get_double("ae_final_rate", s.ae_final_rate);
  s.xf_final_rate = c.get_double("xf_final_rate", s.xf_final_rate);
  if (s.ae_epochs < 0 || s.xf_epochs < 0 || s.ae_batch < 0 || s.xf_batch < 0) {
    throw Error("epochs and batch sizes must be >= 0");
  }
  if (!(s.ae_final_rate > 0.0) || !(s.xf_final_rate > 0.0)) {
    throw Error("final rate fractions must be positive");
  }

  const std::string shape = c.get("obstacle", "none");
  const double radius = c.get_double("obstacle_radius", 0.25);
  if (shape == "sphere") {
    p.obstacle = postprocess::Obstacle::sphere(c.get_vec3("obstacle_center", Vec3(0.5, 0.5, -0.2)), radius);
  } else if (shape == "capsule") {
    p.obstacle = postprocess::Obstacle::capsule(c.get_vec3("obstacle_p0", Vec3(0.2, 0.5, -0.2)),
                                                c.get_vec3("obstacle_p1", Vec3(0.8, 0.5, -0.2)), radius);
  } else if (shape == "cylinder") {
    p.obstacle = postprocess::Obstacle::cylinder(c.get_vec3("obstacle_center", Vec3(0.5, 0.5, -0.5)),
                                                 c.get_vec3("obstacle_axis", Vec3(0, 0, 1)), radius,
                                                 c.get_double("obstacle_height", 0.45));
  } else if (shape != "none") {
    throw Error("unknown obstacle '" + shape + "' (none, sphere, capsule, cylinder)");
  }
  p.refine.lambda = c.get_double("refine_lambda", p.refine.lambda);
  p.refine.stay = c.get_double("refine_stay", p.refine.stay);
  p.refine.max_iterations = c.get_int("refine_max_iterations", p.refine.max_iterations);
  p.refine.margin = c.get_double("collision_margin", p.refine.margin);
  p.write_meshes = c.get_bool("write_meshes", p.write_meshes);
  return p;
}

std::string default_config_text() {
  const PipelineConfig p;
  std::ostringstream s;
  s << "# dataset\n"
    << "seed = " << p.data.seed << "\n"
    << "coarse_resolution = " << p.data.coarse_resolution << "\n"
    << "fine_resolution = " << p.data.fine_resolution << "\n"
    << "frames = " << p.data.frame_count << "\n"
    << "motion = " << dataset::to_string(p.data.driver.motion) << "\n"
    << "total_angle = " << fmt(p.data.driver.total_angle) << "\n"
    << "wave_amplitude = " << p.data.driver.wave_amplitude << "\n"
    << "wave_cycles = " << p.data.driver.wave_cycles << "\n"
    << "size = " << p.data.size << "\n"
    << "wrinkle_amplitude = " << p.data.wrinkle_amplitude << "\n"
    << "wrinkle_frequency = " << p.data.wrinkle_frequency << "\n"
    << "# model\n"
    << "conv_channels = " << p.model.conv_channels << "\n"
    << "latent_dim = " << p.model.latent_dim << "\n"
    << "heads = " << p.model.heads << "\n"
    << "blocks = " << p.model.blocks << "\n"
    << "hidden = " << p.model.hidden << "\n"
    << "window = " << p.model.window << "\n"
    << "learning_rate = " << p.model.learning_rate << "\n"
    << "# training\n"
    << "ae_epochs = " << p.schedule.ae_epochs << "\n"
    << "ae_batch = " << p.schedule.ae_batch << "\n"
    << "xf_epochs = " << p.schedule.xf_epochs << "\n"
    << "xf_batch = " << p.schedule.xf_batch << "\n"
    << "ae_final_rate = " << p.schedule.ae_final_rate << "\n"
    << "xf_final_rate = " << p.schedule.xf_final_rate << "\n"
    << "# refinement: obstacle = none | sphere | capsule | cylinder\n"
    << "obstacle = none\n"
    << "obstacle_center = 0.5, 0.5, -0.2\n"
    << "obstacle_radius = 0.25\n"
    << "refine_lambda = " << p.refine.lambda << "\n"
    << "refine_stay = " << p.refine.stay << "\n"
    << "refine_max_iterations = " << p.refine.max_iterations << "\n"
    << "write_meshes = true\n";
  return s.str();
}

std::string format_metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out = "dataset,method,rmse,hausdorff,sted,seconds_per_frame\n";
  for (const auto& r : rows) {
    out += r.dataset + "," + r.method + "," + fmt(r.rmse) + "," + fmt(r.hausdorff) + "," + fmt(r.sted) + "," +
           fmt(r.seconds_per_frame) + "\n";
  }
  return out;
}

MetricRow evaluate(const std::string& dataset, const std::string& method, const MeshSequence& truth,
                   const MeshSequence& candidate, double seconds_per_frame) {
  MetricRow row{dataset, method};
  row.rmse = metrics::rmse(truth, candidate);
  row.hausdorff = metrics::mean_hausdorff(truth, candidate);
  row.sted = metrics::sted(truth, candidate);
  row.seconds_per_frame = seconds_per_frame;
  return row;
}

MeshSequence upsample_baseline(const MeshSequence& coarse, const Mesh& fine_reference) {
  const dataset::Upsampler up(coarse.reference, fine_reference);
  MeshSequence out{fine_reference, {}};
  out.frames.reserve(coarse.frame_count());
  for (const auto& f : coarse.frames) out.frames.push_back(up.apply(f));
  return out;
}

Encoded encode_pair(const dataset::PairedSequences& data) {
  Encoded e;
  e.coarse_reference = compute_weights(data.coarse.reference);
  e.fine_reference = compute_weights(data.fine.reference);
  e.coarse = tsacap::encode_sequence(e.coarse_reference, data.coarse.frames);
  e.fine = tsacap::encode_sequence(e.fine_reference, data.fine.frames);
  return e;
}

std::vector<double> train_level(nn::ModelParams& model, const std::string& level, const Mesh& reference,
                                const tsacap::FeatureSequence& features, const TrainSchedule& schedule,
                                std::ostream* progress) {
  if (level != "coarse" && level != "fine") throw Error("level must be 'coarse' or 'fine'");
  nn::AutoEncoder& ae = level == "coarse" ? model.coarse : model.fine;
  if (static_cast<int>(reference.vertex_count()) != ae.encoder.vertices) {
    throw ShapeError(level + " mesh has " + std::to_string(reference.vertex_count()) + " vertices, model expects " +
                     std::to_string(ae.encoder.vertices));
  }
  ae.normalizer = nn::Normalizer::fit(features.frames);
  nn::TrainConfig tc;
  tc.epochs = schedule.ae_epochs;
  tc.batch_size = schedule.ae_batch;
  tc.final_rate_fraction = schedule.ae_final_rate;
  tc.adam.learning_rate = model.config.learning_rate;
  tc.seed = model.config.seed;
  tc.on_epoch = reporter(progress, level + " autoencoder", tc.epochs);
  const nn::NeighborAverage average(reference);
  return nn::train_autoencoder(ae, average, features.frames, tc).losses;
}

std::vector<double> train_transformer_stage(nn::ModelParams& model, const Mesh& coarse_reference,
                                            const Mesh& fine_reference, const tsacap::FeatureSequence& coarse,
                                            const tsacap::FeatureSequence& fine, const TrainSchedule& schedule,
                                            double& final_mse, std::ostream* progress) {
  if (!model.coarse.trained || !model.fine.trained) throw StateError("autoencoders must be trained first");
  const nn::NeighborAverage coarse_avg(coarse_reference);
  const nn::NeighborAverage fine_avg(fine_reference);
  const nn::Matrix coarse_latents = nn::encode_frames(model.coarse, coarse_avg, coarse.frames);
  const nn::Matrix fine_latents = nn::encode_frames(model.fine, fine_avg, fine.frames);
  nn::TrainConfig tc;
  tc.epochs = schedule.xf_epochs;
  tc.batch_size = schedule.xf_batch;
  tc.final_rate_fraction = schedule.xf_final_rate;
  tc.adam.learning_rate = model.config.learning_rate;
  tc.seed = model.config.seed + 1;
  tc.on_epoch = reporter(progress, "transformer", tc.epochs);
  auto losses = nn::train_transformer(model.transformer, coarse_latents, fine_latents, model.fine, fine_avg,
                                      fine.frames, model.config.window, tc)
                    .losses;
  model.transformer_trained = true;
  final_mse = nn::transformer_loss(model.transformer, coarse_latents, fine_latents, model.fine, fine_avg, fine.frames,
                                   model.config.window);
  return losses;
}

nn::ModelParams train_models(const Encoded& encoded, const nn::ModelConfig& model_config, const TrainSchedule& schedule,
                             TrainingLog& log, std::ostream* progress) {
  nn::ModelParams model =
      nn::ModelParams::init(model_config, static_cast<int>(encoded.coarse_reference.vertex_count()),
                            static_cast<int>(encoded.fine_reference.vertex_count()));
  log.coarse_ae = train_level(model, "coarse", encoded.coarse_reference, encoded.coarse, schedule, progress);
  log.fine_ae = train_level(model, "fine", encoded.fine_reference, encoded.fine, schedule, progress);
  log.transformer = train_transformer_stage(model, encoded.coarse_reference, encoded.fine_reference, encoded.coarse,
                                            encoded.fine, schedule, log.fine_feature_mse, progress);
  return model;
}

PipelineReport run_pipeline(const PipelineConfig& config, const std::filesystem::path& out, std::ostream* progress) {
  PipelineReport report;
  auto& timings = report.timings;
  std::filesystem::create_directories(out);
  const std::string name(dataset::to_string(config.data.driver.motion));

  const auto data = stage("gen-data", timings, progress, [&] {
    auto d = dataset::gen_dataset(config.data);
    if (config.write_meshes) {
      save_obj_sequence(out / "coarse", d.coarse.reference, d.coarse.frames);
      save_obj_sequence(out / "fine", d.fine.reference, d.fine.frames);
    }
    return d;
  });

  const auto encoded = stage("encode", timings, progress, [&] {
    auto e = encode_pair(data);
    tsacap::write_features(out / "coarse.tsacap", e.coarse);
    tsacap::write_features(out / "fine.tsacap", e.fine);
    return e;
  });

  nn::ModelParams model = stage("train-ae", timings, progress, [&] {
    auto m = nn::ModelParams::init(config.model, static_cast<int>(encoded.coarse_reference.vertex_count()),
                                   static_cast<int>(encoded.fine_reference.vertex_count()));
    report.training.coarse_ae =
        train_level(m, "coarse", encoded.coarse_reference, encoded.coarse, config.schedule, progress);
    report.training.fine_ae = train_level(m, "fine", encoded.fine_reference, encoded.fine, config.schedule, progress);
    return m;
  });

  stage("train-xf", timings, progress, [&] {
    report.training.transformer =
        train_transformer_stage(model, encoded.coarse_reference, encoded.fine_reference, encoded.coarse, encoded.fine,
                                config.schedule, report.training.fine_feature_mse, progress);
    report.checkpoint = out / "model.dtfm";
    nn::write_checkpoint(report.checkpoint, model);
  });

  const auto frames = static_cast<double>(std::max<std::size_t>(1, data.coarse.frame_count()));
  const auto synth_start = Clock::now();
  const MeshSequence synth = stage("synth", timings, progress, [&] {
    auto s = nn::synthesize_sequence(model, encoded.coarse_reference, encoded.fine_reference, data.coarse.frames);
    if (config.write_meshes) save_obj_sequence(out / "synth", s.reference, s.frames);
    return s;
  });
  const double synth_seconds = seconds_since(synth_start);

  std::optional<MeshSequence> refined;
  double refine_seconds = 0.0;
  if (config.obstacle) {
    const auto start = Clock::now();
    refined = stage("refine", timings, progress, [&] {
      MeshSequence r{synth.reference, {}};
      for (const auto& f : synth.frames) {
        auto res = postprocess::refine(synth.reference, f, *config.obstacle, config.refine);
        report.refine_max_iterations = std::max(report.refine_max_iterations, res.iterations);
        report.refine_collision_free = report.refine_collision_free && res.collision_free;
        r.frames.push_back(std::move(res.positions));
      }
      if (config.write_meshes) save_obj_sequence(out / "refined", r.reference, r.frames);
      return r;
    });
    refine_seconds = seconds_since(start);
  }

  stage("metrics", timings, progress, [&] {
    const auto base_start = Clock::now();
    const MeshSequence baseline = upsample_baseline(data.coarse, data.fine.reference);
    const double base_seconds = seconds_since(base_start);
    report.rows.push_back(evaluate(name, "synth", data.fine, synth, synth_seconds / frames));
    report.rows.push_back(evaluate(name, "baseline", data.fine, baseline, base_seconds / frames));
    if (refined) {
      report.rows.push_back(evaluate(name, "refined", data.fine, *refined, (synth_seconds + refine_seconds) / frames));
    }
    report.metrics_csv = out / "metrics.csv";
    const std::string csv = format_metrics_csv(report.rows);
    binary::write_file(report.metrics_csv,
                       std::span(reinterpret_cast<const std::uint8_t*>(csv.data()), csv.size()));
  });
  return report;
}

}  // namespace clothsr::pipeline
