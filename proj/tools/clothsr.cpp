// Command-line front end: dataset generation, feature encoding, training,
// synthesis, refinement and evaluation over a working directory.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "clothsr/binary.hpp"
#include "clothsr/config.hpp"
#include "clothsr/error.hpp"
#include "clothsr/metrics.hpp"
#include "clothsr/nn/model.hpp"
#include "clothsr/pipeline.hpp"
#include "clothsr/postprocess.hpp"
#include "clothsr/reconstruct.hpp"
#include "clothsr/tsacap.hpp"

namespace fs = std::filesystem;
using namespace clothsr;

namespace {

struct Globals {
  std::string config_path;
  std::string out = "clothsr_out";
  std::optional<std::uint64_t> seed;
};

pipeline::PipelineConfig load_config(const Globals& g) {
  Config c = g.config_path.empty() ? Config{} : Config::load(g.config_path);
  if (g.seed) c.set("seed", std::to_string(*g.seed));
  return pipeline::PipelineConfig::from_config(c);
}

// Rest mesh of an OBJ sequence directory, with cotangent weights.
Mesh rest_mesh(const fs::path& dir) { return compute_weights(load_obj_sequence(dir).reference); }

tsacap::FeatureSequence features_of(const fs::path& dir, bool temporal) {
  const MeshSequence seq = load_obj_sequence(dir);
  tsacap::ResolveOptions opts;
  opts.temporal = temporal;
  return tsacap::encode_sequence(compute_weights(seq.reference), seq.frames, opts);
}

void write_csv(const fs::path& path, const std::string& text) {
  binary::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coarse-to-fine cloth detail synthesis with rotation-consistent deformation features"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config_path, "key = value settings file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "working directory")->capture_default_str();
  app.add_option("--seed", g.seed, "overrides the config seed");

  auto* gen = app.add_subcommand("gen-data", "write paired coarse/fine OBJ sequences to OUT/coarse and OUT/fine");

  auto* enc = app.add_subcommand("encode", "encode OBJ sequences into feature files");
  std::string enc_input, enc_output;
  bool enc_acap = false;
  enc->add_option("--input", enc_input, "OBJ sequence directory (default: OUT/coarse and OUT/fine)");
  enc->add_option("--output", enc_output, "feature file for --input");
  enc->add_flag("--acap", enc_acap, "resolve each frame independently (no temporal terms)");

  auto* rec = app.add_subcommand("reconstruct", "rebuild an OBJ sequence from a feature file");
  std::string rec_features, rec_reference, rec_output;
  std::size_t rec_anchor = 0;
  rec->add_option("--features", rec_features)->required()->check(CLI::ExistingFile);
  rec->add_option("--reference", rec_reference, "rest mesh OBJ")->required()->check(CLI::ExistingFile);
  rec->add_option("--output", rec_output, "output directory")->required();
  rec->add_option("--anchor", rec_anchor, "vertex pinned at its rest position")->capture_default_str();

  auto* interp = app.add_subcommand("interp", "interpolate two frames of a feature file in feature space");
  std::string in_features, in_reference, in_output;
  std::size_t in_from = 0, in_to = 1;
  int in_steps = 5;
  interp->add_option("--features", in_features)->required()->check(CLI::ExistingFile);
  interp->add_option("--reference", in_reference, "rest mesh OBJ")->required()->check(CLI::ExistingFile);
  interp->add_option("--from", in_from)->capture_default_str();
  interp->add_option("--to", in_to)->capture_default_str();
  interp->add_option("--steps", in_steps, "frames including both ends")->capture_default_str()->check(CLI::Range(2, 100000));
  interp->add_option("--output", in_output, "output directory")->required();

  auto* train_ae = app.add_subcommand("train-ae", "train the autoencoders on OUT/*.tsacap into OUT/model.dtfm");
  std::string ae_level = "both";
  train_ae->add_option("--level", ae_level)->check(CLI::IsMember({"coarse", "fine", "both"}))->capture_default_str();

  auto* train_xf = app.add_subcommand("train-xf", "train the transformer of OUT/model.dtfm");

  auto* synth = app.add_subcommand("synth", "synthesize fine frames from a coarse OBJ sequence into OUT/synth");
  std::string synth_input;
  synth->add_option("--input", synth_input, "coarse OBJ sequence (default: OUT/coarse)");

  auto* refine = app.add_subcommand("refine", "resolve obstacle penetrations of OUT/synth into OUT/refined");
  std::string refine_input;
  refine->add_option("--input", refine_input, "OBJ sequence (default: OUT/synth)");

  auto* met = app.add_subcommand("metrics", "compare OUT/synth (and OUT/refined) and the baseline with OUT/fine");

  auto* pipe = app.add_subcommand("pipeline", "run every stage and write OUT/metrics.csv");
  bool print_config = false;
  pipe->add_flag("--print-config", print_config, "print the default settings and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    const fs::path out = g.out;
    const auto config = load_config(g);
    const auto ws = [&](const char* name) { return out / name; };

    if (*gen) {
      const auto data = dataset::gen_dataset(config.data);
      save_obj_sequence(ws("coarse"), data.coarse.reference, data.coarse.frames);
      save_obj_sequence(ws("fine"), data.fine.reference, data.fine.frames);
      std::cout << "wrote " << data.coarse.frame_count() << " frames to " << ws("coarse") << " and " << ws("fine")
                << "\n";
    } else if (*enc) {
      if (!enc_input.empty()) {
        if (enc_output.empty()) throw Error("--output is required with --input");
        tsacap::write_features(enc_output, features_of(enc_input, !enc_acap));
        std::cout << "wrote " << enc_output << "\n";
      } else {
        for (const char* level : {"coarse", "fine"}) {
          const fs::path target = out / (std::string(level) + ".tsacap");
          tsacap::write_features(target, features_of(ws(level), !enc_acap));
          std::cout << "wrote " << target << "\n";
        }
      }
    } else if (*rec) {
      const Mesh ref = compute_weights(load_obj(rec_reference));
      const auto features = tsacap::read_features(rec_features);
      const reconstruct::Reconstructor solver(ref, rec_anchor);
      std::vector<Positions> frames;
      for (const auto& f : features.frames) frames.push_back(solver.solve(f, ref.vertices().at(rec_anchor)));
      save_obj_sequence(rec_output, ref, frames);
      std::cout << "wrote " << frames.size() << " frames to " << rec_output << "\n";
    } else if (*interp) {
      const Mesh ref = compute_weights(load_obj(in_reference));
      const auto features = tsacap::read_features(in_features);
      if (in_from >= features.frame_count() || in_to >= features.frame_count()) throw Error("frame index out of range");
      const reconstruct::Reconstructor solver(ref, 0);
      std::vector<Positions> frames;
      for (int k = 0; k < in_steps; ++k) {
        const double t = static_cast<double>(k) / (in_steps - 1);
        frames.push_back(solver.solve(
            reconstruct::interpolate(features.frames[in_from], features.frames[in_to], t), ref.vertices()[0]));
      }
      save_obj_sequence(in_output, ref, frames);
      std::cout << "wrote " << frames.size() << " frames to " << in_output << "\n";
    } else if (*train_ae) {
      const Mesh coarse = rest_mesh(ws("coarse"));
      const Mesh fine = rest_mesh(ws("fine"));
      const fs::path ckpt = ws("model.dtfm");
      nn::ModelParams model = fs::exists(ckpt) ? nn::read_checkpoint(ckpt)
                                               : nn::ModelParams::init(config.model, static_cast<int>(coarse.vertex_count()),
                                                                       static_cast<int>(fine.vertex_count()));
      for (const char* level : {"coarse", "fine"}) {
        if (ae_level != "both" && ae_level != level) continue;
        const auto features = tsacap::read_features(out / (std::string(level) + ".tsacap"));
        const auto losses = pipeline::train_level(model, level, std::string(level) == "coarse" ? coarse : fine,
                                                  features, config.schedule, &std::cout);
        if (!losses.empty()) std::cout << level << " final loss " << losses.back() << "\n";
      }
      nn::write_checkpoint(ckpt, model);
    } else if (*train_xf) {
      const fs::path ckpt = ws("model.dtfm");
      nn::ModelParams model = nn::read_checkpoint(ckpt);
      double mse = 0.0;
      pipeline::train_transformer_stage(model, rest_mesh(ws("coarse")), rest_mesh(ws("fine")),
                                        tsacap::read_features(ws("coarse.tsacap")),
                                        tsacap::read_features(ws("fine.tsacap")), config.schedule, mse, &std::cout);
      nn::write_checkpoint(ckpt, model);
      std::cout << "fine-feature mse " << mse << "\n";
    } else if (*synth) {
      const nn::ModelParams model = nn::read_checkpoint(ws("model.dtfm"));
      const MeshSequence coarse = load_obj_sequence(synth_input.empty() ? ws("coarse") : fs::path(synth_input));
      const auto result = nn::synthesize_sequence(model, coarse.reference, rest_mesh(ws("fine")), coarse.frames);
      save_obj_sequence(ws("synth"), result.reference, result.frames);
      std::cout << "wrote " << result.frame_count() << " frames to " << ws("synth") << "\n";
    } else if (*refine) {
      if (!config.obstacle) throw Error("no obstacle configured (set obstacle = sphere | capsule | cylinder)");
      const MeshSequence seq = load_obj_sequence(refine_input.empty() ? ws("synth") : fs::path(refine_input));
      std::vector<Positions> frames;
      for (std::size_t t = 0; t < seq.frame_count(); ++t) {
        auto r = postprocess::refine(seq.reference, seq.frames[t], *config.obstacle, config.refine);
        std::cout << "frame " << t << ": " << r.iterations << " iterations, " << r.constrained << " pinned"
                  << (r.collision_free ? "" : ", NOT collision-free") << "\n";
        frames.push_back(std::move(r.positions));
      }
      save_obj_sequence(ws("refined"), seq.reference, frames);
    } else if (*met) {
      const MeshSequence truth = load_obj_sequence(ws("fine"));
      const MeshSequence coarse = load_obj_sequence(ws("coarse"));
      const std::string name(dataset::to_string(config.data.driver.motion));
      std::vector<pipeline::MetricRow> rows;
      for (const char* method : {"synth", "refined"}) {
        if (fs::exists(ws(method))) rows.push_back(pipeline::evaluate(name, method, truth, load_obj_sequence(ws(method)), 0.0));
      }
      rows.push_back(pipeline::evaluate(name, "baseline", truth, pipeline::upsample_baseline(coarse, truth.reference), 0.0));
      const std::string csv = pipeline::format_metrics_csv(rows);
      write_csv(ws("metrics.csv"), csv);
      std::cout << csv;
    } else if (*pipe) {
      if (print_config) {
        std::cout << pipeline::default_config_text();
        return 0;
      }
      const auto report = pipeline::run_pipeline(config, out, &std::cout);
      for (const auto& t : report.timings) std::cout << "time " << t.stage << " " << t.seconds << " s\n";
      std::cout << "fine-feature mse " << report.training.fine_feature_mse << "\n";
      std::cout << pipeline::format_metrics_csv(report.rows);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
