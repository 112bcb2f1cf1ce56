#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "clothsr/config.hpp"
#include "clothsr/error.hpp"
#include "clothsr/dataset.hpp"
#include "clothsr/nn/model.hpp"
#include "clothsr/postprocess.hpp"
#include "clothsr/tsacap.hpp"

namespace clothsr::pipeline {

/// Error raised by a pipeline stage, tagged with the stage name.
class StageError : public Error {
 public:
  StageError(const std::string& stage, const std::string& cause)
      : Error("stage " + stage + " failed: " + cause), stage_(stage) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

struct TrainSchedule {
  int ae_epochs = 1000;
  int ae_batch = 10;
  int xf_epochs = 600;
  int xf_batch = 8;
  /// Final learning rate as a fraction of the initial one (cosine annealing).
  double ae_final_rate = 1.0;
  double xf_final_rate = 0.02;
};

struct PipelineConfig {
  dataset::SyntheticConfig data;
  nn::ModelConfig model;
  TrainSchedule schedule;
  std::optional<postprocess::Obstacle> obstacle;
  postprocess::RefineOptions refine;
  bool write_meshes = true;

  /// Reads every recognised key; throws Error for unknown keys.
  static PipelineConfig from_config(const Config& config);
};

/// Keys understood by PipelineConfig::from_config, with their defaults, as a
/// ready-to-edit config file.
std::string default_config_text();

struct MetricRow {
  std::string dataset;
  std::string method;
  double rmse = 0.0;
  double hausdorff = 0.0;
  double sted = 0.0;
  double seconds_per_frame = 0.0;
};

/// Header `dataset,method,rmse,hausdorff,sted,seconds_per_frame`, values with 17 significant digits.
std::string format_metrics_csv(const std::vector<MetricRow>& rows);
MetricRow evaluate(const std::string& dataset, const std::string& method, const MeshSequence& truth,
                   const MeshSequence& candidate, double seconds_per_frame);

/// Subdivided coarse frames resampled onto the fine rest grid.
MeshSequence upsample_baseline(const MeshSequence& coarse, const Mesh& fine_reference);

struct Encoded {
  Mesh coarse_reference;  ///< with cotangent weights
  Mesh fine_reference;
  tsacap::FeatureSequence coarse;
  tsacap::FeatureSequence fine;
};
Encoded encode_pair(const dataset::PairedSequences& data);

struct TrainingLog {
  std::vector<double> coarse_ae;
  std::vector<double> fine_ae;
  std::vector<double> transformer;
  double fine_feature_mse = 0.0;  ///< windowed teacher-forced MSE after training, normalized features
};

/// Fits normalizers and trains both autoencoders, then the transformer.
nn::ModelParams train_models(const Encoded& encoded, const nn::ModelConfig& model_config, const TrainSchedule& schedule,
                             TrainingLog& log, std::ostream* progress = nullptr);

/// Trains one autoencoder (`level` = "coarse" or "fine") of `model` in place.
std::vector<double> train_level(nn::ModelParams& model, const std::string& level, const Mesh& reference,
                                const tsacap::FeatureSequence& features, const TrainSchedule& schedule,
                                std::ostream* progress = nullptr);
/// Trains the transformer of `model` in place; returns the loss curve and sets `final_mse`.
std::vector<double> train_transformer_stage(nn::ModelParams& model, const Mesh& coarse_reference,
                                            const Mesh& fine_reference, const tsacap::FeatureSequence& coarse,
                                            const tsacap::FeatureSequence& fine, const TrainSchedule& schedule,
                                            double& final_mse, std::ostream* progress = nullptr);

struct StageTime {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineReport {
  std::vector<MetricRow> rows;
  std::vector<StageTime> timings;
  TrainingLog training;
  int refine_max_iterations = 0;
  bool refine_collision_free = true;
  std::filesystem::path checkpoint;
  std::filesystem::path metrics_csv;
};

/// gen-data -> encode -> train autoencoders -> train transformer -> synthesize
/// -> refine -> metrics. Writes under `out`: coarse/, fine/, synth/ (and
/// refined/ with an obstacle) OBJ sequences when write_meshes is set,
/// coarse.tsacap, fine.tsacap, model.dtfm and metrics.csv.
PipelineReport run_pipeline(const PipelineConfig& config, const std::filesystem::path& out,
                            std::ostream* progress = nullptr);

}  // namespace clothsr::pipeline
