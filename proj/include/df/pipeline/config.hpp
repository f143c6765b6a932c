#pragma once

#include <cstdint>
#include <string>

#include "df/ddg/graft.hpp"
#include "df/ddg/model.hpp"
#include "df/ddg/train.hpp"
#include "df/metrics/metrics.hpp"
#include "df/prior/prior.hpp"
#include "df/reward/reward.hpp"
#include "df/scene/scene.hpp"
#include "df/sensor/sensor.hpp"

namespace df::pipeline {

// Everything a run needs, resolvable to a single JSON document. The scene
// block owns the raster size and depth range; dependent blocks (sensor,
// model, training) inherit them so one knob cannot contradict another.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  int threads = 1;
  int frames = 512;       // dataset size for gen/generate
  int eval_frames = 128;  // frames per method fed into the metrics

  scene::SceneConfig scene;
  sensor::SensorModel sensor;
  sensor::RandomNoiseConfig baseline;
  prior::PriorConfig prior;
  ddg::ModelConfig model;
  ddg::TrainConfig train;  // out_dir/seed/raster filled per command
  ddg::GraftConfig graft;

  int ddim_steps = 50;
  double eta = 0.0;
  bool use_ddpm = false;
  bool use_ema = true;  // sample from averaged weights

  reward::RewardConfig reward;

  std::uint64_t feature_seed = 17;
  int tsne_frames = 128;
  metrics::TsneConfig tsne;

  void validate() const;
};

// Parse from JSON text; unknown keys are rejected with their section named.
// Absent keys keep the defaults above.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

// Full round-trippable document with every default spelled out.
std::string config_json(const RunConfig& c);
void write_resolved_config(const RunConfig& c, const std::string& path);

}  // namespace df::pipeline
