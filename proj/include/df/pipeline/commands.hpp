#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "df/metrics/metrics.hpp"
#include "df/pipeline/config.hpp"
#include "df/pipeline/manifest.hpp"

namespace df::pipeline {

// Per-frame seed streams: every frame's randomness is keyed on
// (global seed, stream, frame id) so processing order never matters.
inline constexpr std::uint64_t kSceneStream = 0x5363656E;
inline constexpr std::uint64_t kSensorStream = 0x436F7272;
inline constexpr std::uint64_t kSampleStream = 0x53616D70;
inline constexpr std::uint64_t kBaselineStream = 0x42617365;

// Sample scenes, render clean depth, corrupt, compute priors. Returns the
// manifest path (<out>/data/manifest.json).
std::string cmd_gen(const RunConfig& cfg);

// Train the conditional denoiser on (sensor target, prior conditioning)
// pairs from the manifest. Resumes from <out>/model if checkpoints exist.
// Returns the model directory.
std::string cmd_train(const RunConfig& cfg, const std::string& manifest_path);

// Run prior -> sample -> mask -> graft over every manifest frame; writes
// grafted/ and predicted/ maps plus an augmented manifest, whose path is
// returned (<out>/gen/manifest.json).
std::string cmd_generate(const RunConfig& cfg, const std::string& model_dir,
                         const std::string& manifest_path);

// FID/KID of {clean, random-noise, diffusion-grafted, diffusion-raw} against
// the virtual-sensor set over the first eval_frames frames.
std::vector<metrics::MethodScore> compute_scores(const RunConfig& cfg, const DatasetManifest& m,
                                                 const std::string& base_dir);

// compute_scores + CSV written to <out>/eval.csv; returns the CSV text.
std::string cmd_eval(const RunConfig& cfg, const std::string& manifest_path);

// 2-D embedding of the named sets (subset of clean/sensor/random/grafted/
// predicted); writes <out>/tsne.csv and returns the CSV text.
std::string cmd_tsne(const RunConfig& cfg, const std::string& manifest_path,
                     const std::vector<std::string>& sets);

// Score an episode CSV; writes the per-step breakdown CSV and returns its
// path. out_csv empty means "<episode>.breakdown.csv".
std::string cmd_reward_audit(const RunConfig& cfg, const std::string& episode_csv,
                             const std::string& out_csv);

struct PipelineCheck {
  std::string name;
  bool pass = false;
  std::string detail;
};

struct PipelineReport {
  bool ok = false;
  std::vector<PipelineCheck> checks;
  std::vector<std::string> notes;  // reported but never gate ok
  std::vector<metrics::MethodScore> scores;
  std::string manifest_path;
  std::string model_dir;
  std::string eval_csv_path;
};

// gen -> train -> generate -> eval -> embeddings -> report. ok is true iff
// every post-run check (graft exactness, metric ordering, raw-output
// ablation, domain purity, hole-fraction band, conditioning, loss drop)
// passes.
PipelineReport cmd_pipeline(const RunConfig& cfg);

// The checking half of cmd_pipeline: scores an out_dir that already holds
// data/, model/ and gen/ artifacts and rewrites eval.csv, tsne.csv and
// pipeline_report.txt.
PipelineReport evaluate_run(const RunConfig& cfg);

// Mean fraction of same-label points among each point's k nearest neighbors
// of a 2-D embedding (row-major xy pairs).
double embedding_knn_purity(const std::vector<double>& xy, const std::vector<int>& labels, int k);

}  // namespace df::pipeline
