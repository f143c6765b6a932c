#pragma once

#include <cstdint>

#include "df/depthmap.hpp"
#include "df/scene/scene.hpp"

namespace df::sensor {

// Stereo depth sensor corruption model. Axial noise follows the stereo error
// law sigma_z = sigma_d * z^2 / (f * b); quantization acts on disparity in
// steps of delta; holes come from depth edges, low-reflectivity surfaces and
// uniform dropout.
struct SensorModel {
  double f = 55.0;        // focal, pixels
  double b = 0.095;       // baseline, meters
  double sigma_d = 0.08;  // disparity noise, pixels
  double delta = 0.25;    // disparity quantization step, pixels
  double g_th = 0.05;     // edge gradient threshold, meters/pixel
  double p_edge = 0.8;
  double rho_th = 0.3;    // reflectivity below this grows blob holes
  int blob_count_min = 1, blob_count_max = 3;
  double blob_radius_min = 2.0, blob_radius_max = 5.0;  // pixels
  double p_rand = 0.002;
  double z_near = 0.2, z_far = 3.0;

  void validate() const;
};

// Per-stage random sub-stream labels. Each corruption stage keys its draws on
// (seed, stage, ...) so toggling one stage never shifts another's stream.
enum Stage : std::uint64_t {
  kStageAxial = 1,
  kStageEdge = 3,
  kStageMaterial = 4,
  kStageDropout = 5,
  kStageBaselineNoise = 6,
  kStageBaselineDropout = 7,
};

// Applies, in order: axial noise (clamped to +-6 sigma_z), disparity
// quantization, edge dropout against the clean map's Sobel gradient,
// material blob holes inside low-reflectivity footprints, uniform dropout.
// Out-of-range values become holes. Deterministic in (inputs, seed).
DepthMap corrupt(const DepthMap& clean, const scene::Scene& scn, const SensorModel& sensor,
                 std::uint64_t seed);

// Sobel gradient magnitude in meters/pixel (kernel normalized by 1/8),
// replicated borders. Exposed so tests can recompute the edge mask.
std::vector<double> sobel_magnitude(const DepthMap& map);

// Largest possible non-hole deviation from the clean value: the axial clamp
// plus the worst-case half-step disparity rounding, both at z_far.
double max_axial_deviation(const SensorModel& sensor);

struct RandomNoiseConfig {
  double sigma = 0.01;    // meters
  double dropout = 0.05;  // per-pixel hole probability
  double z_near = 0.2, z_far = 3.0;
};

// Naive corruption baseline: additive i.i.d. Gaussian plus uniform dropout,
// ignoring scene structure entirely.
DepthMap random_noise_baseline(const DepthMap& clean, const RandomNoiseConfig& config,
                               std::uint64_t seed);

}  // namespace df::sensor
