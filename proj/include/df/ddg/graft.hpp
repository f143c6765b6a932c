#pragma once

#include <cstdint>
#include <vector>

#include "df/ddg/model.hpp"
#include "df/depthmap.hpp"
#include "df/prior/prior.hpp"

namespace df::ddg {

struct GraftConfig {
  // Pixels at or below this (in z/z_far units) count as sensor artifacts.
  float noise_threshold = 0.02f;
  int dilation = 0;  // Chebyshev radius, pixels; grows the artifact mask

  void validate() const;
};

// mask(p)=1 iff values[p] <= noise_threshold, then dilated. `values` must be
// in the same units as the threshold.
std::vector<std::uint8_t> make_mask(const std::vector<float>& values, int width, int height,
                                    const GraftConfig& cfg);

// Elementwise composite: sim where mask=0, pred where mask=1. Both sides are
// copied bit-exactly; nothing is rescaled.
DepthMap graft(const DepthMap& d_sim, const DepthMap& d_pred,
               const std::vector<std::uint8_t>& mask);

struct GenerateConfig {
  prior::PriorConfig prior;
  GraftConfig graft;
  int ddim_steps = 50;
  double eta = 0.0;
  bool use_ddpm = false;  // full-K ancestral sampling instead of the strided path
};

struct GeneratedFrame {
  DepthMap final;      // clean frame with predicted artifacts grafted on
  DepthMap predicted;  // raw decoded model output
  DepthMap prior;      // conditioning map actually fed to the model
  std::vector<std::uint8_t> mask;
};

// Clean depth -> prior -> conditional sample -> artifact mask -> graft.
GeneratedFrame generate_noisy_depth(DiffusionModel& m, const DepthMap& d_sim,
                                    const GenerateConfig& cfg, std::uint64_t seed);

}  // namespace df::ddg
