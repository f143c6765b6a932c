#pragma once

#include <vector>

#include "df/depthmap.hpp"

namespace df::prior {

enum class NormalizationMode { PerFrame, PerTrajectory };

// Conditioning-signal surrogate: a scale-free geometric sketch of the scene,
// softened so it cannot be inverted back to metric ground truth exactly.
struct PriorConfig {
  double blur_radius = 1.0;  // Gaussian sigma, pixels; 0 disables
  NormalizationMode mode = NormalizationMode::PerFrame;

  void validate() const;
};

// Blur then affine-normalize to [0,1] with per-frame extrema. A constant
// input has no scale; it maps to 0.5 everywhere and sets *degenerate.
DepthMap make_prior(const DepthMap& clean, const PriorConfig& config,
                    bool* degenerate = nullptr);

// Same, but extrema are shared across the whole trajectory so a fixed scene
// point keeps the same prior value in every frame.
std::vector<DepthMap> make_prior_trajectory(const std::vector<DepthMap>& frames,
                                            const PriorConfig& config,
                                            bool* degenerate = nullptr);

}  // namespace df::prior
