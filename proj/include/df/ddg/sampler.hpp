#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "df/ddg/model.hpp"
#include "df/ddg/schedule.hpp"
#include "df/depthmap.hpp"

namespace df::ddg {

// Noise predictor: given the current field x at timestep k, estimate the unit
// Gaussian that produced it. Usually wraps the network; tests substitute
// closed-form predictors to check the samplers in isolation.
using Predictor = std::function<std::vector<float>(const std::vector<float>&, int)>;

// Full K-step ancestral sampling from pure noise over an n-element field.
// Per-step noise variance is beta_k.
std::vector<float> sample_ddpm_field(const NoiseSchedule& s, std::size_t n,
                                     const Predictor& predict_eps, std::uint64_t seed);

// Strided sampling over round(j*K/steps) timesteps; eta=0 is deterministic
// given the initial noise, eta=1 matches ancestral noise scale per transition.
std::vector<float> sample_ddim_field(const NoiseSchedule& s, std::size_t n,
                                     const Predictor& predict_eps, int steps, double eta,
                                     std::uint64_t seed);

// Wraps the network as a single-frame predictor with the conditioning map
// (values in [0,1]) baked into channel 1. Gradients stay off.
Predictor model_predictor(DiffusionModel& m, const DepthMap& c);

// Model-level sampling conditioned on c; output decoded to meters.
DepthMap sample_ddpm(DiffusionModel& m, const DepthMap& c, std::uint64_t seed);
DepthMap sample_ddim(DiffusionModel& m, const DepthMap& c, int steps, double eta,
                     std::uint64_t seed);

}  // namespace df::ddg
