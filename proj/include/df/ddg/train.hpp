#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "df/ddg/model.hpp"
#include "df/ddg/schedule.hpp"
#include "df/rng.hpp"
#include "df/tensor/param_store.hpp"
#include "df/tensor/tensor.hpp"

namespace df::ddg {

// One training pair in model units: the corruption target and its
// conditioning signal, both flattened.
struct TrainItem {
  std::vector<float> d0;
  std::vector<float> cond;
};

struct TrainConfig {
  long steps = 20000;
  int batch = 2;
  int width = 64;
  int height = 48;
  tensor::AdamConfig adam;
  double ema_decay = 0.999;    // parameter average used for generation
  double loss_ema_decay = 0.99;
  long log_every = 100;        // loss-curve cadence
  long checkpoint_every = 1000;
  std::uint64_t seed = 0;
  std::string out_dir;

  void validate() const;
};

struct TrainResult {
  long steps_done = 0;
  double first_loss = 0.0;
  double last_loss = 0.0;
  double ema_loss = 0.0;
};

// Receives the noisy batch [B,n] and per-item timesteps; returns predicted
// noise, same shape. Conditioning is the closure's business, which keeps the
// objective reusable for non-image signals.
using ModelFn = std::function<tensor::Tensor<float>(const tensor::Tensor<float>&,
                                                    const std::vector<int>&)>;

// Mean squared error between the true and predicted noise at caller-chosen
// timesteps. Draws are inputs so training and tests control them exactly.
tensor::Tensor<float> denoising_loss(const NoiseSchedule& s,
                                     const std::vector<const std::vector<float>*>& d0,
                                     const std::vector<int>& ks,
                                     const std::vector<std::vector<float>>& eps,
                                     const ModelFn& model_fn);

// Same, drawing k uniform in [1,K] and unit Gaussian noise from rng.
tensor::Tensor<float> denoising_loss(const NoiseSchedule& s,
                                     const std::vector<const std::vector<float>*>& d0,
                                     const ModelFn& model_fn, Prng& rng);

// Runs (or resumes) optimization, writing into cfg.out_dir:
//   params.dfck / ema.dfck / optimizer.dfck  weights, averaged weights, Adam moments
//   state.json                               step counter and loss bookkeeping
//   loss.csv                                 step,loss,ema_loss per logging interval
// Identical seed and config reproduce identical bytes, with or without
// interruptions: every random draw is counter-indexed by (step, slot).
TrainResult train(DiffusionModel& m, const std::vector<TrainItem>& items,
                  const TrainConfig& cfg);

}  // namespace df::ddg
