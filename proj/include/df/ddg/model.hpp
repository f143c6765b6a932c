#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "df/ddg/schedule.hpp"
#include "df/ddg/unet.hpp"
#include "df/depthmap.hpp"
#include "df/tensor/param_store.hpp"

namespace df::ddg {

// Everything needed to rebuild a model apart from the weights; travels as a
// JSON sidecar next to the DFCK weight file.
struct ModelConfig {
  UNetConfig unet;
  ScheduleKind schedule_kind = ScheduleKind::Linear;
  int steps = 1000;    // diffusion step count K
  float z_far = 3.0f;  // depth scale: meters map to model units via 2z/z_far - 1

  void validate() const;
};

struct DiffusionModel {
  ModelConfig cfg;
  NoiseSchedule schedule;
  UNet<float> net;
  tensor::ParamStore<float> params;

  // where a hole (0 m) lands in model units; a consequence of the affine map
  static constexpr float kHoleValue = -1.0f;
};

// Fresh network with seeded initialization.
DiffusionModel make_model(const ModelConfig& cfg, std::uint64_t seed);

void save_model(const DiffusionModel& m, const std::string& weights_path,
                const std::string& meta_path);
DiffusionModel load_model(const std::string& weights_path, const std::string& meta_path);

// meters in [0, z_far] -> model units in [-1, 1]; plain affine, so holes (0)
// land at -1 exactly and no pixel needs special-casing
std::vector<float> encode_depth(const DepthMap& d, float z_far);
// model units -> meters, clamped into [0, z_far]
DepthMap decode_depth(const std::vector<float>& m, int width, int height, float z_far);
// prior values in [0,1] -> model units in [-1, 1]
std::vector<float> encode_prior(const DepthMap& c);

}  // namespace df::ddg
