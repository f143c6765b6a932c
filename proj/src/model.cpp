#include "df/ddg/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "df/error.hpp"
#include "df/rng.hpp"
#include "df/tensor/checkpoint.hpp"
#include "json.hpp"

namespace df::ddg {

void ModelConfig::validate() const {
  unet.validate();
  if (unet.in_channels != 2 || unet.out_channels != 1)
    throw ValidationError("model expects a 2-in (target + conditioning) 1-out network");
  if (steps < 10) throw ValidationError("model needs at least 10 diffusion steps");
  if (!(z_far > 0.0f) || !std::isfinite(z_far))
    throw ValidationError("z_far must be positive and finite");
}

DiffusionModel make_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  DiffusionModel m{cfg, make_schedule(cfg.schedule_kind, cfg.steps), UNet<float>(cfg.unet), {}};
  Prng rng(mix_seed(seed, 0x696E6974ULL));  // "init" stream
  m.net.init_params(m.params, rng);
  return m;
}

namespace {
constexpr int kMetaVersion = 1;
}

void save_model(const DiffusionModel& m, const std::string& weights_path,
                const std::string& meta_path) {
  tensor::save_params(weights_path, m.params);
  nlohmann::json j;
  j["format"] = "depth-diffusion";
  j["version"] = kMetaVersion;
  j["schedule"] = {{"kind", to_string(m.cfg.schedule_kind)}, {"steps", m.cfg.steps}};
  j["unet"] = {{"in_channels", m.cfg.unet.in_channels},
               {"out_channels", m.cfg.unet.out_channels},
               {"base", m.cfg.unet.base},
               {"time_dim", m.cfg.unet.time_dim}};
  j["z_far"] = m.cfg.z_far;
  std::ofstream f(meta_path);
  if (!f) throw ValidationError("cannot write " + meta_path);
  f << j.dump(2) << '\n';
}

DiffusionModel load_model(const std::string& weights_path, const std::string& meta_path) {
  std::ifstream f(meta_path);
  if (!f) throw ValidationError("cannot read " + meta_path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(meta_path + ": " + e.what());
  }
  try {
    if (j.at("format") != "depth-diffusion" || j.at("version") != kMetaVersion)
      throw ValidationError(meta_path + ": not a model sidecar I understand");
    ModelConfig cfg;
    cfg.schedule_kind = schedule_kind_from_string(j.at("schedule").at("kind"));
    cfg.steps = j.at("schedule").at("steps");
    cfg.unet.in_channels = j.at("unet").at("in_channels");
    cfg.unet.out_channels = j.at("unet").at("out_channels");
    cfg.unet.base = j.at("unet").at("base");
    cfg.unet.time_dim = j.at("unet").at("time_dim");
    cfg.z_far = j.at("z_far");
    auto m = make_model(cfg, 0);  // shapes only; values come from the weight file
    tensor::load_params(weights_path, m.params);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(meta_path + ": " + e.what());
  }
}

std::vector<float> encode_depth(const DepthMap& d, float z_far) {
  std::vector<float> out(d.values.size());
  const float s = 2.0f / z_far;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s * d.values[i] - 1.0f;
  return out;
}

DepthMap decode_depth(const std::vector<float>& m, int width, int height, float z_far) {
  if (m.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw ValidationError("decode_depth: size mismatch");
  DepthMap d;
  d.width = width;
  d.height = height;
  d.values.resize(m.size());
  for (std::size_t i = 0; i < m.size(); ++i)
    d.values[i] = std::clamp((m[i] + 1.0f) * 0.5f * z_far, 0.0f, z_far);
  return d;
}

std::vector<float> encode_prior(const DepthMap& c) {
  std::vector<float> out(c.values.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 2.0f * c.values[i] - 1.0f;
  return out;
}

}  // namespace df::ddg
