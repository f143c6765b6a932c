#include "df/pipeline/config.hpp"

#include <fstream>
#include <initializer_list>
#include <string>

#include "df/error.hpp"
#include "json.hpp"

namespace df::pipeline {

namespace {

using nlohmann::json;

void require_keys(const json& j, const std::string& section,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError("config: '" + section + "' must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known)
      throw ValidationError("config: unknown key '" + item.key() + "' in " + section);
  }
}

template <class T>
void opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void parse_scene(const json& j, scene::SceneConfig& s) {
  require_keys(j, "scene",
               {"width", "height", "fx", "fy", "z_near", "z_far", "min_objects", "max_objects",
                "min_size", "max_size", "min_reflectivity", "max_reflectivity", "workspace_x",
                "workspace_y", "cam_height_min", "cam_height_max", "cam_offset_min",
                "cam_offset_max", "max_retries"});
  opt(j, "width", s.width);
  opt(j, "height", s.height);
  opt(j, "fx", s.fx);
  opt(j, "fy", s.fy);
  opt(j, "z_near", s.z_near);
  opt(j, "z_far", s.z_far);
  opt(j, "min_objects", s.min_objects);
  opt(j, "max_objects", s.max_objects);
  opt(j, "min_size", s.min_size);
  opt(j, "max_size", s.max_size);
  opt(j, "min_reflectivity", s.min_reflectivity);
  opt(j, "max_reflectivity", s.max_reflectivity);
  opt(j, "workspace_x", s.workspace_x);
  opt(j, "workspace_y", s.workspace_y);
  opt(j, "cam_height_min", s.cam_height_min);
  opt(j, "cam_height_max", s.cam_height_max);
  opt(j, "cam_offset_min", s.cam_offset_min);
  opt(j, "cam_offset_max", s.cam_offset_max);
  opt(j, "max_retries", s.max_retries);
}

void parse_sensor(const json& j, sensor::SensorModel& s) {
  require_keys(j, "sensor",
               {"f", "b", "sigma_d", "delta", "g_th", "p_edge", "rho_th", "blob_count_min",
                "blob_count_max", "blob_radius_min", "blob_radius_max", "p_rand"});
  opt(j, "f", s.f);
  opt(j, "b", s.b);
  opt(j, "sigma_d", s.sigma_d);
  opt(j, "delta", s.delta);
  opt(j, "g_th", s.g_th);
  opt(j, "p_edge", s.p_edge);
  opt(j, "rho_th", s.rho_th);
  opt(j, "blob_count_min", s.blob_count_min);
  opt(j, "blob_count_max", s.blob_count_max);
  opt(j, "blob_radius_min", s.blob_radius_min);
  opt(j, "blob_radius_max", s.blob_radius_max);
  opt(j, "p_rand", s.p_rand);
}

void parse_baseline(const json& j, sensor::RandomNoiseConfig& b) {
  require_keys(j, "baseline", {"sigma", "dropout"});
  opt(j, "sigma", b.sigma);
  opt(j, "dropout", b.dropout);
}

void parse_prior(const json& j, prior::PriorConfig& p) {
  require_keys(j, "prior", {"blur_radius", "mode"});
  opt(j, "blur_radius", p.blur_radius);
  if (j.contains("mode")) {
    const auto m = j.at("mode").get<std::string>();
    if (m == "per_frame")
      p.mode = prior::NormalizationMode::PerFrame;
    else if (m == "per_trajectory")
      p.mode = prior::NormalizationMode::PerTrajectory;
    else
      throw ValidationError("config: prior.mode must be per_frame or per_trajectory, got " + m);
  }
}

void parse_model(const json& j, ddg::ModelConfig& m) {
  require_keys(j, "model", {"base", "time_dim", "schedule", "steps"});
  opt(j, "base", m.unet.base);
  opt(j, "time_dim", m.unet.time_dim);
  opt(j, "steps", m.steps);
  if (j.contains("schedule"))
    m.schedule_kind = ddg::schedule_kind_from_string(j.at("schedule").get<std::string>());
}

void parse_train(const json& j, ddg::TrainConfig& t) {
  require_keys(j, "train",
               {"steps", "batch", "lr", "beta1", "beta2", "eps", "ema_decay", "loss_ema_decay",
                "log_every", "checkpoint_every"});
  opt(j, "steps", t.steps);
  opt(j, "batch", t.batch);
  opt(j, "lr", t.adam.lr);
  opt(j, "beta1", t.adam.beta1);
  opt(j, "beta2", t.adam.beta2);
  opt(j, "eps", t.adam.eps);
  opt(j, "ema_decay", t.ema_decay);
  opt(j, "loss_ema_decay", t.loss_ema_decay);
  opt(j, "log_every", t.log_every);
  opt(j, "checkpoint_every", t.checkpoint_every);
}

void parse_sample(const json& j, RunConfig& c) {
  require_keys(j, "sample",
               {"ddim_steps", "eta", "use_ddpm", "use_ema", "noise_threshold", "dilation"});
  opt(j, "ddim_steps", c.ddim_steps);
  opt(j, "eta", c.eta);
  opt(j, "use_ddpm", c.use_ddpm);
  opt(j, "use_ema", c.use_ema);
  opt(j, "noise_threshold", c.graft.noise_threshold);
  opt(j, "dilation", c.graft.dilation);
}

void parse_reward(const json& j, reward::RewardConfig& r) {
  require_keys(j, "reward",
               {"w1", "w2", "w3", "w4", "c1", "c2", "action_scale", "grasp_radius", "lift_height",
                "success_pos_tol", "success_ang_tol", "table_height", "gripper_open",
                "gripper_closed", "hand_distance"});
  opt(j, "w1", r.w1);
  opt(j, "w2", r.w2);
  opt(j, "w3", r.w3);
  opt(j, "w4", r.w4);
  opt(j, "c1", r.c1);
  opt(j, "c2", r.c2);
  opt(j, "action_scale", r.action_scale);
  opt(j, "grasp_radius", r.grasp_radius);
  opt(j, "lift_height", r.lift_height);
  opt(j, "success_pos_tol", r.success_pos_tol);
  opt(j, "success_ang_tol", r.success_ang_tol);
  opt(j, "table_height", r.table_height);
  opt(j, "gripper_open", r.gripper_open);
  opt(j, "gripper_closed", r.gripper_closed);
  if (j.contains("hand_distance")) {
    const auto m = j.at("hand_distance").get<std::string>();
    if (m == "fingertips")
      r.hand_distance = reward::HandDistanceMode::TwoFingertips;
    else if (m == "center")
      r.hand_distance = reward::HandDistanceMode::GripperCenter;
    else
      throw ValidationError("config: reward.hand_distance must be fingertips or center, got " +
                            m);
  }
}

void parse_metrics(const json& j, RunConfig& c) {
  require_keys(j, "metrics",
               {"feature_seed", "tsne_frames", "perplexity", "iterations", "tsne_seed"});
  opt(j, "feature_seed", c.feature_seed);
  opt(j, "tsne_frames", c.tsne_frames);
  opt(j, "perplexity", c.tsne.perplexity);
  opt(j, "iterations", c.tsne.iterations);
  opt(j, "tsne_seed", c.tsne.seed);
}

}  // namespace

void RunConfig::validate() const {
  if (frames < 1) throw ValidationError("config: frames must be positive");
  if (eval_frames < 2) throw ValidationError("config: eval_frames must be at least 2");
  if (eval_frames > frames)
    throw ValidationError("config: eval_frames exceeds the dataset size");
  if (tsne_frames < 2) throw ValidationError("config: tsne_frames must be at least 2");
  if (out_dir.empty()) throw ValidationError("config: out_dir must not be empty");
  if (threads < 0) throw ValidationError("config: threads must be >= 0");
  if (ddim_steps < 1 || ddim_steps > model.steps)
    throw ValidationError("config: sample.ddim_steps must lie in [1, model.steps]");
  if (eta < 0.0 || eta > 1.0) throw ValidationError("config: sample.eta must lie in [0, 1]");
  scene.validate();
  sensor.validate();
  prior.validate();
  model.validate();
  graft.validate();
  reward.validate();
  tsne.validate();
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: not valid JSON: ") + e.what());
  }

  RunConfig c;
  try {
    require_keys(j, "top level",
                 {"seed", "out_dir", "threads", "frames", "eval_frames", "scene", "sensor",
                  "baseline", "prior", "model", "train", "sample", "reward", "metrics"});
    opt(j, "seed", c.seed);
    opt(j, "out_dir", c.out_dir);
    opt(j, "threads", c.threads);
    opt(j, "frames", c.frames);
    opt(j, "eval_frames", c.eval_frames);
    if (j.contains("scene")) parse_scene(j.at("scene"), c.scene);
    if (j.contains("sensor")) parse_sensor(j.at("sensor"), c.sensor);
    if (j.contains("baseline")) parse_baseline(j.at("baseline"), c.baseline);
    if (j.contains("prior")) parse_prior(j.at("prior"), c.prior);
    if (j.contains("model")) parse_model(j.at("model"), c.model);
    if (j.contains("train")) parse_train(j.at("train"), c.train);
    if (j.contains("sample")) parse_sample(j.at("sample"), c);
    if (j.contains("reward")) parse_reward(j.at("reward"), c.reward);
    if (j.contains("metrics")) parse_metrics(j.at("metrics"), c);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }

  // the scene block is the single authority for raster and depth range
  c.sensor.z_near = c.scene.z_near;
  c.sensor.z_far = c.scene.z_far;
  c.baseline.z_near = c.scene.z_near;
  c.baseline.z_far = c.scene.z_far;
  c.model.z_far = static_cast<float>(c.scene.z_far);
  c.train.width = c.scene.width;
  c.train.height = c.scene.height;

  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_config(text);
}

std::string config_json(const RunConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["out_dir"] = c.out_dir;
  j["threads"] = c.threads;
  j["frames"] = c.frames;
  j["eval_frames"] = c.eval_frames;
  j["scene"] = {{"width", c.scene.width},
                {"height", c.scene.height},
                {"fx", c.scene.fx},
                {"fy", c.scene.fy},
                {"z_near", c.scene.z_near},
                {"z_far", c.scene.z_far},
                {"min_objects", c.scene.min_objects},
                {"max_objects", c.scene.max_objects},
                {"min_size", c.scene.min_size},
                {"max_size", c.scene.max_size},
                {"min_reflectivity", c.scene.min_reflectivity},
                {"max_reflectivity", c.scene.max_reflectivity},
                {"workspace_x", c.scene.workspace_x},
                {"workspace_y", c.scene.workspace_y},
                {"cam_height_min", c.scene.cam_height_min},
                {"cam_height_max", c.scene.cam_height_max},
                {"cam_offset_min", c.scene.cam_offset_min},
                {"cam_offset_max", c.scene.cam_offset_max},
                {"max_retries", c.scene.max_retries}};
  j["sensor"] = {{"f", c.sensor.f},
                 {"b", c.sensor.b},
                 {"sigma_d", c.sensor.sigma_d},
                 {"delta", c.sensor.delta},
                 {"g_th", c.sensor.g_th},
                 {"p_edge", c.sensor.p_edge},
                 {"rho_th", c.sensor.rho_th},
                 {"blob_count_min", c.sensor.blob_count_min},
                 {"blob_count_max", c.sensor.blob_count_max},
                 {"blob_radius_min", c.sensor.blob_radius_min},
                 {"blob_radius_max", c.sensor.blob_radius_max},
                 {"p_rand", c.sensor.p_rand}};
  j["baseline"] = {{"sigma", c.baseline.sigma}, {"dropout", c.baseline.dropout}};
  j["prior"] = {{"blur_radius", c.prior.blur_radius},
                {"mode", c.prior.mode == prior::NormalizationMode::PerFrame ? "per_frame"
                                                                            : "per_trajectory"}};
  j["model"] = {{"base", c.model.unet.base},
                {"time_dim", c.model.unet.time_dim},
                {"schedule", ddg::to_string(c.model.schedule_kind)},
                {"steps", c.model.steps}};
  j["train"] = {{"steps", c.train.steps},
                {"batch", c.train.batch},
                {"lr", c.train.adam.lr},
                {"beta1", c.train.adam.beta1},
                {"beta2", c.train.adam.beta2},
                {"eps", c.train.adam.eps},
                {"ema_decay", c.train.ema_decay},
                {"loss_ema_decay", c.train.loss_ema_decay},
                {"log_every", c.train.log_every},
                {"checkpoint_every", c.train.checkpoint_every}};
  j["sample"] = {{"ddim_steps", c.ddim_steps},
                 {"eta", c.eta},
                 {"use_ddpm", c.use_ddpm},
                 {"use_ema", c.use_ema},
                 {"noise_threshold", c.graft.noise_threshold},
                 {"dilation", c.graft.dilation}};
  j["reward"] = {{"w1", c.reward.w1},
                 {"w2", c.reward.w2},
                 {"w3", c.reward.w3},
                 {"w4", c.reward.w4},
                 {"c1", c.reward.c1},
                 {"c2", c.reward.c2},
                 {"action_scale", c.reward.action_scale},
                 {"grasp_radius", c.reward.grasp_radius},
                 {"lift_height", c.reward.lift_height},
                 {"success_pos_tol", c.reward.success_pos_tol},
                 {"success_ang_tol", c.reward.success_ang_tol},
                 {"table_height", c.reward.table_height},
                 {"gripper_open", c.reward.gripper_open},
                 {"gripper_closed", c.reward.gripper_closed},
                 {"hand_distance",
                  c.reward.hand_distance == reward::HandDistanceMode::TwoFingertips
                      ? "fingertips"
                      : "center"}};
  j["metrics"] = {{"feature_seed", c.feature_seed},
                  {"tsne_frames", c.tsne_frames},
                  {"perplexity", c.tsne.perplexity},
                  {"iterations", c.tsne.iterations},
                  {"tsne_seed", c.tsne.seed}};
  return j.dump(2) + "\n";
}

void write_resolved_config(const RunConfig& c, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw NumericError("cannot write " + path);
  f << config_json(c);
}

}  // namespace df::pipeline
