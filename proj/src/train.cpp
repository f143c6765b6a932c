#include "df/ddg/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "df/error.hpp"
#include "df/tensor/checkpoint.hpp"
#include "df/tensor/ops.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace df::ddg {

namespace {

constexpr std::uint64_t kPickStream = 0x5069636BULL;  // which item fills each slot
constexpr std::uint64_t kTimeStream = 0x54696D65ULL;  // per-slot timestep draw
constexpr std::uint64_t kEpsStream = 0x45707331ULL;   // per-slot noise field

struct RunState {
  long step = 0;
  double first_loss = 0.0;
  double ema_loss = 0.0;
};

void write_state(const std::string& path, const RunState& st) {
  nlohmann::json j;
  j["step"] = st.step;
  j["first_loss"] = st.first_loss;
  j["ema_loss"] = st.ema_loss;
  std::ofstream f(path);
  if (!f) throw ValidationError("cannot write " + path);
  f << j.dump(2) << '\n';
}

RunState read_state(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot read " + path);
  try {
    nlohmann::json j;
    f >> j;
    RunState st;
    st.step = j.at("step");
    st.first_loss = j.at("first_loss");
    st.ema_loss = j.at("ema_loss");
    return st;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

void save_ema(const std::string& path, const tensor::ParamStore<float>& ps,
              const std::vector<std::vector<float>>& ema) {
  std::vector<tensor::NamedBlob> blobs(ps.count());
  for (std::size_t i = 0; i < ps.count(); ++i)
    blobs[i] = {ps.name(i), ps.at(i).shape(), ema[i]};
  tensor::write_dfck(path, blobs);
}

void load_ema(const std::string& path, const tensor::ParamStore<float>& ps,
              std::vector<std::vector<float>>& ema) {
  auto blobs = tensor::read_dfck(path);
  if (blobs.size() != ps.count()) throw ValidationError(path + ": parameter count mismatch");
  for (std::size_t i = 0; i < ps.count(); ++i) {
    if (blobs[i].name != ps.name(i) || blobs[i].shape != ps.at(i).shape())
      throw ValidationError(path + ": entry " + blobs[i].name + " does not match the model");
    ema[i] = std::move(blobs[i].data);
  }
}

// Drops rows written after the checkpoint we resumed from, so the step column
// stays strictly increasing no matter where an earlier run died.
void trim_csv(const std::string& path, long keep_through) {
  std::vector<std::string> keep;
  {
    std::ifstream in(path);
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        keep.push_back(line);
        header = false;
        continue;
      }
      if (std::strtol(line.c_str(), nullptr, 10) <= keep_through) keep.push_back(line);
    }
  }
  std::ofstream out(path, std::ios::trunc);
  for (const auto& l : keep) out << l << '\n';
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 1) throw ValidationError("steps must be >= 1");
  if (batch < 1) throw ValidationError("batch must be >= 1");
  if (width < 4 || height < 4 || width % 4 != 0 || height % 4 != 0)
    throw ValidationError("raster must be at least 4x4 and divisible by 4");
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) throw ValidationError("ema_decay must be in [0,1)");
  if (!(loss_ema_decay >= 0.0 && loss_ema_decay < 1.0))
    throw ValidationError("loss_ema_decay must be in [0,1)");
  if (log_every < 1 || checkpoint_every < 1)
    throw ValidationError("logging cadences must be >= 1");
  if (out_dir.empty()) throw ValidationError("out_dir required");
}

tensor::Tensor<float> denoising_loss(const NoiseSchedule& s,
                                     const std::vector<const std::vector<float>*>& d0,
                                     const std::vector<int>& ks,
                                     const std::vector<std::vector<float>>& eps,
                                     const ModelFn& model_fn) {
  if (d0.empty()) throw ValidationError("denoising_loss: empty batch");
  if (ks.size() != d0.size() || eps.size() != d0.size())
    throw ValidationError("denoising_loss: one timestep and noise field per item");
  const std::size_t n = d0[0]->size();
  const int B = static_cast<int>(d0.size());
  std::vector<float> dk(static_cast<std::size_t>(B) * n), ev(static_cast<std::size_t>(B) * n);
  for (int i = 0; i < B; ++i) {
    if (d0[static_cast<std::size_t>(i)]->size() != n || eps[static_cast<std::size_t>(i)].size() != n)
      throw ValidationError("denoising_loss: item size mismatch");
    const int k = ks[static_cast<std::size_t>(i)];
    if (k < 1 || k > s.K) throw ValidationError("denoising_loss: timestep outside [1,K]");
    const double ab = s.alpha_bar_at(k);
    const float cs = static_cast<float>(std::sqrt(ab));
    const float cn = static_cast<float>(std::sqrt(1.0 - ab));
    const auto& dv = *d0[static_cast<std::size_t>(i)];
    const auto& e = eps[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < n; ++j) {
      dk[static_cast<std::size_t>(i) * n + j] = cs * dv[j] + cn * e[j];
      ev[static_cast<std::size_t>(i) * n + j] = e[j];
    }
  }
  auto dk_t = tensor::Tensor<float>::from({B, static_cast<int>(n)}, std::move(dk));
  auto ev_t = tensor::Tensor<float>::from({B, static_cast<int>(n)}, std::move(ev));
  auto pred = model_fn(dk_t, ks);
  if (pred.shape() != dk_t.shape())
    throw ValidationError("denoising_loss: model output shape " +
                          tensor::shape_str(pred.shape()) + ", expected " +
                          tensor::shape_str(dk_t.shape()));
  auto loss = tensor::mse_loss(pred, ev_t);
  if (!std::isfinite(loss.item())) throw NumericError("denoising loss is not finite");
  return loss;
}

tensor::Tensor<float> denoising_loss(const NoiseSchedule& s,
                                     const std::vector<const std::vector<float>*>& d0,
                                     const ModelFn& model_fn, Prng& rng) {
  std::vector<int> ks(d0.size());
  std::vector<std::vector<float>> eps(d0.size());
  for (std::size_t i = 0; i < d0.size(); ++i) {
    ks[i] = static_cast<int>(rng.uniform_int(1, s.K));
    eps[i].resize(d0[i]->size());
    for (auto& v : eps[i]) v = static_cast<float>(rng.normal());
  }
  return denoising_loss(s, d0, ks, eps, model_fn);
}

TrainResult train(DiffusionModel& m, const std::vector<TrainItem>& items,
                  const TrainConfig& cfg) {
  cfg.validate();
  m.schedule.validate_endpoints();  // only trainable schedules get this far
  const std::size_t n = static_cast<std::size_t>(cfg.width) * cfg.height;
  if (items.empty()) throw ValidationError("no training items");
  for (const auto& it : items)
    if (it.d0.size() != n || it.cond.size() != n)
      throw ValidationError("training item does not match the configured raster");

  fs::create_directories(cfg.out_dir);
  const std::string params_path = cfg.out_dir + "/params.dfck";
  const std::string ema_path = cfg.out_dir + "/ema.dfck";
  const std::string opt_path = cfg.out_dir + "/optimizer.dfck";
  const std::string state_path = cfg.out_dir + "/state.json";
  const std::string csv_path = cfg.out_dir + "/loss.csv";

  tensor::AdamState<float> opt;
  opt.match(m.params);
  std::vector<std::vector<float>> ema(m.params.count());
  for (std::size_t i = 0; i < m.params.count(); ++i) ema[i] = m.params.at(i).data();
  RunState st;

  if (fs::exists(state_path)) {
    st = read_state(state_path);
    tensor::load_params(params_path, m.params);
    tensor::load_adam(opt_path, m.params, opt);
    opt.step = st.step;  // bias correction continues where it left off
    load_ema(ema_path, m.params, ema);
  }

  const bool fresh_csv = st.step == 0 || !fs::exists(csv_path);
  if (!fresh_csv) trim_csv(csv_path, st.step);
  std::ofstream csv(csv_path, fresh_csv ? std::ios::trunc : std::ios::app);
  if (!csv) throw ValidationError("cannot write " + csv_path);
  if (fresh_csv) csv << "step,loss,ema_loss\n";
  csv << std::setprecision(8);

  const int B = cfg.batch;
  std::vector<float> cond_flat(static_cast<std::size_t>(B) * n);
  const int H = cfg.height, W = cfg.width;
  auto model_fn = [&](const tensor::Tensor<float>& dk, const std::vector<int>& ks) {
    const int b = dk.dim(0);
    auto x = tensor::reshape(dk, {b, 1, H, W});
    auto c = tensor::Tensor<float>::from(
        {b, 1, H, W},
        std::vector<float>(cond_flat.begin(),
                           cond_flat.begin() + static_cast<std::ptrdiff_t>(b * n)));
    auto out = m.net.forward(m.params, tensor::concat_channels(x, c), ks);
    return tensor::reshape(out, {b, static_cast<int>(n)});
  };

  const std::uint64_t pick_seed = mix_seed(cfg.seed, kPickStream);
  const std::uint64_t time_seed = mix_seed(cfg.seed, kTimeStream);
  TrainResult res;
  std::vector<const std::vector<float>*> d0(static_cast<std::size_t>(B));
  std::vector<int> ks(static_cast<std::size_t>(B));
  std::vector<std::vector<float>> eps(static_cast<std::size_t>(B));

  for (long step = st.step + 1; step <= cfg.steps; ++step) {
    const auto us = static_cast<std::uint64_t>(step);
    for (int slot = 0; slot < B; ++slot) {
      const auto uslot = static_cast<std::uint64_t>(slot);
      const double u = counter_uniform(pick_seed, us, uslot);
      const std::size_t idx =
          std::min(items.size() - 1, static_cast<std::size_t>(u * static_cast<double>(items.size())));
      d0[static_cast<std::size_t>(slot)] = &items[idx].d0;
      std::copy(items[idx].cond.begin(), items[idx].cond.end(),
                cond_flat.begin() + static_cast<std::ptrdiff_t>(uslot * n));
      const double uk = counter_uniform(time_seed, us, uslot);
      ks[static_cast<std::size_t>(slot)] =
          1 + std::min(m.schedule.K - 1, static_cast<int>(uk * m.schedule.K));
      auto& e = eps[static_cast<std::size_t>(slot)];
      e.resize(n);
      const std::uint64_t es = mix_seed(cfg.seed, kEpsStream, us, uslot);
      for (std::size_t j = 0; j < n; ++j) e[j] = static_cast<float>(counter_normal(es, j, 0));
    }

    m.params.zero_grad();
    double lv = 0.0;
    try {
      auto loss = denoising_loss(m.schedule, d0, ks, eps, model_fn);
      lv = loss.item();
      loss.backward();
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " at step " + std::to_string(step));
    }
    tensor::adam_step(m.params, opt, cfg.adam);
    for (std::size_t i = 0; i < m.params.count(); ++i) {
      const auto& pv = m.params.at(i).data();
      auto& e = ema[i];
      for (std::size_t j = 0; j < e.size(); ++j)
        e[j] = static_cast<float>(cfg.ema_decay * e[j] + (1.0 - cfg.ema_decay) * pv[j]);
    }

    if (st.step == 0) {
      st.first_loss = lv;
      st.ema_loss = lv;
    } else {
      st.ema_loss = cfg.loss_ema_decay * st.ema_loss + (1.0 - cfg.loss_ema_decay) * lv;
    }
    st.step = step;
    res.last_loss = lv;

    if (step % cfg.log_every == 0 || step == cfg.steps)
      csv << step << ',' << lv << ',' << st.ema_loss << std::endl;
    if (step % cfg.checkpoint_every == 0 || step == cfg.steps) {
      tensor::save_params(params_path, m.params);
      save_ema(ema_path, m.params, ema);
      tensor::save_adam(opt_path, m.params, opt);
      write_state(state_path, st);
    }
  }

  res.steps_done = st.step;
  res.first_loss = st.first_loss;
  res.ema_loss = st.ema_loss;
  return res;
}

}  // namespace df::ddg
