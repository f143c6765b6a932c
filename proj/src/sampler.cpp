#include "df/ddg/sampler.hpp"

#include <cmath>

#include "df/error.hpp"
#include "df/rng.hpp"

namespace df::ddg {

namespace {
constexpr std::uint64_t kInitStream = 0x496E6974ULL;  // initial noise field
constexpr std::uint64_t kStepStream = 0x53746570ULL;  // per-transition noise
}  // namespace

std::vector<float> sample_ddpm_field(const NoiseSchedule& s, std::size_t n,
                                     const Predictor& predict_eps, std::uint64_t seed) {
  std::vector<float> x(n);
  const std::uint64_t init_seed = mix_seed(seed, kInitStream);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<float>(counter_normal(init_seed, i, 0));
  for (int k = s.K; k >= 1; --k) {
    const auto eps = predict_eps(x, k);
    if (eps.size() != n) throw ValidationError("predictor returned wrong field size");
    const double a = s.alpha_at(k);
    const double ab = s.alpha_bar_at(k);
    const double b = s.beta_at(k);
    const double c1 = 1.0 / std::sqrt(a);
    const double c2 = b / std::sqrt(1.0 - ab);
    const double sig = std::sqrt(b);
    const std::uint64_t zs = mix_seed(seed, kStepStream, static_cast<std::uint64_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
      double v = c1 * (x[i] - c2 * eps[i]);
      if (k > 1) v += sig * counter_normal(zs, i, 0);
      x[i] = static_cast<float>(v);
    }
  }
  return x;
}

std::vector<float> sample_ddim_field(const NoiseSchedule& s, std::size_t n,
                                     const Predictor& predict_eps, int steps, double eta,
                                     std::uint64_t seed) {
  if (steps < 1 || steps > s.K) throw ValidationError("ddim steps must be in [1,K]");
  if (eta < 0.0 || eta > 1.0) throw ValidationError("eta must be in [0,1]");
  std::vector<int> ks(static_cast<std::size_t>(steps));
  for (int j = 1; j <= steps; ++j)
    ks[static_cast<std::size_t>(j - 1)] =
        static_cast<int>(std::lround(static_cast<double>(j) * s.K / steps));

  std::vector<float> x(n);
  const std::uint64_t init_seed = mix_seed(seed, kInitStream);
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<float>(counter_normal(init_seed, i, 0));

  for (int j = steps; j >= 1; --j) {
    const int k = ks[static_cast<std::size_t>(j - 1)];
    const int kprev = j > 1 ? ks[static_cast<std::size_t>(j - 2)] : 0;
    const auto eps = predict_eps(x, k);
    if (eps.size() != n) throw ValidationError("predictor returned wrong field size");
    const double ab = s.alpha_bar_at(k);
    const double abp = s.alpha_bar_at(kprev);  // 1.0 at the final transition
    const double sq_ab = std::sqrt(ab);
    const double sq1m = std::sqrt(1.0 - ab);
    const double sigma =
        eta * std::sqrt((1.0 - abp) / (1.0 - ab)) * std::sqrt(1.0 - ab / abp);
    const double dir = std::sqrt(std::max(0.0, 1.0 - abp - sigma * sigma));
    const double sq_abp = std::sqrt(abp);
    const std::uint64_t zs = mix_seed(seed, kStepStream, static_cast<std::uint64_t>(k));
    for (std::size_t i = 0; i < n; ++i) {
      const double x0 = (x[i] - sq1m * eps[i]) / sq_ab;
      double v = sq_abp * x0 + dir * eps[i];
      if (sigma > 0.0) v += sigma * counter_normal(zs, i, 0);
      x[i] = static_cast<float>(v);
    }
  }
  return x;
}

Predictor model_predictor(DiffusionModel& m, const DepthMap& c) {
  const int w = c.width, h = c.height;
  auto cm = encode_prior(c);
  return [&m, cm = std::move(cm), w, h](const std::vector<float>& x, int k) {
    tensor::NoGradGuard ng;
    std::vector<float> joined(2 * x.size());
    std::copy(x.begin(), x.end(), joined.begin());
    std::copy(cm.begin(), cm.end(), joined.begin() + static_cast<std::ptrdiff_t>(x.size()));
    auto in = tensor::Tensor<float>::from({1, 2, h, w}, std::move(joined));
    auto out = m.net.forward(m.params, in, {k});
    return out.data();
  };
}

DepthMap sample_ddpm(DiffusionModel& m, const DepthMap& c, std::uint64_t seed) {
  const auto n = c.values.size();
  auto x = sample_ddpm_field(m.schedule, n, model_predictor(m, c), seed);
  return decode_depth(x, c.width, c.height, m.cfg.z_far);
}

DepthMap sample_ddim(DiffusionModel& m, const DepthMap& c, int steps, double eta,
                     std::uint64_t seed) {
  const auto n = c.values.size();
  auto x = sample_ddim_field(m.schedule, n, model_predictor(m, c), steps, eta, seed);
  return decode_depth(x, c.width, c.height, m.cfg.z_far);
}

}  // namespace df::ddg
