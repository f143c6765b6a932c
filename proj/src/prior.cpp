#include "df/prior/prior.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "df/error.hpp"

namespace df::prior {

void PriorConfig::validate() const {
  if (blur_radius < 0) throw ValidationError("blur radius must be >= 0");
}

namespace {

DepthMap gaussian_blur(const DepthMap& in, double sigma) {
  if (sigma <= 0) return in;
  const int reach = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> kernel(static_cast<std::size_t>(2 * reach + 1));
  double sum = 0;
  for (int i = -reach; i <= reach; ++i) {
    kernel[static_cast<std::size_t>(i + reach)] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += kernel[static_cast<std::size_t>(i + reach)];
  }
  for (auto& k : kernel) k /= sum;

  const int W = in.width, H = in.height;
  DepthMap tmp(W, H), out(W, H);
  auto clampx = [&](int x) { return std::clamp(x, 0, W - 1); };
  auto clampy = [&](int y) { return std::clamp(y, 0, H - 1); };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double v = 0;
      for (int i = -reach; i <= reach; ++i)
        v += kernel[static_cast<std::size_t>(i + reach)] *
             in.values[static_cast<std::size_t>(y) * W + clampx(x + i)];
      tmp.values[static_cast<std::size_t>(y) * W + x] = static_cast<float>(v);
    }
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      double v = 0;
      for (int i = -reach; i <= reach; ++i)
        v += kernel[static_cast<std::size_t>(i + reach)] *
             tmp.values[static_cast<std::size_t>(clampy(y + i)) * W + x];
      out.values[static_cast<std::size_t>(y) * W + x] = static_cast<float>(v);
    }
  return out;
}

void extrema(const DepthMap& m, double* lo, double* hi) {
  for (float v : m.values) {
    *lo = std::min(*lo, static_cast<double>(v));
    *hi = std::max(*hi, static_cast<double>(v));
  }
}

DepthMap normalize(const DepthMap& m, double lo, double hi, bool degenerate) {
  DepthMap out(m.width, m.height);
  if (degenerate) {
    std::fill(out.values.begin(), out.values.end(), 0.5f);
    return out;
  }
  const double inv = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < m.values.size(); ++i)
    out.values[i] = static_cast<float>((m.values[i] - lo) * inv);
  return out;
}

}  // namespace

DepthMap make_prior(const DepthMap& clean, const PriorConfig& config, bool* degenerate) {
  config.validate();
  if (clean.hole_count() != 0) throw ValidationError("prior input must be hole-free");
  const DepthMap blurred = gaussian_blur(clean, config.blur_radius);
  double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
  extrema(blurred, &lo, &hi);
  const bool degen = !(hi - lo > 1e-12);
  if (degenerate) *degenerate = degen;
  return normalize(blurred, lo, hi, degen);
}

std::vector<DepthMap> make_prior_trajectory(const std::vector<DepthMap>& frames,
                                            const PriorConfig& config, bool* degenerate) {
  config.validate();
  if (frames.empty()) throw ValidationError("empty trajectory");
  std::vector<DepthMap> blurred;
  blurred.reserve(frames.size());
  double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
  for (const auto& f : frames) {
    if (f.hole_count() != 0) throw ValidationError("prior input must be hole-free");
    blurred.push_back(gaussian_blur(f, config.blur_radius));
    extrema(blurred.back(), &lo, &hi);
  }
  const bool degen = !(hi - lo > 1e-12);
  if (degenerate) *degenerate = degen;
  std::vector<DepthMap> out;
  out.reserve(frames.size());
  for (const auto& f : blurred) out.push_back(normalize(f, lo, hi, degen));
  return out;
}

}  // namespace df::prior
