#include "df/ddg/graft.hpp"

#include <algorithm>

#include "df/ddg/sampler.hpp"
#include "df/error.hpp"

namespace df::ddg {

void GraftConfig::validate() const {
  if (!(noise_threshold >= 0.0f && noise_threshold <= 1.0f))
    throw ValidationError("noise_threshold must lie in [0,1] (z/z_far units)");
  if (dilation < 0) throw ValidationError("dilation radius must be >= 0");
}

std::vector<std::uint8_t> make_mask(const std::vector<float>& values, int width, int height,
                                    const GraftConfig& cfg) {
  cfg.validate();
  if (values.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height))
    throw ValidationError("make_mask: size mismatch");
  std::vector<std::uint8_t> m(values.size());
  for (std::size_t i = 0; i < values.size(); ++i)
    m[i] = values[i] <= cfg.noise_threshold ? 1 : 0;
  if (cfg.dilation == 0) return m;
  const int r = cfg.dilation;
  std::vector<std::uint8_t> out(m.size(), 0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      std::uint8_t v = 0;
      for (int dy = -r; dy <= r && !v; ++dy) {
        const int yy = y + dy;
        if (yy < 0 || yy >= height) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const int xx = x + dx;
          if (xx < 0 || xx >= width) continue;
          if (m[static_cast<std::size_t>(yy) * width + xx]) {
            v = 1;
            break;
          }
        }
      }
      out[static_cast<std::size_t>(y) * width + x] = v;
    }
  return out;
}

DepthMap graft(const DepthMap& d_sim, const DepthMap& d_pred,
               const std::vector<std::uint8_t>& mask) {
  if (d_sim.width != d_pred.width || d_sim.height != d_pred.height ||
      mask.size() != d_sim.values.size())
    throw ValidationError("graft: raster sizes disagree");
  for (auto v : mask)
    if (v > 1) throw ValidationError("graft: mask must be binary");
  DepthMap out;
  out.width = d_sim.width;
  out.height = d_sim.height;
  out.values.resize(d_sim.values.size());
  for (std::size_t i = 0; i < out.values.size(); ++i)
    out.values[i] = mask[i] ? d_pred.values[i] : d_sim.values[i];
  return out;
}

GeneratedFrame generate_noisy_depth(DiffusionModel& m, const DepthMap& d_sim,
                                    const GenerateConfig& cfg, std::uint64_t seed) {
  cfg.graft.validate();
  GeneratedFrame g;
  g.prior = prior::make_prior(d_sim, cfg.prior);
  g.predicted = cfg.use_ddpm ? sample_ddpm(m, g.prior, seed)
                             : sample_ddim(m, g.prior, cfg.ddim_steps, cfg.eta, seed);
  std::vector<float> norm(g.predicted.values.size());
  for (std::size_t i = 0; i < norm.size(); ++i) norm[i] = g.predicted.values[i] / m.cfg.z_far;
  g.mask = make_mask(norm, d_sim.width, d_sim.height, cfg.graft);
  g.final = graft(d_sim, g.predicted, g.mask);
  return g;
}

}  // namespace df::ddg
