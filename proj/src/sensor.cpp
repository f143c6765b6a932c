#include "df/sensor/sensor.hpp"

#include <algorithm>
#include <cmath>

#include "df/error.hpp"
#include "df/rng.hpp"

namespace df::sensor {

void SensorModel::validate() const {
  if (f <= 0 || b <= 0 || delta <= 0) throw ValidationError("sensor f, b, delta must be > 0");
  if (sigma_d < 0) throw ValidationError("sigma_d must be >= 0");
  for (double p : {p_edge, p_rand})
    if (p < 0 || p > 1) throw ValidationError("sensor probabilities must sit in [0,1]");
  if (rho_th < 0 || rho_th > 1) throw ValidationError("rho_th must sit in [0,1]");
  if (blob_count_min < 0 || blob_count_max < blob_count_min)
    throw ValidationError("bad blob count range");
  if (blob_radius_min <= 0 || blob_radius_max < blob_radius_min)
    throw ValidationError("bad blob radius range");
  if (z_near <= 0 || z_far <= z_near) throw ValidationError("need 0 < z_near < z_far");
}

std::vector<double> sobel_magnitude(const DepthMap& map) {
  const int W = map.width, H = map.height;
  std::vector<double> out(static_cast<std::size_t>(W) * H);
  auto at = [&](int x, int y) {
    x = std::clamp(x, 0, W - 1);
    y = std::clamp(y, 0, H - 1);
    return static_cast<double>(map.values[static_cast<std::size_t>(y) * W + x]);
  };
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const double gx = (at(x + 1, y - 1) + 2 * at(x + 1, y) + at(x + 1, y + 1) -
                         at(x - 1, y - 1) - 2 * at(x - 1, y) - at(x - 1, y + 1)) /
                        8.0;
      const double gy = (at(x - 1, y + 1) + 2 * at(x, y + 1) + at(x + 1, y + 1) -
                         at(x - 1, y - 1) - 2 * at(x, y - 1) - at(x + 1, y - 1)) /
                        8.0;
      out[static_cast<std::size_t>(y) * W + x] = std::sqrt(gx * gx + gy * gy);
    }
  return out;
}

double max_axial_deviation(const SensorModel& s) {
  return s.z_far * s.z_far / (s.f * s.b) * (6.0 * s.sigma_d + s.delta / 2.0);
}

DepthMap corrupt(const DepthMap& clean, const scene::Scene& scn, const SensorModel& sensor,
                 std::uint64_t seed) {
  sensor.validate();
  if (clean.hole_count() != 0) throw ValidationError("corrupt() input must be hole-free");
  const int W = clean.width, H = clean.height;
  DepthMap out = clean;
  const double fb = sensor.f * sensor.b;

  // axial noise + disparity quantization
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * W + x;
      const double z = clean.values[i];
      const double sigma_z = sensor.sigma_d * z * z / fb;
      double eps = counter_normal(seed, kStageAxial, i) * sigma_z;
      eps = std::clamp(eps, -6.0 * sigma_z, 6.0 * sigma_z);
      const double zp = z + eps;
      // out of working range before or after quantization reads as a hole;
      // this also keeps the per-pixel deviation bound strict
      double zq = 0.0;
      if (zp > sensor.z_near && zp < sensor.z_far) {
        const double q = std::round((fb / zp) / sensor.delta) * sensor.delta;
        if (q > 0) zq = fb / q;
      }
      out.values[i] =
          (zq > sensor.z_near && zq < sensor.z_far) ? static_cast<float>(zq) : 0.0f;
    }

  // edge dropout against the clean map's gradient
  const auto grad = sobel_magnitude(clean);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (grad[i] > sensor.g_th && counter_uniform(seed, kStageEdge, i) < sensor.p_edge)
      out.values[i] = 0.0f;

  // material blob holes on low-reflectivity objects
  const auto ids = scene::render_depth_ids(scn, sensor.z_near, sensor.z_far).object_id;
  for (std::size_t obj = 0; obj < scn.objects.size(); ++obj) {
    const auto& p = scn.objects[obj];
    if (p.kind == scene::PrimitiveKind::TablePlane) continue;
    if (p.reflectivity >= sensor.rho_th) continue;
    std::vector<std::size_t> footprint;
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == static_cast<int>(obj)) footprint.push_back(i);
    if (footprint.empty()) continue;
    Prng rng(mix_seed(seed, kStageMaterial, obj));
    const int blobs =
        static_cast<int>(rng.uniform_int(sensor.blob_count_min, sensor.blob_count_max));
    for (int bi = 0; bi < blobs; ++bi) {
      const std::size_t c = footprint[static_cast<std::size_t>(
          rng.uniform_int(0, static_cast<std::int64_t>(footprint.size()) - 1))];
      const double cx = static_cast<double>(c % W), cy = static_cast<double>(c / W);
      const double ra = rng.uniform(sensor.blob_radius_min, sensor.blob_radius_max);
      const double rb = rng.uniform(sensor.blob_radius_min, sensor.blob_radius_max);
      const double th = rng.uniform(0.0, M_PI);
      const double ct = std::cos(th), st = std::sin(th);
      const int reach = static_cast<int>(std::ceil(std::max(ra, rb)));
      for (int dy = -reach; dy <= reach; ++dy)
        for (int dx = -reach; dx <= reach; ++dx) {
          const int x = static_cast<int>(cx) + dx, y = static_cast<int>(cy) + dy;
          if (x < 0 || x >= W || y < 0 || y >= H) continue;
          const double u = ct * dx + st * dy, v = -st * dx + ct * dy;
          if (u * u / (ra * ra) + v * v / (rb * rb) > 1.0) continue;
          const std::size_t i = static_cast<std::size_t>(y) * W + x;
          if (ids[i] == static_cast<int>(obj)) out.values[i] = 0.0f;  // clip to footprint
        }
    }
  }

  // uniform dropout
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (counter_uniform(seed, kStageDropout, i) < sensor.p_rand) out.values[i] = 0.0f;

  return out;
}

DepthMap random_noise_baseline(const DepthMap& clean, const RandomNoiseConfig& config,
                               std::uint64_t seed) {
  DepthMap out = clean;
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (out.values[i] == 0.0f) continue;
    const double z =
        out.values[i] + config.sigma * counter_normal(seed, kStageBaselineNoise, i);
    out.values[i] =
        (z > config.z_near && z < config.z_far) ? static_cast<float>(z) : 0.0f;
  }
  for (std::size_t i = 0; i < out.values.size(); ++i)
    if (counter_uniform(seed, kStageBaselineDropout, i) < config.dropout)
      out.values[i] = 0.0f;
  return out;
}

}  // namespace df::sensor
