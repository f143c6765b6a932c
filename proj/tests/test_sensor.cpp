#include <doctest.h>

#include <cmath>
#include <cstring>

#include "df/error.hpp"
#include "df/rng.hpp"
#include "df/scene/scene.hpp"
#include "df/sensor/sensor.hpp"

using df::DepthMap;
using namespace df::sensor;

namespace {

df::scene::Scene test_scene(std::uint64_t seed = 42) {
  df::scene::SceneConfig cfg;
  return df::scene::sample_scene(seed, cfg);
}

SensorModel all_off() {
  SensorModel s;
  s.sigma_d = 0.0;
  s.delta = 1e-9;
  s.p_edge = 0.0;
  s.p_rand = 0.0;
  s.rho_th = 0.0;
  return s;
}

}  // namespace

TEST_SUITE("sensor") {

TEST_CASE("disabled corruptions reproduce the input almost exactly") {
  auto scn = test_scene();
  auto clean = df::scene::render_depth(scn);
  auto out = corrupt(clean, scn, all_off(), 7);
  CHECK(out.hole_count() == 0);
  for (std::size_t i = 0; i < out.values.size(); ++i)
    CHECK(out.values[i] == doctest::Approx(clean.values[i]).epsilon(1e-6));
}

TEST_CASE("corrupt is deterministic in the seed") {
  auto scn = test_scene();
  auto clean = df::scene::render_depth(scn);
  SensorModel s;
  auto a = corrupt(clean, scn, s, 31);
  auto b = corrupt(clean, scn, s, 31);
  CHECK(std::memcmp(a.values.data(), b.values.data(), 4 * a.values.size()) == 0);
  auto c = corrupt(clean, scn, s, 32);
  CHECK(std::memcmp(a.values.data(), c.values.data(), 4 * a.values.size()) != 0);
}

TEST_CASE("input with holes is rejected") {
  auto scn = test_scene();
  auto clean = df::scene::render_depth(scn);
  clean.values[5] = 0.0f;
  CHECK_THROWS_AS(corrupt(clean, scn, SensorModel{}, 1), df::ValidationError);
}

TEST_CASE("disparity quantization matches the closed form") {
  // flat plane seen straight down: f*b = 50 m*px via f = 500, b = 0.1
  df::scene::Scene scn;
  scn.objects.push_back({});
  scn.camera.position = {0.0, 0.0, 1.0};
  scn.camera.rotation = df::look_at_rotation(scn.camera.position, {0, 0, 0}, {0, 1, 0});
  SensorModel s = all_off();
  s.f = 500.0;
  s.b = 0.1;
  s.delta = 1.0;

  auto clean = df::scene::render_depth(scn);
  auto out = corrupt(clean, scn, s, 1);
  for (float v : out.values) CHECK(v == doctest::Approx(50.0 / 50.0).epsilon(1e-9));

  scn.camera.position.z = 0.99;
  clean = df::scene::render_depth(scn);
  out = corrupt(clean, scn, s, 1);
  for (float v : out.values) CHECK(v == doctest::Approx(50.0 / 51.0).epsilon(1e-9));
}

TEST_CASE("certain edge dropout removes exactly the high-gradient set") {
  auto scn = test_scene(9);
  auto clean = df::scene::render_depth(scn);
  SensorModel s = all_off();
  s.p_edge = 1.0;
  auto out = corrupt(clean, scn, s, 5);
  auto grad = sobel_magnitude(clean);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    if (grad[i] > s.g_th)
      CHECK(out.values[i] == 0.0f);
    else
      CHECK(out.values[i] != 0.0f);
  }
}

TEST_CASE("non-hole pixels stay within the analytic deviation bound") {
  SensorModel s;
  const double bound = max_axial_deviation(s);
  CHECK(bound == doctest::Approx(3.0 * 3.0 / (55.0 * 0.095) * (6 * 0.08 + 0.125)));
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto scn = test_scene(seed);
    auto clean = df::scene::render_depth(scn);
    auto out = corrupt(clean, scn, s, seed + 100);
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      if (out.values[i] == 0.0f) continue;
      CHECK(std::abs(out.values[i] - clean.values[i]) < bound);
    }
  }
}

TEST_CASE("hole fraction grows with each knob") {
  auto scn = test_scene(3);
  auto clean = df::scene::render_depth(scn);
  SensorModel s;

  auto frac = [&](const SensorModel& m) { return corrupt(clean, scn, m, 77).hole_fraction(); };

  SensorModel lo = s, hi = s;
  lo.p_edge = 0.3;
  hi.p_edge = 0.9;
  CHECK(frac(lo) <= frac(hi));

  lo = s;
  hi = s;
  lo.p_rand = 0.001;
  hi.p_rand = 0.05;
  CHECK(frac(lo) <= frac(hi));

  lo = s;
  hi = s;
  lo.rho_th = 0.0;  // no object qualifies
  hi.rho_th = 1.0;  // every object grows blobs
  CHECK(frac(lo) <= frac(hi));
}

TEST_CASE("material blobs only eat low-reflectivity footprints") {
  df::scene::SceneConfig cfg;
  cfg.min_objects = 2;
  cfg.max_objects = 2;
  cfg.min_reflectivity = 0.5;  // nobody qualifies at default rho_th
  auto scn = df::scene::sample_scene(11, cfg);
  auto clean = df::scene::render_depth(scn);

  SensorModel s = all_off();
  s.rho_th = 0.3;
  auto none = corrupt(clean, scn, s, 13);
  CHECK(none.hole_count() == 0);

  // force both objects below the threshold; blobs must land on their pixels
  auto scn2 = scn;
  scn2.objects[1].reflectivity = 0.1;
  scn2.objects[2].reflectivity = 0.1;
  auto holes = corrupt(clean, scn2, s, 13);
  CHECK(holes.hole_count() > 0);
  auto ids = df::scene::render_depth_ids(scn2, s.z_near, s.z_far).object_id;
  for (std::size_t i = 0; i < holes.values.size(); ++i)
    if (holes.values[i] == 0.0f) CHECK(ids[i] >= 1);
}

TEST_CASE("baseline noise identity when disabled and seeded dropout in band") {
  auto scn = test_scene(21);
  auto clean = df::scene::render_depth(scn);

  RandomNoiseConfig off;
  off.sigma = 0.0;
  off.dropout = 0.0;
  auto same = random_noise_baseline(clean, off, 3);
  CHECK(std::memcmp(same.values.data(), clean.values.data(), 4 * clean.values.size()) == 0);

  RandomNoiseConfig cfg;
  double frac = 0.0;
  const int trials = 20;
  for (std::uint64_t t = 0; t < trials; ++t)
    frac += random_noise_baseline(clean, cfg, t).hole_fraction();
  frac /= trials;
  CHECK(frac > 0.03);
  CHECK(frac < 0.07);

  auto a = random_noise_baseline(clean, cfg, 5);
  auto b = random_noise_baseline(clean, cfg, 5);
  CHECK(std::memcmp(a.values.data(), b.values.data(), 4 * a.values.size()) == 0);
}

}  // TEST_SUITE
