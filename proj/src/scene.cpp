#include "df/scene/scene.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "df/error.hpp"
#include "df/rng.hpp"

namespace df::scene {

void CameraModel::validate() const {
  if (fx <= 0 || fy <= 0) throw ValidationError("camera focal lengths must be > 0");
  if (cx < 0 || cx >= width || cy < 0 || cy >= height)
    throw ValidationError("camera principal point outside the raster");
  if (std::abs(rotation.norm() - 1.0) > 1e-6)
    throw ValidationError("camera rotation quaternion not unit norm");
}

void SceneConfig::validate() const {
  if (width <= 0 || height <= 0) throw ValidationError("raster must be positive");
  if (z_near <= 0 || z_far <= z_near) throw ValidationError("need 0 < z_near < z_far");
  if (min_objects < 0 || max_objects < min_objects)
    throw ValidationError("bad object count range");
  if (min_size <= 0 || max_size < min_size) throw ValidationError("bad size range");
  if (min_reflectivity < 0 || max_reflectivity > 1 || max_reflectivity < min_reflectivity)
    throw ValidationError("reflectivity range must sit in [0,1]");
  if (workspace_x <= 0 || workspace_y <= 0) throw ValidationError("bad workspace extents");
  if (max_retries < 1) throw ValidationError("max_retries must be >= 1");
}

double Primitive::footprint_radius() const {
  switch (kind) {
    case PrimitiveKind::Sphere:
      return radius;
    case PrimitiveKind::Cylinder:
      return radius;
    case PrimitiveKind::Box:
      return std::sqrt(half.x * half.x + half.y * half.y);
    case PrimitiveKind::TablePlane:
      return 0.0;
  }
  return 0.0;
}

namespace {
// Stream label separating scene sampling from every other consumer of a seed.
constexpr std::uint64_t kSceneStream = 0x5363656E65ULL;
}  // namespace

Scene sample_scene(std::uint64_t seed, const SceneConfig& config) {
  config.validate();
  Prng rng(mix_seed(seed, kSceneStream));
  Scene scene;
  scene.seed = seed;

  Primitive table;
  table.kind = PrimitiveKind::TablePlane;
  scene.objects.push_back(table);

  const int count =
      static_cast<int>(rng.uniform_int(config.min_objects, config.max_objects));
  for (int i = 0; i < count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < config.max_retries && !placed; ++attempt) {
      Primitive p;
      switch (rng.uniform_int(0, 2)) {
        case 0: {
          p.kind = PrimitiveKind::Sphere;
          p.radius = rng.uniform(config.min_size, config.max_size);
          p.center.z = p.radius;
          break;
        }
        case 1: {
          p.kind = PrimitiveKind::Box;
          p.half = {rng.uniform(config.min_size, config.max_size),
                    rng.uniform(config.min_size, config.max_size),
                    rng.uniform(config.min_size, config.max_size)};
          p.yaw = rng.uniform(0.0, 2.0 * M_PI);
          p.center.z = p.half.z;
          break;
        }
        default: {
          p.kind = PrimitiveKind::Cylinder;
          p.radius = rng.uniform(config.min_size, config.max_size);
          p.height = rng.uniform(config.min_size, 2.0 * config.max_size);
          break;
        }
      }
      p.reflectivity = rng.uniform(config.min_reflectivity, config.max_reflectivity);

      const double fr = p.footprint_radius();
      const double lx = std::max(0.0, config.workspace_x / 2.0 - fr);
      const double ly = std::max(0.0, config.workspace_y / 2.0 - fr);
      p.center.x = rng.uniform(-lx, lx);
      p.center.y = rng.uniform(-ly, ly);

      bool overlap = false;
      for (std::size_t j = 1; j < scene.objects.size(); ++j) {
        const auto& q = scene.objects[j];
        const double dx = p.center.x - q.center.x;
        const double dy = p.center.y - q.center.y;
        const double min_dist = fr + q.footprint_radius() + 0.005;
        if (dx * dx + dy * dy < min_dist * min_dist) {
          overlap = true;
          break;
        }
      }
      if (!overlap) {
        scene.objects.push_back(p);
        placed = true;
      }
    }
    if (!placed)
      throw ValidationError("could not place object " + std::to_string(i) + " after " +
                            std::to_string(config.max_retries) + " retries");
  }

  CameraModel cam;
  cam.width = config.width;
  cam.height = config.height;
  cam.fx = config.fx;
  cam.fy = config.fy;
  cam.cx = config.width / 2.0;
  cam.cy = config.height / 2.0;
  const double phi = rng.uniform(0.0, 2.0 * M_PI);
  const double off = rng.uniform(config.cam_offset_min, config.cam_offset_max);
  cam.position = {off * std::cos(phi), off * std::sin(phi),
                  rng.uniform(config.cam_height_min, config.cam_height_max)};
  const Vec3 target{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), 0.0};
  cam.rotation = look_at_rotation(cam.position, target, {0.0, 0.0, 1.0});
  cam.validate();
  scene.camera = cam;
  return scene;
}

namespace {

constexpr double kNoHit = std::numeric_limits<double>::infinity();

// Rays are parameterized so that t equals camera-frame z: the direction has
// unit forward component before rotation, so the smallest positive t is
// already the z-depth.
struct Ray {
  Vec3 origin;
  Vec3 dir;
};

double hit_plane(const Ray& r) {
  if (std::abs(r.dir.z) < 1e-12) return kNoHit;
  const double t = -r.origin.z / r.dir.z;
  return t > 0 ? t : kNoHit;
}

double hit_sphere(const Ray& r, const Primitive& p) {
  const Vec3 oc = r.origin - p.center;
  const double a = r.dir.dot(r.dir);
  const double b = 2.0 * oc.dot(r.dir);
  const double c = oc.dot(oc) - p.radius * p.radius;
  const double disc = b * b - 4 * a * c;
  if (disc < 0) return kNoHit;
  const double sq = std::sqrt(disc);
  const double t0 = (-b - sq) / (2 * a);
  if (t0 > 0) return t0;
  const double t1 = (-b + sq) / (2 * a);
  return t1 > 0 ? t1 : kNoHit;
}

double hit_cylinder(const Ray& r, const Primitive& p) {
  double best = kNoHit;
  // lateral surface
  const double ox = r.origin.x - p.center.x, oy = r.origin.y - p.center.y;
  const double a = r.dir.x * r.dir.x + r.dir.y * r.dir.y;
  if (a > 1e-14) {
    const double b = 2.0 * (ox * r.dir.x + oy * r.dir.y);
    const double c = ox * ox + oy * oy - p.radius * p.radius;
    const double disc = b * b - 4 * a * c;
    if (disc >= 0) {
      const double sq = std::sqrt(disc);
      for (const double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
        if (t <= 0 || t >= best) continue;
        const double z = r.origin.z + t * r.dir.z;
        if (z >= 0 && z <= p.height) best = t;
      }
    }
  }
  // caps
  if (std::abs(r.dir.z) > 1e-12) {
    for (const double zc : {0.0, p.height}) {
      const double t = (zc - r.origin.z) / r.dir.z;
      if (t <= 0 || t >= best) continue;
      const double x = r.origin.x + t * r.dir.x - p.center.x;
      const double y = r.origin.y + t * r.dir.y - p.center.y;
      if (x * x + y * y <= p.radius * p.radius) best = t;
    }
  }
  return best;
}

double hit_box(const Ray& r, const Primitive& p) {
  // slab test in the box frame (yaw about z around the box center)
  const double cs = std::cos(-p.yaw), sn = std::sin(-p.yaw);
  const Vec3 o0 = r.origin - p.center;
  const Vec3 o{cs * o0.x - sn * o0.y, sn * o0.x + cs * o0.y, o0.z};
  const Vec3 d{cs * r.dir.x - sn * r.dir.y, sn * r.dir.x + cs * r.dir.y, r.dir.z};
  double tmin = 0.0, tmax = kNoHit;
  const double od[3] = {o.x, o.y, o.z};
  const double dd[3] = {d.x, d.y, d.z};
  const double hh[3] = {p.half.x, p.half.y, p.half.z};
  for (int axis = 0; axis < 3; ++axis) {
    if (std::abs(dd[axis]) < 1e-14) {
      if (std::abs(od[axis]) > hh[axis]) return kNoHit;
      continue;
    }
    double t0 = (-hh[axis] - od[axis]) / dd[axis];
    double t1 = (hh[axis] - od[axis]) / dd[axis];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return kNoHit;
  }
  return tmin > 0 ? tmin : kNoHit;
}

double hit_primitive(const Ray& r, const Primitive& p) {
  switch (p.kind) {
    case PrimitiveKind::TablePlane:
      return hit_plane(r);
    case PrimitiveKind::Sphere:
      return hit_sphere(r, p);
    case PrimitiveKind::Cylinder:
      return hit_cylinder(r, p);
    case PrimitiveKind::Box:
      return hit_box(r, p);
  }
  return kNoHit;
}

}  // namespace

RenderResult render_depth_ids(const Scene& scene, double z_near, double z_far) {
  const auto& cam = scene.camera;
  cam.validate();
  int planes = 0;
  for (const auto& p : scene.objects)
    if (p.kind == PrimitiveKind::TablePlane) ++planes;
  if (planes != 1) throw ValidationError("scene must contain exactly one table plane");

  RenderResult res;
  res.depth = DepthMap(cam.width, cam.height);
  res.object_id.assign(static_cast<std::size_t>(cam.width) * cam.height, -1);
  // keep strictly inside the open range
  const double lo = z_near * (1.0 + 1e-6);
  const double hi = z_far * (1.0 - 1e-6);

  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      const Vec3 dir_cam{(x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy, 1.0};
      Ray ray{cam.position, cam.rotation.rotate(dir_cam)};
      double best = kNoHit;
      int best_id = -1;
      for (std::size_t i = 0; i < scene.objects.size(); ++i) {
        const double t = hit_primitive(ray, scene.objects[i]);
        if (t < best) {
          best = t;
          best_id = static_cast<int>(i);
        }
      }
      const std::size_t px = static_cast<std::size_t>(y) * cam.width + x;
      if (best == kNoHit) best = hi;  // sky rays (table seen edge-on) read far
      res.depth.values[px] = static_cast<float>(std::clamp(best, lo, hi));
      res.object_id[px] = best_id;
    }
  return res;
}

DepthMap render_depth(const Scene& scene, double z_near, double z_far) {
  return render_depth_ids(scene, z_near, z_far).depth;
}

}  // namespace df::scene
