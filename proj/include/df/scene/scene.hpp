#pragma once

#include <cstdint>
#include <vector>

#include "df/depthmap.hpp"
#include "df/geometry.hpp"

namespace df::scene {

struct CameraModel {
  double fx = 55.0, fy = 55.0;
  double cx = 32.0, cy = 24.0;
  int width = 64, height = 48;
  Quat rotation = Quat::identity();  // camera-to-world; +z forward, +x right, +y down
  Vec3 position;                     // meters, world frame (table plane is z = 0)

  void validate() const;
};

enum class PrimitiveKind { TablePlane, Sphere, Box, Cylinder };

// Tabletop solids with analytic ray intersections. Boxes yaw about the world
// z axis only; cylinders stand upright. World z is up, objects rest on z = 0.
struct Primitive {
  PrimitiveKind kind = PrimitiveKind::TablePlane;
  Vec3 center;        // sphere/box center; cylinder base center
  Vec3 half;          // box half extents
  double yaw = 0.0;   // box rotation about z
  double radius = 0.0;
  double height = 0.0;  // cylinder
  double reflectivity = 1.0;

  // Circumscribed footprint circle on the table, for placement rejection.
  double footprint_radius() const;
};

struct Scene {
  CameraModel camera;
  std::vector<Primitive> objects;  // objects[0] is always the table plane
  std::uint64_t seed = 0;
};

struct SceneConfig {
  int width = 64, height = 48;
  double fx = 55.0, fy = 55.0;
  double z_near = 0.2, z_far = 3.0;
  int min_objects = 3, max_objects = 6;
  double min_size = 0.02, max_size = 0.06;  // meters: radius / half extent
  double min_reflectivity = 0.05, max_reflectivity = 1.0;
  double workspace_x = 0.40, workspace_y = 0.30;  // centered on the origin
  double cam_height_min = 0.50, cam_height_max = 0.80;
  double cam_offset_min = 0.25, cam_offset_max = 0.45;  // lateral distance
  int max_retries = 200;

  void validate() const;
};

// Deterministic in (seed, config). Objects rest on the table with
// non-overlapping footprint circles, placed by bounded rejection sampling.
Scene sample_scene(std::uint64_t seed, const SceneConfig& config);

struct RenderResult {
  DepthMap depth;
  std::vector<int> object_id;  // index into scene.objects per pixel
};

// Pinhole raycast. Depth is distance along the optical axis (z-depth), not
// ray length, clamped just inside (z_near, z_far) so the clean render is
// hole-free by construction.
RenderResult render_depth_ids(const Scene& scene, double z_near, double z_far);
DepthMap render_depth(const Scene& scene, double z_near = 0.2, double z_far = 3.0);

}  // namespace df::scene
