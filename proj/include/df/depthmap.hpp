#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace df {

// Metric depth raster. Values are meters along the camera optical axis,
// row-major, with 0.0 as the hole sentinel (no valid measurement).
// Also used for relative priors, where values live in [0, 1].
struct DepthMap {
  int width = 0;
  int height = 0;
  std::vector<float> values;  // width * height, row-major

  DepthMap() = default;
  DepthMap(int w, int h, float fill = 0.0f)
      : width(w), height(h), values(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

  std::size_t size() const { return values.size(); }
  bool is_hole(std::size_t i) const { return values[i] == 0.0f; }

  std::size_t hole_count() const;
  double hole_fraction() const;

  // Min/max over non-hole pixels. Returns false if every pixel is a hole.
  bool finite_range(float* min_out, float* max_out) const;
};

// ".dmap" container: magic "DMAP", u32 version, u32 width, u32 height,
// f32 reserved scale (1.0), then width*height little-endian f32 values.
void write_dmap(const std::string& path, const DepthMap& map);
DepthMap read_dmap(const std::string& path);

// 16-bit binary PGM (P5, maxval 65535, big-endian samples per the format).
// Depth is quantized as round(value / meters_per_unit), clamped to u16.
void write_pgm16(const std::string& path, const DepthMap& map, double meters_per_unit);

// Three maps side by side in one PGM, shared quantization. A 2px white
// separator column is inserted between panels.
void write_pgm16_triptych(const std::string& path, const DepthMap& a, const DepthMap& b,
                          const DepthMap& c, double meters_per_unit);

}  // namespace df
