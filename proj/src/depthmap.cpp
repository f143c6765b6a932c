#include "df/depthmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <limits>

#include "df/bytes.hpp"
#include "df/error.hpp"

namespace df {

using bytes::get_f32;
using bytes::get_u32;
using bytes::put_f32;
using bytes::put_u32;
using bytes::read_file;
using bytes::write_file;

namespace {

constexpr std::uint32_t kDmapVersion = 1;

}  // namespace

std::size_t DepthMap::hole_count() const {
  std::size_t n = 0;
  for (float v : values)
    if (v == 0.0f) ++n;
  return n;
}

double DepthMap::hole_fraction() const {
  return values.empty() ? 0.0 : static_cast<double>(hole_count()) / static_cast<double>(values.size());
}

bool DepthMap::finite_range(float* min_out, float* max_out) const {
  float lo = std::numeric_limits<float>::max();
  float hi = std::numeric_limits<float>::lowest();
  bool any = false;
  for (float v : values) {
    if (v == 0.0f) continue;
    any = true;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (any) {
    if (min_out) *min_out = lo;
    if (max_out) *max_out = hi;
  }
  return any;
}

void write_dmap(const std::string& path, const DepthMap& map) {
  std::string out;
  out.reserve(20 + map.values.size() * 4);
  out += "DMAP";
  put_u32(out, kDmapVersion);
  put_u32(out, static_cast<std::uint32_t>(map.width));
  put_u32(out, static_cast<std::uint32_t>(map.height));
  put_f32(out, 1.0f);  // reserved scale
  for (float v : map.values) put_f32(out, v);
  write_file(path, out);
}

DepthMap read_dmap(const std::string& path) {
  std::string bytes = read_file(path);
  if (bytes.size() < 20 || std::memcmp(bytes.data(), "DMAP", 4) != 0)
    throw ValidationError("not a DMAP file: " + path);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  std::uint32_t version = get_u32(p + 4);
  if (version != kDmapVersion)
    throw ValidationError("unsupported DMAP version in " + path);
  std::uint32_t w = get_u32(p + 8);
  std::uint32_t h = get_u32(p + 12);
  std::size_t expect = 20 + static_cast<std::size_t>(w) * h * 4;
  if (bytes.size() != expect)
    throw ValidationError("truncated DMAP file: " + path);
  DepthMap map(static_cast<int>(w), static_cast<int>(h));
  for (std::size_t i = 0; i < map.values.size(); ++i)
    map.values[i] = get_f32(p + 20 + i * 4);
  return map;
}

namespace {

std::uint16_t quantize16(float v, double meters_per_unit) {
  double q = std::round(static_cast<double>(v) / meters_per_unit);
  if (q < 0.0) q = 0.0;
  if (q > 65535.0) q = 65535.0;
  return static_cast<std::uint16_t>(q);
}

void append_pgm16(std::string& out, int width, int height,
                  const std::function<std::uint16_t(int, int)>& sample) {
  char header[64];
  std::snprintf(header, sizeof(header), "P5\n%d %d\n65535\n", width, height);
  out += header;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      std::uint16_t v = sample(x, y);
      out.push_back(static_cast<char>((v >> 8) & 0xFF));  // MSB first
      out.push_back(static_cast<char>(v & 0xFF));
    }
  }
}

}  // namespace

void write_pgm16(const std::string& path, const DepthMap& map, double meters_per_unit) {
  if (meters_per_unit <= 0.0) throw ValidationError("meters_per_unit must be > 0");
  std::string out;
  append_pgm16(out, map.width, map.height, [&](int x, int y) {
    return quantize16(map.at(x, y), meters_per_unit);
  });
  write_file(path, out);
}

void write_pgm16_triptych(const std::string& path, const DepthMap& a, const DepthMap& b,
                          const DepthMap& c, double meters_per_unit) {
  if (a.width != b.width || a.width != c.width || a.height != b.height || a.height != c.height)
    throw ValidationError("triptych panels must share raster size");
  const int sep = 2;
  int w = a.width * 3 + sep * 2;
  std::string out;
  append_pgm16(out, w, a.height, [&](int x, int y) -> std::uint16_t {
    int panel_w = a.width;
    if (x < panel_w) return quantize16(a.at(x, y), meters_per_unit);
    if (x < panel_w + sep) return 65535;
    x -= panel_w + sep;
    if (x < panel_w) return quantize16(b.at(x, y), meters_per_unit);
    if (x < panel_w + sep) return 65535;
    x -= panel_w + sep;
    return quantize16(c.at(x, y), meters_per_unit);
  });
  write_file(path, out);
}

}  // namespace df
