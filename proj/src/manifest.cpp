#include "df/pipeline/manifest.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "df/depthmap.hpp"
#include "df/error.hpp"
#include "json.hpp"

namespace df::pipeline {

using nlohmann::json;

std::string frame_name(long id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06ld.dmap", id);
  return buf;
}

void write_manifest(const DatasetManifest& m, const std::string& path) {
  json j;
  j["version"] = m.version;
  j["width"] = m.width;
  j["height"] = m.height;
  j["generator"] = m.generator;
  j["count"] = m.frames.size();
  auto& arr = j["frames"] = json::array();
  for (const auto& f : m.frames) {
    json r;
    r["id"] = f.id;
    r["scene_seed"] = f.scene_seed;
    r["clean"] = f.clean;
    r["sensor"] = f.sensor;
    r["prior"] = f.prior;
    if (!f.grafted.empty()) r["grafted"] = f.grafted;
    if (!f.predicted.empty()) r["predicted"] = f.predicted;
    arr.push_back(std::move(r));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw NumericError("cannot write " + path);
  out << j.dump(2) << '\n';
}

DatasetManifest read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("manifest: cannot open " + path);
  DatasetManifest m;
  try {
    json j = json::parse(in);
    m.version = j.at("version").get<int>();
    if (m.version != 1)
      throw ValidationError("manifest: unsupported version " + std::to_string(m.version));
    m.width = j.at("width").get<int>();
    m.height = j.at("height").get<int>();
    m.generator = j.value("generator", std::string{});
    const auto declared = j.value("count", std::size_t{0});
    for (const auto& r : j.at("frames")) {
      FrameRecord f;
      f.id = r.at("id").get<long>();
      f.scene_seed = r.at("scene_seed").get<std::uint64_t>();
      f.clean = r.at("clean").get<std::string>();
      f.sensor = r.at("sensor").get<std::string>();
      f.prior = r.at("prior").get<std::string>();
      f.grafted = r.value("grafted", std::string{});
      f.predicted = r.value("predicted", std::string{});
      m.frames.push_back(std::move(f));
    }
    if (declared != m.frames.size())
      throw ValidationError("manifest: count field disagrees with the frame list");
  } catch (const json::exception& e) {
    throw ValidationError("manifest: " + path + ": " + e.what());
  }
  return m;
}

namespace {

void check_file(const std::string& base, const std::string& rel, long id, int w, int h,
                const char* role) {
  const auto path = base + "/" + rel;
  DepthMap d;
  try {
    d = read_dmap(path);
  } catch (const std::exception& e) {
    throw ValidationError("manifest: frame " + std::to_string(id) + " " + role + ": " + e.what());
  }
  if (d.width != w || d.height != h)
    throw ValidationError("manifest: frame " + std::to_string(id) + " " + role +
                          ": raster mismatch");
}

}  // namespace

void validate_manifest(const DatasetManifest& m, const std::string& base_dir) {
  if (m.width < 1 || m.height < 1) throw ValidationError("manifest: bad raster size");
  if (m.frames.empty()) throw ValidationError("manifest: no frames");
  std::set<long> ids;
  for (const auto& f : m.frames)
    if (!ids.insert(f.id).second)
      throw ValidationError("manifest: duplicate frame id " + std::to_string(f.id));
  for (const auto& f : m.frames) {
    check_file(base_dir, f.clean, f.id, m.width, m.height, "clean");
    check_file(base_dir, f.sensor, f.id, m.width, m.height, "sensor");
    check_file(base_dir, f.prior, f.id, m.width, m.height, "prior");
    if (!f.grafted.empty()) check_file(base_dir, f.grafted, f.id, m.width, m.height, "grafted");
    if (!f.predicted.empty())
      check_file(base_dir, f.predicted, f.id, m.width, m.height, "predicted");
  }
}

std::string manifest_dir(const std::string& manifest_path) {
  const auto p = std::filesystem::path(manifest_path).parent_path();
  return p.empty() ? std::string(".") : p.string();
}

DatasetManifest load_manifest(const std::string& path) {
  auto m = read_manifest(path);
  validate_manifest(m, manifest_dir(path));
  return m;
}

}  // namespace df::pipeline
