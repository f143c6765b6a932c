#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace df::pipeline {

// One frame's files, as paths relative to the manifest's own directory.
// grafted/predicted stay empty until the generation pass fills them in.
struct FrameRecord {
  long id = 0;
  std::uint64_t scene_seed = 0;
  std::string clean;
  std::string sensor;
  std::string prior;
  std::string grafted;
  std::string predicted;
};

struct DatasetManifest {
  int version = 1;
  int width = 0;
  int height = 0;
  std::string generator;
  std::vector<FrameRecord> frames;
};

std::string frame_name(long id);  // zero-padded "000042.dmap"

void write_manifest(const DatasetManifest& m, const std::string& path);
DatasetManifest read_manifest(const std::string& path);

// Checks ids are unique and every referenced file opens, parses, and matches
// the declared raster. Fails fast naming the offending frame. base_dir is
// the directory the relative paths resolve against.
void validate_manifest(const DatasetManifest& m, const std::string& base_dir);

// read_manifest + validate_manifest against the manifest's directory.
DatasetManifest load_manifest(const std::string& path);

std::string manifest_dir(const std::string& manifest_path);

}  // namespace df::pipeline
