#pragma once

#include <string>
#include <vector>

#include "df/tensor/param_store.hpp"
#include "df/tensor/tensor.hpp"

namespace df::tensor {

// Checkpoint container: named float arrays with shapes. Layout on disk:
//   "DFCK"  u32 version  u32 count
//   per entry: u16 name_len, name bytes (UTF-8), u8 ndim, u32 dims..., f32 data
// all little-endian.
struct NamedBlob {
  std::string name;
  Shape shape;
  std::vector<float> data;
};

void write_dfck(const std::string& path, const std::vector<NamedBlob>& blobs);
std::vector<NamedBlob> read_dfck(const std::string& path);

std::vector<NamedBlob> store_to_blobs(const ParamStore<float>& ps);

// Loads values into an already-built store; every name must exist with a
// matching shape and no extras may appear.
void blobs_to_store(const std::vector<NamedBlob>& blobs, ParamStore<float>& ps);

void save_params(const std::string& path, const ParamStore<float>& ps);
void load_params(const std::string& path, ParamStore<float>& ps);

// Adam moments travel as a second checkpoint with ".m"/".v" suffixed names.
void save_adam(const std::string& path, const ParamStore<float>& ps,
               const AdamState<float>& st);
void load_adam(const std::string& path, const ParamStore<float>& ps, AdamState<float>& st);

}  // namespace df::tensor
