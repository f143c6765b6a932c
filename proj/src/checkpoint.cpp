#include "df/tensor/checkpoint.hpp"

#include <cstring>

#include "df/bytes.hpp"
#include "df/error.hpp"

namespace df::tensor {

namespace {
constexpr std::uint32_t kDfckVersion = 1;
}

void write_dfck(const std::string& path, const std::vector<NamedBlob>& blobs) {
  std::string out;
  out += "DFCK";
  bytes::put_u32(out, kDfckVersion);
  bytes::put_u32(out, static_cast<std::uint32_t>(blobs.size()));
  for (const auto& b : blobs) {
    if (b.name.size() > 0xFFFF) throw ValidationError("checkpoint name too long: " + b.name);
    if (b.shape.size() > 0xFF) throw ValidationError("checkpoint rank too large: " + b.name);
    if (shape_numel(b.shape) != b.data.size())
      throw ValidationError("checkpoint shape/data mismatch: " + b.name);
    bytes::put_u16(out, static_cast<std::uint16_t>(b.name.size()));
    out += b.name;
    out.push_back(static_cast<char>(b.shape.size()));
    for (int d : b.shape) bytes::put_u32(out, static_cast<std::uint32_t>(d));
    for (float v : b.data) bytes::put_f32(out, v);
  }
  bytes::write_file(path, out);
}

std::vector<NamedBlob> read_dfck(const std::string& path) {
  const std::string raw = bytes::read_file(path);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  const std::size_t n = raw.size();
  if (n < 12 || std::memcmp(raw.data(), "DFCK", 4) != 0)
    throw ValidationError("not a DFCK checkpoint: " + path);
  if (bytes::get_u32(p + 4) != kDfckVersion)
    throw ValidationError("unsupported DFCK version in " + path);
  const std::uint32_t count = bytes::get_u32(p + 8);
  std::size_t off = 12;
  auto need = [&](std::size_t k) {
    if (off + k > n) throw ValidationError("truncated DFCK checkpoint: " + path);
  };
  std::vector<NamedBlob> blobs;
  blobs.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    need(2);
    const std::uint16_t name_len = bytes::get_u16(p + off);
    off += 2;
    need(name_len);
    NamedBlob b;
    b.name.assign(raw.data() + off, name_len);
    off += name_len;
    need(1);
    const unsigned ndim = p[off++];
    need(4 * ndim);
    std::size_t numel = 1;
    for (unsigned d = 0; d < ndim; ++d) {
      const std::uint32_t dim = bytes::get_u32(p + off);
      off += 4;
      b.shape.push_back(static_cast<int>(dim));
      numel *= dim;
    }
    need(4 * numel);
    b.data.resize(numel);
    for (std::size_t j = 0; j < numel; ++j) b.data[j] = bytes::get_f32(p + off + 4 * j);
    off += 4 * numel;
    blobs.push_back(std::move(b));
  }
  if (off != n) throw ValidationError("trailing bytes in DFCK checkpoint: " + path);
  return blobs;
}

std::vector<NamedBlob> store_to_blobs(const ParamStore<float>& ps) {
  std::vector<NamedBlob> blobs;
  blobs.reserve(ps.count());
  for (std::size_t i = 0; i < ps.count(); ++i)
    blobs.push_back({ps.name(i), ps.at(i).shape(), ps.at(i).data()});
  return blobs;
}

void blobs_to_store(const std::vector<NamedBlob>& blobs, ParamStore<float>& ps) {
  if (blobs.size() != ps.count())
    throw ValidationError("checkpoint parameter count mismatch");
  for (const auto& b : blobs) {
    auto& t = ps.get(b.name);
    if (t.shape() != b.shape)
      throw ValidationError("checkpoint shape mismatch for " + b.name + ": " +
                            shape_str(b.shape) + " vs " + shape_str(t.shape()));
    t.data() = b.data;
  }
}

void save_params(const std::string& path, const ParamStore<float>& ps) {
  write_dfck(path, store_to_blobs(ps));
}

void load_params(const std::string& path, ParamStore<float>& ps) {
  blobs_to_store(read_dfck(path), ps);
}

void save_adam(const std::string& path, const ParamStore<float>& ps,
               const AdamState<float>& st) {
  if (st.m.size() != ps.count()) throw ValidationError("optimizer state not initialized");
  std::vector<NamedBlob> blobs;
  blobs.reserve(2 * ps.count());
  for (std::size_t i = 0; i < ps.count(); ++i) {
    blobs.push_back({ps.name(i) + ".m", ps.at(i).shape(), st.m[i]});
    blobs.push_back({ps.name(i) + ".v", ps.at(i).shape(), st.v[i]});
  }
  write_dfck(path, blobs);
}

void load_adam(const std::string& path, const ParamStore<float>& ps, AdamState<float>& st) {
  const auto blobs = read_dfck(path);
  if (blobs.size() != 2 * ps.count())
    throw ValidationError("optimizer checkpoint count mismatch");
  st.m.assign(ps.count(), {});
  st.v.assign(ps.count(), {});
  for (std::size_t i = 0; i < ps.count(); ++i) {
    const auto& bm = blobs[2 * i];
    const auto& bv = blobs[2 * i + 1];
    if (bm.name != ps.name(i) + ".m" || bv.name != ps.name(i) + ".v")
      throw ValidationError("optimizer checkpoint order mismatch at " + bm.name);
    if (bm.shape != ps.at(i).shape() || bv.shape != ps.at(i).shape())
      throw ValidationError("optimizer checkpoint shape mismatch at " + bm.name);
    st.m[i] = bm.data;
    st.v[i] = bv.data;
  }
}

}  // namespace df::tensor
