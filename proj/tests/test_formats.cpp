#include <doctest.h>

#include <cstring>

#include "df/bytes.hpp"
#include "df/depthmap.hpp"
#include "df/rng.hpp"

using df::DepthMap;

TEST_SUITE("formats") {

TEST_CASE("dmap byte layout is pinned") {
  DepthMap m(2, 2);
  m.values = {0.5f, 1.5f, 0.0f, 3.0f};
  const std::string path = "/tmp/df_test_layout.dmap";
  df::write_dmap(path, m);
  const std::string raw = df::bytes::read_file(path);
  REQUIRE(raw.size() == 20 + 16);
  CHECK(raw.substr(0, 4) == "DMAP");
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  CHECK(df::bytes::get_u32(p + 4) == 1);  // version
  CHECK(df::bytes::get_u32(p + 8) == 2);  // width
  CHECK(df::bytes::get_u32(p + 12) == 2); // height
  CHECK(df::bytes::get_f32(p + 16) == 1.0f);  // reserved scale
  CHECK(df::bytes::get_f32(p + 20) == 0.5f);
  CHECK(df::bytes::get_f32(p + 24) == 1.5f);
  CHECK(df::bytes::get_f32(p + 28) == 0.0f);
  CHECK(df::bytes::get_f32(p + 32) == 3.0f);
}

TEST_CASE("dmap round trip is bit exact") {
  df::Prng rng(41);
  DepthMap m(7, 5);
  for (auto& v : m.values) v = static_cast<float>(rng.uniform(0.0, 3.0));
  m.values[3] = 0.0f;
  const std::string path = "/tmp/df_test_rt.dmap";
  df::write_dmap(path, m);
  DepthMap r = df::read_dmap(path);
  CHECK(r.width == 7);
  CHECK(r.height == 5);
  CHECK(std::memcmp(r.values.data(), m.values.data(), m.values.size() * 4) == 0);
}

TEST_CASE("corrupt dmap headers are rejected") {
  const std::string path = "/tmp/df_test_bad.dmap";
  df::bytes::write_file(path, "PAMD broken");
  CHECK_THROWS_AS(df::read_dmap(path), df::ValidationError);

  DepthMap m(3, 3);
  df::write_dmap(path, m);
  std::string raw = df::bytes::read_file(path);
  raw.resize(raw.size() - 4);
  df::bytes::write_file(path, raw);
  CHECK_THROWS_AS(df::read_dmap(path), df::ValidationError);
}

TEST_CASE("hole accounting treats exact zero as hole") {
  DepthMap m(2, 2);
  m.values = {0.0f, 1e-9f, 2.0f, 0.0f};
  CHECK(m.hole_count() == 2);
  CHECK(m.hole_fraction() == doctest::Approx(0.5));
  float lo = 0, hi = 0;
  CHECK(m.finite_range(&lo, &hi));
  CHECK(lo == 1e-9f);
  CHECK(hi == 2.0f);
}

TEST_CASE("pgm16 header and big endian samples") {
  DepthMap m(2, 1);
  m.values = {0.001f, 3.0f};
  const std::string path = "/tmp/df_test.pgm";
  df::write_pgm16(path, m, 3.0 / 65535.0);
  const std::string raw = df::bytes::read_file(path);
  const std::string header = "P5\n2 1\n65535\n";
  REQUIRE(raw.substr(0, header.size()) == header);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data() + header.size());
  const unsigned v0 = (static_cast<unsigned>(p[0]) << 8) | p[1];
  const unsigned v1 = (static_cast<unsigned>(p[2]) << 8) | p[3];
  CHECK(v0 == 22);     // round(0.001 * 65535 / 3)
  CHECK(v1 == 65535);  // full scale
}

TEST_CASE("triptych width includes separators") {
  DepthMap a(4, 3), b(4, 3), c(4, 3);
  const std::string path = "/tmp/df_test_tri.pgm";
  df::write_pgm16_triptych(path, a, b, c, 0.001);
  const std::string raw = df::bytes::read_file(path);
  CHECK(raw.substr(0, 11) == "P5\n16 3\n655");
}

}  // TEST_SUITE
