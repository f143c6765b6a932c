#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "df/depthmap.hpp"
#include "df/error.hpp"
#include "df/metrics/metrics.hpp"
#include "df/rng.hpp"

using namespace df;
using namespace df::metrics;

namespace {

DepthMap synth_map(std::uint64_t seed, int w = 32, int h = 16) {
  DepthMap m(w, h);
  Prng rng(mix_seed(seed, 0x6D617073));
  const double fx = rng.uniform(0.1, 0.4), fy = rng.uniform(0.1, 0.4);
  const double base = rng.uniform(0.8, 2.2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (rng.uniform() < 0.08) {
        m.at(x, y) = 0.0f;  // hole
        continue;
      }
      m.at(x, y) = static_cast<float>(base + 0.4 * std::sin(fx * x) * std::cos(fy * y));
    }
  return m;
}

FeatureMatrix iid_features(std::uint64_t seed, int n, int d, double stddev,
                           std::string label = "") {
  FeatureMatrix f;
  f.n = n;
  f.d = d;
  f.label = std::move(label);
  f.data.resize(static_cast<std::size_t>(n) * d);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      f.data[static_cast<std::size_t>(i) * d + j] =
          static_cast<float>(stddev * counter_normal(seed, i, j));
  return f;
}

// Givens-rotate a stats pair in place; FID must not notice a change of basis
// applied to both distributions at once.
void rotate_stats(GaussianStats& g, int p, int q, double angle) {
  const int d = g.d;
  const double c = std::cos(angle), s = std::sin(angle);
  const double mp = g.mu[p], mq = g.mu[q];
  g.mu[p] = c * mp - s * mq;
  g.mu[q] = s * mp + c * mq;
  for (int k = 0; k < d; ++k) {
    double& a = g.sigma[static_cast<std::size_t>(p) * d + k];
    double& b = g.sigma[static_cast<std::size_t>(q) * d + k];
    const double ta = a, tb = b;
    a = c * ta - s * tb;
    b = s * ta + c * tb;
  }
  for (int k = 0; k < d; ++k) {
    double& a = g.sigma[static_cast<std::size_t>(k) * d + p];
    double& b = g.sigma[static_cast<std::size_t>(k) * d + q];
    const double ta = a, tb = b;
    a = c * ta - s * tb;
    b = s * ta + c * tb;
  }
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("feature extraction is a pure function of seed and input") {
  auto ex = make_extractor(42);
  std::vector<DepthMap> maps;
  for (int i = 0; i < 6; ++i) maps.push_back(synth_map(i));
  maps.push_back(synth_map(0));  // duplicate of the first

  auto f1 = extract_features(maps, ex, "a");
  auto f2 = extract_features(maps, ex, "a");
  CHECK(f1.n == 7);
  CHECK(f1.d == kFeatureDim);
  CHECK(f1.data == f2.data);

  // identical inputs get identical rows
  for (int j = 0; j < f1.d; ++j) CHECK(f1.row(0)[j] == f1.row(6)[j]);

  // permuting the inputs permutes the rows and nothing else
  std::vector<DepthMap> swapped = maps;
  std::swap(swapped[1], swapped[3]);
  auto fs = extract_features(swapped, ex, "a");
  for (int j = 0; j < f1.d; ++j) {
    CHECK(fs.row(1)[j] == f1.row(3)[j]);
    CHECK(fs.row(3)[j] == f1.row(1)[j]);
    CHECK(fs.row(0)[j] == f1.row(0)[j]);
  }

  // a different seed is a different extractor
  auto other = make_extractor(43);
  auto fo = extract_features(maps, other, "a");
  double diff = 0.0;
  for (std::size_t i = 0; i < f1.data.size(); ++i) diff += std::abs(f1.data[i] - fo.data[i]);
  CHECK(diff > 1e-3);

  CHECK_THROWS_AS(extract_features({}, ex), ValidationError);
  std::vector<DepthMap> ragged = {synth_map(0, 32, 16), synth_map(1, 16, 16)};
  CHECK_THROWS_AS(extract_features(ragged, ex), ValidationError);
}

TEST_CASE("sample moments use the unbiased divisor") {
  FeatureMatrix f;
  f.n = 2;
  f.d = 2;
  f.data = {0.0f, 0.0f, 2.0f, 0.0f};
  auto g = gaussian_stats(f);
  CHECK(g.mu[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(g.mu[1] == 0.0);
  CHECK(g.sigma[0] == doctest::Approx(2.0).epsilon(1e-12));  // divisor n-1 = 1
  CHECK(g.sigma[1] == 0.0);
  CHECK(g.sigma[2] == 0.0);
  CHECK(g.sigma[3] == 0.0);

  FeatureMatrix same;
  same.n = 5;
  same.d = 3;
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) same.data.push_back(0.5f * (j + 1));
  auto gs = gaussian_stats(same);
  for (int j = 0; j < 3; ++j) CHECK(gs.mu[j] == doctest::Approx(0.5 * (j + 1)).epsilon(1e-7));
  for (double v : gs.sigma) CHECK(std::abs(v) < 1e-12);

  auto gr = gaussian_stats(iid_features(7, 40, 8, 0.3));
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b)
      CHECK(std::abs(gr.sigma[a * 8 + b] - gr.sigma[b * 8 + a]) < 1e-12);

  FeatureMatrix tiny;
  tiny.n = 1;
  tiny.d = 2;
  tiny.data = {1.0f, 2.0f};
  CHECK_THROWS_AS(gaussian_stats(tiny), ValidationError);
}

TEST_CASE("distribution distance matches the 1-d closed form") {
  auto make1d = [](double mu, double var) {
    GaussianStats g;
    g.d = 1;
    g.mu = {mu};
    g.sigma = {var};
    return g;
  };
  CHECK(fid(make1d(0.0, 1.0), make1d(1.0, 1.0)) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(fid(make1d(0.5, 1.0), make1d(0.5, 4.0)) == doctest::Approx(1.0).epsilon(1e-9));

  // randomized 1-d inputs against (dmu^2 + dsigma^2)
  for (int t = 0; t < 50; ++t) {
    const double m1 = counter_uniform(11, t, 0) * 4.0 - 2.0;
    const double m2 = counter_uniform(11, t, 1) * 4.0 - 2.0;
    const double s1 = 0.1 + counter_uniform(11, t, 2) * 2.0;
    const double s2 = 0.1 + counter_uniform(11, t, 3) * 2.0;
    const double expect = (m1 - m2) * (m1 - m2) + (s1 - s2) * (s1 - s2);
    CHECK(fid(make1d(m1, s1 * s1), make1d(m2, s2 * s2)) == doctest::Approx(expect).epsilon(1e-6));
  }
}

TEST_CASE("distance is zero on itself, symmetric, and basis independent") {
  auto f = iid_features(3, 60, 16, 0.4);
  auto g = gaussian_stats(f);
  CHECK(std::abs(fid(g, g)) < 1e-8);

  auto h = gaussian_stats(iid_features(4, 60, 16, 0.6));
  const double ab = fid(g, h), ba = fid(h, g);
  CHECK(std::abs(ab - ba) < 1e-8);
  CHECK(ab > -1e-8);

  // diagonal pair with a closed form, then a change of basis applied to both
  const int d = 16;
  GaussianStats a, b;
  a.d = b.d = d;
  a.mu.resize(d);
  b.mu.resize(d);
  a.sigma.assign(d * d, 0.0);
  b.sigma.assign(d * d, 0.0);
  double expect = 0.0;
  for (int i = 0; i < d; ++i) {
    a.mu[i] = counter_uniform(21, i, 0);
    b.mu[i] = counter_uniform(21, i, 1);
    const double va = 0.2 + counter_uniform(21, i, 2);
    const double vb = 0.2 + counter_uniform(21, i, 3);
    a.sigma[i * d + i] = va;
    b.sigma[i * d + i] = vb;
    const double dm = a.mu[i] - b.mu[i];
    const double ds = std::sqrt(va) - std::sqrt(vb);
    expect += dm * dm + ds * ds;
  }
  CHECK(fid(a, b) == doctest::Approx(expect).epsilon(1e-6));
  for (int t = 0; t < 40; ++t) {
    const int p = static_cast<int>(counter_uniform(22, t, 0) * d);
    int q = static_cast<int>(counter_uniform(22, t, 1) * d);
    if (q == p) q = (q + 1) % d;
    const double ang = counter_uniform(22, t, 2) * 6.28;
    rotate_stats(a, p, q, ang);
    rotate_stats(b, p, q, ang);
  }
  CHECK(fid(a, b) == doctest::Approx(expect).epsilon(1e-6));

  GaussianStats wrong;
  wrong.d = 2;
  wrong.mu = {0.0, 0.0};
  wrong.sigma = {1.0, 0.0, 0.0, 1.0};
  CHECK_THROWS_AS(fid(g, wrong), ValidationError);
}

TEST_CASE("kernel distance on point masses follows the kernel") {
  auto mass = [](float v, int n) {
    FeatureMatrix f;
    f.n = n;
    f.d = 4;
    f.data.assign(static_cast<std::size_t>(n) * 4, v);
    return f;
  };
  auto kval = [](float x, float y) {
    const double u = static_cast<double>(x) * y + 1.0;  // 4 coords / d=4 cancel
    return u * u * u;
  };
  auto a = mass(0.2f, 5);
  auto b = mass(0.6f, 7);
  const double expect = 100.0 * (kval(0.2f, 0.2f) + kval(0.6f, 0.6f) - 2.0 * kval(0.2f, 0.6f));
  CHECK(kid(a, b) == doctest::Approx(expect).epsilon(1e-9));
  CHECK(kid(b, a) == doctest::Approx(kid(a, b)).epsilon(1e-12));
  CHECK(kid(a, b) > 0.0);
  CHECK(kid(a, mass(1.0f, 7)) > kid(a, b));  // larger separation, larger value

  FeatureMatrix tiny = mass(0.1f, 1);
  CHECK_THROWS_AS(kid(tiny, b), ValidationError);
  FeatureMatrix wrong;
  wrong.n = 3;
  wrong.d = 2;
  wrong.data.assign(6, 0.1f);
  CHECK_THROWS_AS(kid(a, wrong), ValidationError);
}

TEST_CASE("same-set kernel distance stays near zero") {
  auto f = iid_features(9, 100, kFeatureDim, 0.15);
  CHECK(std::abs(kid(f, f)) < 0.5);

  // and with real extractor features
  auto ex = make_extractor(5);
  std::vector<DepthMap> maps;
  for (int i = 0; i < 100; ++i) maps.push_back(synth_map(1000 + i));
  auto feats = extract_features(maps, ex);
  CHECK(std::abs(kid(feats, feats)) < 0.5);
}

TEST_CASE("kernel distance is unbiased across disjoint half splits") {
  const int n = 200, trials = 200;
  auto all = iid_features(31, n, kFeatureDim, 0.2);
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::vector<double> vals;
  vals.reserve(trials);
  Prng rng(mix_seed(77, 0x73706C69));
  for (int t = 0; t < trials; ++t) {
    for (int i = n - 1; i > 0; --i)
      std::swap(idx[i], idx[rng.uniform_int(0, i)]);
    FeatureMatrix a, b;
    a.n = b.n = n / 2;
    a.d = b.d = all.d;
    for (int i = 0; i < n / 2; ++i) {
      const float* ra = all.row(idx[i]);
      const float* rb = all.row(idx[n / 2 + i]);
      a.data.insert(a.data.end(), ra, ra + all.d);
      b.data.insert(b.data.end(), rb, rb + all.d);
    }
    vals.push_back(kid(a, b));
  }
  double mean = 0.0;
  for (double v : vals) mean += v;
  mean /= trials;
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  var /= trials - 1;
  const double se = std::sqrt(var / trials);
  INFO("mean " << mean << " se " << se);
  CHECK(std::abs(mean) <= 3.0 * se);
}

TEST_CASE("bandwidth calibration hits the target perplexity") {
  auto f = iid_features(51, 120, 8, 0.8);
  const double perp = 25.0;
  auto cal = tsne_calibrate(f, perp);
  const double target_bits = std::log2(perp);
  for (int i = 0; i < cal.n; ++i) {
    CHECK(std::abs(cal.entropy_bits[i] - target_bits) < 1e-3);
    CHECK(cal.beta[i] > 0.0);
  }
  // joint affinities: symmetric, zero diagonal, total mass 1
  double total = 0.0;
  for (int i = 0; i < cal.n; ++i) {
    CHECK(cal.joint_p[static_cast<std::size_t>(i) * cal.n + i] == 0.0);
    for (int j = 0; j < cal.n; ++j) {
      total += cal.joint_p[static_cast<std::size_t>(i) * cal.n + j];
      CHECK(std::abs(cal.joint_p[static_cast<std::size_t>(i) * cal.n + j] -
                     cal.joint_p[static_cast<std::size_t>(j) * cal.n + i]) < 1e-15);
    }
  }
  CHECK(std::abs(total - 1.0) < 1e-9);

  CHECK_THROWS_AS(tsne_calibrate(f, 40.0), ValidationError);  // >= n/3
  CHECK_THROWS_AS(tsne_calibrate(f, 1.0), ValidationError);
  FeatureMatrix huge;
  huge.n = 4001;
  huge.d = 1;
  huge.data.resize(4001);
  for (int i = 0; i < 4001; ++i) huge.data[i] = static_cast<float>(i);
  CHECK_THROWS_AS(tsne_calibrate(huge, 30.0), ValidationError);
}

TEST_CASE("embedding separates well separated clusters") {
  const int per = 100, d = 10;
  FeatureMatrix f;
  f.n = 3 * per;
  f.d = d;
  f.data.resize(static_cast<std::size_t>(f.n) * d);
  std::vector<int> label(f.n);
  for (int i = 0; i < f.n; ++i) {
    const int c = i / per;
    label[i] = c;
    for (int j = 0; j < d; ++j)
      f.data[static_cast<std::size_t>(i) * d + j] =
          static_cast<float>((j == c ? 8.0 : 0.0) + 0.5 * counter_normal(61, i, j));
  }

  TsneConfig cfg;
  cfg.seed = 4;
  auto y = tsne(f, cfg);
  REQUIRE(y.size() == static_cast<std::size_t>(f.n) * 2);

  // 10-nearest-neighbor label purity in the embedding
  double purity = 0.0;
  for (int i = 0; i < f.n; ++i) {
    std::vector<std::pair<double, int>> dist;
    dist.reserve(f.n - 1);
    for (int j = 0; j < f.n; ++j) {
      if (j == i) continue;
      const double dx = y[2 * i] - y[2 * j], dy = y[2 * i + 1] - y[2 * j + 1];
      dist.emplace_back(dx * dx + dy * dy, j);
    }
    std::partial_sort(dist.begin(), dist.begin() + 10, dist.end());
    int same = 0;
    for (int k = 0; k < 10; ++k)
      if (label[dist[k].second] == label[i]) ++same;
    purity += same / 10.0;
  }
  purity /= f.n;
  INFO("knn purity " << purity);
  CHECK(purity > 0.9);

  auto y2 = tsne(f, cfg);
  CHECK(y == y2);
  cfg.seed = 5;
  auto y3 = tsne(f, cfg);
  CHECK(y != y3);
}

TEST_CASE("method table and embedding csv come out well formed") {
  auto ref = iid_features(81, 40, 8, 0.3, "sensor");
  auto near = iid_features(82, 40, 8, 0.3, "close");
  auto far = iid_features(83, 40, 8, 1.2, "far");
  auto scores = score_methods(ref, {near, far, ref});
  REQUIRE(scores.size() == 3);
  CHECK(scores[0].method == "close");
  CHECK(scores[2].fid < 1e-8);          // reference against itself
  CHECK(scores[1].fid > scores[0].fid);  // mismatched scale reads as distance
  CHECK(scores[0].n == 40);

  auto csv = report_csv(scores, 42);
  CHECK(csv.rfind("method,fid,kid_x100,n,feature_seed\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  CHECK(csv.find("far,") != std::string::npos);
  CHECK(csv.find(",42\n") != std::string::npos);

  auto emb = embedding_csv({0.0, 1.0, 2.0, 3.0}, {"a", "b"});
  CHECK(emb == "x,y,label\n0.000000,1.000000,a\n2.000000,3.000000,b\n");
  CHECK_THROWS_AS(embedding_csv({0.0, 1.0}, {"a", "b"}), ValidationError);

  CHECK_THROWS_AS(score_methods(ref, {}), ValidationError);
}

}  // TEST_SUITE
