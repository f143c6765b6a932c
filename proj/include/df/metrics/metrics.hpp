#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "df/depthmap.hpp"
#include "df/tensor/param_store.hpp"

namespace df::metrics {

using tensor::ParamStore;

// Fixed random-weight conv net standing in for a pretrained feature backbone:
// a parameter-free stem splits the encoded depth into a hole-indicator channel
// and a damped geometry channel, then three stride-2 tanh convs (8/16/32
// channels) and per-channel average plus max pooling concatenated. Weights
// come only from the seed and are never trained, so feature distances are
// reproducible given (seed, z_far).
inline constexpr int kFeatureDim = 64;

struct FeatureExtractor {
  std::uint64_t seed = 0;
  float z_far = 3.0f;
  ParamStore<float> params;
};

FeatureExtractor make_extractor(std::uint64_t seed, float z_far = 3.0f);

struct FeatureMatrix {
  int n = 0;
  int d = 0;
  std::vector<float> data;  // row-major n x d
  std::string label;

  const float* row(int i) const { return data.data() + static_cast<std::size_t>(i) * d; }
  void validate() const;  // n >= 2, finite, size consistent
};

FeatureMatrix extract_features(const std::vector<DepthMap>& maps, const FeatureExtractor& ex,
                               std::string label = "");

struct GaussianStats {
  int d = 0;
  std::vector<double> mu;     // d
  std::vector<double> sigma;  // d x d row-major
  void validate() const;      // symmetric within 1e-9, diagonal >= 0
};

GaussianStats gaussian_stats(const FeatureMatrix& f);

// Squared mean distance plus covariance term via the symmetrized product
// sqrt(Sa) Sb sqrt(Sa); negative eigenvalues clamp to zero before the root.
double fid(const GaussianStats& a, const GaussianStats& b);

// Unbiased squared MMD with kernel (x.y/d + 1)^3, diagonals excluded in the
// within-set sums; reported at the x100 scale.
double kid(const FeatureMatrix& a, const FeatureMatrix& b);

struct TsneConfig {
  double perplexity = 30.0;
  int iterations = 1000;
  std::uint64_t seed = 0;
  double learning_rate = 200.0;
  double early_exaggeration = 12.0;
  int exaggeration_iters = 250;
  double momentum_start = 0.5;
  double momentum_final = 0.8;
  int momentum_switch = 250;
  void validate() const;
};

struct TsneCalibration {
  int n = 0;
  std::vector<double> joint_p;       // n x n symmetric affinities, sums to 1
  std::vector<double> beta;          // per-row precision 1/(2 sigma^2)
  std::vector<double> entropy_bits;  // conditional entropy per row after calibration
};

// Per-row bandwidth search so each conditional distribution hits the target
// perplexity within 1e-4, then symmetrization to the joint P.
TsneCalibration tsne_calibrate(const FeatureMatrix& f, double perplexity);

// Exact O(n^2) embedding into 2-D, deterministic per seed. Returns n x 2
// row-major coordinates.
std::vector<double> tsne(const FeatureMatrix& f, const TsneConfig& cfg);

struct MethodScore {
  std::string method;
  double fid = 0.0;
  double kid = 0.0;
  int n = 0;
};

// FID/KID of every candidate set against the same reference set.
std::vector<MethodScore> score_methods(const FeatureMatrix& reference,
                                       const std::vector<FeatureMatrix>& candidates);

std::string report_csv(const std::vector<MethodScore>& scores, std::uint64_t feature_seed);

std::string embedding_csv(const std::vector<double>& points, const std::vector<std::string>& labels);

}  // namespace df::metrics
