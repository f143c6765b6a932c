#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "df/rng.hpp"
#include "df/tensor/tensor.hpp"

namespace df::tensor {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst;
};

// Central-difference check of reverse-mode gradients. `make_loss` rebuilds the
// scalar loss from the current values of the probed tensors; large tensors are
// probed at a seeded random subset of coordinates. Relative error uses
// |ad - fd| / max(|ad|, |fd|, 1).
template <class LossFn>
GradCheckResult grad_check(std::vector<std::pair<std::string, Tensor<double>>> probes,
                           LossFn make_loss, int max_probes_per_tensor = 32,
                           std::uint64_t seed = 7, double h_base = 1e-5) {
  for (auto& [name, t] : probes) t.set_requires_grad(true);

  auto loss0 = make_loss();
  for (auto& [name, t] : probes) t.zero_grad();
  loss0.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(probes.size());
  for (auto& [name, t] : probes)
    analytic.push_back(t.has_grad() ? t.grad() : std::vector<double>(t.size(), 0.0));

  GradCheckResult res;
  df::Prng rng(seed);
  for (std::size_t pi = 0; pi < probes.size(); ++pi) {
    auto& [name, t] = probes[pi];
    const std::size_t n = t.size();
    std::vector<std::size_t> idx;
    if (static_cast<int>(n) <= max_probes_per_tensor) {
      for (std::size_t i = 0; i < n; ++i) idx.push_back(i);
    } else {
      for (int i = 0; i < max_probes_per_tensor; ++i)
        idx.push_back(static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<long long>(n) - 1)));
    }
    for (std::size_t i : idx) {
      const double x0 = t.data()[i];
      const double h = h_base * std::max(1.0, std::abs(x0));
      t.data()[i] = x0 + h;
      const double fp = make_loss().item();
      t.data()[i] = x0 - h;
      const double fm = make_loss().item();
      t.data()[i] = x0;
      const double fd = (fp - fm) / (2.0 * h);
      const double ad = analytic[pi][i];
      const double rel = std::abs(ad - fd) / std::max({std::abs(ad), std::abs(fd), 1.0});
      if (rel > res.max_rel_err) {
        res.max_rel_err = rel;
        res.worst = name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return res;
}

}  // namespace df::tensor
