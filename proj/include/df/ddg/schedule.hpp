#pragma once

#include <string>
#include <vector>

namespace df::ddg {

enum class ScheduleKind { Linear, Cosine };

ScheduleKind schedule_kind_from_string(const std::string& s);
std::string to_string(ScheduleKind k);

// Diffusion noise schedule. Index 0 holds step k = 1. alpha_bar is the
// running product of (1 - beta); it decides how much signal survives at each
// step of the forward corruption.
struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::Linear;
  int K = 0;
  std::vector<double> beta, alpha, alpha_bar;

  double beta_at(int k) const { return beta[static_cast<std::size_t>(k - 1)]; }
  double alpha_at(int k) const { return alpha[static_cast<std::size_t>(k - 1)]; }
  // alpha_bar_at(0) = 1 so samplers can close the last transition.
  double alpha_bar_at(int k) const {
    return k == 0 ? 1.0 : alpha_bar[static_cast<std::size_t>(k - 1)];
  }

  // Endpoint sanity demanded of training schedules: nearly noise-free at
  // k = 1, nearly pure noise at k = K. Short schedules (small K) are legal
  // for unit tests but not for a trained model, so this is a separate check
  // rather than part of construction.
  void validate_endpoints() const;
};

// Linear: beta ramps 1e-4 to 0.02. Cosine: squared-cosine alpha_bar profile
// with the usual 0.008 offset, beta clamped to (0, 0.999].
NoiseSchedule make_schedule(ScheduleKind kind, int K);

// d_k = sqrt(alpha_bar_k) d0 + sqrt(1 - alpha_bar_k) eps, elementwise.
std::vector<float> forward_noise(const NoiseSchedule& s, const std::vector<float>& d0, int k,
                                 const std::vector<float>& eps);

}  // namespace df::ddg
