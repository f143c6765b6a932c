#include "df/ddg/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "df/error.hpp"

namespace df::ddg {

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "linear") return ScheduleKind::Linear;
  if (s == "cosine") return ScheduleKind::Cosine;
  throw ValidationError("unknown schedule kind: " + s);
}

std::string to_string(ScheduleKind k) {
  return k == ScheduleKind::Linear ? "linear" : "cosine";
}

void NoiseSchedule::validate_endpoints() const {
  if (alpha_bar.empty()) throw ValidationError("empty schedule");
  if (alpha_bar.front() <= 0.99)
    throw ValidationError("schedule keeps too little signal at k=1");
  if (alpha_bar.back() >= 0.01)
    throw ValidationError("schedule keeps too much signal at k=K");
}

NoiseSchedule make_schedule(ScheduleKind kind, int K) {
  if (K < 10) throw ValidationError("schedule needs K >= 10");
  NoiseSchedule s;
  s.kind = kind;
  s.K = K;
  s.beta.resize(static_cast<std::size_t>(K));
  if (kind == ScheduleKind::Linear) {
    const double b0 = 1e-4, b1 = 0.02;
    for (int k = 1; k <= K; ++k)
      s.beta[static_cast<std::size_t>(k - 1)] = b0 + (b1 - b0) * (k - 1) / (K - 1);
  } else {
    const double off = 0.008;
    auto f = [&](double k) {
      const double t = (k / K + off) / (1.0 + off) * M_PI / 2.0;
      return std::cos(t) * std::cos(t);
    };
    double prev = 1.0;
    for (int k = 1; k <= K; ++k) {
      const double ab = f(static_cast<double>(k)) / f(0.0);
      s.beta[static_cast<std::size_t>(k - 1)] = std::clamp(1.0 - ab / prev, 1e-8, 0.999);
      prev = ab;
    }
  }
  s.alpha.resize(s.beta.size());
  s.alpha_bar.resize(s.beta.size());
  double prod = 1.0;
  for (std::size_t i = 0; i < s.beta.size(); ++i) {
    s.alpha[i] = 1.0 - s.beta[i];
    prod *= s.alpha[i];
    s.alpha_bar[i] = prod;
  }
  for (std::size_t i = 1; i < s.alpha_bar.size(); ++i)
    if (s.alpha_bar[i] >= s.alpha_bar[i - 1])
      throw NumericError("alpha_bar is not strictly decreasing");
  return s;
}

std::vector<float> forward_noise(const NoiseSchedule& s, const std::vector<float>& d0, int k,
                                 const std::vector<float>& eps) {
  if (k < 1 || k > s.K) throw ValidationError("timestep outside [1,K]");
  if (d0.size() != eps.size()) throw ValidationError("noise field size mismatch");
  const double ab = s.alpha_bar_at(k);
  const float cs = static_cast<float>(std::sqrt(ab));
  const float cn = static_cast<float>(std::sqrt(1.0 - ab));
  std::vector<float> out(d0.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = cs * d0[i] + cn * eps[i];
  return out;
}

}  // namespace df::ddg
