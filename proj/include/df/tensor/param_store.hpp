#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "df/error.hpp"
#include "df/rng.hpp"
#include "df/tensor/tensor.hpp"

namespace df::tensor {

// Named trainable tensors in registration order. Order is part of the
// determinism contract: the optimizer walks parameters in it and checkpoints
// serialize in it.
template <class T>
class ParamStore {
 public:
  Tensor<T>& add(const std::string& name, Tensor<T> t) {
    if (index_.count(name)) throw ValidationError("duplicate parameter: " + name);
    t.set_requires_grad(true);
    index_[name] = names_.size();
    names_.push_back(name);
    tensors_.push_back(std::move(t));
    return tensors_.back();
  }

  Tensor<T>& get(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown parameter: " + name);
    return tensors_[it->second];
  }

  const Tensor<T>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown parameter: " + name);
    return tensors_[it->second];
  }

  std::size_t count() const { return tensors_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor<T>& at(std::size_t i) { return tensors_[i]; }
  const Tensor<T>& at(std::size_t i) const { return tensors_[i]; }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
  }

  void zero_grad() {
    for (auto& t : tensors_) t.zero_grad();
  }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor<T>> tensors_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <class T>
void fill_normal(Tensor<T>& t, df::Prng& rng, double stddev) {
  for (auto& v : t.data()) v = static_cast<T>(rng.normal() * stddev);
}

template <class T>
struct AdamState {
  std::vector<std::vector<T>> m, v;
  long step = 0;

  void match(const ParamStore<T>& ps) {
    if (m.size() == ps.count()) return;
    m.resize(ps.count());
    v.resize(ps.count());
    for (std::size_t i = 0; i < ps.count(); ++i) {
      m[i].assign(ps.at(i).size(), T(0));
      v[i].assign(ps.at(i).size(), T(0));
    }
  }
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// One bias-corrected Adam update over all parameters. Parameters without a
// populated gradient this step are skipped (their moments decay next time
// they appear, matching a sparse-update reading; in practice every step
// touches every parameter).
template <class T>
void adam_step(ParamStore<T>& ps, AdamState<T>& st, const AdamConfig& cfg) {
  st.match(ps);
  st.step += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.step));
  for (std::size_t i = 0; i < ps.count(); ++i) {
    auto& t = ps.at(i);
    if (!t.has_grad()) continue;
    auto& val = t.data();
    const auto& g = t.grad();
    auto& m = st.m[i];
    auto& v = st.v[i];
    for (std::size_t j = 0; j < val.size(); ++j) {
      const double gj = static_cast<double>(g[j]);
      m[j] = static_cast<T>(cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gj);
      v[j] = static_cast<T>(cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gj * gj);
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      val[j] = static_cast<T>(val[j] - cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps));
    }
  }
}

}  // namespace df::tensor
