#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "hsx/tensor/tensor.hpp"

namespace hsx::tensor {

/// Named, ordered collection of trainable tensors. The order is the
/// declaration order of the owning module and defines serialisation order.
template <class T>
struct ParamList {
  std::vector<std::pair<std::string, Tensor<T>>> items;

  void add(std::string name, Tensor<T> t) { items.emplace_back(std::move(name), std::move(t)); }
  void extend(const ParamList& other, const std::string& prefix = {}) {
    for (const auto& [n, t] : other.items) items.emplace_back(prefix + n, t);
  }
  void zero_grad() {
    for (auto& [n, t] : items) t.zero_grad();
  }
  void set_requires_grad(bool r) {
    for (auto& [n, t] : items) t.set_requires_grad(r);
  }
  std::size_t count() const {
    std::size_t c = 0;
    for (const auto& [n, t] : items) c += t.size();
    return c;
  }
  std::size_t size() const { return items.size(); }
};

template <class T>
struct AdamState {
  std::vector<T> m, v;
  long t = 0;
};

/// Adam with bias correction (beta1 0.9, beta2 0.999, eps 1e-8 by default).
template <class T>
class Adam {
 public:
  explicit Adam(ParamList<T> params, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto& [n, p] : params_.items) {
      AdamState<T> s;
      s.m.assign(p.size(), T(0));
      s.v.assign(p.size(), T(0));
      states_.push_back(std::move(s));
    }
  }

  void step(double lr) {
    for (std::size_t k = 0; k < params_.items.size(); ++k) {
      auto& p = params_.items[k].second;
      auto& s = states_[k];
      ++s.t;
      if (!p.has_grad()) continue;
      auto g = p.grad();
      auto w = p.data();
      const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
      const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
      for (std::size_t i = 0; i < w.size(); ++i) {
        s.m[i] = static_cast<T>(beta1_ * s.m[i] + (1.0 - beta1_) * g[i]);
        s.v[i] = static_cast<T>(beta2_ * s.v[i] + (1.0 - beta2_) * static_cast<double>(g[i]) * g[i]);
        const double mhat = s.m[i] / c1, vhat = s.v[i] / c2;
        w[i] = static_cast<T>(w[i] - lr * mhat / (std::sqrt(vhat) + eps_));
      }
    }
  }

  void zero_grad() { params_.zero_grad(); }
  const AdamState<T>& state(std::size_t k) const { return states_.at(k); }
  ParamList<T>& params() { return params_; }

 private:
  ParamList<T> params_;
  std::vector<AdamState<T>> states_;
  double beta1_, beta2_, eps_;
};

/// Plain stochastic gradient descent.
template <class T>
class Sgd {
 public:
  explicit Sgd(ParamList<T> params) : params_(std::move(params)) {}

  void step(double lr) {
    for (auto& [n, p] : params_.items) {
      if (!p.has_grad()) continue;
      auto g = p.grad();
      auto w = p.data();
      for (std::size_t i = 0; i < w.size(); ++i) w[i] = static_cast<T>(w[i] - lr * g[i]);
    }
  }
  void zero_grad() { params_.zero_grad(); }
  ParamList<T>& params() { return params_; }

 private:
  ParamList<T> params_;
};

/// Type-erased optimiser selected by name ("adam" or "sgd").
template <class T>
class Optimizer {
 public:
  Optimizer(const std::string& kind, ParamList<T> params) {
    if (kind == "adam")
      adam_.emplace_back(std::move(params));
    else if (kind == "sgd")
      sgd_.emplace_back(std::move(params));
    else
      throw Error(ErrorKind::Config, "unknown optimizer '" + kind + "'");
  }
  void step(double lr) { adam_.empty() ? sgd_[0].step(lr) : adam_[0].step(lr); }
  void zero_grad() { adam_.empty() ? sgd_[0].zero_grad() : adam_[0].zero_grad(); }

 private:
  std::vector<Adam<T>> adam_;
  std::vector<Sgd<T>> sgd_;
};

}  // namespace hsx::tensor
