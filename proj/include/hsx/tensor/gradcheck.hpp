#pragma once

// Central finite-difference verification of backward passes (64-bit).

#include <functional>

#include "hsx/core/rng.hpp"
#include "hsx/tensor/ops.hpp"

namespace hsx::tensor {

struct GradCheckOptions {
  double step = 1e-5;
  /// Gradients smaller than this are compared in absolute terms
  /// (|analytic - numeric| / floor).
  double floor = 1e-4;
  /// Coordinates probed per input tensor; 0 means all of them.
  std::size_t max_coords = 0;
  std::uint64_t seed = 42;
};

struct GradCheckResult {
  double max_rel_error = 0;
  std::size_t coords_checked = 0;
};

inline double relative_error(double analytic, double numeric, double floor) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares the gradient of `f` with respect to each input against central
/// differences. Non-scalar outputs are contracted with a fixed random weight
/// tensor so that every output element participates.
inline GradCheckResult grad_check(
    const std::function<Tensor<double>(const std::vector<Tensor<double>>&)>& f,
    std::vector<Tensor<double>> inputs, const GradCheckOptions& opt = {}) {
  std::vector<double> proj;
  auto scalarize = [&](const Tensor<double>& y) {
    if (y.size() == 1) return reshape(y, {});
    if (proj.size() != y.size()) {
      CounterRng rng(opt.seed, stream("gradcheck.projection"));
      proj.resize(y.size());
      for (auto& w : proj) w = rng.uniform(-1.0, 1.0);
    }
    return sum(mul(y, Tensor<double>(y.shape(), proj)));
  };

  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();
  }
  auto loss = scalarize(f(inputs));
  backward(loss);
  std::vector<std::vector<double>> analytic;
  for (auto& t : inputs) analytic.emplace_back(t.grad().begin(), t.grad().end());

  auto eval = [&]() {
    std::vector<Tensor<double>> frozen;
    for (auto& t : inputs) frozen.push_back(Tensor<double>(t.shape(), t.values(), false));
    return scalarize(f(frozen)).item();
  };

  GradCheckResult res;
  CounterRng pick(opt.seed, stream("gradcheck.coords"));
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& vals = inputs[k].values();
    std::vector<std::size_t> coords(vals.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (opt.max_coords && coords.size() > opt.max_coords) {
      pick.shuffle(coords.begin(), coords.end());
      coords.resize(opt.max_coords);
    }
    for (std::size_t i : coords) {
      const double orig = vals[i];
      vals[i] = orig + opt.step;
      const double up = eval();
      vals[i] = orig - opt.step;
      const double down = eval();
      vals[i] = orig;
      const double numeric = (up - down) / (2 * opt.step);
      res.max_rel_error = std::max(res.max_rel_error, relative_error(analytic[k][i], numeric, opt.floor));
      ++res.coords_checked;
    }
  }
  return res;
}

}  // namespace hsx::tensor
