#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "rbp/autodiff.hpp"

namespace rbp {

/// Builds a scalar loss on a fresh graph from the parameters in the store.
using LossBuilder = std::function<Var(Graph&, ParameterStore&)>;

/// Raised when a finite-difference probe would straddle a relu, abs_diff or clip kink.
class DegeneratePointError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Compares backward() against central differences over every trainable
/// coordinate. Returns max |analytic - numeric| / max(1, |analytic|).
inline double grad_check(const LossBuilder& build, ParameterStore& params, double eps = 1e-5) {
  if (eps < 1e-7 || eps > 1e-3) throw std::invalid_argument("grad_check: eps must lie in [1e-7, 1e-3]");

  std::vector<Tensor> analytic;
  {
    Graph g;
    Var loss = build(g, params);
    if (std::size_t hits = g.kink_count(2.0 * eps); hits > 0) {
      throw DegeneratePointError("grad_check: " + std::to_string(hits) +
                                 " inputs within the probe width of a relu/abs_diff/clip kink; perturb the point");
    }
    g.backward(loss);
    for (const Parameter& p : params.all()) analytic.push_back(p.grad);
  }

  auto eval = [&] {
    Graph g;
    return g.value(build(g, params))[0];
  };

  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Parameter& p = params[k];
    if (!p.trainable) continue;
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double orig = p.value[i];
      p.value[i] = orig + eps;
      const double up = eval();
      p.value[i] = orig - eps;
      const double down = eval();
      p.value[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[k][i];
      worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
    }
  }
  return worst;
}

}  // namespace rbp
