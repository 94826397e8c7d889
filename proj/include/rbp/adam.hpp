#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "rbp/autodiff.hpp"

namespace rbp {

struct AdamHyper {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void validate() const {
    if (!(learning_rate > 0.0)) throw std::invalid_argument("adam: learning rate must be positive");
    if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
      throw std::invalid_argument("adam: betas must lie in (0, 1)");
    }
    if (!(epsilon > 0.0)) throw std::invalid_argument("adam: epsilon must be positive");
  }
};

/// One bias-corrected Adam update of a single parameter. Frozen parameters
/// are left untouched, moments and step counter included.
inline void adam_step(Parameter& p, const AdamHyper& hyper) {
  if (!p.has_grad) throw std::logic_error("adam_step: parameter '" + p.name + "' has no gradient; run backward first");
  if (!p.trainable) return;
  ++p.step;
  const double t = static_cast<double>(p.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double g = p.grad[i];
    p.first_moment[i] = hyper.beta1 * p.first_moment[i] + (1.0 - hyper.beta1) * g;
    p.second_moment[i] = hyper.beta2 * p.second_moment[i] + (1.0 - hyper.beta2) * g * g;
    const double m_hat = p.first_moment[i] / c1;
    const double v_hat = p.second_moment[i] / c2;
    p.value[i] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
  }
}

inline void adam_step(std::span<Parameter> params, const AdamHyper& hyper) {
  hyper.validate();
  for (Parameter& p : params) adam_step(p, hyper);
}

inline void adam_step(ParameterStore& store, const AdamHyper& hyper) { adam_step(store.all(), hyper); }

}  // namespace rbp
