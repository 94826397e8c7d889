#include <gtest/gtest.h>

#include <random>

#include "rbp/adam.hpp"

using namespace rbp;

namespace {

Parameter scalar_param(double value, double grad, bool trainable = true) {
  Parameter p("theta", Tensor::scalar(value), trainable);
  p.grad = Tensor::scalar(grad);
  p.has_grad = true;
  return p;
}

}  // namespace

TEST(Adam, FirstStepMovesByLearningRate) {
  // m_hat = g and v_hat = g^2 after bias correction, so the step is lr * g / (|g| + eps)
  Parameter p = scalar_param(0.0, 1.0);
  AdamHyper h;
  h.learning_rate = 0.1;
  adam_step(p, h);
  const double expected = -0.1 * 1.0 / (1.0 + 1e-8);
  EXPECT_NEAR(p.value[0], expected, 1e-12);
  EXPECT_LT(std::abs(p.value[0] + 0.1), 1e-6);
  EXPECT_EQ(p.step, 1u);
}

TEST(Adam, SecondStepMatchesHandComputation) {
  Parameter p = scalar_param(0.5, 2.0);
  AdamHyper h;
  h.learning_rate = 0.01;
  adam_step(p, h);
  p.grad[0] = -1.0;
  adam_step(p, h);
  double m = 0, v = 0, theta = 0.5;
  for (int t = 1; t <= 2; ++t) {
    const double g = t == 1 ? 2.0 : -1.0;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.999, t));
    theta -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
  }
  EXPECT_NEAR(p.value[0], theta, 1e-14);
}

TEST(Adam, ZeroGradientLeavesValue) {
  Parameter p = scalar_param(3.25, 0.0);
  AdamHyper h;
  h.learning_rate = 0.4;
  for (int i = 0; i < 5; ++i) adam_step(p, h);
  EXPECT_EQ(p.value[0], 3.25);
}

TEST(Adam, FrozenParameterUnchanged) {
  Parameter p = scalar_param(1.5, 7.0, false);
  adam_step(p, AdamHyper{0.1});
  EXPECT_EQ(p.value[0], 1.5);
  EXPECT_EQ(p.step, 0u);
}

TEST(Adam, RejectsStepBeforeBackward) {
  Parameter p("w", Tensor::scalar(0.0));
  EXPECT_THROW(adam_step(p, AdamHyper{}), std::logic_error);
}

TEST(Adam, DefaultsAndValidation) {
  AdamHyper h;
  EXPECT_EQ(h.beta1, 0.9);
  EXPECT_EQ(h.beta2, 0.999);
  EXPECT_EQ(h.epsilon, 1e-8);
  ParameterStore s;
  s.add("w", Tensor::scalar(1.0));
  s[0].has_grad = true;
  EXPECT_THROW(adam_step(s, AdamHyper{-1.0}), std::invalid_argument);
  EXPECT_THROW(adam_step(s, AdamHyper{0.1, 1.0}), std::invalid_argument);
}

TEST(Adam, ThousandStepsLeaveFrozenBitwiseIdentical) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  ParameterStore s;
  Tensor w = Tensor::matrix(3, 4);
  for (double& v : w.values()) v = n(rng);
  const Tensor before = w;
  s.add("frozen", w, false);
  s.add("live", Tensor::matrix(2, 2, 0.0));
  for (int step = 0; step < 1000; ++step) {
    for (Parameter& p : s.all()) {
      for (double& g : p.grad.values()) g = n(rng);
      p.has_grad = true;
    }
    adam_step(s, AdamHyper{0.1});
  }
  EXPECT_EQ(s[0].value, before);
  EXPECT_NE(s[1].value, Tensor::matrix(2, 2, 0.0));
}
