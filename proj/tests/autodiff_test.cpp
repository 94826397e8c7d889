#include <gtest/gtest.h>

#include <random>

#include "rbp/gradcheck.hpp"
#include "rbp/gradcheck_graphs.hpp"

using namespace rbp;

namespace {

std::vector<double> vals(const Tensor& t) { return {t.values().begin(), t.values().end()}; }

}  // namespace

TEST(Primitives, AbsDiff) {
  Graph g;
  Var v = g.abs_diff(g.input(Tensor::vector({1, 0})), g.input(Tensor::vector({0, 0})));
  EXPECT_EQ(vals(g.value(v)), (std::vector<double>{1, 0}));
}

TEST(Primitives, SoftmaxOfZerosIsUniform) {
  Graph g;
  Var v = g.softmax(g.input(Tensor::vector({0, 0, 0, 0})));
  for (double p : g.value(v).values()) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(Primitives, Relu) {
  Graph g;
  Var v = g.relu(g.input(Tensor::vector({-2, 3})));
  EXPECT_EQ(vals(g.value(v)), (std::vector<double>{0, 3}));
}

TEST(Primitives, MatmulAndConcat) {
  Graph g;
  Var a = g.input(Tensor::matrix(1, 2, {1, 2}));
  Var b = g.input(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  EXPECT_EQ(vals(g.value(g.matmul(a, b))), (std::vector<double>{7, 10}));
  Var c = g.concat({a, g.input(Tensor::matrix(1, 1, {9}))});
  EXPECT_EQ(vals(g.value(c)), (std::vector<double>{1, 2, 9}));
}

TEST(Primitives, DropoutMaskAndScalarScale) {
  Graph g;
  Var x = g.input(Tensor::vector({1, 2, 3}));
  EXPECT_EQ(vals(g.value(g.dropout_mask_apply(x, Tensor::vector({2, 0, 2})))), (std::vector<double>{2, 0, 6}));
  EXPECT_EQ(vals(g.value(g.scalar_scale(x, -0.5))), (std::vector<double>{-0.5, -1, -1.5}));
}

TEST(Primitives, SigmoidAndTanh) {
  Graph g;
  Var x = g.input(Tensor::vector({0.0, 2.0}));
  EXPECT_DOUBLE_EQ(g.value(g.sigmoid(x))[0], 0.5);
  EXPECT_NEAR(g.value(g.sigmoid(x))[1], 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
  EXPECT_NEAR(g.value(g.tanh(x))[1], std::tanh(2.0), 1e-15);
}

TEST(Primitives, ShapeMismatchNamesOpAndShapes) {
  Graph g;
  Var a = g.input(Tensor::matrix(2, 3));
  Var b = g.input(Tensor::matrix(2, 2));
  try {
    g.add(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("add"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
    EXPECT_NE(msg.find("2x2"), std::string::npos) << msg;
  }
  EXPECT_THROW(g.matmul(a, a), ShapeError);
  EXPECT_THROW(g.abs_diff(a, b), ShapeError);
}

TEST(Primitives, GenericDispatch) {
  Graph g;
  Var a = g.input(Tensor::vector({-1, 4}));
  std::vector<Var> in{a};
  EXPECT_EQ(vals(g.value(g.apply(Op::relu, in))), (std::vector<double>{0, 4}));
  EXPECT_THROW(g.apply(Op::add, in), std::invalid_argument);
}

TEST(Backward, SquareAtThree) {
  ParameterStore s;
  auto x = s.add("x", Tensor::scalar(3.0));
  Graph g;
  Var v = g.param(s[x]);
  g.backward(g.mul(v, v));
  EXPECT_DOUBLE_EQ(s[x].grad[0], 6.0);
}

TEST(Backward, SoftmaxCrossEntropyGradientIsPMinusY) {
  ParameterStore s;
  auto z = s.add("z", Tensor::matrix(1, 4, {0.3, -1.2, 2.0, 0.1}));
  const std::vector<std::size_t> target{2};
  LossBuilder build = [&](Graph& g, ParameterStore& st) { return g.cross_entropy(g.softmax(g.param(st[z])), target); };
  Graph g;
  Var p = g.softmax(g.param(s[z]));
  g.backward(g.cross_entropy(p, target));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_NEAR(s[z].grad[i], g.value(p)[i] - (i == 2 ? 1.0 : 0.0), 1e-12);
  }
  // independent oracle: central differences with step 1e-5
  EXPECT_LT(grad_check(build, s, 1e-5), 1e-8);
}

TEST(Backward, FrozenParameterGetsZeroGradient) {
  ParameterStore s;
  auto w = s.add("drn", Tensor::matrix(1, 2, {1.0, 1.0}), false);
  auto b = s.add("b", Tensor::matrix(1, 2, {0.5, 0.5}));
  Graph g;
  g.backward(g.sum(g.mul(g.param(s[w]), g.param(s[b]))));
  EXPECT_EQ(vals(s[w].grad), (std::vector<double>{0, 0}));
  EXPECT_EQ(vals(s[b].grad), (std::vector<double>{1, 1}));
  EXPECT_EQ(vals(s[w].value), (std::vector<double>{1, 1}));
}

TEST(Backward, RejectsNonScalarLoss) {
  Graph g;
  Var v = g.input(Tensor::vector({1, 2}));
  EXPECT_THROW(g.backward(v), std::invalid_argument);
}

TEST(Backward, SharedParameterAccumulates) {
  // x used three times: d/dx (x + x + x) = 3
  ParameterStore s;
  auto x = s.add("x", Tensor::scalar(2.0));
  Graph g;
  Var a = g.param(s[x]);
  Var b = g.param(s[x]);
  EXPECT_EQ(a.id, b.id);
  g.backward(g.add(g.add(a, b), a));
  EXPECT_DOUBLE_EQ(s[x].grad[0], 3.0);
}

TEST(Backward, RepeatedBackwardDoesNotDoubleCount) {
  ParameterStore s;
  auto x = s.add("x", Tensor::scalar(2.0));
  Graph g;
  Var v = g.param(s[x]);
  Var loss = g.mul(v, v);
  g.backward(loss);
  g.backward(loss);
  EXPECT_DOUBLE_EQ(s[x].grad[0], 4.0);
}

TEST(Backward, ReluSubgradientAtZeroIsZero) {
  ParameterStore s;
  auto x = s.add("x", Tensor::vector({0.0, 1.0}));
  Graph g;
  g.backward(g.sum(g.relu(g.param(s[x]))));
  EXPECT_EQ(vals(s[x].grad), (std::vector<double>{0, 1}));
  Graph h;
  auto y = s.add("y", Tensor::vector({0.0}));
  h.backward(h.sum(h.abs_diff(h.param(s[y]), h.input(Tensor::vector({0.0})))));
  EXPECT_EQ(s[y].grad[0], 0.0);
}

TEST(GradCheck, LinearMapIsExact) {
  const auto graphs = registered_graphs();
  auto it = std::find_if(graphs.begin(), graphs.end(), [](const auto& g) { return g.name == "linear"; });
  ASSERT_NE(it, graphs.end());
  const auto r = run_grad_check(*it);
  EXPECT_LT(r.error, 1e-10);
}

TEST(GradCheck, EveryRegisteredGraphBelowTolerance) {
  for (const auto& r : run_all_grad_checks()) {
    EXPECT_TRUE(r.passed) << r.name << " error " << r.error << " " << r.note;
    EXPECT_LT(r.error, 1e-4) << r.name;
  }
}

TEST(GradCheck, RegistryCoversRequiredGraphs) {
  std::set<std::string> names;
  for (const auto& g : registered_graphs()) names.insert(g.name);
  for (const char* n : {"mlp-relu", "lstm-unrolled-3", "gru-unrolled-3", "rnn-unrolled-3", "rbp3-mixture"}) {
    EXPECT_TRUE(names.count(n)) << n;
  }
}

TEST(GradCheck, DegeneratePointIsFlagged) {
  ParameterStore s;
  auto x = s.add("x", Tensor::vector({0.0, 1.0}));
  LossBuilder relu = [&](Graph& g, ParameterStore& st) { return g.sum(g.relu(g.param(st[x]))); };
  EXPECT_THROW(grad_check(relu, s), DegeneratePointError);
  LossBuilder absd = [&](Graph& g, ParameterStore& st) {
    return g.sum(g.abs_diff(g.param(st[x]), g.input(Tensor::vector({0.0, 5.0}))));
  };
  EXPECT_THROW(grad_check(absd, s), DegeneratePointError);
  LossBuilder clip = [&](Graph& g, ParameterStore& st) { return g.sum(g.clip(g.param(st[x]), 0.0, 1.0)); };
  EXPECT_THROW(grad_check(clip, s), DegeneratePointError);
}

TEST(GradCheck, EpsilonRangeEnforced) {
  ParameterStore s;
  s.add("x", Tensor::scalar(1.0));
  LossBuilder f = [](Graph& g, ParameterStore& st) { return g.sum(g.param(st[0])); };
  EXPECT_THROW(grad_check(f, s, 1e-2), std::invalid_argument);
  EXPECT_THROW(grad_check(f, s, 1e-9), std::invalid_argument);
  EXPECT_NO_THROW(grad_check(f, s, 1e-7));
}

TEST(GradCheck, CompositePrimitives) {
  // mixture-pipeline primitives at a random point away from their kinks
  std::mt19937_64 rng(3);
  ParameterStore s;
  auto a = s.add("a", detail::random_tensor(3, 4, rng));
  auto w = s.add("w", Tensor::scalar(0.7));
  auto fb = s.add("fb", detail::random_tensor(3, 4, rng, 0.5));
  const std::vector<std::size_t> toks{0, 2, 3, 1, 1, 0, 2, 2, 3, 0, 1, 3};
  LossBuilder f = [&](Graph& g, ParameterStore& st) {
    Var c = g.center_rows(g.param(st[a]));
    Var sc = g.position_scatter(c, toks, 4);
    Var mixed = g.add(g.scale_by(sc, g.param(st[w])), g.sigmoid(g.param(st[fb])));
    Var n = g.normalize_rows(g.clip(mixed, 0.0, 1.0), g.softmax(g.param(st[fb])));
    return g.mse(n, Tensor::matrix(3, 4, 0.25));
  };
  EXPECT_LT(grad_check(f, s), 1e-6);
}
