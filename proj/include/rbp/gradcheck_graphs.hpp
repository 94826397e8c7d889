#pragma once

// The fixed set of graphs whose gradients are verified against central
// differences (by the test suite and by `rbp_lab gradcheck`).

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rbp/gradcheck.hpp"
#include "rbp/model.hpp"

namespace rbp {

inline constexpr double kGradCheckTolerance = 1e-4;

struct GradCheckOutcome {
  std::string name;
  double error = 0.0;
  bool passed = false;
  std::string note;  // set when no non-degenerate point was found
};

namespace detail {

inline Tensor random_tensor(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Tensor t = Tensor::matrix(r, c);
  for (double& v : t.values()) v = u(rng);
  return t;
}

inline std::vector<Item> random_items(std::size_t n, std::size_t context, std::size_t vocab, std::size_t outputs,
                                      std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> tok(0, vocab - 1), out(0, outputs - 1);
  std::vector<Item> items(n);
  for (auto& it : items) {
    for (std::size_t i = 0; i < context; ++i) it.tokens.push_back(tok(rng));
    it.target = out(rng);
  }
  return items;
}

/// One attempt at a check: fills the store for the given seed and returns the loss builder.
using GraphFactory = std::function<LossBuilder(ParameterStore&, std::uint64_t seed)>;

/// Graph built by a whole Network on a small random batch; dropout off.
inline GraphFactory network_graph(ModelConfig cfg, bool teacher_forced) {
  return [cfg, teacher_forced](ParameterStore& store, std::uint64_t seed) -> LossBuilder {
    ModelConfig c = cfg;
    c.seed = seed;
    c.dropout = 0.0;
    auto net = std::make_shared<Network>(c);
    std::mt19937_64 rng(seed + 1);
    auto items = std::make_shared<std::vector<Item>>(random_items(5, c.context, c.vocab, c.outputs, rng));
    // the check perturbs `store`, so the network's own store is swapped in and out around each evaluation
    store = net->params();
    return [net, items, teacher_forced, head_weight = c.head_loss_weight](Graph& g, ParameterStore& s) {
      std::swap(net->params(), s);
      ModelRng r(0);
      auto out = net->forward(g, *items, teacher_forced, &r);
      std::vector<std::size_t> targets;
      for (const Item& it : *items) targets.push_back(it.target);
      Var loss = g.cross_entropy(out.probs, targets);
      if (out.head_loss) loss = g.add(loss, g.scalar_scale(*out.head_loss, head_weight));
      std::swap(net->params(), s);
      return loss;
    };
  };
}

}  // namespace detail

struct RegisteredGraph {
  std::string name;
  detail::GraphFactory factory;
};

inline std::vector<RegisteredGraph> registered_graphs() {
  std::vector<RegisteredGraph> out;

  out.push_back({"linear", [](ParameterStore& s, std::uint64_t seed) -> LossBuilder {
                   std::mt19937_64 rng(seed);
                   s = ParameterStore();
                   const auto w = s.add("w", detail::random_tensor(3, 2, rng));
                   const auto b = s.add("b", detail::random_tensor(1, 2, rng));
                   Tensor x = detail::random_tensor(4, 3, rng), y = detail::random_tensor(4, 2, rng);
                   return [=](Graph& g, ParameterStore& st) {
                     return g.mse(g.add(g.matmul(g.input(x), g.param(st[w])), g.param(st[b])), y);
                   };
                 }});

  out.push_back({"mlp-relu", [](ParameterStore& s, std::uint64_t seed) -> LossBuilder {
                   std::mt19937_64 rng(seed);
                   s = ParameterStore();
                   const auto w1 = s.add("w1", detail::random_tensor(3, 5, rng));
                   const auto b1 = s.add("b1", detail::random_tensor(1, 5, rng));
                   const auto w2 = s.add("w2", detail::random_tensor(5, 2, rng));
                   const auto b2 = s.add("b2", detail::random_tensor(1, 2, rng));
                   Tensor x = detail::random_tensor(4, 3, rng), y = detail::random_tensor(4, 2, rng);
                   return [=](Graph& g, ParameterStore& st) {
                     Var h = g.relu(g.add(g.matmul(g.input(x), g.param(st[w1])), g.param(st[b1])));
                     return g.mse(g.add(g.matmul(h, g.param(st[w2])), g.param(st[b2])), y);
                   };
                 }});

  out.push_back({"softmax-ce", [](ParameterStore& s, std::uint64_t seed) -> LossBuilder {
                   std::mt19937_64 rng(seed);
                   s = ParameterStore();
                   const auto w = s.add("w", detail::random_tensor(3, 4, rng));
                   const auto b = s.add("b", detail::random_tensor(1, 4, rng));
                   Tensor x = detail::random_tensor(5, 3, rng);
                   std::vector<std::size_t> t{0, 3, 1, 2, 3};
                   return [=](Graph& g, ParameterStore& st) {
                     return g.cross_entropy(g.softmax(g.add(g.matmul(g.input(x), g.param(st[w])), g.param(st[b]))), t);
                   };
                 }});

  ModelConfig small;
  small.hidden = 4;
  small.vocab = 4;
  small.context = 3;
  small.outputs = 2;
  for (Architecture a : {Architecture::rnn, Architecture::gru, Architecture::lstm}) {
    ModelConfig c = small;
    c.architecture = a;
    out.push_back({std::string(to_string(a)) + "-unrolled-3", detail::network_graph(c, false)});
  }
  {
    ModelConfig c = small;
    c.architecture = Architecture::ffnn;
    c.layers = 2;
    c.rbp = RbpVariant::rbp2;
    out.push_back({"ffnn-rbp2", detail::network_graph(c, false)});
  }
  {
    ModelConfig c = small;
    c.architecture = Architecture::gru;
    c.outputs = c.vocab;
    c.rbp = RbpVariant::rbp3;
    c.head_hidden = 3;
    out.push_back({"rbp3-mixture", detail::network_graph(c, false)});
    out.push_back({"rbp3-teacher-forced", detail::network_graph(c, true)});
  }
  return out;
}

/// Checks one graph, moving to the next seed when the point sits on a kink.
inline GradCheckOutcome run_grad_check(const RegisteredGraph& graph, double eps = 1e-5, int attempts = 20) {
  for (int a = 0; a < attempts; ++a) {
    ParameterStore store;
    LossBuilder build = graph.factory(store, static_cast<std::uint64_t>(a));
    try {
      const double err = grad_check(build, store, eps);
      return {graph.name, err, err < kGradCheckTolerance, {}};
    } catch (const DegeneratePointError&) {
      continue;
    }
  }
  return {graph.name, 0.0, false, "no non-degenerate point found"};
}

inline std::vector<GradCheckOutcome> run_all_grad_checks(double eps = 1e-5) {
  std::vector<GradCheckOutcome> out;
  for (const auto& g : registered_graphs()) out.push_back(run_grad_check(g, eps));
  return out;
}

}  // namespace rbp
