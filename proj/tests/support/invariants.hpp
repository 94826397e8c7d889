#pragma once

// Invariant and oracle checks shared by the property tests and the
// acceptance runner. Each returns a summary instead of asserting so the
// acceptance binary can report it on one line.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "rbp/rbp_lab.hpp"

namespace rbp::checks {

struct Outcome {
  bool pass = false;
  std::string detail;
};

/// Independent re-statement of the mixture: weighted sum, clip, renormalize.
inline std::vector<double> hand_mix(const std::vector<double>& p, const std::vector<double>& off, double wb, double wo) {
  std::vector<double> q(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) q[i] = std::min(1.0, std::max(0.0, wb * p[i] + wo * off[i]));
  double s = 0;
  for (double x : q) s += x;
  if (s == 0) return p;
  for (double& x : q) x /= s;
  return q;
}

/// rbp3_mix against hand_mix on random (p, offsets, w) instances.
inline Outcome mix_oracle(std::size_t instances = 100, std::uint64_t seed = 42) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> k_dist(2, 18);
  std::uniform_real_distribution<double> u(0.0, 1.0), sym(-1.0, 1.0);
  double worst = 0.0;
  std::size_t fallbacks = 0;
  for (std::size_t n = 0; n < instances; ++n) {
    const std::size_t k = k_dist(rng);
    std::vector<double> p(k), off(k);
    double s = 0;
    for (double& x : p) s += x = u(rng) + 1e-6;
    for (double& x : p) x /= s;
    for (double& x : off) x = sym(rng);
    const double wb = 2.0 * sym(rng), wo = 2.0 * sym(rng);
    const auto got = rbp3_mix(Tensor::vector(p), Tensor::vector(off), wb, wo);
    const auto want = hand_mix(p, off, wb, wo);
    fallbacks += got.fell_back;
    for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, std::abs(got.distribution[i] - want[i]));
  }
  std::ostringstream os;
  os << instances << " instances, max abs error " << worst << " (" << fallbacks << " fallbacks)";
  return {worst <= 1e-9, os.str()};
}

/// enumerate_triples against brute force over all k^3 triples, k = 3..8.
inline Outcome enumeration_oracle() {
  std::size_t cases = 0, bad = 0;
  for (std::size_t k = 3; k <= 8; ++k) {
    std::vector<std::size_t> symbols(k);
    std::iota(symbols.begin(), symbols.end(), std::size_t{0});
    for (AbstractPattern p : kAllPatterns) {
      std::set<Triple> brute;
      for (auto a : symbols)
        for (auto b : symbols)
          for (auto c : symbols)
            if (classify_abstract({a, b, c}) == p) brute.insert({a, b, c});
      const auto got = enumerate_triples(symbols, p);
      ++cases;
      if (got.size() != brute.size() || std::set<Triple>(got.begin(), got.end()) != brute) ++bad;
    }
  }
  return {bad == 0, std::to_string(cases - bad) + "/" + std::to_string(cases) + " (k, pattern) counts match"};
}

inline Outcome grad_checks() {
  double worst = 0.0;
  std::string failed;
  const auto results = run_all_grad_checks();
  for (const auto& r : results) {
    worst = std::max(worst, r.error);
    if (!r.passed) failed += (failed.empty() ? "" : ", ") + r.name;
  }
  std::ostringstream os;
  os << results.size() << " graphs, max error " << worst;
  if (!failed.empty()) os << "; failing: " << failed;
  return {failed.empty(), os.str()};
}

/// Max |row sum - 1| of softmax and of non-fallback mixtures on random inputs.
inline Outcome normalization(std::size_t trials = 1000, std::uint64_t seed = 7) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 5.0);
  std::uniform_real_distribution<double> sym(-1.0, 1.0);
  double worst = 0.0;
  bool negative = false;
  for (std::size_t t = 0; t < trials; ++t) {
    Graph g;
    Tensor z = Tensor::matrix(3, 12);
    for (double& v : z.values()) v = n(rng);
    const Tensor& p = g.value(g.softmax(g.input(z)));
    for (std::size_t r = 0; r < 3; ++r) {
      double s = 0;
      for (double x : p.row(r)) {
        s += x;
        negative |= x < 0;
      }
      worst = std::max(worst, std::abs(s - 1.0));
    }
    std::vector<double> off(12);
    for (double& x : off) x = sym(rng);
    const auto m = rbp3_mix(Tensor::vector({p.row(0).begin(), p.row(0).end()}), Tensor::vector(off), sym(rng) + 1.0,
                            sym(rng));
    if (m.fell_back) continue;
    double s = 0;
    for (double x : m.distribution.values()) {
      s += x;
      negative |= x < 0;
    }
    worst = std::max(worst, std::abs(s - 1.0));
  }
  std::ostringstream os;
  os << "max |sum - 1| = " << worst << (negative ? ", negative entries found" : "");
  return {worst <= 1e-9 && !negative, os.str()};
}

/// Frozen weights after 1000 Adam steps with random gradients, and the
/// fixed DR weights of a trained RBP3 network.
inline Outcome frozen_stability() {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 1.0);
  ParameterStore s;
  const Tensor agg = drp_aggregation_weights(DrConfig{12, 3});
  s.add("dr.aggregate", agg, false);
  s.add("w", Tensor::matrix(2, 2, 0.5));
  for (int step = 0; step < 1000; ++step) {
    for (Parameter& p : s.all()) {
      for (double& g : p.grad.values()) g = n(rng);
      p.has_grad = true;
    }
    adam_step(s, AdamHyper{0.4});
  }
  bool ok = s[0].value == agg;

  const LabeledDataset d = build_task(TaskSpec{TaskId::pred_aba, 0, 0});
  ModelConfig c;
  c.architecture = Architecture::gru;
  c.rbp = RbpVariant::rbp3;
  c.hidden = 10;
  c.epochs = 20;
  c = config_for(d, c);
  const Tensor before = Network(c).params().find("dr.aggregate")->value;
  TrainedModel m = train(c, d.subset(Split::train));
  ok = ok && m.network.params().find("dr.aggregate")->value == before;
  return {ok, ok ? "bit-identical after 1000 optimizer steps and after training" : "frozen weights changed"};
}

/// DRp(pi(seq)) == DRp(seq) exactly, and DRp in {0, 2} with 0 iff identical tokens.
inline Outcome drp_properties(std::size_t triples = 1000, std::uint64_t seed = 5) {
  std::mt19937_64 rng(seed);
  const std::size_t k = 12;
  std::uniform_int_distribution<std::size_t> tok(0, k - 1), coin(0, 2);
  std::size_t equivariance_bad = 0, value_bad = 0;
  const auto pairs = DrConfig{k, 3}.pair_list();
  for (std::size_t n = 0; n < triples; ++n) {
    std::vector<std::size_t> perm(k);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    // bias toward repeats so every pattern shows up
    std::vector<std::size_t> t{tok(rng), tok(rng), tok(rng)};
    if (coin(rng) == 0) t[2] = t[0];
    if (coin(rng) == 0) t[1] = t[coin(rng) % 2 == 0 ? 0 : 2];
    const std::vector<std::size_t> pt{perm[t[0]], perm[t[1]], perm[t[2]]};
    const Tensor drp = drp_for_tokens(t, k);
    if (!(drp == drp_for_tokens(pt, k))) ++equivariance_bad;
    for (std::size_t p = 0; p < pairs.size(); ++p) {
      const bool same = t[pairs[p].first] == t[pairs[p].second];
      if (!(drp[p] == 0.0 || drp[p] == 2.0) || (drp[p] == 0.0) != same) ++value_bad;
    }
  }
  std::ostringstream os;
  os << triples << " triples: " << equivariance_bad << " equivariance violations, " << value_bad
     << " value violations";
  return {equivariance_bad == 0 && value_bad == 0, os.str()};
}

}  // namespace rbp::checks
