#pragma once

// Relation-based pattern structures.
//
// DRn units take |x - y| between corresponding one-hot coordinates of two
// context tokens; a DRp unit sums the DRn units of one token pair through
// fixed +1 connections, so it is 0 exactly when the two tokens are equal and
// 2 otherwise. The fusion variants feed these values into a network:
//
//   RBP1n / RBP1p  DRn or DRp concatenated to the network input
//   RBP2           DRp concatenated to the (first) hidden layer
//   RBP3           RBP2 plus a head that estimates, from DRp, which context
//                  positions the next token repeats; the estimates become
//                  vocabulary offsets mixed with the base distribution.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rbp/autodiff.hpp"
#include "rbp/encoding.hpp"

namespace rbp {

enum class RbpVariant { none, rbp1n, rbp1p, rbp2, rbp3 };

inline constexpr std::array<RbpVariant, 5> kAllVariants = {RbpVariant::none, RbpVariant::rbp1n, RbpVariant::rbp1p,
                                                           RbpVariant::rbp2, RbpVariant::rbp3};

inline std::string_view to_string(RbpVariant v) {
  switch (v) {
    case RbpVariant::none: return "none";
    case RbpVariant::rbp1n: return "1n";
    case RbpVariant::rbp1p: return "1p";
    case RbpVariant::rbp2: return "2";
    case RbpVariant::rbp3: return "3";
  }
  return "?";
}

inline RbpVariant parse_rbp(std::string_view s) {
  for (RbpVariant v : kAllVariants) {
    if (to_string(v) == s) return v;
  }
  if (s == "-") return RbpVariant::none;
  throw std::invalid_argument("unknown rbp variant: " + std::string(s));
}

/// Unit counts for a vocabulary of size `vocab` and a context of `context` tokens.
struct DrConfig {
  std::size_t vocab = 12;
  std::size_t context = 3;

  std::size_t pairs() const noexcept { return context * (context - 1) / 2; }
  std::size_t drn_units() const noexcept { return vocab * pairs(); }
  std::size_t drp_units() const noexcept { return pairs(); }
  std::size_t drp_out_units() const noexcept { return context; }
  std::size_t drn_out_units() const noexcept { return vocab * context; }

  /// Context index pairs (i < j) in the order used for DRn/DRp units.
  std::vector<std::pair<std::size_t, std::size_t>> pair_list() const {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 0; i < context; ++i)
      for (std::size_t j = i + 1; j < context; ++j) out.emplace_back(i, j);
    return out;
  }
};

// ---- plain-tensor reference path --------------------------------------

/// DRn activations for one context, pair-major: unit (pair, v) = |x_i[v] - x_j[v]|.
inline Tensor drn_layer(std::span<const Tensor> context) {
  if (context.empty()) throw std::invalid_argument("drn_layer: empty context");
  const std::size_t a = context[0].size();
  for (const Tensor& t : context) {
    if (t.size() != a) throw ShapeError("drn_layer: context vectors differ in length");
    if (!is_one_hot(t)) throw std::invalid_argument("drn_layer: context vectors must be one-hot");
  }
  const DrConfig cfg{a, context.size()};
  std::vector<double> out;
  out.reserve(cfg.drn_units());
  for (auto [i, j] : cfg.pair_list()) {
    for (std::size_t v = 0; v < a; ++v) out.push_back(std::abs(context[i][v] - context[j][v]));
  }
  return Tensor::vector(std::move(out));
}

/// Sums the DRn units of each pair with fixed +1 weights.
inline Tensor drp_aggregate(const Tensor& drn, const DrConfig& cfg) {
  if (drn.size() != cfg.drn_units()) {
    throw ShapeError("drp_aggregate: expected " + std::to_string(cfg.drn_units()) + " DRn values, got " +
                     std::to_string(drn.size()));
  }
  std::vector<double> out(cfg.pairs(), 0.0);
  for (std::size_t p = 0; p < cfg.pairs(); ++p)
    for (std::size_t v = 0; v < cfg.vocab; ++v) out[p] += drn[p * cfg.vocab + v];
  return Tensor::vector(std::move(out));
}

inline Tensor drp_for_tokens(std::span<const std::size_t> tokens, std::size_t vocab) {
  const auto hot = one_hot_sequence(tokens, vocab);
  return drp_aggregate(drn_layer(hot), DrConfig{vocab, tokens.size()});
}

inline Tensor concat_vectors(const Tensor& a, const Tensor& b) {
  std::vector<double> out(a.values().begin(), a.values().end());
  out.insert(out.end(), b.values().begin(), b.values().end());
  return Tensor::vector(std::move(out));
}

/// Early fusion: appends DRn (1n) or DRp (1p) values of `context` to `base`.
inline Tensor rbp1_augment_input(const Tensor& base, std::span<const Tensor> context, RbpVariant variant) {
  if (variant != RbpVariant::rbp1n && variant != RbpVariant::rbp1p) {
    throw std::invalid_argument("rbp1_augment_input: variant must be 1n or 1p");
  }
  Tensor drn = drn_layer(context);
  if (variant == RbpVariant::rbp1n) return concat_vectors(base, drn);
  return concat_vectors(base, drp_aggregate(drn, DrConfig{context[0].size(), context.size()}));
}

/// Mid fusion: [hidden | drp].
inline Tensor rbp2_augment_hidden(const Tensor& hidden, const Tensor& drp) { return concat_vectors(hidden, drp); }

/// Teacher-forcing targets: +1 where the context token equals the next token, -1 elsewhere.
inline Tensor drp_out_targets(std::span<const std::size_t> context, std::optional<std::size_t> next) {
  if (!next) {
    throw std::logic_error("drp_out_targets: next token unknown at inference; use the head estimate instead");
  }
  std::vector<double> out;
  for (std::size_t t : context) out.push_back(t == *next ? 1.0 : -1.0);
  return Tensor::vector(std::move(out));
}

/// Mean-subtracts the estimate and scatters it onto the vocabulary through
/// the context tokens. Repeated context tokens accumulate.
inline Tensor rbp3_offsets(std::span<const double> estimate, std::span<const std::size_t> context, std::size_t vocab) {
  if (estimate.size() != context.size()) {
    throw ShapeError("rbp3_offsets: " + std::to_string(estimate.size()) + " estimates for " +
                     std::to_string(context.size()) + " context tokens");
  }
  double mean = 0.0;
  for (double e : estimate) mean += e;
  mean /= static_cast<double>(estimate.size());
  Tensor out({vocab}, 0.0);
  for (std::size_t i = 0; i < context.size(); ++i) {
    if (context[i] >= vocab) throw std::out_of_range("rbp3_offsets: token outside vocabulary");
    out[context[i]] += estimate[i] - mean;
  }
  return out;
}

struct MixResult {
  Tensor distribution;
  bool fell_back = false;
};

/// Weighted sum of the base distribution and offsets, clipped to [0, 1] and
/// renormalised. Falls back to the base distribution when nothing survives
/// the clip.
inline MixResult rbp3_mix(const Tensor& base, const Tensor& offsets, double w_base, double w_offset) {
  if (base.size() != offsets.size()) {
    throw ShapeError("rbp3_mix: base " + shape_string(base.shape()) + " vs offsets " + shape_string(offsets.shape()));
  }
  std::vector<double> q(base.size());
  double total = 0.0;
  for (std::size_t v = 0; v < q.size(); ++v) {
    q[v] = std::clamp(w_base * base[v] + w_offset * offsets[v], 0.0, 1.0);
    total += q[v];
  }
  if (!(total > 0.0)) return {base, true};
  for (double& x : q) x /= total;
  return {Tensor::vector(std::move(q)), false};
}

// ---- RBP3 head -----------------------------------------------------------

/// One-hidden-layer map from DRp_in to DRp_out estimates, plus the two
/// mixture weights. Holds indices into a ParameterStore.
struct Rbp3Head {
  std::size_t w1 = 0, b1 = 0, w2 = 0, b2 = 0;
  std::size_t w_base = 0, w_offset = 0;
  std::size_t inputs = 0, hidden = 0, outputs = 0;

  template <class Rng>
  static Rbp3Head create(ParameterStore& store, const DrConfig& cfg, std::size_t hidden, Rng& rng,
                         std::string_view prefix = "rbp3");

  /// Head with every weight zero; its estimates are all exactly 0.
  static Rbp3Head zeros(ParameterStore& store, const DrConfig& cfg, std::size_t hidden,
                        std::string_view prefix = "rbp3") {
    Rbp3Head h;
    const std::string pre(prefix);
    h.inputs = cfg.drp_units();
    h.hidden = hidden;
    h.outputs = cfg.drp_out_units();
    h.w1 = store.add(pre + ".w1", Tensor::matrix(h.inputs, hidden));
    h.b1 = store.add(pre + ".b1", Tensor::matrix(1, hidden));
    h.w2 = store.add(pre + ".w2", Tensor::matrix(hidden, h.outputs));
    h.b2 = store.add(pre + ".b2", Tensor::matrix(1, h.outputs));
    h.w_base = store.add(pre + ".w_base", Tensor::scalar(0.5));
    h.w_offset = store.add(pre + ".w_offset", Tensor::scalar(0.5));
    return h;
  }

  /// Estimates for a batch of DRp rows inside a graph: tanh(relu(x W1 + b1) W2 + b2).
  Var forward(Graph& g, ParameterStore& store, Var drp_in) const {
    Var h = g.relu(g.add(g.matmul(drp_in, g.param(store[w1])), g.param(store[b1])));
    return g.tanh(g.add(g.matmul(h, g.param(store[w2])), g.param(store[b2])));
  }
};

/// Glorot-uniform matrix, fan_in x fan_out.
template <class Rng>
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t = Tensor::matrix(fan_in, fan_out);
  for (double& v : t.values()) v = dist(rng);
  return t;
}

template <class Rng>
Rbp3Head Rbp3Head::create(ParameterStore& store, const DrConfig& cfg, std::size_t hidden, Rng& rng,
                          std::string_view prefix) {
  Rbp3Head h = zeros(store, cfg, hidden, prefix);
  store[h.w1].value = glorot_uniform(h.inputs, hidden, rng);
  store[h.w2].value = glorot_uniform(hidden, h.outputs, rng);
  return h;
}

/// Plain forward of the head for one DRp vector.
inline Tensor rbp3_head_forward(const Tensor& drp_in, const Rbp3Head& head, ParameterStore& store) {
  Graph g;
  Var x = g.input(Tensor::matrix(1, drp_in.size(), std::vector<double>(drp_in.values().begin(), drp_in.values().end())));
  const Tensor& est = g.value(head.forward(g, store, x));
  return Tensor::vector(std::vector<double>(est.values().begin(), est.values().end()));
}

inline MixResult rbp3_mix(const Tensor& base, const Tensor& offsets, const Rbp3Head& head, const ParameterStore& store) {
  return rbp3_mix(base, offsets, store[head.w_base].value[0], store[head.w_offset].value[0]);
}

// ---- batched graph path ----------------------------------------------------

/// Fixed [drn_units x pairs] block matrix of ones that sums each pair's DRn units.
inline Tensor drp_aggregation_weights(const DrConfig& cfg) {
  Tensor w = Tensor::matrix(cfg.drn_units(), cfg.pairs());
  for (std::size_t p = 0; p < cfg.pairs(); ++p)
    for (std::size_t v = 0; v < cfg.vocab; ++v) w(p * cfg.vocab + v, p) = 1.0;
  return w;
}

struct DrVars {
  Var drn;
  Var drp;
};

/// DRn and DRp units for a batch. `hot[i]` is the [batch x vocab] one-hot
/// matrix of context position i. Pairs whose later position exceeds
/// `visible` (the last position seen so far) are held at zero; pass
/// context-1 for the full context.
inline DrVars dr_units(Graph& g, std::span<const Var> hot, Parameter& aggregation, const DrConfig& cfg,
                       std::size_t visible) {
  std::vector<Var> parts;
  std::optional<Var> zero;
  for (auto [i, j] : cfg.pair_list()) {
    if (j <= visible) {
      parts.push_back(g.abs_diff(hot[i], hot[j]));
    } else {
      if (!zero) zero = g.input(Tensor::matrix(g.value(hot[0]).rows(), cfg.vocab));
      parts.push_back(*zero);
    }
  }
  Var drn = g.concat(parts);
  return {drn, g.matmul(drn, g.param(aggregation))};
}

/// Mixture output for a batch: normalize(clip(w_base * base + w_offset * offsets)).
/// `source` holds the per-position relation values (teacher targets while
/// training, head estimates otherwise); `tokens` is the row-major context.
inline Var rbp3_mix_graph(Graph& g, ParameterStore& store, const Rbp3Head& head, Var base, Var source,
                          std::vector<std::size_t> tokens, std::size_t vocab) {
  Var offsets = g.position_scatter(g.center_rows(source), std::move(tokens), vocab);
  Var q = g.add(g.scale_by(base, g.param(store[head.w_base])), g.scale_by(offsets, g.param(store[head.w_offset])));
  return g.normalize_rows(g.clip(q, 0.0, 1.0), base);
}

}  // namespace rbp
