#pragma once

// Feed-forward, Elman, GRU and LSTM classifiers/predictors over one-hot
// token sequences, with optional relation-based structures.
//
// Recurrent models start from a zero state and read the output distribution
// from the last step's top hidden state. Hidden layers use ReLU, apart from
// the gated cells, which follow their usual sigmoid/tanh formulation.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rbp/adam.hpp"
#include "rbp/autodiff.hpp"
#include "rbp/dataset.hpp"
#include "rbp/encoding.hpp"
#include "rbp/log.hpp"
#include "rbp/rbp.hpp"

namespace rbp {

enum class Architecture { ffnn, rnn, gru, lstm };

inline constexpr std::array<Architecture, 4> kAllArchitectures = {Architecture::ffnn, Architecture::rnn,
                                                                  Architecture::gru, Architecture::lstm};

inline std::string_view to_string(Architecture a) {
  switch (a) {
    case Architecture::ffnn: return "ffnn";
    case Architecture::rnn: return "rnn";
    case Architecture::gru: return "gru";
    case Architecture::lstm: return "lstm";
  }
  return "?";
}

inline Architecture parse_architecture(std::string_view s) {
  for (Architecture a : kAllArchitectures) {
    if (to_string(a) == s) return a;
  }
  throw std::invalid_argument("unknown architecture: " + std::string(s));
}

struct ModelConfig {
  Architecture architecture = Architecture::ffnn;
  std::size_t hidden = 50;
  std::size_t layers = 1;
  double learning_rate = 0.1;
  double dropout = 0.1;
  std::size_t epochs = 10;
  RbpVariant rbp = RbpVariant::none;
  std::size_t vocab = 12;
  std::size_t context = 3;
  std::size_t outputs = 2;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;  // 0 trains on the whole set in one batch
  std::size_t head_hidden = 10;
  double head_loss_weight = 1.0;
  bool teacher_forcing = true;  // RBP3: mix true DRp_out targets during training

  bool recurrent() const noexcept { return architecture != Architecture::ffnn; }

  void validate() const {
    if (hidden == 0) throw std::invalid_argument("config: hidden size must be positive");
    if (layers == 0) throw std::invalid_argument("config: layer count must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("config: learning rate must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw std::invalid_argument("config: dropout must lie in [0, 1)");
    if (vocab == 0 || context == 0 || outputs == 0) {
      throw std::invalid_argument("config: vocabulary, context and outputs must be positive");
    }
    if (rbp != RbpVariant::none && context < 2) throw std::invalid_argument("config: RBP needs a context of 2 or more");
    if (rbp == RbpVariant::rbp3 && outputs != vocab) {
      throw std::invalid_argument("config: RBP3 requires a prediction model (outputs == vocabulary size)");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Config with vocabulary, context and output size taken from a dataset.
inline ModelConfig config_for(const LabeledDataset& d, ModelConfig base) {
  base.vocab = d.vocabulary.size();
  base.context = d.context;
  base.outputs = d.output_size();
  return base;
}

/// Raised when the training loss stops being finite.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using ModelRng = std::mt19937_64;

class Network {
 public:
  struct Output {
    Var probs;
    std::optional<Var> head_loss;
  };

  explicit Network(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    ModelRng rng(cfg_.seed);
    build(rng);
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  ParameterStore& params() noexcept { return store_; }
  const ParameterStore& params() const noexcept { return store_; }
  DrConfig dr_config() const noexcept { return {cfg_.vocab, cfg_.context}; }
  const std::optional<Rbp3Head>& head() const noexcept { return head_; }

  /// Builds the forward pass for a batch. With `training` set, dropout is
  /// active (masks drawn from `rng`) and RBP3 uses teacher forcing.
  Output forward(Graph& g, std::span<const Item> batch, bool training, ModelRng* rng = nullptr) {
    const auto seqs = sequences(batch);
    const auto hot = encode(g, seqs);

    const bool drop = training && cfg_.dropout > 0.0;
    if (drop && rng == nullptr) throw std::invalid_argument("forward: training with dropout needs an rng");
    auto dropout = [&](Var v) { return drop ? apply_dropout(g, v, *rng) : v; };

    std::optional<Var> drp_full;
    if (cfg_.rbp != RbpVariant::none) {
      drp_full = dr_units(g, hot, store_[aggregate_], dr_config(), cfg_.context - 1).drp;
    }
    const bool mid_fusion = cfg_.rbp == RbpVariant::rbp2 || cfg_.rbp == RbpVariant::rbp3;

    Var top = cfg_.recurrent() ? recurrent_trunk(g, hot, dropout, mid_fusion ? drp_full : std::nullopt)
                               : feed_forward_trunk(g, hot, dropout, mid_fusion ? drp_full : std::nullopt);
    Var logits = g.add(g.matmul(top, g.param(store_[out_w_])), g.param(store_[out_b_]));
    Var probs = g.softmax(logits);
    if (cfg_.rbp != RbpVariant::rbp3) return {probs, std::nullopt};

    Var est = head_->forward(g, store_, *drp_full);
    std::vector<std::size_t> flat;
    for (const auto& s : seqs) flat.insert(flat.end(), s.begin(), s.end());
    if (!training) return {rbp3_mix_graph(g, store_, *head_, probs, est, std::move(flat), cfg_.vocab), std::nullopt};

    Tensor targets = Tensor::matrix(batch.size(), cfg_.context);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      Tensor t = drp_out_targets(batch[b].tokens, batch[b].target);
      for (std::size_t i = 0; i < cfg_.context; ++i) targets(b, i) = t[i];
    }
    Var head_loss = g.mse(est, targets);
    Var source = cfg_.teacher_forcing ? g.input(std::move(targets)) : est;
    Var mixed = rbp3_mix_graph(g, store_, *head_, probs, source, std::move(flat), cfg_.vocab);
    return {mixed, head_loss};
  }

  /// Top-layer hidden state after each step, evaluation mode (recurrent models only).
  std::vector<Tensor> hidden_states(std::span<const Item> items) {
    if (!cfg_.recurrent()) throw std::logic_error("hidden_states: feed-forward models have no recurrent state");
    Graph g;
    const auto hot = encode(g, sequences(items));
    auto identity = [](Var v) { return v; };
    std::vector<Var> steps;
    recurrent_trunk(g, hot, identity, std::nullopt, &steps);
    std::vector<Tensor> out;
    for (Var v : steps) out.push_back(g.value(v));
    return out;
  }

  /// Output distributions in evaluation mode, one row per item.
  Tensor predict(std::span<const Item> items) {
    Tensor out = Tensor::matrix(items.size(), cfg_.outputs);
    constexpr std::size_t kChunk = 1024;
    for (std::size_t start = 0; start < items.size(); start += kChunk) {
      const std::size_t n = std::min(kChunk, items.size() - start);
      Graph g;
      const Tensor& p = g.value(forward(g, items.subspan(start, n), false).probs);
      if (g.fallback_rows() > 0) {
        log::warn("rbp3 mixture: ", g.fallback_rows(), " rows clipped to zero; used the base distribution");
      }
      std::copy(p.values().begin(), p.values().end(), out.values().begin() + static_cast<std::ptrdiff_t>(start * cfg_.outputs));
    }
    return out;
  }

 private:
  struct Dense {
    std::size_t w = 0, b = 0;
  };
  // Gate order: rnn {h}; gru {z, r, n}; lstm {i, f, g, o}.
  struct Cell {
    std::vector<Dense> x;
    std::vector<std::size_t> h;
  };

  std::vector<std::vector<std::size_t>> sequences(std::span<const Item> batch) const {
    if (batch.empty()) throw std::invalid_argument("forward: empty batch");
    std::vector<std::vector<std::size_t>> seqs;
    seqs.reserve(batch.size());
    for (const Item& it : batch) {
      if (it.tokens.size() != cfg_.context) {
        throw std::invalid_argument("forward: sequence length " + std::to_string(it.tokens.size()) +
                                    " does not match context " + std::to_string(cfg_.context));
      }
      seqs.push_back(it.tokens);
    }
    return seqs;
  }

  /// One [batch x vocab] one-hot input per context position.
  std::vector<Var> encode(Graph& g, const std::vector<std::vector<std::size_t>>& seqs) const {
    std::vector<Var> hot;
    for (std::size_t i = 0; i < cfg_.context; ++i) hot.push_back(g.input(one_hot_batch(seqs, i, cfg_.vocab)));
    return hot;
  }

  std::size_t rbp1_width() const {
    const DrConfig dr = dr_config();
    if (cfg_.rbp == RbpVariant::rbp1n) return dr.drn_units();
    if (cfg_.rbp == RbpVariant::rbp1p) return dr.drp_units();
    return 0;
  }

  std::size_t gate_count() const {
    switch (cfg_.architecture) {
      case Architecture::gru: return 3;
      case Architecture::lstm: return 4;
      default: return 1;
    }
  }

  Dense dense(const std::string& name, std::size_t in, std::size_t out, ModelRng& rng, double bias = 0.0) {
    Dense d;
    d.w = store_.add(name + ".w", glorot_uniform(in, out, rng));
    d.b = store_.add(name + ".b", Tensor::matrix(1, out, bias));
    return d;
  }

  void build(ModelRng& rng) {
    const DrConfig dr = dr_config();
    const std::size_t H = cfg_.hidden;
    const bool mid_fusion = cfg_.rbp == RbpVariant::rbp2 || cfg_.rbp == RbpVariant::rbp3;
    const std::size_t drp = mid_fusion ? dr.drp_units() : 0;

    if (!cfg_.recurrent()) {
      std::size_t in = cfg_.context * cfg_.vocab + rbp1_width();
      for (std::size_t l = 0; l < cfg_.layers; ++l) {
        ff_layers_.push_back(dense("ffnn.l" + std::to_string(l), in, H, rng));
        in = H + (l == 0 ? drp : 0);
      }
      Dense out = dense("out", in, cfg_.outputs, rng);
      out_w_ = out.w;
      out_b_ = out.b;
    } else {
      const std::string arch(to_string(cfg_.architecture));
      for (std::size_t l = 0; l < cfg_.layers; ++l) {
        const std::size_t in = l == 0 ? cfg_.vocab + rbp1_width() : H;
        Cell c;
        for (std::size_t k = 0; k < gate_count(); ++k) {
          const std::string name = arch + ".l" + std::to_string(l) + ".g" + std::to_string(k);
          const double bias = (cfg_.architecture == Architecture::lstm && k == 1) ? 1.0 : 0.0;
          c.x.push_back(dense(name + ".x", in, H, rng, bias));
          c.h.push_back(store_.add(name + ".h.w", glorot_uniform(H, H, rng)));
        }
        cells_.push_back(std::move(c));
      }
      Dense out = dense("out", H + drp, cfg_.outputs, rng);
      out_w_ = out.w;
      out_b_ = out.b;
    }
    if (cfg_.rbp != RbpVariant::none) aggregate_ = store_.add("dr.aggregate", drp_aggregation_weights(dr), false);
    if (cfg_.rbp == RbpVariant::rbp3) head_ = Rbp3Head::create(store_, dr, cfg_.head_hidden, rng, "rbp3");
  }

  Var apply_dropout(Graph& g, Var v, ModelRng& rng) const {
    const Tensor& x = g.value(v);
    Tensor mask = Tensor::matrix(x.rows(), x.cols());
    std::bernoulli_distribution keep(1.0 - cfg_.dropout);
    const double scale = 1.0 / (1.0 - cfg_.dropout);
    for (double& m : mask.values()) m = keep(rng) ? scale : 0.0;
    return g.dropout_mask_apply(v, std::move(mask));
  }

  Var affine(Graph& g, Var x, const Dense& d) {
    return g.add(g.matmul(x, g.param(store_[d.w])), g.param(store_[d.b]));
  }

  template <class Dropout>
  Var feed_forward_trunk(Graph& g, std::span<const Var> hot, Dropout& dropout, std::optional<Var> drp) {
    std::vector<Var> parts(hot.begin(), hot.end());
    if (cfg_.rbp == RbpVariant::rbp1n || cfg_.rbp == RbpVariant::rbp1p) {
      DrVars dv = dr_units(g, hot, store_[aggregate_], dr_config(), cfg_.context - 1);
      parts.push_back(cfg_.rbp == RbpVariant::rbp1n ? dv.drn : dv.drp);
    }
    Var h = g.concat(parts);
    for (std::size_t l = 0; l < ff_layers_.size(); ++l) {
      h = dropout(g.relu(affine(g, h, ff_layers_[l])));
      if (l == 0 && drp) h = g.concat({h, *drp});
    }
    return h;
  }

  template <class Dropout>
  Var recurrent_trunk(Graph& g, std::span<const Var> hot, Dropout& dropout, std::optional<Var> drp,
                      std::vector<Var>* steps = nullptr) {
    const std::size_t B = g.value(hot[0]).rows();
    const std::size_t H = cfg_.hidden;
    std::vector<Var> seq;
    for (std::size_t t = 0; t < cfg_.context; ++t) {
      if (cfg_.rbp == RbpVariant::rbp1n || cfg_.rbp == RbpVariant::rbp1p) {
        DrVars dv = dr_units(g, hot, store_[aggregate_], dr_config(), t);
        seq.push_back(g.concat({hot[t], cfg_.rbp == RbpVariant::rbp1n ? dv.drn : dv.drp}));
      } else {
        seq.push_back(hot[t]);
      }
    }
    const Var zero = g.input(Tensor::matrix(B, H));
    for (std::size_t l = 0; l < cells_.size(); ++l) {
      const Cell& c = cells_[l];
      Var h = zero;
      Var cell_state = zero;
      for (std::size_t t = 0; t < seq.size(); ++t) {
        auto pre = [&](std::size_t k, Var hin) {
          return g.add(affine(g, seq[t], c.x[k]), g.matmul(hin, g.param(store_[c.h[k]])));
        };
        switch (cfg_.architecture) {
          case Architecture::rnn:
            h = g.relu(pre(0, h));
            break;
          case Architecture::gru: {
            Var z = g.sigmoid(pre(0, h));
            Var r = g.sigmoid(pre(1, h));
            Var n = g.tanh(pre(2, g.mul(r, h)));
            // h' = n + z * (h - n)
            h = g.add(n, g.mul(z, g.sub(h, n)));
            break;
          }
          case Architecture::lstm: {
            Var i = g.sigmoid(pre(0, h));
            Var f = g.sigmoid(pre(1, h));
            Var cand = g.tanh(pre(2, h));
            Var o = g.sigmoid(pre(3, h));
            cell_state = g.add(g.mul(f, cell_state), g.mul(i, cand));
            h = g.mul(o, g.tanh(cell_state));
            break;
          }
          case Architecture::ffnn:
            break;
        }
        seq[t] = h;
      }
      for (Var& s : seq) s = dropout(s);
    }
    if (steps) *steps = seq;
    Var top = seq.back();
    if (drp) top = g.concat({top, *drp});
    return top;
  }

  ModelConfig cfg_;
  ParameterStore store_;
  std::vector<Dense> ff_layers_;
  std::vector<Cell> cells_;
  std::size_t out_w_ = 0, out_b_ = 0;
  std::size_t aggregate_ = 0;
  std::optional<Rbp3Head> head_;
};

struct EpochRecord {
  double loss = 0.0;
  double train_accuracy = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainedModel {
  Network network;
  std::vector<EpochRecord> history;

  const ModelConfig& config() const noexcept { return network.config(); }
};

enum class Metric { accuracy, cross_entropy };

inline void check_tokens(const ModelConfig& cfg, std::span<const Item> items) {
  for (const Item& it : items) {
    for (std::size_t t : it.tokens) {
      if (t >= cfg.vocab) {
        throw std::out_of_range("token " + std::to_string(t) + " outside model vocabulary of " +
                                std::to_string(cfg.vocab));
      }
    }
    if (it.target >= cfg.outputs) throw std::out_of_range("target " + std::to_string(it.target) + " outside model outputs");
  }
}

inline double score(const Tensor& probs, std::span<const Item> items, Metric metric) {
  double total = 0.0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto row = probs.row(i);
    if (metric == Metric::accuracy) {
      const auto best = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
      total += best == items[i].target ? 1.0 : 0.0;
    } else {
      total -= std::log(std::max(row[items[i].target], kProbabilityFloor));
    }
  }
  return total / static_cast<double>(items.size());
}

/// Accuracy (argmax matches target) or mean negative log-probability of the target.
inline double evaluate(Network& net, std::span<const Item> items, Metric metric) {
  if (items.empty()) throw std::invalid_argument("evaluate: empty dataset");
  check_tokens(net.config(), items);
  return score(net.predict(items), items, metric);
}

inline double evaluate(TrainedModel& model, std::span<const Item> items, Metric metric) {
  return evaluate(model.network, items, metric);
}

/// Adam training with cross-entropy loss (plus the RBP3 head's regression
/// loss). Full-batch unless cfg.batch_size is set, in which case items are
/// reshuffled every epoch. Deterministic in (config, items).
inline TrainedModel train(const ModelConfig& cfg, std::span<const Item> items) {
  if (items.empty()) throw std::invalid_argument("train: empty dataset");
  check_tokens(cfg, items);
  TrainedModel model{Network(cfg), {}};
  Network& net = model.network;
  ModelRng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  const AdamHyper hyper{cfg.learning_rate};

  std::vector<Item> order(items.begin(), items.end());
  const std::size_t batch = cfg.batch_size == 0 ? order.size() : cfg.batch_size;
  std::size_t fallbacks = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (cfg.batch_size != 0) std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t n = std::min(batch, order.size() - start);
      std::span<const Item> chunk(order.data() + start, n);
      Graph g;
      auto out = net.forward(g, chunk, true, &rng);
      std::vector<std::size_t> targets;
      targets.reserve(n);
      for (const Item& it : chunk) targets.push_back(it.target);
      Var loss = g.cross_entropy(out.probs, targets);
      if (out.head_loss) loss = g.add(loss, g.scalar_scale(*out.head_loss, cfg.head_loss_weight));
      const double value = g.value(loss)[0];
      if (!std::isfinite(value)) {
        throw TrainingDiverged("training diverged: non-finite loss at epoch " + std::to_string(epoch + 1) +
                               " with learning rate " + std::to_string(cfg.learning_rate));
      }
      fallbacks += g.fallback_rows();
      g.backward(loss);
      adam_step(net.params(), hyper);
      loss_sum += value * static_cast<double>(n);
    }
    model.history.push_back({loss_sum / static_cast<double>(order.size()), evaluate(net, items, Metric::accuracy)});
  }
  if (fallbacks > 0) log::warn("rbp3 mixture fell back to the base distribution for ", fallbacks, " training rows");
  return model;
}

}  // namespace rbp
