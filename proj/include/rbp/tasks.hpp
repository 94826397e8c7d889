#pragma once

// Synthetic identity-rule tasks over letter vocabularies.
//
// Vocabulary-split tasks draw training triples from a random half of the
// letters and validation/test triples from the other half, so a model only
// generalises if it has learned the equality structure. Every split keeps
// both (or all four) classes the same size.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rbp/dataset.hpp"
#include "rbp/patterns.hpp"

namespace rbp {

enum class TaskId { t1a, t1b, t2, t3, shared, pred_aba, pred_abb, mixed4 };

inline constexpr std::array<TaskId, 8> kAllTasks = {TaskId::t1a,    TaskId::t1b,      TaskId::t2,
                                                    TaskId::t3,     TaskId::shared,   TaskId::pred_aba,
                                                    TaskId::pred_abb, TaskId::mixed4};

inline std::string_view to_string(TaskId t) {
  switch (t) {
    case TaskId::t1a: return "1a";
    case TaskId::t1b: return "1b";
    case TaskId::t2: return "2";
    case TaskId::t3: return "3";
    case TaskId::shared: return "shared";
    case TaskId::pred_aba: return "pred-aba";
    case TaskId::pred_abb: return "pred-abb";
    case TaskId::mixed4: return "mixed4";
  }
  return "?";
}

inline TaskId parse_task(std::string_view s) {
  for (TaskId t : kAllTasks) {
    if (to_string(t) == s) return t;
  }
  throw std::invalid_argument("unknown task: " + std::string(s));
}

inline TaskMode task_mode(TaskId t) {
  return (t == TaskId::pred_aba || t == TaskId::pred_abb) ? TaskMode::prediction : TaskMode::classification;
}

struct SplitFractions {
  double train = 0.5;
  double val = 0.25;
  double test = 0.25;

  void validate() const {
    if (train <= 0.0 || val < 0.0 || test <= 0.0 || std::abs(train + val + test - 1.0) > 1e-12) {
      throw std::invalid_argument("split fractions must be positive and sum to 1");
    }
  }
};

struct TaskSpec {
  TaskId id = TaskId::t1a;
  std::size_t vocab_size = 0;  // 0 selects the task default (12, or 18 for mixed4)
  std::uint64_t seed = 0;
  SplitFractions fractions;

  std::size_t resolved_vocab() const {
    if (vocab_size) return vocab_size;
    return id == TaskId::mixed4 ? 18 : 12;
  }
};

/// Raised when class balance cannot be met from the available sequences.
class InfeasibleTaskError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

using TaskRng = std::mt19937_64;

/// Spreads `total` picks over pools of the given capacities as evenly as
/// possible: one pick per pool in turn, skipping pools that are full.
inline std::vector<std::size_t> round_robin_quota(std::size_t total, const std::vector<std::size_t>& caps) {
  std::vector<std::size_t> quota(caps.size(), 0);
  std::size_t left = total;
  while (left > 0) {
    bool progressed = false;
    for (std::size_t i = 0; i < caps.size() && left > 0; ++i) {
      if (quota[i] < caps[i]) {
        ++quota[i];
        --left;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  if (left > 0) {
    throw InfeasibleTaskError("downsampling: asked for " + std::to_string(total) + " items, only " +
                              std::to_string(total - left) + " available");
  }
  return quota;
}

template <class T>
std::vector<T> sample(std::vector<T> pool, std::size_t n, TaskRng& rng) {
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(n, pool.size()));
  return pool;
}

struct ClassDef {
  std::string name;
  std::vector<AbstractPattern> patterns;
};

/// Balanced positive/other triples over one letter pool.
inline std::vector<std::vector<Triple>> balanced_classes(std::span<const std::size_t> letters,
                                                         const std::vector<ClassDef>& classes, TaskRng& rng) {
  std::vector<std::vector<std::vector<Triple>>> pools;
  std::vector<std::size_t> avail;
  for (const auto& c : classes) {
    std::vector<std::vector<Triple>> per;
    std::size_t n = 0;
    for (AbstractPattern p : c.patterns) {
      per.push_back(letters.size() >= distinct_symbols(p) ? enumerate_triples(letters, p) : std::vector<Triple>{});
      n += per.back().size();
    }
    pools.push_back(std::move(per));
    avail.push_back(n);
  }
  const std::size_t size = *std::min_element(avail.begin(), avail.end());
  if (size == 0) {
    std::string counts;
    for (std::size_t i = 0; i < classes.size(); ++i) {
      counts += (i ? ", " : "") + classes[i].name + "=" + std::to_string(avail[i]);
    }
    throw InfeasibleTaskError("class balance infeasible with " + std::to_string(letters.size()) +
                              " letters (available: " + counts + ")");
  }
  std::vector<std::vector<Triple>> out;
  for (auto& per : pools) {
    std::vector<std::size_t> caps;
    for (const auto& v : per) caps.push_back(v.size());
    const auto quota = round_robin_quota(size, caps);
    std::vector<Triple> picked;
    for (std::size_t i = 0; i < per.size(); ++i) {
      auto s = sample(per[i], quota[i], rng);
      picked.insert(picked.end(), s.begin(), s.end());
    }
    out.push_back(std::move(picked));
  }
  return out;
}

inline std::vector<ClassDef> classification_classes(TaskId id) {
  using P = AbstractPattern;
  switch (id) {
    case TaskId::t1a:
    case TaskId::shared: return {{"ABA", {P::ABA}}, {"other", {P::AAA, P::AAB, P::ABB, P::ABC}}};
    case TaskId::t1b: return {{"ABB", {P::ABB}}, {"other", {P::AAA, P::AAB, P::ABA, P::ABC}}};
    case TaskId::t2: return {{"ABA", {P::ABA}}, {"ABB", {P::ABB}}};
    case TaskId::t3: return {{"ABC", {P::ABC}}, {"other", {P::AAA, P::AAB, P::ABA, P::ABB}}};
    default: throw std::invalid_argument("not a classification task: " + std::string(to_string(id)));
  }
}

/// Random halving of the vocabulary into (train letters, held-out letters).
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_vocabulary(std::size_t k, TaskRng& rng) {
  std::vector<std::size_t> all(k);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::shuffle(all.begin(), all.end(), rng);
  std::vector<std::size_t> train(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k / 2));
  std::vector<std::size_t> held(all.begin() + static_cast<std::ptrdiff_t>(k / 2), all.end());
  std::sort(train.begin(), train.end());
  std::sort(held.begin(), held.end());
  return {train, held};
}

/// Splits each class of held-out items between val and test, equal counts per class.
inline void add_held_out(LabeledDataset& d, const std::vector<std::vector<Item>>& per_class, double val_share,
                         TaskRng& rng) {
  for (auto items : per_class) {
    std::shuffle(items.begin(), items.end(), rng);
    const std::size_t n_val = static_cast<std::size_t>(std::floor(static_cast<double>(items.size()) * val_share));
    for (std::size_t i = 0; i < items.size(); ++i) {
      items[i].split = i < n_val ? Split::val : Split::test;
      d.items.push_back(items[i]);
    }
  }
}

inline double val_share(const SplitFractions& f) { return f.val / (f.val + f.test); }

}  // namespace detail

inline LabeledDataset build_shared_vocabulary_task(const TaskSpec& spec);

inline LabeledDataset build_classification_task(const TaskSpec& spec) {
  spec.fractions.validate();
  if (spec.id == TaskId::shared) return build_shared_vocabulary_task(spec);
  const auto classes = detail::classification_classes(spec.id);
  detail::TaskRng rng(spec.seed);

  LabeledDataset d;
  d.task = std::string(to_string(spec.id));
  d.mode = TaskMode::classification;
  d.context = 3;
  d.vocabulary = Vocabulary::letters(spec.resolved_vocab());
  for (const auto& c : classes) d.classes.push_back(c.name);

  auto [train_letters, held_letters] = detail::split_vocabulary(d.vocabulary.size(), rng);
  const auto train = detail::balanced_classes(train_letters, classes, rng);
  const auto held = detail::balanced_classes(held_letters, classes, rng);

  for (std::size_t c = 0; c < train.size(); ++c) {
    for (const Triple& t : train[c]) d.items.push_back({{t[0], t[1], t[2]}, c, Split::train});
  }
  std::vector<std::vector<Item>> held_items(held.size());
  for (std::size_t c = 0; c < held.size(); ++c) {
    for (const Triple& t : held[c]) held_items[c].push_back({{t[0], t[1], t[2]}, c, Split::test});
  }
  detail::add_held_out(d, held_items, detail::val_share(spec.fractions), rng);
  return d;
}

/// ABA-BAB vs other over one shared vocabulary. The two orientations of each
/// ABA letter pair (e.g. "ded" and "ede") never land in the same split; one
/// goes to train, the other to val or test.
inline LabeledDataset build_shared_vocabulary_task(const TaskSpec& spec) {
  spec.fractions.validate();
  detail::TaskRng rng(spec.seed);
  LabeledDataset d;
  d.task = std::string(to_string(TaskId::shared));
  d.mode = TaskMode::classification;
  d.context = 3;
  d.vocabulary = Vocabulary::letters(spec.resolved_vocab());
  d.classes = {"ABA", "other"};

  std::vector<std::size_t> letters(d.vocabulary.size());
  std::iota(letters.begin(), letters.end(), std::size_t{0});

  // Unordered pairs {x, y}: orientation xyx or yxy.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t x = 0; x < letters.size(); ++x)
    for (std::size_t y = x + 1; y < letters.size(); ++y) pairs.emplace_back(x, y);
  if (pairs.empty()) throw InfeasibleTaskError("shared task needs at least 2 letters");
  std::shuffle(pairs.begin(), pairs.end(), rng);

  const std::size_t n_pos = 2 * pairs.size();
  const std::size_t n_val_pairs =
      static_cast<std::size_t>(std::floor(static_cast<double>(pairs.size()) * detail::val_share(spec.fractions)));
  std::bernoulli_distribution flip(0.5);
  std::vector<Item> positives;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto [x, y] = pairs[i];
    if (flip(rng)) std::swap(x, y);
    positives.push_back({{x, y, x}, 0, Split::train});
    positives.push_back({{y, x, y}, 0, i < n_val_pairs ? Split::val : Split::test});
  }

  const auto other_def = detail::classification_classes(TaskId::shared)[1];
  std::vector<std::vector<Triple>> pools;
  std::vector<std::size_t> caps;
  for (AbstractPattern p : other_def.patterns) {
    pools.push_back(enumerate_triples(letters, p));
    caps.push_back(pools.back().size());
  }
  const auto quota = detail::round_robin_quota(n_pos, caps);
  std::vector<Item> negatives;
  for (std::size_t i = 0; i < pools.size(); ++i) {
    for (const Triple& t : detail::sample(pools[i], quota[i], rng)) negatives.push_back({{t[0], t[1], t[2]}, 1});
  }
  std::shuffle(negatives.begin(), negatives.end(), rng);
  // Mirror the positive split counts so every split stays balanced.
  const std::size_t n_train = pairs.size();
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    negatives[i].split = i < n_train ? Split::train : (i < n_train + n_val_pairs ? Split::val : Split::test);
  }
  for (auto& it : positives) d.items.push_back(std::move(it));
  for (auto& it : negatives) d.items.push_back(std::move(it));
  return d;
}

/// Next-token prediction after the first two tokens of ABA or ABB triples.
inline LabeledDataset build_prediction_task(AbstractPattern pattern, const TaskSpec& spec) {
  if (pattern != AbstractPattern::ABA && pattern != AbstractPattern::ABB) {
    throw std::invalid_argument("prediction tasks are defined for ABA and ABB only");
  }
  spec.fractions.validate();
  detail::TaskRng rng(spec.seed);
  LabeledDataset d;
  d.task = pattern == AbstractPattern::ABA ? "pred-aba" : "pred-abb";
  d.mode = TaskMode::prediction;
  d.context = 2;
  d.vocabulary = Vocabulary::letters(spec.resolved_vocab());

  auto [train_letters, held_letters] = detail::split_vocabulary(d.vocabulary.size(), rng);
  for (const Triple& t : enumerate_triples(train_letters, pattern)) d.items.push_back({{t[0], t[1]}, t[2], Split::train});
  std::vector<std::vector<Item>> held(1);
  for (const Triple& t : enumerate_triples(held_letters, pattern)) held[0].push_back({{t[0], t[1]}, t[2], Split::test});
  detail::add_held_out(d, held, detail::val_share(spec.fractions), rng);
  return d;
}

/// Four classes crossing {ABA, ABB} with {a**, b**}. 'a' and 'b' occur in
/// every split; the remaining letters are split 10 for training and 6 held
/// out (for the default 18-letter vocabulary). Training middle tokens come
/// from the training pool, held-out middle tokens only from the held-out
/// letters, so no sequence occurs in more than one split.
inline LabeledDataset build_mixed_task(const TaskSpec& spec) {
  spec.fractions.validate();
  const std::size_t k = spec.resolved_vocab();
  if (k < 6) throw InfeasibleTaskError("mixed task needs at least 6 letters");
  detail::TaskRng rng(spec.seed);
  LabeledDataset d;
  d.task = std::string(to_string(TaskId::mixed4));
  d.mode = TaskMode::classification;
  d.context = 3;
  d.vocabulary = Vocabulary::letters(k);
  d.classes = {"ABA,a**", "ABB,a**", "ABA,b**", "ABB,b**"};

  std::vector<std::size_t> rest;
  for (std::size_t i = 2; i < k; ++i) rest.push_back(i);
  std::shuffle(rest.begin(), rest.end(), rng);
  const std::size_t n_held = (rest.size() * 3) / 8;  // 6 of 16
  std::vector<std::size_t> held(rest.end() - static_cast<std::ptrdiff_t>(n_held), rest.end());
  std::vector<std::size_t> train_pool(rest.begin(), rest.end() - static_cast<std::ptrdiff_t>(n_held));
  train_pool.push_back(0);
  train_pool.push_back(1);
  std::sort(held.begin(), held.end());
  std::sort(train_pool.begin(), train_pool.end());

  auto make = [](std::size_t first, std::size_t mid, bool aba) {
    return std::vector<std::size_t>{first, mid, aba ? first : mid};
  };
  std::vector<std::vector<Item>> train(4), held_items(4);
  for (std::size_t c = 0; c < 4; ++c) {
    const std::size_t first = c < 2 ? 0 : 1;
    const bool aba = c % 2 == 0;
    for (std::size_t m : train_pool)
      if (m != first) train[c].push_back({make(first, m, aba), c, Split::train});
    for (std::size_t m : held) held_items[c].push_back({make(first, m, aba), c, Split::test});
  }
  const std::size_t per_class = held.size();
  for (auto& items : train) {
    if (items.size() < per_class) {
      throw InfeasibleTaskError("mixed task: " + std::to_string(items.size()) + " training items per class, need " +
                                std::to_string(per_class));
    }
    for (auto& it : detail::sample(items, per_class, rng)) d.items.push_back(std::move(it));
  }
  detail::add_held_out(d, held_items, detail::val_share(spec.fractions), rng);
  return d;
}

/// Builds any task by id.
inline LabeledDataset build_task(const TaskSpec& spec) {
  switch (spec.id) {
    case TaskId::pred_aba: return build_prediction_task(AbstractPattern::ABA, spec);
    case TaskId::pred_abb: return build_prediction_task(AbstractPattern::ABB, spec);
    case TaskId::mixed4: return build_mixed_task(spec);
    default: return build_classification_task(spec);
  }
}

}  // namespace rbp
