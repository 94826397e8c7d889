#include <gtest/gtest.h>

#include <map>
#include <set>

#include "rbp/patterns.hpp"
#include "rbp/tasks.hpp"

using namespace rbp;

namespace {

LabeledDataset build(TaskId id, std::uint64_t seed = 0) {
  TaskSpec s;
  s.id = id;
  s.seed = seed;
  return build_task(s);
}

std::map<std::size_t, std::size_t> class_counts(const LabeledDataset& d, Split s) {
  std::map<std::size_t, std::size_t> out;
  for (const Item& it : d.items)
    if (it.split == s) ++out[it.target];
  return out;
}

bool intersects(const std::set<std::size_t>& a, const std::set<std::size_t>& b) {
  for (auto x : a)
    if (b.count(x)) return true;
  return false;
}

}  // namespace

TEST(ClassificationTask, Task1aTrainClassesAreThirtyEach) {
  const auto d = build(TaskId::t1a);
  const auto c = class_counts(d, Split::train);
  EXPECT_EQ(c.at(0), 30u);
  EXPECT_EQ(c.at(1), 30u);
}

TEST(ClassificationTask, Task2NeedsNoDownsampling) {
  const auto d = build(TaskId::t2);
  const auto c = class_counts(d, Split::train);
  EXPECT_EQ(c.at(0), 30u);
  EXPECT_EQ(c.at(1), 30u);
  for (const Item& it : d.items) {
    const auto p = classify_abstract({it.tokens[0], it.tokens[1], it.tokens[2]});
    EXPECT_EQ(p, it.target == 0 ? AbstractPattern::ABA : AbstractPattern::ABB);
  }
}

TEST(ClassificationTask, LabelsFollowPatterns) {
  for (TaskId id : {TaskId::t1a, TaskId::t1b, TaskId::t3, TaskId::shared}) {
    const auto d = build(id, 5);
    const AbstractPattern positive = id == TaskId::t1b ? AbstractPattern::ABB
                                     : id == TaskId::t3 ? AbstractPattern::ABC
                                                        : AbstractPattern::ABA;
    for (const Item& it : d.items) {
      const bool pos = classify_abstract({it.tokens[0], it.tokens[1], it.tokens[2]}) == positive;
      EXPECT_EQ(it.target, pos ? 0u : 1u) << to_string(id);
    }
  }
}

TEST(ClassificationTask, OtherClassSpreadsOverPatterns) {
  // 30 "other" items over AAA (6 available), AAB, ABB, ABC: quota 8,8,7,7 with AAA capped at 6
  const auto d = build(TaskId::t1a);
  std::map<AbstractPattern, std::size_t> n;
  for (const Item& it : d.subset(Split::train))
    if (it.target == 1) ++n[classify_abstract({it.tokens[0], it.tokens[1], it.tokens[2]})];
  EXPECT_EQ(n[AbstractPattern::AAA], 6u);
  EXPECT_EQ(n[AbstractPattern::AAA] + n[AbstractPattern::AAB] + n[AbstractPattern::ABB] + n[AbstractPattern::ABC], 30u);
  EXPECT_GE(n[AbstractPattern::AAB], 7u);
  EXPECT_GE(n[AbstractPattern::ABC], 7u);
}

TEST(ClassificationTask, BalancedInEverySplit) {
  for (TaskId id : kAllTasks) {
    if (task_mode(id) != TaskMode::classification) continue;
    for (std::uint64_t seed : {0u, 1u, 9u}) {
      const auto d = build(id, seed);
      for (Split s : {Split::train, Split::val, Split::test}) {
        const auto c = class_counts(d, s);
        ASSERT_EQ(c.size(), d.classes.size()) << to_string(id);
        for (auto [cls, n] : c) EXPECT_EQ(n, c.begin()->second) << to_string(id) << " " << to_string(s);
      }
    }
  }
}

TEST(ClassificationTask, HeldOutVocabularyIsDisjoint) {
  for (TaskId id : {TaskId::t1a, TaskId::t1b, TaskId::t2, TaskId::t3, TaskId::pred_aba, TaskId::pred_abb}) {
    const auto d = build(id, 3);
    const auto train = d.tokens_in(Split::train);
    EXPECT_FALSE(intersects(train, d.tokens_in(Split::val))) << to_string(id);
    EXPECT_FALSE(intersects(train, d.tokens_in(Split::test))) << to_string(id);
    EXPECT_EQ(train.size(), 6u);
  }
}

TEST(ClassificationTask, SplitsDoNotShareSequences) {
  for (TaskId id : kAllTasks) {
    const auto d = build(id, 2);
    std::map<std::vector<std::size_t>, std::set<Split>> where;
    for (const Item& it : d.items) where[it.tokens].insert(it.split);
    for (const auto& [seq, splits] : where) EXPECT_EQ(splits.size(), 1u) << to_string(id);
  }
}

TEST(ClassificationTask, SplitFractionsAreHalfQuarterQuarter) {
  const auto d = build(TaskId::t1a);
  EXPECT_EQ(d.count(Split::train), 60u);
  EXPECT_EQ(d.count(Split::val), 30u);
  EXPECT_EQ(d.count(Split::test), 30u);
}

TEST(ClassificationTask, DeterministicPerSeed) {
  EXPECT_EQ(build(TaskId::t3, 4), build(TaskId::t3, 4));
  std::set<std::set<std::size_t>> vocab_splits;
  for (std::uint64_t s = 0; s < 6; ++s) vocab_splits.insert(build(TaskId::t1a, s).tokens_in(Split::train));
  EXPECT_GT(vocab_splits.size(), 1u);
}

TEST(ClassificationTask, RejectsBadFractions) {
  TaskSpec s;
  s.fractions = {0.5, 0.5, 0.5};
  EXPECT_THROW(build_task(s), std::invalid_argument);
}

TEST(ClassificationTask, InfeasibleBalanceRejected) {
  // 4 letters: 2 train letters cannot form any ABC triple
  TaskSpec s;
  s.id = TaskId::t3;
  s.vocab_size = 4;
  EXPECT_ANY_THROW(build_task(s));
}

TEST(SharedTask, OrientationsNeverShareASplit) {
  const auto d = build(TaskId::shared, 1);
  std::map<std::pair<std::size_t, std::size_t>, std::vector<Split>> orient;
  for (const Item& it : d.items) {
    if (it.target != 0) continue;
    const auto key = std::minmax(it.tokens[0], it.tokens[1]);
    orient[{key.first, key.second}].push_back(it.split);
  }
  EXPECT_EQ(orient.size(), 66u);
  for (const auto& [pair, splits] : orient) {
    ASSERT_EQ(splits.size(), 2u);
    EXPECT_NE(splits[0], splits[1]);
    EXPECT_TRUE(splits[0] == Split::train || splits[1] == Split::train);
  }
}

TEST(PredictionTask, ItemsAreContextAndTarget) {
  const auto d = build(TaskId::pred_aba);
  EXPECT_EQ(d.count(Split::train), 30u);
  EXPECT_EQ(d.context, 2u);
  EXPECT_EQ(d.output_size(), 12u);
  for (const Item& it : d.items) {
    ASSERT_EQ(it.tokens.size(), 2u);
    EXPECT_EQ(it.target, it.tokens[0]);
    EXPECT_NE(it.tokens[0], it.tokens[1]);
  }
  for (const Item& it : build(TaskId::pred_abb).items) EXPECT_EQ(it.target, it.tokens[1]);
}

TEST(PredictionTask, OnlyAbaAndAbb) {
  EXPECT_THROW(build_prediction_task(AbstractPattern::ABC, TaskSpec{}), std::invalid_argument);
}

TEST(MixedTask, ClassesFollowFirstTokenAndPattern) {
  const auto d = build(TaskId::mixed4, 2);
  EXPECT_EQ(d.vocabulary.size(), 18u);
  EXPECT_EQ(d.classes.size(), 4u);
  for (const Item& it : d.items) {
    const auto p = classify_abstract({it.tokens[0], it.tokens[1], it.tokens[2]});
    ASSERT_TRUE(it.tokens[0] == 0 || it.tokens[0] == 1);
    const std::size_t expected = (it.tokens[0] == 0 ? 0 : 2) + (p == AbstractPattern::ABA ? 0 : 1);
    ASSERT_TRUE(p == AbstractPattern::ABA || p == AbstractPattern::ABB);
    EXPECT_EQ(it.target, expected);
  }
}

TEST(MixedTask, SharedLettersInEverySplitOtherwiseDisjoint) {
  const auto d = build(TaskId::mixed4, 6);
  auto strip = [](std::set<std::size_t> s) {
    s.erase(0);
    s.erase(1);
    return s;
  };
  for (Split s : {Split::train, Split::val, Split::test}) {
    const auto t = d.tokens_in(s);
    EXPECT_TRUE(t.count(0) && t.count(1)) << to_string(s);
  }
  const auto train = strip(d.tokens_in(Split::train));
  EXPECT_FALSE(intersects(train, strip(d.tokens_in(Split::val))));
  EXPECT_FALSE(intersects(train, strip(d.tokens_in(Split::test))));
}

TEST(TaskNames, RoundTrip) {
  for (TaskId t : kAllTasks) EXPECT_EQ(parse_task(to_string(t)), t);
  EXPECT_THROW(parse_task("4"), std::invalid_argument);
}
