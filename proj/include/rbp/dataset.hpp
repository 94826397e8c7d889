#pragma once

// Token datasets shared by the synthetic tasks and corpus windows, plus the
// versioned JSON file format:
//
//   {
//     "format": "rbp-dataset", "version": 1,
//     "task": "1a", "mode": "classification" | "prediction",
//     "context": 3,
//     "vocabulary": ["a", "b", ...],
//     "classes": ["ABA", "other"],          // classification only
//     "items": [ {"tokens": [0, 1, 0], "label": 0, "split": "train"}, ... ]
//   }
//
// Prediction items carry "target" (a vocabulary index) instead of "label".

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace rbp {

enum class Split { train, val, test };
enum class TaskMode { classification, prediction };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split: " + std::string(s));
}

inline std::string_view to_string(TaskMode m) {
  return m == TaskMode::classification ? "classification" : "prediction";
}

inline TaskMode parse_mode(std::string_view s) {
  if (s == "classification") return TaskMode::classification;
  if (s == "prediction") return TaskMode::prediction;
  throw std::invalid_argument("unknown task mode: " + std::string(s));
}

/// Ordered set of distinct token symbols.
class Vocabulary {
 public:
  Vocabulary() = default;
  explicit Vocabulary(std::vector<std::string> symbols) : symbols_(std::move(symbols)) {
    std::set<std::string> seen;
    for (const auto& s : symbols_) {
      if (!seen.insert(s).second) throw std::invalid_argument("vocabulary: duplicate symbol '" + s + "'");
    }
  }

  /// The first k lower-case letters a, b, c, ...
  static Vocabulary letters(std::size_t k) {
    if (k == 0 || k > 26) throw std::invalid_argument("vocabulary: letter count must be in 1..26");
    std::vector<std::string> s;
    for (std::size_t i = 0; i < k; ++i) s.emplace_back(1, static_cast<char>('a' + i));
    return Vocabulary(std::move(s));
  }

  std::size_t size() const noexcept { return symbols_.size(); }
  const std::string& symbol(std::size_t i) const { return symbols_.at(i); }
  const std::vector<std::string>& symbols() const noexcept { return symbols_; }

  std::size_t index_of(std::string_view s) const {
    auto it = std::find(symbols_.begin(), symbols_.end(), s);
    if (it == symbols_.end()) throw std::out_of_range("vocabulary: unknown symbol '" + std::string(s) + "'");
    return static_cast<std::size_t>(it - symbols_.begin());
  }

  friend bool operator==(const Vocabulary&, const Vocabulary&) = default;

 private:
  std::vector<std::string> symbols_;
};

/// One sequence with its class label (classification) or next token (prediction).
struct Item {
  std::vector<std::size_t> tokens;
  std::size_t target = 0;
  Split split = Split::train;

  friend bool operator==(const Item&, const Item&) = default;
};

struct LabeledDataset {
  std::string task;
  TaskMode mode = TaskMode::classification;
  std::size_t context = 3;
  Vocabulary vocabulary;
  std::vector<std::string> classes;
  std::vector<Item> items;

  std::size_t output_size() const { return mode == TaskMode::classification ? classes.size() : vocabulary.size(); }

  std::vector<Item> subset(Split s) const {
    std::vector<Item> out;
    std::copy_if(items.begin(), items.end(), std::back_inserter(out), [s](const Item& it) { return it.split == s; });
    return out;
  }

  std::size_t count(Split s) const {
    return static_cast<std::size_t>(
        std::count_if(items.begin(), items.end(), [s](const Item& it) { return it.split == s; }));
  }

  /// Distinct tokens (inputs and prediction targets) used by one split.
  std::set<std::size_t> tokens_in(Split s) const {
    std::set<std::size_t> out;
    for (const auto& it : items) {
      if (it.split != s) continue;
      out.insert(it.tokens.begin(), it.tokens.end());
      if (mode == TaskMode::prediction) out.insert(it.target);
    }
    return out;
  }

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;
};

inline constexpr int kDatasetFormatVersion = 1;

inline nlohmann::json to_json(const LabeledDataset& d) {
  nlohmann::json items = nlohmann::json::array();
  for (const auto& it : d.items) {
    nlohmann::json j;
    j["tokens"] = it.tokens;
    j[d.mode == TaskMode::classification ? "label" : "target"] = it.target;
    j["split"] = std::string(to_string(it.split));
    items.push_back(std::move(j));
  }
  nlohmann::json j;
  j["format"] = "rbp-dataset";
  j["version"] = kDatasetFormatVersion;
  j["task"] = d.task;
  j["mode"] = std::string(to_string(d.mode));
  j["context"] = d.context;
  j["vocabulary"] = d.vocabulary.symbols();
  if (d.mode == TaskMode::classification) j["classes"] = d.classes;
  j["items"] = std::move(items);
  return j;
}

inline LabeledDataset dataset_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "rbp-dataset") throw std::runtime_error("dataset: not an rbp-dataset document");
  if (j.at("version").get<int>() != kDatasetFormatVersion) {
    throw std::runtime_error("dataset: unsupported version " + j.at("version").dump());
  }
  LabeledDataset d;
  d.task = j.at("task").get<std::string>();
  d.mode = parse_mode(j.at("mode").get<std::string>());
  d.context = j.at("context").get<std::size_t>();
  d.vocabulary = Vocabulary(j.at("vocabulary").get<std::vector<std::string>>());
  if (d.mode == TaskMode::classification) d.classes = j.at("classes").get<std::vector<std::string>>();
  const char* key = d.mode == TaskMode::classification ? "label" : "target";
  for (const auto& ji : j.at("items")) {
    Item it;
    it.tokens = ji.at("tokens").get<std::vector<std::size_t>>();
    it.target = ji.at(key).get<std::size_t>();
    it.split = parse_split(ji.at("split").get<std::string>());
    for (std::size_t t : it.tokens) {
      if (t >= d.vocabulary.size()) throw std::runtime_error("dataset: token index out of vocabulary range");
    }
    if (it.target >= d.output_size()) throw std::runtime_error("dataset: label/target out of range");
    d.items.push_back(std::move(it));
  }
  return d;
}

inline void write_dataset(const LabeledDataset& d, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << to_json(d).dump(1) << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline LabeledDataset read_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  return dataset_from_json(nlohmann::json::parse(in));
}

}  // namespace rbp
