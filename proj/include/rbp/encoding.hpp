#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "rbp/tensor.hpp"

namespace rbp {

inline Tensor one_hot_encode(std::size_t index, std::size_t k) {
  if (index >= k) {
    throw std::out_of_range("one_hot_encode: index " + std::to_string(index) + " outside vocabulary of " +
                            std::to_string(k));
  }
  Tensor t({k}, 0.0);
  t[index] = 1.0;
  return t;
}

inline bool is_one_hot(const Tensor& t) {
  std::size_t ones = 0;
  for (double v : t.values()) {
    if (v == 1.0) {
      ++ones;
    } else if (v != 0.0) {
      return false;
    }
  }
  return ones == 1;
}

inline std::vector<Tensor> one_hot_sequence(std::span<const std::size_t> tokens, std::size_t k) {
  std::vector<Tensor> out;
  out.reserve(tokens.size());
  for (std::size_t t : tokens) out.push_back(one_hot_encode(t, k));
  return out;
}

/// Concatenated encoding of a whole sequence (n tokens -> n*k values), the
/// feed-forward input layout.
inline Tensor one_hot_concat(std::span<const std::size_t> tokens, std::size_t k) {
  Tensor t({tokens.size() * k}, 0.0);
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i] >= k) throw std::out_of_range("one_hot_concat: token outside vocabulary");
    t[i * k + tokens[i]] = 1.0;
  }
  return t;
}

/// [batch x k] one-hot matrix for position `pos` of every sequence.
inline Tensor one_hot_batch(std::span<const std::vector<std::size_t>> seqs, std::size_t pos, std::size_t k) {
  Tensor t = Tensor::matrix(seqs.size(), k);
  for (std::size_t b = 0; b < seqs.size(); ++b) {
    const std::size_t tok = seqs[b].at(pos);
    if (tok >= k) throw std::out_of_range("one_hot_batch: token " + std::to_string(tok) + " outside vocabulary");
    t(b, tok) = 1.0;
  }
  return t;
}

}  // namespace rbp
