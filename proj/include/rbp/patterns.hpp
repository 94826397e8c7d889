#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rbp {

using Triple = std::array<std::size_t, 3>;

/// Equality structure of a token triple (alpha, beta, gamma).
enum class AbstractPattern { AAA, AAB, ABA, ABB, ABC };

inline constexpr std::array<AbstractPattern, 5> kAllPatterns = {
    AbstractPattern::AAA, AbstractPattern::AAB, AbstractPattern::ABA, AbstractPattern::ABB, AbstractPattern::ABC};

inline std::string_view to_string(AbstractPattern p) {
  switch (p) {
    case AbstractPattern::AAA: return "AAA";
    case AbstractPattern::AAB: return "AAB";
    case AbstractPattern::ABA: return "ABA";
    case AbstractPattern::ABB: return "ABB";
    case AbstractPattern::ABC: return "ABC";
  }
  return "?";
}

inline AbstractPattern parse_pattern(std::string_view s) {
  for (AbstractPattern p : kAllPatterns) {
    if (to_string(p) == s) return p;
  }
  throw std::invalid_argument("unknown abstract pattern: " + std::string(s));
}

inline AbstractPattern classify_abstract(const Triple& t) {
  const bool ab = t[0] == t[1];
  const bool ac = t[0] == t[2];
  const bool bc = t[1] == t[2];
  if (ab && bc) return AbstractPattern::AAA;
  if (ab) return AbstractPattern::AAB;
  if (ac) return AbstractPattern::ABA;
  if (bc) return AbstractPattern::ABB;
  return AbstractPattern::ABC;
}

/// Distinct symbols a pattern needs.
inline std::size_t distinct_symbols(AbstractPattern p) {
  switch (p) {
    case AbstractPattern::AAA: return 1;
    case AbstractPattern::ABC: return 3;
    default: return 2;
  }
}

/// Per-position value constraints; nullopt is a wildcard. "a**" constrains
/// position 0, "*bc" positions 1 and 2.
using ConcretePattern = std::vector<std::optional<std::size_t>>;

inline bool matches_concrete(std::span<const std::size_t> seq, const ConcretePattern& pattern) {
  if (seq.size() != pattern.size()) return false;
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (pattern[i] && *pattern[i] != seq[i]) return false;
  }
  return true;
}

/// All triples over `symbols` with the given abstract pattern, in
/// lexicographic order of (alpha, beta, gamma) positions within `symbols`.
inline std::vector<Triple> enumerate_triples(std::span<const std::size_t> symbols, AbstractPattern p) {
  if (symbols.size() < distinct_symbols(p)) {
    throw std::invalid_argument("enumerate_triples: pattern " + std::string(to_string(p)) + " needs " +
                                std::to_string(distinct_symbols(p)) + " symbols, got " +
                                std::to_string(symbols.size()));
  }
  std::vector<Triple> out;
  for (std::size_t a : symbols) {
    for (std::size_t b : symbols) {
      if (p == AbstractPattern::AAA || p == AbstractPattern::AAB) {
        if (b != a) continue;
      } else if (b == a) {
        continue;
      }
      switch (p) {
        case AbstractPattern::AAA: out.push_back({a, a, a}); break;
        case AbstractPattern::ABA: out.push_back({a, b, a}); break;
        case AbstractPattern::ABB: out.push_back({a, b, b}); break;
        case AbstractPattern::AAB:
          for (std::size_t c : symbols)
            if (c != a) out.push_back({a, a, c});
          break;
        case AbstractPattern::ABC:
          for (std::size_t c : symbols)
            if (c != a && c != b) out.push_back({a, b, c});
          break;
      }
      if (p == AbstractPattern::AAA || p == AbstractPattern::AAB) break;
    }
  }
  return out;
}

}  // namespace rbp
