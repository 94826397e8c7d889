#pragma once

// Real-world sequence ingestion: character streams from UTF-8 text and
// integer symbol streams (one sequence per line), windowed into next-token
// prediction datasets.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "rbp/dataset.hpp"

namespace rbp {

enum class CorpusMode { text, symbols };

inline std::string_view to_string(CorpusMode m) { return m == CorpusMode::text ? "text" : "symbols"; }

inline CorpusMode parse_corpus_mode(std::string_view s) {
  if (s == "text") return CorpusMode::text;
  if (s == "symbols") return CorpusMode::symbols;
  throw std::invalid_argument("unknown corpus mode: " + std::string(s));
}

struct Corpus {
  std::vector<std::vector<std::size_t>> sequences;  // windows never cross sequence boundaries
  Vocabulary vocabulary;                             // first-occurrence order
  std::string source;
  CorpusMode mode = CorpusMode::text;

  std::size_t token_count() const {
    std::size_t n = 0;
    for (const auto& s : sequences) n += s.size();
    return n;
  }

  friend bool operator==(const Corpus&, const Corpus&) = default;
};

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

/// Splits UTF-8 text into code points; nullopt at the byte offset of the first invalid sequence.
inline std::optional<std::vector<std::string>> utf8_code_points(const std::string& s, std::size_t* bad_offset) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto b = static_cast<unsigned char>(s[i]);
    std::size_t len = 0;
    std::uint32_t cp = 0;
    if (b < 0x80) {
      len = 1, cp = b;
    } else if ((b & 0xE0) == 0xC0) {
      len = 2, cp = b & 0x1F;
    } else if ((b & 0xF0) == 0xE0) {
      len = 3, cp = b & 0x0F;
    } else if ((b & 0xF8) == 0xF0) {
      len = 4, cp = b & 0x07;
    }
    bool ok = len > 0 && i + len <= s.size();
    for (std::size_t k = 1; ok && k < len; ++k) {
      const auto c = static_cast<unsigned char>(s[i + k]);
      ok = (c & 0xC0) == 0x80;
      cp = (cp << 6) | (c & 0x3F);
    }
    // overlong forms, surrogates and out-of-range values
    static constexpr std::uint32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (ok && (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF))) ok = false;
    if (!ok) {
      if (bad_offset) *bad_offset = i;
      return std::nullopt;
    }
    out.push_back(s.substr(i, len));
    i += len;
  }
  return out;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorpusError("cannot read corpus file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Maps symbols to indices, growing the vocabulary in first-occurrence order.
class VocabularyBuilder {
 public:
  std::size_t index(const std::string& s) {
    auto [it, fresh] = index_.emplace(s, symbols_.size());
    if (fresh) symbols_.push_back(s);
    return it->second;
  }
  Vocabulary finish() { return Vocabulary(std::move(symbols_)); }

 private:
  std::map<std::string, std::size_t> index_;
  std::vector<std::string> symbols_;
};

}  // namespace detail

/// One code point per token; case and whitespace are kept as tokens.
inline Corpus text_corpus(const std::string& text, const std::string& source = "<memory>") {
  if (text.empty()) throw CorpusError("empty corpus: " + source);
  std::size_t bad = 0;
  auto points = detail::utf8_code_points(text, &bad);
  if (!points) throw CorpusError("invalid UTF-8 at byte " + std::to_string(bad) + " in " + source);
  detail::VocabularyBuilder vb;
  std::vector<std::size_t> seq;
  seq.reserve(points->size());
  for (const auto& p : *points) seq.push_back(vb.index(p));
  return Corpus{{std::move(seq)}, vb.finish(), source, CorpusMode::text};
}

inline Corpus ingest_text(const std::string& path) { return text_corpus(detail::read_file(path), path); }

/// Newline-separated sequences of whitespace-separated integers. Blank lines are skipped.
inline Corpus symbols_corpus(const std::string& text, const std::string& source = "<memory>") {
  detail::VocabularyBuilder vb;
  std::vector<std::vector<std::size_t>> seqs;
  std::istringstream lines(text);
  std::string line;
  for (std::size_t lineno = 1; std::getline(lines, line); ++lineno) {
    std::istringstream words(line);
    std::vector<std::size_t> seq;
    for (std::string w; words >> w;) {
      std::size_t used = 0;
      long long v = 0;
      try {
        v = std::stoll(w, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != w.size()) {
        throw CorpusError(source + ": line " + std::to_string(lineno) + ": not an integer: '" + w + "'");
      }
      seq.push_back(vb.index(std::to_string(v)));
    }
    if (!seq.empty()) seqs.push_back(std::move(seq));
  }
  if (seqs.empty()) throw CorpusError("empty corpus: " + source);
  return Corpus{std::move(seqs), vb.finish(), source, CorpusMode::symbols};
}

inline Corpus ingest_symbols(const std::string& path) { return symbols_corpus(detail::read_file(path), path); }

/// Contiguous train/val/test fractions; must sum to 1.
struct CorpusFractions {
  double train = 0.5;
  double val = 0.25;
  double test = 0.25;

  void validate() const {
    if (train <= 0 || val < 0 || test < 0 || std::abs(train + val + test - 1.0) > 1e-9) {
      throw std::invalid_argument("corpus fractions must be non-negative, train positive, and sum to 1");
    }
  }
};

/// Number of windows: sum over sequences of max(0, len - context).
inline std::size_t window_count(const Corpus& c, std::size_t context) {
  std::size_t n = 0;
  for (const auto& s : c.sequences) n += s.size() > context ? s.size() - context : 0;
  return n;
}

/// Stride-1 windows of `context` tokens followed by the target token. Splits
/// are contiguous blocks of windows in corpus order (no shuffling, so nearly
/// identical overlapping windows do not leak across splits).
inline LabeledDataset windowize(const Corpus& c, std::size_t context, CorpusFractions f = {}) {
  if (context == 0) throw std::invalid_argument("windowize: context length must be at least 1");
  f.validate();
  const std::size_t n = window_count(c, context);
  if (n == 0) {
    throw CorpusError("corpus " + c.source + " has no sequence longer than the context (" + std::to_string(context) +
                      ")");
  }
  const auto n_train = static_cast<std::size_t>(std::llround(f.train * static_cast<double>(n)));
  const auto n_val = static_cast<std::size_t>(std::llround(f.val * static_cast<double>(n)));

  LabeledDataset d;
  d.task = "corpus:" + c.source;
  d.mode = TaskMode::prediction;
  d.context = context;
  d.vocabulary = c.vocabulary;
  d.items.reserve(n);
  std::size_t k = 0;
  for (const auto& seq : c.sequences) {
    for (std::size_t start = 0; start + context < seq.size(); ++start, ++k) {
      Item it;
      it.tokens.assign(seq.begin() + static_cast<std::ptrdiff_t>(start),
                       seq.begin() + static_cast<std::ptrdiff_t>(start + context));
      it.target = seq[start + context];
      it.split = k < n_train ? Split::train : (k < n_train + n_val ? Split::val : Split::test);
      d.items.push_back(std::move(it));
    }
  }
  return d;
}

// ---- cache -------------------------------------------------------------------

inline constexpr int kCorpusFormatVersion = 1;

inline nlohmann::json to_json(const Corpus& c) {
  return {{"format", "rbp-corpus"},
          {"version", kCorpusFormatVersion},
          {"source", c.source},
          {"mode", std::string(to_string(c.mode))},
          {"vocabulary", c.vocabulary.symbols()},
          {"sequences", c.sequences}};
}

inline Corpus corpus_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "rbp-corpus") throw CorpusError("not an rbp-corpus document");
  if (j.at("version").get<int>() != kCorpusFormatVersion) {
    throw CorpusError("unsupported corpus version " + j.at("version").dump());
  }
  Corpus c;
  c.source = j.at("source").get<std::string>();
  c.mode = parse_corpus_mode(j.at("mode").get<std::string>());
  c.vocabulary = Vocabulary(j.at("vocabulary").get<std::vector<std::string>>());
  c.sequences = j.at("sequences").get<std::vector<std::vector<std::size_t>>>();
  for (const auto& s : c.sequences) {
    for (std::size_t t : s) {
      if (t >= c.vocabulary.size()) throw CorpusError("corpus cache: token index out of vocabulary range");
    }
  }
  return c;
}

inline void write_corpus(const Corpus& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << to_json(c).dump() << '\n';
  if (!out) throw std::runtime_error("write failed: " + path);
}

inline Corpus read_corpus(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open: " + path);
  return corpus_from_json(nlohmann::json::parse(in));
}

// ---- synthetic repetition corpus ---------------------------------------------

struct RepetitionCorpusSpec {
  std::size_t length = 2000;
  std::size_t vocab = 10;
  std::size_t context = 5;
  double repeat_probability = 0.5;
  std::uint64_t seed = 0;
  std::size_t lag = 0;  // 0: uniform over 1..context; otherwise always copy from this many steps back
};

/// Each token after the first `context` copies an earlier token with
/// probability `repeat_probability` (from a uniformly chosen 1..context steps
/// back, or from a fixed `lag`) and is otherwise drawn uniformly from the
/// vocabulary.
inline Corpus make_repetition_corpus(const RepetitionCorpusSpec& s) {
  if (s.vocab < 2 || s.context == 0 || s.length <= s.context) {
    throw std::invalid_argument("repetition corpus: need vocab >= 2, context >= 1, length > context");
  }
  if (s.repeat_probability < 0.0 || s.repeat_probability > 1.0) {
    throw std::invalid_argument("repetition corpus: repeat probability outside [0, 1]");
  }
  if (s.lag > s.context) throw std::invalid_argument("repetition corpus: lag exceeds the context length");
  std::mt19937_64 rng(s.seed);
  std::uniform_int_distribution<std::size_t> token(0, s.vocab - 1);
  std::uniform_int_distribution<std::size_t> back(1, s.context);
  std::bernoulli_distribution repeat(s.repeat_probability);
  std::vector<std::size_t> raw;
  raw.reserve(s.length);
  for (std::size_t i = 0; i < s.length; ++i) {
    raw.push_back(i >= s.context && repeat(rng) ? raw[i - (s.lag ? s.lag : back(rng))] : token(rng));
  }
  // Reindex in first-occurrence order so the vocabulary invariant holds.
  detail::VocabularyBuilder vb;
  std::vector<std::size_t> seq;
  seq.reserve(raw.size());
  for (std::size_t t : raw) seq.push_back(vb.index("s" + std::to_string(t)));
  return Corpus{{std::move(seq)}, vb.finish(), "synthetic-repetition", CorpusMode::symbols};
}

}  // namespace rbp
