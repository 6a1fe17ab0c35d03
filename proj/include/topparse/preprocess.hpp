#pragma once

// Token normalization (number constant, unknown-word classes) and
// pretrained embedding loading.

#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <random>
#include <regex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "topparse/vocab.hpp"

namespace topparse {

inline const std::string kNumberSymbol = "<NUM>";

// Digits with optional sign, optional comma grouping and at most one
// decimal point.
inline bool is_number(const std::string& token) {
  static const std::regex pattern(R"(^[+-]?(((\d+)|(\d{1,3}(,\d{3})+))(\.\d*)?|\.\d+)$)");
  return std::regex_match(token, pattern);
}

// Unknown-word class in the Berkeley style: capitalization (with sentence
// start), digit, hyphen and a fixed list of short suffixes.
inline std::string unknown_class(const std::string& token, std::size_t position,
                                 const Vocab& vocab) {
  int caps = 0;
  bool digit = false, dash = false, lower_seen = false;
  for (unsigned char c : token) {
    if (std::isdigit(c)) digit = true;
    else if (c == '-') dash = true;
    else if (std::islower(c)) lower_seen = true;
    else if (std::isupper(c)) ++caps;
  }
  std::string lower;
  for (unsigned char c : token) lower += char(std::tolower(c));

  std::string out = "<UNK";
  unsigned char first = token.empty() ? 0 : static_cast<unsigned char>(token[0]);
  if (std::isupper(first)) {
    if (caps > 1) {
      out += "-CAPS";
    } else if (position == 0) {
      out += "-INITC";
      if (vocab.contains(lower)) out += "-KNOWNLC";
    } else {
      out += "-CAP";
    }
  } else if (caps > 0) {
    out += "-CAPS";
  } else if (lower_seen) {
    out += "-LC";
  }
  if (digit) out += "-NUM";
  if (dash) out += "-DASH";

  auto ends = [&](const char* s) {
    std::string suf(s);
    return lower.size() >= suf.size() && lower.compare(lower.size() - suf.size(), suf.size(), suf) == 0;
  };
  if (lower.size() >= 3 && lower.back() == 's') {
    char c2 = lower[lower.size() - 2];
    if (c2 != 's' && c2 != 'i' && c2 != 'u') out += "-s";
  } else if (lower.size() >= 5 && !dash && !(digit && caps > 0)) {
    for (const char* suf : {"ed", "ing", "ion", "er", "est", "ly", "ity", "y", "al"})
      if (ends(suf)) {
        out += "-";
        out += suf;
        break;
      }
  }
  out += ">";
  return out;
}

// Every symbol unknown_class can produce.
inline std::vector<std::string> all_unknown_classes() {
  std::vector<std::string> out;
  const char* caps[] = {"", "-CAPS", "-INITC", "-INITC-KNOWNLC", "-CAP", "-LC"};
  const char* sufs[] = {"", "-s", "-ed", "-ing", "-ion", "-er", "-est", "-ly", "-ity", "-y", "-al"};
  for (const char* c : caps)
    for (int num = 0; num < 2; ++num)
      for (int dash = 0; dash < 2; ++dash)
        for (const char* s : sufs)
          out.push_back(std::string("<UNK") + c + (num ? "-NUM" : "") + (dash ? "-DASH" : "") + s + ">");
  return out;
}

inline std::vector<std::string> reserved_symbols() {
  std::vector<std::string> out{kNumberSymbol};
  for (auto& s : all_unknown_classes()) out.push_back(std::move(s));
  return out;
}

// Numbers map to the constant first, then in-vocabulary tokens pass
// through, everything else maps to its unknown class.
inline std::string normalize(const std::string& token, std::size_t position, const Vocab& vocab) {
  if (is_number(token)) return kNumberSymbol;
  if (vocab.contains(token)) return token;
  return unknown_class(token, position, vocab);
}

class TokenNormalizer {
 public:
  static constexpr const char* kScheme = "berkeley-unk-v1";

  TokenNormalizer() = default;
  explicit TokenNormalizer(Vocab vocab) : vocab_(std::move(vocab)) {}

  std::string operator()(const std::string& token, std::size_t position) const {
    return normalize(token, position, vocab_);
  }

  std::vector<std::string> apply(const std::vector<std::string>& tokens) const {
    std::vector<std::string> out;
    out.reserve(tokens.size());
    for (std::size_t i = 0; i < tokens.size(); ++i) out.push_back((*this)(tokens[i], i));
    return out;
  }

  const Vocab& vocab() const { return vocab_; }

 private:
  Vocab vocab_;
};

class EmbeddingError : public std::runtime_error {
 public:
  enum class Kind { Io, RaggedDimensions, DimensionMismatch };
  EmbeddingError(Kind kind, const std::string& what, std::size_t line = 0)
      : std::runtime_error(what), kind_(kind), line_(line) {}
  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

struct EmbeddingTable {
  std::size_t dim = 0;
  std::unordered_map<std::string, std::vector<float>> vectors;
  // Vocabulary words that had no pretrained vector and were randomly initialized.
  std::vector<std::string> random_init;
  std::unordered_set<std::string> pretrained;
  bool freeze_pretrained = true;

  bool is_pretrained(const std::string& w) const { return pretrained.count(w) != 0; }
};

// Reads "word v1 ... vd" lines (an optional "count dim" header line is
// skipped), keeps the words present in `vocab`, and gives every other
// vocabulary word a seeded uniform vector.
inline EmbeddingTable load_embeddings(const std::string& path, const Vocab& vocab,
                                      std::uint64_t seed, bool freeze_pretrained = true) {
  std::ifstream in(path);
  if (!in) throw EmbeddingError(EmbeddingError::Kind::Io, "cannot open " + path);
  EmbeddingTable table;
  table.freeze_pretrained = freeze_pretrained;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream iss(line);
    std::string word;
    if (!(iss >> word)) continue;
    std::vector<float> values;
    std::string tok;
    while (iss >> tok) {
      try {
        values.push_back(std::stof(tok));
      } catch (const std::exception&) {
        throw EmbeddingError(EmbeddingError::Kind::RaggedDimensions,
                             path + ":" + std::to_string(lineno) + ": non-numeric value", lineno);
      }
    }
    if (lineno == 1 && values.size() == 1 && word.find_first_not_of("0123456789") == std::string::npos)
      continue;  // word2vec-style header
    if (values.empty())
      throw EmbeddingError(EmbeddingError::Kind::RaggedDimensions,
                           path + ":" + std::to_string(lineno) + ": no values", lineno);
    if (table.dim == 0) table.dim = values.size();
    if (values.size() != table.dim)
      throw EmbeddingError(EmbeddingError::Kind::RaggedDimensions,
                           path + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(table.dim) + " values, got " +
                               std::to_string(values.size()),
                           lineno);
    if (vocab.contains(word) && !table.vectors.count(word)) {
      table.vectors.emplace(word, std::move(values));
      table.pretrained.insert(word);
    }
  }
  if (table.dim == 0) throw EmbeddingError(EmbeddingError::Kind::Io, path + ": no vectors");
  std::mt19937_64 rng(seed);
  float bound = std::sqrt(3.0f / float(table.dim));
  std::uniform_real_distribution<float> dist(-bound, bound);
  for (const auto& w : vocab.words()) {
    if (table.vectors.count(w)) continue;
    std::vector<float> v(table.dim);
    for (auto& x : v) x = dist(rng);
    table.vectors.emplace(w, std::move(v));
    table.random_init.push_back(w);
  }
  return table;
}

}  // namespace topparse
