#pragma once

// Corpus ingestion (raw \t tokenized \t tree), vocabularies, and corpus
// statistics with their JSON / CSV renderings.

#include <algorithm>
#include <cstddef>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "topparse/preprocess.hpp"
#include "topparse/treebank.hpp"
#include "topparse/vocab.hpp"

namespace topparse {

struct Example {
  std::string raw_utterance;
  std::vector<std::string> tokens;
  Tree tree;
};

enum class Split { Train, Valid, Test, Unsplit };

struct Corpus {
  std::vector<Example> examples;
  Split split = Split::Unsplit;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
};

class IngestError : public std::runtime_error {
 public:
  enum class Kind { Io, Empty, BadColumnCount, TreeFormat, ConstraintViolation, TokenMismatch };

  IngestError(Kind kind, std::size_t line, const std::string& what)
      : std::runtime_error(what), kind_(kind), line_(line) {}

  Kind kind() const { return kind_; }
  std::size_t line() const { return line_; }

  static const char* kind_name(Kind k) {
    switch (k) {
      case Kind::Io: return "Io";
      case Kind::Empty: return "Empty";
      case Kind::BadColumnCount: return "BadColumnCount";
      case Kind::TreeFormat: return "TreeFormat";
      case Kind::ConstraintViolation: return "ConstraintViolation";
      case Kind::TokenMismatch: return "TokenMismatch";
    }
    return "?";
  }

 private:
  Kind kind_;
  std::size_t line_;
};

struct Rejection {
  std::size_t line = 0;
  IngestError::Kind kind = IngestError::Kind::TreeFormat;
  std::string message;
};

struct LoadResult {
  Corpus corpus;
  std::vector<Rejection> rejected;
};

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t start = 0;
  for (;;) {
    std::size_t tab = line.find('\t', start);
    cols.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return cols;
}

inline std::vector<std::string> split_spaces(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

// Throws IngestError for a malformed line.
inline Example parse_tsv_line(const std::string& raw_line, std::size_t lineno) {
  std::string line = raw_line;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto cols = split_tabs(line);
  if (cols.size() != 3)
    throw IngestError(IngestError::Kind::BadColumnCount, lineno,
                      "line " + std::to_string(lineno) + ": expected 3 columns, got " +
                          std::to_string(cols.size()));
  Example ex;
  ex.raw_utterance = cols[0];
  ex.tokens = split_spaces(cols[1]);
  try {
    ex.tree = parse_bracketed(cols[2]);
  } catch (const FormatError& e) {
    throw IngestError(IngestError::Kind::TreeFormat, lineno,
                      "line " + std::to_string(lineno) + ": " + e.what());
  }
  if (ex.tree.tokens != ex.tokens)
    throw IngestError(IngestError::Kind::TokenMismatch, lineno,
                      "line " + std::to_string(lineno) + ": tokenized column differs from tree yield");
  auto violations = validate(ex.tree);
  if (!violations.empty())
    throw IngestError(IngestError::Kind::ConstraintViolation, lineno,
                      "line " + std::to_string(lineno) + ": " +
                          constraint_name(violations[0].constraint) + " at " +
                          violations[0].path_string());
  return ex;
}

}  // namespace detail

// Loads a three-column TSV. In strict mode the first bad line aborts the
// load; otherwise bad lines are skipped and reported.
inline LoadResult load_tsv(std::istream& in, bool strict, Split split = Split::Unsplit) {
  LoadResult result;
  result.corpus.split = split;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    try {
      result.corpus.examples.push_back(detail::parse_tsv_line(line, lineno));
    } catch (const IngestError& e) {
      if (strict) throw;
      result.rejected.push_back({lineno, e.kind(), e.what()});
    }
  }
  if (result.corpus.empty())
    throw IngestError(IngestError::Kind::Empty, lineno, "corpus is empty");
  return result;
}

inline LoadResult load_tsv(const std::string& path, bool strict, Split split = Split::Unsplit) {
  std::ifstream in(path);
  if (!in) throw IngestError(IngestError::Kind::Io, 0, "cannot open " + path);
  return load_tsv(in, strict, split);
}

inline std::string to_tsv_line(const Example& ex) {
  std::string tok;
  for (std::size_t i = 0; i < ex.tokens.size(); ++i) {
    if (i) tok += ' ';
    tok += ex.tokens[i];
  }
  return ex.raw_utterance + '\t' + tok + '\t' + serialize(ex.tree);
}

struct CorpusStats {
  std::size_t count = 0;
  std::size_t intent_label_count = 0;
  std::size_t slot_label_count = 0;
  std::map<std::size_t, std::size_t> depth_histogram;
  std::map<std::size_t, std::size_t> length_histogram;
  std::size_t median_depth = 0;
  double mean_depth = 0.0;
  std::size_t median_length = 0;
  double mean_length = 0.0;
  double fraction_depth_gt_2 = 0.0;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

namespace detail {

// Lower median of a histogram.
inline std::size_t histogram_median(const std::map<std::size_t, std::size_t>& h, std::size_t n) {
  std::size_t target = (n - 1) / 2, seen = 0;
  for (const auto& [value, count] : h) {
    seen += count;
    if (seen > target) return value;
  }
  return 0;
}

inline double histogram_mean(const std::map<std::size_t, std::size_t>& h, std::size_t n) {
  double total = 0.0;
  for (const auto& [value, count] : h) total += double(value) * double(count);
  return total / double(n);
}

inline void collect_labels(const Node& node, std::map<std::string, int>& intents,
                           std::map<std::string, int>& slots) {
  if (node.is_token()) return;
  (node.label().is_intent() ? intents : slots)[node.label().name]++;
  for (const Node& c : node.children()) collect_labels(c, intents, slots);
}

}  // namespace detail

inline CorpusStats compute_stats(const std::vector<Example>& examples) {
  if (examples.empty()) throw std::invalid_argument("compute_stats: empty corpus");
  CorpusStats s;
  s.count = examples.size();
  std::map<std::string, int> intents, slots;
  std::size_t deep = 0;
  for (const auto& ex : examples) {
    std::size_t d = depth(ex.tree);
    s.depth_histogram[d]++;
    s.length_histogram[ex.tokens.size()]++;
    if (d > 2) ++deep;
    detail::collect_labels(ex.tree.root, intents, slots);
  }
  s.intent_label_count = intents.size();
  s.slot_label_count = slots.size();
  s.median_depth = detail::histogram_median(s.depth_histogram, s.count);
  s.mean_depth = detail::histogram_mean(s.depth_histogram, s.count);
  s.median_length = detail::histogram_median(s.length_histogram, s.count);
  s.mean_length = detail::histogram_mean(s.length_histogram, s.count);
  s.fraction_depth_gt_2 = double(deep) / double(s.count);
  return s;
}

inline CorpusStats compute_stats(const Corpus& corpus) { return compute_stats(corpus.examples); }

inline nlohmann::json stats_to_json(const CorpusStats& s) {
  nlohmann::json j;
  j["count"] = s.count;
  j["intent_label_count"] = s.intent_label_count;
  j["slot_label_count"] = s.slot_label_count;
  j["median_depth"] = s.median_depth;
  j["mean_depth"] = s.mean_depth;
  j["median_length"] = s.median_length;
  j["mean_length"] = s.mean_length;
  j["fraction_depth_gt_2"] = s.fraction_depth_gt_2;
  auto hist = [](const std::map<std::size_t, std::size_t>& h) {
    nlohmann::json a = nlohmann::json::object();
    for (const auto& [k, v] : h) a[std::to_string(k)] = v;
    return a;
  };
  j["depth_histogram"] = hist(s.depth_histogram);
  j["length_histogram"] = hist(s.length_histogram);
  return j;
}

inline std::string histogram_csv(const std::map<std::size_t, std::size_t>& h,
                                 const std::string& key) {
  std::string out = key + ",count\n";
  for (const auto& [k, v] : h) out += std::to_string(k) + "," + std::to_string(v) + "\n";
  return out;
}

struct Vocabularies {
  Vocab tokens;
  Vocab intents;
  Vocab slots;
};

// Token vocabulary = reserved symbols followed by every non-numeric token
// seen at least `min_count` times (sorted). Label sets are exhaustive.
inline Vocabularies build_vocabs(const std::vector<Example>& examples, std::size_t min_count) {
  if (examples.empty()) throw std::invalid_argument("build_vocabs: empty corpus");
  if (min_count < 1) throw std::invalid_argument("build_vocabs: min_count must be >= 1");
  std::map<std::string, std::size_t> freq;
  std::map<std::string, int> intents, slots;
  for (const auto& ex : examples) {
    for (const auto& t : ex.tokens)
      if (!is_number(t)) freq[t]++;
    detail::collect_labels(ex.tree.root, intents, slots);
  }
  Vocabularies v;
  for (const auto& r : reserved_symbols()) v.tokens.add(r);
  for (const auto& [w, n] : freq)
    if (n >= min_count) v.tokens.add(w);
  for (const auto& [name, n] : intents) v.intents.add(name);
  for (const auto& [name, n] : slots) v.slots.add(name);
  return v;
}

inline Vocabularies build_vocabs(const Corpus& corpus, std::size_t min_count) {
  return build_vocabs(corpus.examples, min_count);
}

}  // namespace topparse
