#pragma once

// Exact match, labeled bracketing P/R/F1, tree-labeled P/R/F1, tree
// validity and top-k accuracy over aligned gold/predicted trees.

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "topparse/treebank.hpp"

namespace topparse {

class LengthMismatch : public std::runtime_error {
 public:
  LengthMismatch(std::size_t gold, std::size_t pred)
      : std::runtime_error("length mismatch: " + std::to_string(gold) + " gold vs " +
                           std::to_string(pred) + " predicted") {}
};

// A prediction is either a parsed tree or an unparseable line.
using Prediction = std::optional<Tree>;

inline Prediction try_parse(const std::string& line) {
  try {
    return parse_bracketed(line);
  } catch (const FormatError&) {
    return std::nullopt;
  }
}

struct PRF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t matched = 0;
  std::size_t gold = 0;
  std::size_t predicted = 0;
};

inline double f1_score(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

inline PRF make_prf(std::size_t matched, std::size_t gold, std::size_t predicted) {
  PRF out;
  out.matched = matched;
  out.gold = gold;
  out.predicted = predicted;
  out.precision = predicted ? 100.0 * double(matched) / double(predicted) : 0.0;
  out.recall = gold ? 100.0 * double(matched) / double(gold) : 0.0;
  out.f1 = f1_score(out.precision, out.recall);
  return out;
}

// Label + span + canonical serialization of the whole subtree.
struct LabeledSubtreeItem {
  Label label;
  std::size_t start = 0;
  std::size_t end = 0;
  std::string subtree;

  friend auto operator<=>(const LabeledSubtreeItem&, const LabeledSubtreeItem&) = default;
  friend bool operator==(const LabeledSubtreeItem&, const LabeledSubtreeItem&) = default;
};

namespace detail {

inline std::size_t collect_subtrees(const Node& node, std::size_t start,
                                    std::vector<LabeledSubtreeItem>& out) {
  if (node.is_token()) return start + 1;
  std::size_t slot = out.size();
  out.push_back({node.label(), start, start, serialize(node)});
  std::size_t end = start;
  for (const Node& child : node.children()) end = collect_subtrees(child, end, out);
  out[slot].end = end;
  return end;
}

template <class T>
std::size_t multiset_overlap(const std::vector<T>& a, const std::vector<T>& b) {
  std::map<T, std::size_t> counts;
  for (const T& x : a) ++counts[x];
  std::size_t matched = 0;
  for (const T& x : b) {
    auto it = counts.find(x);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++matched;
    }
  }
  return matched;
}

inline void check_lengths(std::size_t gold, std::size_t pred) {
  if (gold != pred) throw LengthMismatch(gold, pred);
}

}  // namespace detail

inline std::vector<LabeledSubtreeItem> labeled_subtrees(const Tree& tree) {
  std::vector<LabeledSubtreeItem> out;
  detail::collect_subtrees(tree.root, 0, out);
  return out;
}

struct PairCounts {
  std::size_t bracket_matched = 0;
  std::size_t tl_matched = 0;
  std::size_t gold = 0;
  std::size_t predicted = 0;
};

inline PairCounts pair_counts(const Tree& gold, const Prediction& pred) {
  PairCounts c;
  auto gold_spans = labeled_spans(gold);
  c.gold = gold_spans.size();
  if (!pred) return c;
  auto pred_spans = labeled_spans(*pred);
  c.predicted = pred_spans.size();
  c.bracket_matched = detail::multiset_overlap(gold_spans, pred_spans);
  c.tl_matched = detail::multiset_overlap(labeled_subtrees(gold), labeled_subtrees(*pred));
  return c;
}

inline double exact_match(const std::vector<Tree>& gold, const std::vector<Prediction>& pred) {
  detail::check_lengths(gold.size(), pred.size());
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i)
    if (pred[i] && pred[i]->root == gold[i].root) ++hits;
  return 100.0 * double(hits) / double(gold.size());
}

inline PRF bracket_prf(const std::vector<Tree>& gold, const std::vector<Prediction>& pred) {
  detail::check_lengths(gold.size(), pred.size());
  std::size_t m = 0, g = 0, p = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto c = pair_counts(gold[i], pred[i]);
    m += c.bracket_matched;
    g += c.gold;
    p += c.predicted;
  }
  return make_prf(m, g, p);
}

inline PRF tree_labeled_prf(const std::vector<Tree>& gold, const std::vector<Prediction>& pred) {
  detail::check_lengths(gold.size(), pred.size());
  std::size_t m = 0, g = 0, p = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto c = pair_counts(gold[i], pred[i]);
    m += c.tl_matched;
    g += c.gold;
    p += c.predicted;
  }
  return make_prf(m, g, p);
}

// Percentage of lines that parse as balanced bracketed trees. Grammar
// constraints are not required here.
inline double tree_validity(const std::vector<std::string>& raw_predictions) {
  if (raw_predictions.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& line : raw_predictions)
    if (try_parse(line)) ++ok;
  return 100.0 * double(ok) / double(raw_predictions.size());
}

// Percentage of examples whose gold tree is among the first k entries of
// its hypothesis list.
inline double top_k_accuracy(const std::vector<Tree>& gold,
                             const std::vector<std::vector<Prediction>>& beams, std::size_t k) {
  detail::check_lengths(gold.size(), beams.size());
  if (gold.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    std::size_t n = std::min(k, beams[i].size());
    for (std::size_t j = 0; j < n; ++j)
      if (beams[i][j] && beams[i][j]->root == gold[i].root) {
        ++hits;
        break;
      }
  }
  return 100.0 * double(hits) / double(gold.size());
}

struct MetricsReport {
  double exact_match = 0.0;
  PRF bracket;
  PRF tree_labeled;
  double tree_validity = 0.0;
  std::size_t n_examples = 0;
  std::size_t n_invalid_predictions = 0;
  // k -> accuracy, filled when hypothesis lists are scored.
  std::map<std::size_t, double> top_k;
};

inline MetricsReport evaluate(const std::vector<Tree>& gold,
                              const std::vector<std::string>& raw_predictions) {
  detail::check_lengths(gold.size(), raw_predictions.size());
  std::vector<Prediction> pred;
  pred.reserve(raw_predictions.size());
  for (const auto& line : raw_predictions) pred.push_back(try_parse(line));
  MetricsReport r;
  r.n_examples = gold.size();
  r.n_invalid_predictions =
      std::size_t(std::count_if(pred.begin(), pred.end(), [](const Prediction& p) { return !p; }));
  r.exact_match = exact_match(gold, pred);
  r.bracket = bracket_prf(gold, pred);
  r.tree_labeled = tree_labeled_prf(gold, pred);
  r.tree_validity = tree_validity(raw_predictions);
  return r;
}

}  // namespace topparse
