#pragma once

// Independent reference implementations used as test oracles. They work on
// the bracketed text directly and share no code with the library.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

namespace ref {

inline const std::string kDirections =
    "[IN:GET_DIRECTIONS Driving directions to [SL:DESTINATION [IN:GET_EVENT the "
    "[SL:NAME_EVENT Eagles ] [SL:CAT_EVENT game ] ] ] ]";

inline std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

// One bracket group found by scanning the canonical text.
struct Group {
  std::string label;  // "IN:X" / "SL:Y"
  std::size_t start = 0, end = 0;
  std::string text;  // the group's own canonical text
  bool operator<(const Group& o) const {
    return std::tie(label, start, end, text) < std::tie(o.label, o.start, o.end, o.text);
  }
  bool operator==(const Group& o) const {
    return std::tie(label, start, end, text) == std::tie(o.label, o.start, o.end, o.text);
  }
};

// Scans whitespace-separated pieces of a canonical tree: "[LABEL", word, "]".
inline std::vector<Group> groups(const std::string& tree) {
  auto ws = words(tree);
  struct Open {
    std::string label;
    std::size_t start;
    std::size_t piece;
  };
  std::vector<Open> stack;
  std::vector<Group> out;
  std::size_t tok = 0;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    if (ws[i][0] == '[') {
      stack.push_back({ws[i].substr(1), tok, i});
    } else if (ws[i] == "]") {
      Open o = stack.back();
      stack.pop_back();
      std::string text;
      for (std::size_t j = o.piece; j <= i; ++j) text += (j > o.piece ? " " : "") + ws[j];
      out.push_back({o.label, o.start, tok, text});
    } else {
      ++tok;
    }
  }
  return out;
}

// Size of the multiset intersection.
template <class T>
std::size_t common(std::vector<T> a, std::vector<T> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<T> both;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(both));
  return both.size();
}

struct Counts {
  std::size_t bracket = 0, tl = 0, gold = 0, pred = 0;
};

inline Counts pair_counts(const std::string& gold, const std::string& pred) {
  auto g = groups(gold), p = groups(pred);
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> gs, ps;
  for (const auto& x : g) gs.emplace_back(x.label, x.start, x.end);
  for (const auto& x : p) ps.emplace_back(x.label, x.start, x.end);
  return {common(gs, ps), common(g, p), g.size(), p.size()};
}

// Grammar check on the canonical text: root is an intent, intents hold
// tokens and slots, slots hold only tokens or exactly one intent.
inline bool grammar_ok(const std::string& tree) {
  auto ws = words(tree);
  if (ws.empty() || ws[0].rfind("[IN:", 0) != 0) return false;
  struct Frame {
    bool intent;
    int tokens = 0, slots = 0, intents = 0;
  };
  std::vector<Frame> st;
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const auto& w = ws[i];
    if (w[0] == '[') {
      bool intent = w.rfind("[IN:", 0) == 0;
      if (!intent && w.rfind("[SL:", 0) != 0) return false;
      if (!st.empty()) (intent ? st.back().intents : st.back().slots)++;
      st.push_back({intent});
    } else if (w == "]") {
      Frame f = st.back();
      st.pop_back();
      if (f.tokens + f.slots + f.intents == 0) return false;
      if (f.intent && f.intents) return false;
      if (!f.intent && f.slots) return false;
      if (!f.intent && f.intents && (f.intents != 1 || f.tokens)) return false;
      if (st.empty() && i + 1 != ws.size()) return false;
    } else {
      if (st.empty()) return false;
      st.back().tokens++;
    }
  }
  return st.empty();
}

// Every grammar-valid tree over `tokens` using the given label names, with
// at most `max_nt` non-terminals, as canonical strings.
inline std::set<std::string> enumerate_trees(const std::vector<std::string>& tokens,
                                             const std::vector<std::string>& intents,
                                             const std::vector<std::string>& slots,
                                             std::size_t max_nt) {
  struct Piece {
    std::string text;
    std::size_t nts;
  };
  using Pieces = std::vector<Piece>;
  std::function<Pieces(std::size_t, std::size_t, std::size_t)> intent_over, slot_over, intent_items;

  // Sequences of tokens / slots covering tokens[i, j).
  intent_items = [&](std::size_t i, std::size_t j, std::size_t budget) -> Pieces {
    Pieces out;
    if (i == j) return {{"", 0}};
    // first item is a token
    for (auto& rest : intent_items(i + 1, j, budget)) out.push_back({tokens[i] + " " + rest.text, rest.nts});
    // first item is a slot over tokens[i, k)
    for (std::size_t k = i + 1; k <= j; ++k)
      for (auto& s : slot_over(i, k, budget))
        for (auto& rest : intent_items(k, j, budget - std::min(budget, s.nts)))
          if (s.nts + rest.nts <= budget) out.push_back({s.text + " " + rest.text, s.nts + rest.nts});
    return out;
  };
  intent_over = [&](std::size_t i, std::size_t j, std::size_t budget) -> Pieces {
    Pieces out;
    if (budget < 1 || i == j) return out;
    for (const auto& l : intents)
      for (auto& body : intent_items(i, j, budget - 1)) out.push_back({"[IN:" + l + " " + body.text + "]", body.nts + 1});
    return out;
  };
  slot_over = [&](std::size_t i, std::size_t j, std::size_t budget) -> Pieces {
    Pieces out;
    if (budget < 1 || i == j) return out;
    std::string words_text;
    for (std::size_t k = i; k < j; ++k) words_text += tokens[k] + " ";
    for (const auto& l : slots) {
      out.push_back({"[SL:" + l + " " + words_text + "]", 1});
      for (auto& in : intent_over(i, j, budget - 1)) out.push_back({"[SL:" + l + " " + in.text + " ]", in.nts + 1});
    }
    return out;
  };
  std::set<std::string> out;
  for (auto& t : intent_over(0, tokens.size(), max_nt)) out.insert(t.text);
  return out;
}

}  // namespace ref
