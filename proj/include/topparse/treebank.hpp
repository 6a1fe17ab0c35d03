#pragma once

// Intent/slot trees: data model, bracketed text format, structural queries.

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

namespace topparse {

enum class LabelKind { Intent, Slot };

struct Label {
  LabelKind kind = LabelKind::Intent;
  std::string name;

  bool is_intent() const { return kind == LabelKind::Intent; }
  bool is_slot() const { return kind == LabelKind::Slot; }

  std::string str() const { return (is_intent() ? "IN:" : "SL:") + name; }

  static Label intent(std::string name) { return {LabelKind::Intent, std::move(name)}; }
  static Label slot(std::string name) { return {LabelKind::Slot, std::move(name)}; }

  friend bool operator==(const Label&, const Label&) = default;
  friend auto operator<=>(const Label&, const Label&) = default;
};

inline bool is_reserved_char(char c) {
  return c == '[' || c == ']' || c == ' ' || c == '\t' || c == '\n' || c == '\r' ||
         c == '\v' || c == '\f';
}

// True when `s` is non-empty and free of whitespace and brackets.
inline bool is_atom(std::string_view s) {
  if (s.empty()) return false;
  for (char c : s)
    if (is_reserved_char(c)) return false;
  return true;
}

struct Node;

struct NonTerminal {
  Label label;
  std::vector<Node> children;
  friend bool operator==(const NonTerminal&, const NonTerminal&) = default;
};

struct Token {
  std::string text;
  friend bool operator==(const Token&, const Token&) = default;
};

struct Node {
  std::variant<NonTerminal, Token> value;

  Node() = default;
  Node(NonTerminal nt) : value(std::move(nt)) {}
  Node(Token t) : value(std::move(t)) {}

  static Node token(std::string text) { return Node(Token{std::move(text)}); }
  static Node nonterminal(Label label, std::vector<Node> children) {
    return Node(NonTerminal{std::move(label), std::move(children)});
  }

  bool is_token() const { return std::holds_alternative<Token>(value); }
  bool is_nonterminal() const { return std::holds_alternative<NonTerminal>(value); }

  const Label& label() const { return std::get<NonTerminal>(value).label; }
  const std::vector<Node>& children() const { return std::get<NonTerminal>(value).children; }
  std::vector<Node>& children() { return std::get<NonTerminal>(value).children; }
  const std::string& text() const { return std::get<Token>(value).text; }

  friend bool operator==(const Node&, const Node&) = default;
};

struct Tree {
  Node root;
  std::vector<std::string> tokens;

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct LabeledSpan {
  Label label;
  std::size_t start = 0;
  std::size_t end = 0;

  friend bool operator==(const LabeledSpan&, const LabeledSpan&) = default;
  friend auto operator<=>(const LabeledSpan&, const LabeledSpan&) = default;
};

class FormatError : public std::runtime_error {
 public:
  enum class Kind { UnbalancedBrackets, EmptyNonTerminal, BadLabelPrefix, TrailingInput };

  FormatError(Kind kind, std::size_t offset, const std::string& detail)
      : std::runtime_error(describe(kind) + " at offset " + std::to_string(offset) +
                           (detail.empty() ? "" : ": " + detail)),
        kind_(kind),
        offset_(offset) {}

  Kind kind() const { return kind_; }
  std::size_t offset() const { return offset_; }

  static std::string describe(Kind k) {
    switch (k) {
      case Kind::UnbalancedBrackets: return "UnbalancedBrackets";
      case Kind::EmptyNonTerminal: return "EmptyNonTerminal";
      case Kind::BadLabelPrefix: return "BadLabelPrefix";
      case Kind::TrailingInput: return "TrailingInput";
    }
    return "FormatError";
  }

 private:
  Kind kind_;
  std::size_t offset_;
};

// Parses "IN:NAME" or "SL:NAME". Throws FormatError{BadLabelPrefix} otherwise.
inline Label parse_label(std::string_view s, std::size_t offset = 0) {
  if (s.size() > 3 && s.substr(0, 3) == "IN:") return Label::intent(std::string(s.substr(3)));
  if (s.size() > 3 && s.substr(0, 3) == "SL:") return Label::slot(std::string(s.substr(3)));
  throw FormatError(FormatError::Kind::BadLabelPrefix, offset, std::string(s));
}

namespace detail {

class BracketReader {
 public:
  explicit BracketReader(std::string_view text) : text_(text) {}

  Tree read() {
    skip_space();
    if (pos_ >= text_.size() || text_[pos_] != '[')
      throw FormatError(FormatError::Kind::UnbalancedBrackets, pos_, "expected '['");
    Tree tree;
    tree.root = read_nonterminal(tree.tokens);
    skip_space();
    if (pos_ != text_.size())
      throw FormatError(FormatError::Kind::TrailingInput, pos_, "");
    return tree;
  }

 private:
  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' ||
                                   text_[pos_] == '\r' || text_[pos_] == '\n'))
      ++pos_;
  }

  std::string_view read_atom() {
    std::size_t start = pos_;
    while (pos_ < text_.size() && !is_reserved_char(text_[pos_])) ++pos_;
    return text_.substr(start, pos_ - start);
  }

  Node read_nonterminal(std::vector<std::string>& tokens) {
    std::size_t open = pos_;
    ++pos_;  // '['
    std::size_t label_at = pos_;
    std::string_view label_text = read_atom();
    if (label_text.empty())
      throw FormatError(FormatError::Kind::BadLabelPrefix, label_at, "missing label");
    Label label = parse_label(label_text, label_at);
    std::vector<Node> children;
    for (;;) {
      skip_space();
      if (pos_ >= text_.size())
        throw FormatError(FormatError::Kind::UnbalancedBrackets, open, "unclosed '['");
      char c = text_[pos_];
      if (c == ']') {
        if (children.empty())
          throw FormatError(FormatError::Kind::EmptyNonTerminal, open, label.str());
        ++pos_;
        return Node::nonterminal(std::move(label), std::move(children));
      }
      if (c == '[') {
        children.push_back(read_nonterminal(tokens));
      } else {
        std::string word(read_atom());
        tokens.push_back(word);
        children.push_back(Node::token(std::move(word)));
      }
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline void write_node(const Node& node, std::string& out) {
  if (node.is_token()) {
    out += node.text();
    return;
  }
  out += '[';
  out += node.label().str();
  for (const Node& child : node.children()) {
    out += ' ';
    write_node(child, out);
  }
  out += " ]";
}

inline void collect_yield(const Node& node, std::vector<std::string>& out) {
  if (node.is_token()) {
    out.push_back(node.text());
    return;
  }
  for (const Node& child : node.children()) collect_yield(child, out);
}

inline std::size_t node_depth(const Node& node) {
  if (node.is_token()) return 0;
  std::size_t best = 0;
  for (const Node& child : node.children()) best = std::max(best, node_depth(child));
  return best + 1;
}

inline std::size_t collect_spans(const Node& node, std::size_t start,
                                 std::vector<LabeledSpan>& out) {
  if (node.is_token()) return start + 1;
  std::size_t slot = out.size();
  out.push_back({node.label(), start, start});
  std::size_t end = start;
  for (const Node& child : node.children()) end = collect_spans(child, end, out);
  out[slot].end = end;
  return end;
}

}  // namespace detail

// Structural parse: bracket balance, non-empty non-terminals, IN:/SL: labels.
// Grammar constraints are checked separately by validate().
inline Tree parse_bracketed(std::string_view text) { return detail::BracketReader(text).read(); }

inline std::string serialize(const Node& node) {
  std::string out;
  detail::write_node(node, out);
  return out;
}

inline std::string serialize(const Tree& tree) { return serialize(tree.root); }

inline std::vector<std::string> yield_tokens(const Node& node) {
  std::vector<std::string> out;
  detail::collect_yield(node, out);
  return out;
}

inline std::vector<std::string> yield_tokens(const Tree& tree) { return yield_tokens(tree.root); }

inline Tree make_tree(Node root) {
  Tree t;
  t.tokens = yield_tokens(root);
  t.root = std::move(root);
  return t;
}

// Maximum number of non-terminals on a root-to-leaf path.
inline std::size_t depth(const Tree& tree) { return detail::node_depth(tree.root); }

inline std::size_t count_nonterminals(const Node& node) {
  if (node.is_token()) return 0;
  std::size_t n = 1;
  for (const Node& child : node.children()) n += count_nonterminals(child);
  return n;
}

// One span per non-terminal, pre-order.
inline std::vector<LabeledSpan> labeled_spans(const Tree& tree) {
  std::vector<LabeledSpan> out;
  detail::collect_spans(tree.root, 0, out);
  return out;
}

enum class Constraint {
  RootNotIntent,
  IntentHasIntentChild,
  SlotMixedChildren,
  EmptyNonTerminal,
  BadAtom,
  TokenMismatch,
};

inline const char* constraint_name(Constraint c) {
  switch (c) {
    case Constraint::RootNotIntent: return "RootNotIntent";
    case Constraint::IntentHasIntentChild: return "IntentHasIntentChild";
    case Constraint::SlotMixedChildren: return "SlotMixedChildren";
    case Constraint::EmptyNonTerminal: return "EmptyNonTerminal";
    case Constraint::BadAtom: return "BadAtom";
    case Constraint::TokenMismatch: return "TokenMismatch";
  }
  return "?";
}

struct Violation {
  Constraint constraint;
  // Child indices from the root; empty for the root itself.
  std::vector<std::size_t> path;

  std::string path_string() const {
    std::string s = "/";
    for (std::size_t i = 0; i < path.size(); ++i) {
      if (i) s += '/';
      s += std::to_string(path[i]);
    }
    return s;
  }

  friend bool operator==(const Violation&, const Violation&) = default;
};

namespace detail {

inline void check_node(const Node& node, std::vector<std::size_t>& path,
                       std::vector<Violation>& out) {
  if (node.is_token()) {
    if (!is_atom(node.text())) out.push_back({Constraint::BadAtom, path});
    return;
  }
  const Label& label = node.label();
  const auto& kids = node.children();
  if (!is_atom(label.name)) out.push_back({Constraint::BadAtom, path});
  if (kids.empty()) out.push_back({Constraint::EmptyNonTerminal, path});
  if (label.is_intent()) {
    for (const Node& k : kids)
      if (k.is_nonterminal() && k.label().is_intent()) {
        out.push_back({Constraint::IntentHasIntentChild, path});
        break;
      }
  } else {
    bool all_tokens = true;
    std::size_t intents = 0;
    for (const Node& k : kids) {
      if (k.is_nonterminal()) {
        all_tokens = false;
        if (k.label().is_intent()) ++intents;
      }
    }
    bool single_intent = kids.size() == 1 && intents == 1;
    if (!all_tokens && !single_intent) out.push_back({Constraint::SlotMixedChildren, path});
  }
  for (std::size_t i = 0; i < kids.size(); ++i) {
    path.push_back(i);
    check_node(kids[i], path, out);
    path.pop_back();
  }
}

}  // namespace detail

// Empty iff the tree satisfies the representation grammar: intent root,
// intents over tokens/slots, slots over tokens or exactly one intent, and
// the yield equals `tokens`.
inline std::vector<Violation> validate(const Tree& tree) {
  std::vector<Violation> out;
  if (tree.root.is_token() || !tree.root.label().is_intent())
    out.push_back({Constraint::RootNotIntent, {}});
  std::vector<std::size_t> path;
  detail::check_node(tree.root, path, out);
  if (yield_tokens(tree.root) != tree.tokens) out.push_back({Constraint::TokenMismatch, {}});
  return out;
}

inline bool is_valid(const Tree& tree) { return validate(tree).empty(); }

}  // namespace topparse
