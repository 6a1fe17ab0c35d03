#pragma once

// Top-down transition system (SHIFT / REDUCE / NT(label)) with an action
// mask that enforces both the structural RNNG constraints and the
// intent/slot grammar, so every completed derivation is a valid tree.

#include <cstddef>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "topparse/treebank.hpp"

namespace topparse {

struct Action {
  enum class Kind { Shift, Reduce, NT };

  Kind kind = Kind::Shift;
  Label label;  // meaningful for NT only

  static Action shift() { return {Kind::Shift, {}}; }
  static Action reduce() { return {Kind::Reduce, {}}; }
  static Action nt(Label l) { return {Kind::NT, std::move(l)}; }

  bool is_shift() const { return kind == Kind::Shift; }
  bool is_reduce() const { return kind == Kind::Reduce; }
  bool is_nt() const { return kind == Kind::NT; }

  std::string str() const {
    switch (kind) {
      case Kind::Shift: return "SHIFT";
      case Kind::Reduce: return "REDUCE";
      case Kind::NT: return "NT(" + label.str() + ")";
    }
    return "?";
  }

  friend bool operator==(const Action& a, const Action& b) {
    return a.kind == b.kind && (a.kind != Kind::NT || a.label == b.label);
  }
};

class TransitionError : public std::runtime_error {
 public:
  enum class Kind { EmptyUtterance, InvalidAction, IncompleteDerivation, ConstraintViolation, BadAction };

  TransitionError(Kind kind, const std::string& what, std::size_t step = 0)
      : std::runtime_error(what), kind_(kind), step_(step) {}

  Kind kind() const { return kind_; }
  std::size_t step() const { return step_; }

 private:
  Kind kind_;
  std::size_t step_;
};

inline Action parse_action(std::string_view s) {
  if (s == "SHIFT") return Action::shift();
  if (s == "REDUCE") return Action::reduce();
  if (s.size() > 4 && s.substr(0, 3) == "NT(" && s.back() == ')') {
    try {
      return Action::nt(parse_label(s.substr(3, s.size() - 4)));
    } catch (const FormatError&) {
    }
  }
  throw TransitionError(TransitionError::Kind::BadAction, "bad action '" + std::string(s) + "'");
}

inline std::string serialize_actions(const std::vector<Action>& actions) {
  std::string out;
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (i) out += ' ';
    out += actions[i].str();
  }
  return out;
}

inline std::vector<Action> parse_actions(std::string_view line) {
  std::vector<Action> out;
  std::istringstream in{std::string(line)};
  std::string word;
  while (in >> word) out.push_back(parse_action(word));
  return out;
}

// Which kinds of action are permitted in a state.
struct ActionMask {
  bool terminal = false;
  bool shift = false;
  bool reduce = false;
  bool nt_intent = false;
  bool nt_slot = false;

  bool allows(const Action& a) const {
    switch (a.kind) {
      case Action::Kind::Shift: return shift;
      case Action::Kind::Reduce: return reduce;
      case Action::Kind::NT: return a.label.is_intent() ? nt_intent : nt_slot;
    }
    return false;
  }

  std::size_t kinds() const { return shift + reduce + nt_intent + nt_slot; }

  friend bool operator==(const ActionMask&, const ActionMask&) = default;
};

inline constexpr std::size_t kDefaultMaxOpen = 40;

class ParserState {
 public:
  struct OpenNode {
    Label label;
    std::vector<std::shared_ptr<const Node>> children;
    bool has_intent_child = false;
  };

  static ParserState initial(std::vector<std::string> tokens) {
    if (tokens.empty())
      throw TransitionError(TransitionError::Kind::EmptyUtterance, "empty utterance");
    ParserState s;
    s.tokens_ = std::make_shared<const std::vector<std::string>>(std::move(tokens));
    return s;
  }

  const std::vector<std::string>& tokens() const { return *tokens_; }
  std::size_t consumed() const { return consumed_; }
  std::size_t buffer_size() const { return tokens_->size() - consumed_; }
  bool buffer_empty() const { return consumed_ == tokens_->size(); }
  const std::string& next_token() const { return (*tokens_)[consumed_]; }

  std::size_t open_count() const { return open_.size(); }
  const std::vector<OpenNode>& open_nodes() const { return open_; }
  const OpenNode& top() const { return open_.back(); }
  bool stack_empty() const { return open_.empty() && !finished_; }
  const std::vector<Action>& history() const { return history_; }

  bool is_terminal() const { return buffer_empty() && open_.empty() && finished_ != nullptr; }

  ActionMask valid_actions(std::size_t max_open = kDefaultMaxOpen) const {
    ActionMask m;
    if (is_terminal()) {
      m.terminal = true;
      return m;
    }
    if (finished_) return m;  // unreachable through apply()
    if (open_.empty()) {
      m.nt_intent = !buffer_empty();
      return m;
    }
    const OpenNode& t = open_.back();
    if (buffer_empty()) {
      m.reduce = true;
      return m;
    }
    bool room = open_.size() < max_open;
    m.nt_intent = room && t.label.is_slot() && t.children.empty();
    m.nt_slot = room && t.label.is_intent();
    m.shift = !(t.label.is_slot() && t.has_intent_child);
    m.reduce = !t.children.empty() && open_.size() > 1;
    return m;
  }

  // Returns the successor state; throws InvalidAction when the mask forbids `a`.
  ParserState apply(const Action& a, std::size_t max_open = kDefaultMaxOpen) const {
    if (!valid_actions(max_open).allows(a))
      throw TransitionError(TransitionError::Kind::InvalidAction,
                            "invalid action " + a.str() + " in state " + summary(),
                            history_.size());
    ParserState s = *this;
    s.history_.push_back(a);
    switch (a.kind) {
      case Action::Kind::Shift:
        s.open_.back().children.push_back(
            std::make_shared<const Node>(Node::token((*tokens_)[consumed_])));
        ++s.consumed_;
        break;
      case Action::Kind::NT:
        s.open_.push_back({a.label, {}, false});
        break;
      case Action::Kind::Reduce: {
        OpenNode done = std::move(s.open_.back());
        s.open_.pop_back();
        std::vector<Node> kids;
        kids.reserve(done.children.size());
        for (const auto& k : done.children) kids.push_back(*k);
        bool intent = done.label.is_intent();
        auto node = std::make_shared<const Node>(Node::nonterminal(done.label, std::move(kids)));
        if (s.open_.empty()) {
          s.finished_ = std::move(node);
        } else {
          s.open_.back().children.push_back(std::move(node));
          if (intent) s.open_.back().has_intent_child = true;
        }
        break;
      }
    }
    return s;
  }

  // The completed tree; only meaningful when is_terminal().
  Tree tree() const {
    Tree t;
    t.root = *finished_;
    t.tokens = *tokens_;
    return t;
  }

  std::string summary() const {
    std::ostringstream os;
    os << "{consumed=" << consumed_ << "/" << tokens_->size() << " open=[";
    for (std::size_t i = 0; i < open_.size(); ++i)
      os << (i ? " " : "") << open_[i].label.str() << ":" << open_[i].children.size();
    os << "] finished=" << (finished_ ? "yes" : "no") << "}";
    return os.str();
  }

 private:
  std::shared_ptr<const std::vector<std::string>> tokens_;
  std::size_t consumed_ = 0;
  std::vector<OpenNode> open_;
  std::shared_ptr<const Node> finished_;
  std::vector<Action> history_;
};

inline ParserState initial_state(std::vector<std::string> tokens) {
  return ParserState::initial(std::move(tokens));
}

namespace detail {

inline void linearize(const Node& node, std::vector<Action>& out) {
  if (node.is_token()) {
    out.push_back(Action::shift());
    return;
  }
  out.push_back(Action::nt(node.label()));
  for (const Node& child : node.children()) linearize(child, out);
  out.push_back(Action::reduce());
}

}  // namespace detail

// Pre-order linearization of a valid tree.
inline std::vector<Action> oracle(const Tree& tree) {
  auto violations = validate(tree);
  if (!violations.empty())
    throw TransitionError(TransitionError::Kind::ConstraintViolation,
                          std::string("tree violates ") + constraint_name(violations[0].constraint) +
                              " at " + violations[0].path_string());
  std::vector<Action> out;
  detail::linearize(tree.root, out);
  return out;
}

inline Tree execute(const std::vector<Action>& actions, std::vector<std::string> tokens,
                    std::size_t max_open = kDefaultMaxOpen) {
  ParserState s = ParserState::initial(std::move(tokens));
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (!s.valid_actions(max_open).allows(actions[i]))
      throw TransitionError(TransitionError::Kind::InvalidAction,
                            "step " + std::to_string(i) + ": invalid action " + actions[i].str() +
                                " in state " + s.summary(),
                            i);
    s = s.apply(actions[i], max_open);
  }
  if (!s.is_terminal())
    throw TransitionError(TransitionError::Kind::IncompleteDerivation,
                          "derivation incomplete: " + s.summary(), actions.size());
  return s.tree();
}

}  // namespace topparse
