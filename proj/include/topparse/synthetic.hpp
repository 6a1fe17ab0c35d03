#pragma once

// Generators for synthetic data: random grammar-valid trees for property
// tests, and a small learnable intent/slot corpus with a deterministic
// word-to-structure mapping.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "topparse/dataset.hpp"
#include "topparse/treebank.hpp"

namespace topparse::synthetic {

struct TreeShape {
  std::size_t max_depth = 8;
  std::size_t max_tokens = 20;
  std::size_t n_intents = 4;
  std::size_t n_slots = 4;
  std::size_t n_words = 30;
};

namespace detail {

template <class Rng>
std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

template <class Rng>
Node random_intent(Rng& rng, const TreeShape& shape, std::size_t depth_left);

template <class Rng>
Node random_slot(Rng& rng, const TreeShape& shape, std::size_t depth_left) {
  Label label = Label::slot("S" + std::to_string(uniform(rng, 0, shape.n_slots - 1)));
  std::vector<Node> kids;
  if (depth_left >= 2 && uniform(rng, 0, 2) == 0) {
    kids.push_back(random_intent(rng, shape, depth_left - 1));
  } else {
    std::size_t n = uniform(rng, 1, 3);
    for (std::size_t i = 0; i < n; ++i)
      kids.push_back(Node::token("w" + std::to_string(uniform(rng, 0, shape.n_words - 1))));
  }
  return Node::nonterminal(std::move(label), std::move(kids));
}

template <class Rng>
Node random_intent(Rng& rng, const TreeShape& shape, std::size_t depth_left) {
  Label label = Label::intent("I" + std::to_string(uniform(rng, 0, shape.n_intents - 1)));
  std::vector<Node> kids;
  std::size_t n = uniform(rng, 1, 4);
  for (std::size_t i = 0; i < n; ++i) {
    if (depth_left >= 2 && uniform(rng, 0, 1) == 0)
      kids.push_back(random_slot(rng, shape, depth_left - 1));
    else
      kids.push_back(Node::token("w" + std::to_string(uniform(rng, 0, shape.n_words - 1))));
  }
  return Node::nonterminal(std::move(label), std::move(kids));
}

}  // namespace detail

// A random tree satisfying the representation grammar, within the shape
// bounds (rejection sampling on the token count).
template <class Rng>
Tree random_valid_tree(Rng& rng, const TreeShape& shape = {}) {
  for (;;) {
    std::size_t d = detail::uniform(rng, 1, shape.max_depth);
    Tree t = make_tree(detail::random_intent(rng, shape, d));
    if (t.tokens.size() <= shape.max_tokens) return t;
  }
}

struct CorpusShape {
  std::size_t utterances = 200;
  std::size_t intents = 5;
  std::size_t slots = 8;
  std::size_t max_depth = 4;
  std::uint64_t seed = 1;
};

// Word inventory: 4 trigger words per intent, 5 filler words per token
// slot, 5 function words; 20 + 35 + 5 = 60 words with the default shape.
//
// The last slot label only ever wraps a nested intent. Intents in the
// first half may end with such a slot; nested intents use token slots only.
inline Corpus generate_corpus(const CorpusShape& shape) {
  std::mt19937_64 rng(shape.seed);
  auto pick = [&](std::size_t lo, std::size_t hi) { return detail::uniform(rng, lo, hi); };
  const std::size_t nested_slot = shape.slots - 1;
  const std::size_t token_slots = shape.slots - 1;
  const std::size_t outer_intents = std::max<std::size_t>(1, shape.intents / 2);
  const char* function_words[] = {"please", "the", "me", "now", "can"};

  auto intent_name = [](std::size_t i) { return "INTENT_" + std::string(1, char('A' + i)); };
  auto slot_name = [](std::size_t s) { return "SLOT_" + std::string(1, char('A' + s)); };
  auto trigger = [](std::size_t i, std::size_t k) {
    return "trig" + std::string(1, char('a' + i)) + std::to_string(k);
  };
  auto filler = [](std::size_t s, std::size_t k) {
    return "fill" + std::string(1, char('a' + s)) + std::to_string(k);
  };

  // Each intent draws from three token slots, listed in a fixed order.
  auto allowed_slots = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < 3; ++k) out.push_back((i * 2 + k) % token_slots);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };

  std::function<Node(std::size_t, bool)> make_intent = [&](std::size_t i, bool allow_nested) -> Node {
    std::vector<Node> kids;
    kids.push_back(Node::token(trigger(i, pick(0, 3))));
    if (pick(0, 1)) kids.push_back(Node::token(function_words[pick(0, 4)]));
    for (std::size_t s : allowed_slots(i)) {
      if (pick(0, 2) == 0) continue;
      std::vector<Node> fill;
      std::size_t n = pick(1, 2);
      for (std::size_t k = 0; k < n; ++k) fill.push_back(Node::token(filler(s, pick(0, 4))));
      kids.push_back(Node::nonterminal(Label::slot(slot_name(s)), std::move(fill)));
      if (pick(0, 3) == 0) kids.push_back(Node::token(function_words[pick(0, 4)]));
    }
    if (allow_nested && shape.max_depth >= 3 && shape.intents > outer_intents && pick(0, 1)) {
      std::size_t inner = pick(outer_intents, shape.intents - 1);
      std::vector<Node> wrap;
      wrap.push_back(make_intent(inner, false));
      kids.push_back(Node::nonterminal(Label::slot(slot_name(nested_slot)), std::move(wrap)));
    }
    return Node::nonterminal(Label::intent(intent_name(i)), std::move(kids));
  };

  Corpus corpus;
  corpus.split = Split::Train;
  for (std::size_t n = 0; n < shape.utterances; ++n) {
    std::size_t i = pick(0, shape.intents - 1);
    Tree t = make_tree(make_intent(i, i < outer_intents));
    Example ex;
    for (std::size_t k = 0; k < t.tokens.size(); ++k) {
      if (k) ex.raw_utterance += ' ';
      ex.raw_utterance += t.tokens[k];
    }
    ex.tokens = t.tokens;
    ex.tree = std::move(t);
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

}  // namespace topparse::synthetic
