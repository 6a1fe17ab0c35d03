#include <gtest/gtest.h>

#include <functional>
#include <random>
#include <set>

#include "support.hpp"
#include "topparse/synthetic.hpp"
#include "topparse/transitions.hpp"

using namespace topparse;

namespace {

std::vector<Action> directions_actions() {
  return parse_actions(
      "NT(IN:GET_DIRECTIONS) SHIFT SHIFT SHIFT NT(SL:DESTINATION) NT(IN:GET_EVENT) SHIFT "
      "NT(SL:NAME_EVENT) SHIFT REDUCE NT(SL:CAT_EVENT) SHIFT REDUCE REDUCE REDUCE REDUCE");
}

TransitionError::Kind error_kind(const std::function<void()>& f) {
  try {
    f();
  } catch (const TransitionError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no TransitionError";
  return TransitionError::Kind::BadAction;
}

ParserState run(const std::vector<std::string>& tokens, const std::string& actions) {
  ParserState s = initial_state(tokens);
  for (const auto& a : parse_actions(actions)) s = s.apply(a);
  return s;
}

}  // namespace

TEST(Actions, SerializeRoundtrip) {
  auto a = directions_actions();
  EXPECT_EQ(a.size(), 16u);
  EXPECT_EQ(parse_actions(serialize_actions(a)), a);
  EXPECT_EQ(Action::nt(Label::slot("Y")).str(), "NT(SL:Y)");
}

TEST(InitialState, Examples) {
  auto s = initial_state({"hello"});
  EXPECT_EQ(s.buffer_size(), 1u);
  EXPECT_EQ(s.open_count(), 0u);
  EXPECT_EQ(initial_state(ref::words("Driving directions to the Eagles game")).buffer_size(), 6u);
  EXPECT_EQ(error_kind([] { initial_state({}); }), TransitionError::Kind::EmptyUtterance);
}

TEST(ValidActions, InitialStateOnlyOpensIntent) {
  auto m = initial_state({"a", "b"}).valid_actions();
  EXPECT_TRUE(m.nt_intent);
  EXPECT_FALSE(m.nt_slot || m.shift || m.reduce || m.terminal);
}

TEST(ValidActions, EmptyBufferForcesReduce) {
  auto s = run({"a"}, "NT(IN:X) NT(SL:Y) SHIFT");
  auto m = s.valid_actions();
  EXPECT_EQ(s.open_count(), 2u);
  EXPECT_TRUE(m.reduce);
  EXPECT_FALSE(m.shift || m.nt_intent || m.nt_slot);
}

TEST(ValidActions, SlotWithIntentChildOnlyReduces) {
  auto s = run({"a", "b"}, "NT(IN:X) NT(SL:Y) NT(IN:Z) SHIFT REDUCE");
  auto m = s.valid_actions();
  EXPECT_TRUE(m.reduce);
  EXPECT_FALSE(m.shift || m.nt_intent || m.nt_slot);
}

TEST(ValidActions, RootCannotCloseEarly) {
  auto m = run({"a", "b"}, "NT(IN:X) SHIFT").valid_actions();
  EXPECT_FALSE(m.reduce);
  EXPECT_TRUE(m.shift && m.nt_slot);
  EXPECT_FALSE(m.nt_intent);
}

TEST(ValidActions, MaxOpenCapBlocksNonTerminals) {
  auto s = run({"a", "b"}, "NT(IN:X) NT(SL:Y)");
  auto m = s.valid_actions(2);
  EXPECT_FALSE(m.nt_intent);
  EXPECT_TRUE(m.shift);
}

TEST(Apply, MinimalDerivation) {
  auto s = run({"hello"}, "NT(IN:X) SHIFT REDUCE");
  ASSERT_TRUE(s.is_terminal());
  EXPECT_TRUE(s.valid_actions().terminal);
  EXPECT_EQ(serialize(s.tree()), "[IN:X hello ]");
}

TEST(Apply, InvalidActions) {
  auto done = run({"hello"}, "NT(IN:X) SHIFT");
  EXPECT_EQ(error_kind([&] { done.apply(Action::shift()); }), TransitionError::Kind::InvalidAction);
  EXPECT_EQ(error_kind([] { initial_state({"a"}).apply(Action::nt(Label::slot("Y"))); }),
            TransitionError::Kind::InvalidAction);
}

TEST(Apply, StatesAreValues) {
  auto s = run({"a", "b"}, "NT(IN:X) SHIFT");
  auto t = s.apply(Action::shift());
  EXPECT_EQ(s.consumed(), 1u);
  EXPECT_EQ(t.consumed(), 2u);
  EXPECT_EQ(s.history().size(), 2u);
}

TEST(Execute, Directions) {
  Tree t = execute(directions_actions(), ref::words("Driving directions to the Eagles game"));
  EXPECT_EQ(serialize(t), ref::kDirections);
}

TEST(Execute, Errors) {
  EXPECT_EQ(error_kind([] { execute(parse_actions("NT(IN:X) SHIFT"), {"hello"}); }),
            TransitionError::Kind::IncompleteDerivation);
  try {
    execute(parse_actions("NT(IN:X) REDUCE"), {"hello"});
    FAIL();
  } catch (const TransitionError& e) {
    EXPECT_EQ(e.kind(), TransitionError::Kind::InvalidAction);
    EXPECT_EQ(e.step(), 1u);
  }
}

TEST(Oracle, Examples) {
  EXPECT_EQ(serialize_actions(oracle(parse_bracketed("[IN:X hello ]"))), "NT(IN:X) SHIFT REDUCE");
  EXPECT_EQ(oracle(parse_bracketed(ref::kDirections)), directions_actions());
  EXPECT_EQ(error_kind([] { oracle(parse_bracketed("[SL:Y hello ]")); }),
            TransitionError::Kind::ConstraintViolation);
}

TEST(Oracle, RoundtripLengthAndMaskMembership) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 2000; ++i) {
    Tree t = synthetic::random_valid_tree(rng);
    auto actions = oracle(t);
    EXPECT_EQ(actions.size(), t.tokens.size() + 2 * count_nonterminals(t.root));
    ParserState s = initial_state(t.tokens);
    for (const auto& a : actions) {
      ASSERT_TRUE(s.valid_actions().allows(a));
      s = s.apply(a);
    }
    ASSERT_TRUE(s.is_terminal());
    EXPECT_EQ(s.tree(), t);
    EXPECT_EQ(execute(actions, t.tokens), t);
  }
}

// Walk every mask-permitted sequence of length <= 9 over two tokens with
// one intent and one slot label, and compare the completed trees with a
// brute-force enumeration of grammar-valid trees.
TEST(Mask, ExhaustiveEnumerationMatchesGrammar) {
  const std::vector<std::string> tokens{"a", "b"};
  const std::vector<Action> inventory{Action::shift(), Action::reduce(), Action::nt(Label::intent("I")),
                                      Action::nt(Label::slot("S"))};
  std::set<std::string> reached;
  std::size_t dead_ends = 0;
  std::function<void(const ParserState&, std::size_t)> walk = [&](const ParserState& s, std::size_t len) {
    if (s.is_terminal()) {
      reached.insert(serialize(s.tree()));
      return;
    }
    if (len == 9) return;
    auto m = s.valid_actions();
    bool any = false;
    for (const auto& a : inventory)
      if (m.allows(a)) {
        any = true;
        walk(s.apply(a), len + 1);
      }
    if (!any) ++dead_ends;
  };
  walk(initial_state(tokens), 0);
  EXPECT_EQ(dead_ends, 0u);
  auto expected = ref::enumerate_trees(tokens, {"I"}, {"S"}, 3);
  EXPECT_EQ(reached, expected);
  for (const auto& t : reached) EXPECT_TRUE(ref::grammar_ok(t)) << t;
}
