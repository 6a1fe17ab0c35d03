#include <gtest/gtest.h>

#include <random>

#include "perturb.hpp"
#include "support.hpp"
#include "topparse/metrics.hpp"
#include "topparse/synthetic.hpp"

using namespace topparse;

namespace {

const std::string kRelabeled =
    "[IN:GET_DIRECTIONS Driving directions to [SL:DESTINATION [IN:GET_EVENT the "
    "[SL:NAME_EVENT Eagles ] [SL:NAME_EVENT game ] ] ] ]";
const std::string kWithoutCat =
    "[IN:GET_DIRECTIONS Driving directions to [SL:DESTINATION [IN:GET_EVENT the "
    "[SL:NAME_EVENT Eagles ] game ] ] ]";

std::vector<Tree> trees(const std::vector<std::string>& lines) {
  std::vector<Tree> out;
  for (const auto& l : lines) out.push_back(parse_bracketed(l));
  return out;
}

std::vector<Prediction> preds(const std::vector<std::string>& lines) {
  std::vector<Prediction> out;
  for (const auto& l : lines) out.push_back(try_parse(l));
  return out;
}

using testing_util::perturb;

}  // namespace

TEST(ExactMatch, Examples) {
  auto g = trees({"[IN:X a ]", "[IN:X b ]"});
  EXPECT_DOUBLE_EQ(exact_match(g, preds({"[IN:X a ]", "[IN:X b ]"})), 100.0);
  EXPECT_DOUBLE_EQ(exact_match(g, preds({"[IN:X a ]", "[IN:Y b ]"})), 50.0);
  EXPECT_DOUBLE_EQ(exact_match(g, preds({"[IN:X a ]", "[IN:X b"})), 50.0);
  EXPECT_THROW(exact_match(g, preds({"[IN:X a ]"})), LengthMismatch);
}

TEST(BracketPrf, DirectionsMinusCatEvent) {
  auto r = bracket_prf(trees({ref::kDirections}), preds({kWithoutCat}));
  EXPECT_EQ(r.matched, 4u);
  EXPECT_DOUBLE_EQ(r.precision, 100.0);
  EXPECT_DOUBLE_EQ(r.recall, 80.0);
  EXPECT_NEAR(r.f1, 2 * 100.0 * 80.0 / 180.0, 1e-12);
}

TEST(TreeLabeledPrf, DirectionsRelabeled) {
  auto g = trees({ref::kDirections});
  auto p = preds({kRelabeled});
  auto b = bracket_prf(g, p);
  auto tl = tree_labeled_prf(g, p);
  EXPECT_DOUBLE_EQ(b.precision, 80.0);
  EXPECT_DOUBLE_EQ(b.recall, 80.0);
  EXPECT_DOUBLE_EQ(tl.precision, 20.0);
  EXPECT_DOUBLE_EQ(tl.recall, 20.0);
}

TEST(LabeledSubtrees, OnePerNonTerminal) {
  auto items = labeled_subtrees(parse_bracketed(ref::kDirections));
  ASSERT_EQ(items.size(), 5u);
  for (const auto& it : items) EXPECT_EQ(serialize(parse_bracketed(it.subtree)), it.subtree);
}

TEST(InvalidPredictions, ScoreZeroButCountInDenominators) {
  auto g = trees({"[IN:X a [SL:Y b ] ]", "[IN:X a ]"});
  auto p = preds({"[IN:X a [SL:Y b ] ]", "[IN:X a"});
  auto b = bracket_prf(g, p);
  EXPECT_EQ(b.gold, 3u);
  EXPECT_EQ(b.predicted, 2u);
  EXPECT_EQ(b.matched, 2u);
  auto report = evaluate(g, {"[IN:X a [SL:Y b ] ]", "[IN:X a"});
  EXPECT_EQ(report.n_invalid_predictions, 1u);
  EXPECT_DOUBLE_EQ(report.tree_validity, 50.0);
}

TEST(TreeValidity, BracketMatchingOnly) {
  EXPECT_DOUBLE_EQ(tree_validity({"[SL:Y hello ]", "[IN:X hello"}), 50.0);
  EXPECT_DOUBLE_EQ(tree_validity({"[IN:X a ]"}), 100.0);
}

TEST(TopK, FirstEntriesOfEachList) {
  auto g = trees({"[IN:X a ]", "[IN:X b ]"});
  std::vector<std::vector<Prediction>> beams{preds({"[IN:Y a ]", "[IN:X a ]"}), preds({"[IN:X b ]"})};
  EXPECT_DOUBLE_EQ(top_k_accuracy(g, beams, 1), 50.0);
  EXPECT_DOUBLE_EQ(top_k_accuracy(g, beams, 2), 100.0);
  std::vector<Prediction> first{beams[0][0], beams[1][0]};
  EXPECT_DOUBLE_EQ(top_k_accuracy(g, beams, 1), exact_match(g, first));
}

TEST(Identity, AllHundred) {
  std::mt19937_64 rng(1);
  std::vector<Tree> g;
  std::vector<std::string> raw;
  for (int i = 0; i < 50; ++i) {
    g.push_back(synthetic::random_valid_tree(rng));
    raw.push_back(serialize(g.back()));
  }
  auto r = evaluate(g, raw);
  EXPECT_DOUBLE_EQ(r.exact_match, 100.0);
  EXPECT_DOUBLE_EQ(r.bracket.f1, 100.0);
  EXPECT_DOUBLE_EQ(r.tree_labeled.f1, 100.0);
  EXPECT_DOUBLE_EQ(r.tree_validity, 100.0);
}

TEST(Properties, AgreeWithBracketScanOracle) {
  std::mt19937_64 rng(17);
  synthetic::TreeShape shape{4, 8, 2, 2, 4};
  std::vector<Tree> gold;
  std::vector<Prediction> pred;
  ref::Counts total;
  for (int i = 0; i < 300; ++i) {
    Tree g = synthetic::random_valid_tree(rng, shape);
    Tree p = perturb(g, rng);
    auto c = pair_counts(g, p);
    auto r = ref::pair_counts(serialize(g), serialize(p));
    EXPECT_EQ(c.bracket_matched, r.bracket);
    EXPECT_EQ(c.tl_matched, r.tl);
    EXPECT_EQ(c.gold, r.gold);
    EXPECT_EQ(c.predicted, r.pred);
    EXPECT_LE(c.tl_matched, c.bracket_matched);
    total.bracket += r.bracket;
    total.gold += r.gold;
    total.pred += r.pred;
    gold.push_back(g);
    pred.push_back(p);
  }
  auto b = bracket_prf(gold, pred);
  EXPECT_EQ(b.matched, total.bracket);
  EXPECT_NEAR(b.f1, f1_score(100.0 * total.bracket / total.pred, 100.0 * total.bracket / total.gold), 1e-12);
}

TEST(Properties, SwapExchangesPrecisionAndRecall) {
  std::mt19937_64 rng(23);
  std::vector<Tree> a, b;
  for (int i = 0; i < 100; ++i) {
    a.push_back(synthetic::random_valid_tree(rng, {4, 8, 2, 2, 4}));
    b.push_back(perturb(a.back(), rng));
  }
  std::vector<Prediction> pa(a.begin(), a.end()), pb(b.begin(), b.end());
  auto ab = bracket_prf(a, pb), ba = bracket_prf(b, pa);
  EXPECT_DOUBLE_EQ(ab.precision, ba.recall);
  EXPECT_DOUBLE_EQ(ab.recall, ba.precision);
  auto tab = tree_labeled_prf(a, pb), tba = tree_labeled_prf(b, pa);
  EXPECT_DOUBLE_EQ(tab.precision, tba.recall);
  EXPECT_DOUBLE_EQ(tab.recall, tba.precision);
}

TEST(Properties, ReorderingInvariant) {
  std::mt19937_64 rng(29);
  std::vector<Tree> a;
  std::vector<Prediction> p;
  for (int i = 0; i < 60; ++i) {
    a.push_back(synthetic::random_valid_tree(rng, {4, 8, 2, 2, 4}));
    p.push_back(perturb(a.back(), rng));
  }
  auto before = bracket_prf(a, p);
  auto tl_before = tree_labeled_prf(a, p);
  std::vector<std::size_t> idx(a.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<Tree> a2;
  std::vector<Prediction> p2;
  for (auto i : idx) {
    a2.push_back(a[i]);
    p2.push_back(p[i]);
  }
  EXPECT_EQ(bracket_prf(a2, p2).matched, before.matched);
  EXPECT_EQ(tree_labeled_prf(a2, p2).matched, tl_before.matched);
  EXPECT_DOUBLE_EQ(exact_match(a2, p2), exact_match(a, p));
}
