#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>
#include <set>

#include "topparse/preprocess.hpp"

using namespace topparse;

namespace {

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = ::testing::TempDir() + name;
  std::ofstream(path) << content;
  return path;
}

EmbeddingError::Kind embedding_error(const std::string& path, const Vocab& v) {
  try {
    load_embeddings(path, v, 1);
  } catch (const EmbeddingError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no EmbeddingError";
  return EmbeddingError::Kind::Io;
}

}  // namespace

TEST(Normalize, Examples) {
  Vocab v({"directions", "to"});
  EXPECT_EQ(normalize("directions", 1, v), "directions");
  EXPECT_EQ(normalize("845", 0, v), "<NUM>");
  EXPECT_EQ(normalize("Philly", 3, v), "<UNK-CAP-ly>");
}

TEST(Normalize, NumberPattern) {
  for (const char* n : {"0", "845", "-3", "+2.5", "1,000", "12,345.67", ".5", "3."}) EXPECT_TRUE(is_number(n)) << n;
  for (const char* n : {"1,00", "abc", "1.2.3", "", "12a", "1,0000", "-"}) EXPECT_FALSE(is_number(n)) << n;
}

TEST(Normalize, NumbersWinOverVocabulary) {
  Vocab v({"5"});
  EXPECT_EQ(normalize("5", 0, v), kNumberSymbol);
}

TEST(UnknownClass, Features) {
  Vocab v({"play"});
  EXPECT_EQ(unknown_class("Play", 0, v), "<UNK-INITC-KNOWNLC>");
  EXPECT_EQ(unknown_class("Zorp", 0, v), "<UNK-INITC>");
  EXPECT_EQ(unknown_class("NYC", 2, v), "<UNK-CAPS>");
  EXPECT_EQ(unknown_class("walking", 2, v), "<UNK-LC-ing>");
  EXPECT_EQ(unknown_class("cats", 2, v), "<UNK-LC-s>");
  EXPECT_EQ(unknown_class("x-ray", 2, v), "<UNK-LC-DASH>");
  EXPECT_EQ(unknown_class("4pm", 2, v), "<UNK-LC-NUM>");
}

TEST(UnknownClass, ClosedInventoryAndIdempotence) {
  auto classes = all_unknown_classes();
  std::set<std::string> inventory(classes.begin(), classes.end());
  EXPECT_EQ(inventory.size(), classes.size());
  Vocab v(reserved_symbols());
  v.add("known");
  for (const char* w : {"Philly", "845", "x-ray", "NYC", "Zorp", "walking", "known", "12,000", "A-1",
                        "quietly", "caf\xc3\xa9", "???", "e2e", "Re-entry"}) {
    for (std::size_t pos : {0u, 4u}) {
      std::string once = normalize(w, pos, v);
      if (once != w && once != kNumberSymbol) EXPECT_TRUE(inventory.count(once)) << w << " -> " << once;
      EXPECT_EQ(normalize(once, pos, v), once);
    }
  }
}

TEST(TokenNormalizer, UsesPosition) {
  TokenNormalizer n(Vocab({"directions"}));
  EXPECT_EQ(n.apply({"Zorp", "Zorp", "directions", "7"}),
            (std::vector<std::string>{"<UNK-INITC>", "<UNK-CAP>", "directions", "<NUM>"}));
}

TEST(LoadEmbeddings, TwoWords) {
  auto path = write_temp("emb2.txt", "hello 0.1 0.2 0.3\nworld 1 2 3\n");
  Vocab v({"hello", "world", "other"});
  auto t = load_embeddings(path, v, 7);
  EXPECT_EQ(t.dim, 3u);
  EXPECT_GE(t.vectors.size(), 2u);
  EXPECT_FLOAT_EQ(t.vectors.at("world")[2], 3.0f);
  EXPECT_TRUE(t.is_pretrained("hello"));
  EXPECT_FALSE(t.is_pretrained("other"));
  EXPECT_EQ(t.random_init, std::vector<std::string>{"other"});
  auto again = load_embeddings(path, v, 7);
  EXPECT_EQ(again.vectors.at("other"), t.vectors.at("other"));
}

TEST(LoadEmbeddings, Errors) {
  Vocab v({"a"});
  auto ragged = write_temp("ragged.txt", "a 1 2 3\nb 1 2\n");
  EXPECT_EQ(embedding_error(ragged, v), EmbeddingError::Kind::RaggedDimensions);
  EXPECT_EQ(embedding_error(::testing::TempDir() + "missing-file.txt", v), EmbeddingError::Kind::Io);
}

TEST(LoadEmbeddings, SkipsWord2VecHeader) {
  auto path = write_temp("w2v.txt", "2 2\na 1 2\nb 3 4\n");
  auto t = load_embeddings(path, Vocab({"a", "b"}), 1);
  EXPECT_EQ(t.dim, 2u);
  EXPECT_TRUE(t.is_pretrained("b"));
}
