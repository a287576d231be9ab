#include <algorithm>
#include <filesystem>

#include <gtest/gtest.h>

#include "lecb/error.hpp"
#include "lecb/pools.hpp"
#include "lecb/tokenizer.hpp"

using namespace lecb;
using namespace lecb::pools;

namespace {

Corpus make_corpus(const std::vector<std::string>& transcripts) {
  Corpus c;
  for (std::size_t i = 0; i < transcripts.size(); ++i)
    c.utterances.push_back({"u" + std::to_string(i), tok::split_words(transcripts[i]), {}});
  return c;
}

bool has(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

TEST(NGramPool, Enumeration) {
  const auto pool = build_ngram_pool(make_corpus({"a b c"}), 3);
  EXPECT_EQ(pool.ngrams(), (std::vector<std::string>{"a", "a b", "a b c", "b", "b c", "c"}));
  EXPECT_EQ(ngrams_of(tok::split_words("a b c d e"), 3).size(), 12u);
}

TEST(NGramPool, DedupKeepsCounts) {
  const auto pool = build_ngram_pool(make_corpus({"a b", "x a b"}), 2);
  EXPECT_EQ(pool.count("a b"), 2u);
  EXPECT_EQ(std::count(pool.ngrams().begin(), pool.ngrams().end(), "a b"), 1);
  EXPECT_EQ(pool.count("missing"), 0u);
}

TEST(NGramPool, Errors) {
  EXPECT_THROW(build_ngram_pool(Corpus{}, 3), ConfigError);
  EXPECT_THROW(build_ngram_pool(make_corpus({"a"}), 0), ConfigError);
}

TEST(NGramPool, MembershipAndDeterminism) {
  const auto corpus = make_corpus({"one two three four", "two three five", "six"});
  const auto a = build_ngram_pool(corpus, 3);
  const auto b = build_ngram_pool(corpus, 3);
  EXPECT_EQ(a.ngrams(), b.ngrams());
  EXPECT_EQ(a.counts(), b.counts());
  for (const auto& g : a.ngrams()) {
    bool found = false;
    for (const auto& u : corpus.utterances) found |= has(ngrams_of(u.words, 3), g);
    EXPECT_TRUE(found) << g;
  }
}

TEST(Corpus, Validation) {
  auto c = make_corpus({"a b", "c"});
  c.utterances[1].id = "u0";
  EXPECT_THROW(c.validate(), ConfigError);
  auto e = make_corpus({"a"});
  e.utterances[0].words.clear();
  EXPECT_THROW(e.validate(), ConfigError);
}

TEST(Detector, RareWordExample) {
  const auto corpus = make_corpus({"tumult cries down with the bolsheviki", "down with the king",
                                   "the cries of the king", "down the hill with the cries"});
  FrequencyEntityDetector det(corpus, 2, 3);
  // "tumult" and "bolsheviki" occur once; "king"/"of"/"hill" are rare but "of" is short.
  EXPECT_EQ(detect_entities(tok::split_words("down with the bolsheviki"), det),
            (std::vector<std::string>{"bolsheviki"}));
  EXPECT_TRUE(detect_entities(tok::split_words("down with the"), det).empty());
  FrequencyEntityDetector all(corpus, FrequencyEntityDetector::kNoThreshold, 3);
  EXPECT_EQ(detect_entities(tok::split_words("down of the king"), all),
            (std::vector<std::string>{"down", "the", "king"}));
}

TEST(EntityMap, Enumeration) {
  std::map<std::string, std::size_t> counts{{"x", 9}, {"y", 9}, {"e", 1}, {"z", 9}};
  FrequencyEntityDetector det(counts, 1, 1);
  const auto one = build_entity_map(make_corpus({"x e y"}), det, 2);
  EXPECT_EQ(one.at("e"), (std::vector<std::string>{"x e", "e", "e y"}));

  const auto two = build_entity_map(make_corpus({"x e y", "z e"}), det, 2);
  auto got = two.at("e");
  std::sort(got.begin(), got.end());
  EXPECT_EQ(got, (std::vector<std::string>{"e", "e y", "x e", "z e"}));

  EXPECT_TRUE(build_entity_map(make_corpus({"x y z"}), det, 2).empty());
}

TEST(EntityMap, Soundness) {
  const auto corpus = make_corpus({"alpha beta gamma delta", "beta epsilon alpha", "zeta beta"});
  FrequencyEntityDetector det(corpus, 1, 1);
  const auto pool = build_ngram_pool(corpus, 3);
  const auto map = build_entity_map(corpus, det, 3);
  ASSERT_FALSE(map.empty());
  for (const auto& e : map.entities()) {
    for (const auto& g : map.at(e)) {
      EXPECT_TRUE(has(tok::split_words(g), e)) << e << " / " << g;
      EXPECT_TRUE(pool.contains(g)) << g;
    }
  }
}

TEST(PoolFiles, RoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "lecb_test_pools";
  std::filesystem::create_directories(dir);
  const auto corpus = make_corpus({"a b c", "c d e", "e f"});
  FrequencyEntityDetector det(corpus, 1, 1);
  const auto pool = build_ngram_pool(corpus, 3);
  const auto map = build_entity_map(corpus, det, 3);
  save_pools(dir, pool, map, det, "abc123");
  const auto loaded = load_pools(dir);
  EXPECT_EQ(loaded.ngram_pool.ngrams(), pool.ngrams());
  EXPECT_EQ(loaded.ngram_pool.counts(), pool.counts());
  EXPECT_EQ(loaded.ngram_pool.n_max(), 3u);
  EXPECT_EQ(loaded.entity_map.entities(), map.entities());
  for (const auto& e : map.entities()) EXPECT_EQ(loaded.entity_map.at(e), map.at(e));
  EXPECT_EQ(loaded.corpus_hash, "abc123");
  EXPECT_EQ(loaded.detector_id, "frequency");
  std::filesystem::remove_all(dir);
}

TEST(CorpusFile, RoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "lecb_test_corpus.tsv";
  const auto corpus = make_corpus({"a b c", "d"});
  save_corpus(corpus, path);
  const auto loaded = load_corpus(path);
  ASSERT_EQ(loaded.size(), 2u);
  EXPECT_EQ(loaded.utterances[0].words, corpus.utterances[0].words);
  EXPECT_EQ(loaded.utterances[1].id, "u1");
  std::filesystem::remove(path);
}
