#include <algorithm>
#include <set>

#include <gtest/gtest.h>

#include "lecb/error.hpp"
#include "lecb/sampling.hpp"

using namespace lecb;
using namespace lecb::sampling;

namespace {

struct Fixture {
  pools::Corpus corpus;
  tok::SubwordVocab vocab;
  pools::NGramPool pool;
  std::unique_ptr<pools::FrequencyEntityDetector> detector;
  pools::EntityNGramMap map;

  explicit Fixture(std::size_t n_max = 3) {
    const std::vector<std::string> lines{
        "the cat sat on the mat",     "a dog ran in the park",     "the bird sang a song",
        "we met zorbax at the park",  "the cat saw a dog",         "zorbax likes the mat",
        "quillon sang on the hill",   "a song for the cat",        "the dog sat in a hat",
        "on the hill we ran",         "the park is big",           "a big cat ran",
        "we sang in the park",        "the mat is red",            "a red hat for the dog"};
    for (std::size_t i = 0; i < lines.size(); ++i)
      corpus.utterances.push_back({"u" + std::to_string(i), tok::split_words(lines[i]), {}});
    std::vector<std::string> text = corpus.transcripts();
    vocab = tok::build_vocab(text, 40);
    pool = pools::build_ngram_pool(corpus, n_max);
    detector = std::make_unique<pools::FrequencyEntityDetector>(corpus, 2, 5);
    map = pools::build_entity_map(corpus, *detector, n_max);
  }

  Sampler sampler(std::size_t B = 10, double retention = 1.0) const {
    SamplerConfig cfg;
    cfg.B = B;
    cfg.retention = retention;
    return Sampler(pool, map, *detector, vocab, cfg);
  }
};

pools::Utterance utt(const std::string& text, const std::string& id = "q") {
  return {id, tok::split_words(text), {}};
}

std::set<std::string> own_ngrams(const pools::Utterance& u, std::size_t n_max = 3) {
  const auto v = pools::ngrams_of(u.words, n_max);
  return {v.begin(), v.end()};
}

}  // namespace

TEST(Sampling, ParseMethod) {
  EXPECT_EQ(parse_method("SMb"), Method::smb);
  EXPECT_EQ(to_string(Method::smd), "smd");
  EXPECT_THROW(parse_method("sme"), ConfigError);
}

TEST(Sampling, SmaPositivesAndNegatives) {
  Fixture f;
  const auto s = f.sampler();
  const auto u = utt("the cat sat");
  const auto own = own_ngrams(u);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto b = s.sample_sma(u, seed);
    ASSERT_EQ(b.size(), 10u);
    EXPECT_GE(b.k_positive, 1u);
    EXPECT_LE(b.k_positive, 5u);
    EXPECT_EQ(b.k_positive, b.count_positive());
    for (const auto& p : b.phrases) EXPECT_EQ(own.count(p.words) == 1, p.positive()) << p.words;
  }
}

TEST(Sampling, DegenerateBatchAndDeterminism) {
  Fixture f;
  const auto u = utt("the cat sat");
  const auto one = f.sampler(1).sample_sma(u, 5);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_TRUE(one.phrases[0].positive());
  const auto a = f.sampler().sample_smc(utt("we met zorbax"), 77);
  const auto b = f.sampler().sample_smc(utt("we met zorbax"), 77);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.phrases[i].words, b.phrases[i].words);
  EXPECT_EQ(a.order, b.order);
}

TEST(Sampling, SmbNeighbourNgrams) {
  Fixture f(2);
  SamplerConfig cfg;
  cfg.n_max = 2;
  Sampler s(f.pool, f.map, *f.detector, f.vocab, cfg);
  auto b = s.sample_smb(utt("the zorbax mat"), 3);
  std::set<std::string> pos;
  for (const auto& p : b.phrases)
    if (p.positive()) pos.insert(p.words);
  EXPECT_EQ(pos, (std::set<std::string>{"zorbax", "the zorbax", "zorbax mat"}));

  b = s.sample_smb(utt("zorbax the mat"), 3);
  pos.clear();
  for (const auto& p : b.phrases)
    if (p.positive()) pos.insert(p.words);
  EXPECT_EQ(pos, (std::set<std::string>{"zorbax", "zorbax the"}));

  b = s.sample_smb(utt("the cat sat"), 3);
  EXPECT_EQ(b.k_positive, 0u);
  EXPECT_EQ(b.size(), 10u);
}

TEST(Sampling, SmcDrawsFromOtherUtterances) {
  Fixture f;
  const auto s = f.sampler();
  const auto& grams = f.map.at("zorbax");
  ASSERT_FALSE(grams.empty());
  std::set<std::string> seen;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto b = s.sample_smc(utt("zorbax ran"), seed);
    for (const auto& p : b.phrases) {
      if (!p.positive()) continue;
      EXPECT_NE(std::find(grams.begin(), grams.end(), p.words), grams.end());
      seen.insert(p.words);
    }
  }
  // n-grams from both utterances that mention the entity show up.
  EXPECT_TRUE(seen.count("met zorbax"));
  EXPECT_TRUE(seen.count("zorbax likes"));
  EXPECT_EQ(s.sample_smc(utt("the cat sat"), 1).k_positive, 0u);
}

TEST(Sampling, SmcClampsToMapSize) {
  Fixture f;
  const auto s = f.sampler(10);
  const auto& grams = f.map.at("quillon");
  for (std::uint64_t seed = 0; seed < 50; ++seed)
    EXPECT_LE(s.sample_smc(utt("quillon"), seed).k_positive, grams.size());
  // Entity unknown to the map: no candidates plus a warning.
  std::map<std::string, std::size_t> counts{{"xyzzyq", 1}};
  pools::FrequencyEntityDetector det(counts, 2, 5);
  Sampler other(f.pool, f.map, det, f.vocab, SamplerConfig{});
  const auto b = other.sample_smc(utt("xyzzyq"), 1);
  EXPECT_EQ(b.k_positive, 0u);
  EXPECT_FALSE(b.warnings.empty());
}

TEST(Sampling, SmdPositivesAreEntities) {
  Fixture f;
  const auto s = f.sampler();
  const auto b = s.sample_smd(utt("zorbax met quillon"), 9);
  ASSERT_EQ(b.size(), 10u);
  EXPECT_EQ(b.k_positive, 2u);
  std::set<std::string> pos;
  for (const auto& p : b.phrases)
    if (p.positive()) pos.insert(p.words);
  EXPECT_EQ(pos, (std::set<std::string>{"zorbax", "quillon"}));
  EXPECT_EQ(s.sample_smd(utt("the cat sat"), 9).k_positive, 0u);
  const auto full = f.sampler(2).sample_smd(utt("zorbax met quillon"), 9);
  EXPECT_EQ(full.k_positive, 2u);
  EXPECT_EQ(full.size(), 2u);
}

TEST(Sampling, PoolShortfallIsAnError) {
  pools::Corpus c;
  c.utterances.push_back({"a", {"x", "y"}, {}});
  const auto vocab = tok::build_vocab({"x y"}, 2);
  const auto pool = pools::build_ngram_pool(c, 2);
  pools::FrequencyEntityDetector det(c, 0, 1);
  pools::EntityNGramMap map;
  Sampler s(pool, map, det, vocab, SamplerConfig{});
  try {
    s.sample_sma(utt("x"), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("shortfall"), std::string::npos);
  }
}

TEST(Retention, ExtremesAndRate) {
  Fixture f;
  const auto s = f.sampler();
  const auto u = utt("the cat sat on the mat");
  const auto b = s.sample_sma(u, 4);
  const auto same = s.apply_retention(b, u, 1.0, 1);
  for (std::size_t i = 0; i < b.size(); ++i) EXPECT_EQ(same.phrases[i].words, b.phrases[i].words);
  const auto none = s.apply_retention(b, u, 0.0, 1);
  EXPECT_EQ(none.size(), b.size());
  EXPECT_EQ(none.k_positive, 0u);
  const auto own = own_ngrams(u);
  for (const auto& p : none.phrases) EXPECT_FALSE(own.count(p.words));

  std::size_t total = 0, kept = 0;
  for (std::uint64_t seed = 0; total < 10000; ++seed) {
    const auto x = s.sample_sma(u, seed);
    const auto y = s.apply_retention(x, u, 0.7, seed + 1000000);
    total += x.k_positive;
    kept += y.k_positive;
    EXPECT_EQ(y.size(), 10u);
  }
  EXPECT_NEAR(static_cast<double>(kept) / static_cast<double>(total), 0.7, 0.02);
}

TEST(Sampling, UtteranceSeedIsOrderIndependent) {
  EXPECT_EQ(utterance_seed(1, "a", 2), utterance_seed(1, "a", 2));
  EXPECT_NE(utterance_seed(1, "a", 2), utterance_seed(1, "b", 2));
  EXPECT_NE(utterance_seed(1, "a", 2), utterance_seed(1, "a", 3));
}
