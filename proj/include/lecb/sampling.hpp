#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lecb/numerics/rng.hpp"
#include "lecb/pools.hpp"
#include "lecb/tokenizer.hpp"

namespace lecb::sampling {

enum class Method { sma, smb, smc, smd };

std::string to_string(Method m);
/// Accepts "sma".."smd" (case-insensitive); throws ConfigError otherwise.
Method parse_method(const std::string& s);

enum class Label { positive, negative };

struct Phrase {
  std::string words;
  tok::TokenSeq tokens;  // at most max_tokens long
  Label label = Label::negative;
  /// Sampling method and the pool the phrase came from
  /// ("transcript", "entity_map", "entity", "ngram_pool", "retention").
  std::string origin;

  bool positive() const { return label == Label::positive; }
};

struct ContextBatch {
  std::string utterance_id;
  Method method = Method::sma;
  std::vector<Phrase> phrases;
  std::size_t k_positive = 0;
  std::uint64_t seed = 0;
  /// order[i] = pre-shuffle slot of phrases[i] (positives first, then negatives).
  std::vector<std::size_t> order;
  std::vector<std::string> warnings;

  std::size_t size() const { return phrases.size(); }
  std::size_t count_positive() const;
};

struct SamplerConfig {
  std::size_t B = 10;
  std::size_t n_max = 3;
  /// Upper bound for k drawn by SMa/SMc: k ~ U[1, min(ceil(B * k_max_fraction), candidates)].
  double k_max_fraction = 0.5;
  /// Retention probability for positives (1 keeps every positive).
  double retention = 1.0;
  /// Maximum subword tokens per phrase (the encoder's l).
  std::size_t max_tokens = 8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Builds context batches from the global pools. Holds references; the pools,
/// detector and vocab must outlive the sampler.
class Sampler {
 public:
  Sampler(const pools::NGramPool& pool, const pools::EntityNGramMap& entity_map,
          const pools::EntityDetector& detector, const tok::SubwordVocab& vocab,
          SamplerConfig cfg);

  const SamplerConfig& config() const { return cfg_; }

  /// k positives drawn from the transcript's own n-grams.
  ContextBatch sample_sma(const pools::Utterance& utt, std::uint64_t seed) const;
  /// Positives are the transcript n-grams that contain a detected entity.
  ContextBatch sample_smb(const pools::Utterance& utt, std::uint64_t seed) const;
  /// Positives drawn from the entity-n-gram pool of the detected entities.
  ContextBatch sample_smc(const pools::Utterance& utt, std::uint64_t seed) const;
  /// Positives are the detected entity words themselves.
  ContextBatch sample_smd(const pools::Utterance& utt, std::uint64_t seed) const;

  /// Dispatches on method, then applies cfg.retention when it is below 1.
  ContextBatch sample(Method method, const pools::Utterance& utt, std::uint64_t seed) const;

  /// Keeps each positive with probability p; dropped positives are replaced
  /// by fresh negatives so the batch keeps exactly B phrases.
  ContextBatch apply_retention(const ContextBatch& batch, const pools::Utterance& utt, double p,
                               std::uint64_t seed) const;

  Phrase make_phrase(const std::string& words, Label label, std::string origin) const;

 private:
  ContextBatch finish(const pools::Utterance& utt, Method method, std::uint64_t seed,
                      std::vector<std::string> positives, const std::string& positive_origin,
                      num::Rng& rng) const;
  std::vector<std::string> draw_negatives(const std::vector<std::string>& transcript_ngrams,
                                          const std::vector<std::string>& taken,
                                          std::size_t count, num::Rng& rng) const;
  std::size_t draw_k(std::size_t candidates, num::Rng& rng) const;

  const pools::NGramPool& pool_;
  const pools::EntityNGramMap& entity_map_;
  const pools::EntityDetector& detector_;
  const tok::SubwordVocab& vocab_;
  SamplerConfig cfg_;
};

/// Per-utterance seed so batches do not depend on iteration order.
std::uint64_t utterance_seed(std::uint64_t base, const std::string& utterance_id,
                             std::uint64_t epoch = 0);

nlohmann::json to_json(const ContextBatch& batch, const tok::SubwordVocab& vocab);

}  // namespace lecb::sampling
