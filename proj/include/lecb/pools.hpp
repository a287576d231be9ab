#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "lecb/numerics/tensor.hpp"

namespace lecb::pools {

struct Utterance {
  std::string id;
  std::vector<std::string> words;
  /// Acoustic features (frames x dims) when the corpus carries them.
  std::optional<num::Tensor> features;

  std::string transcript() const;
};

struct Corpus {
  std::vector<Utterance> utterances;

  std::size_t size() const { return utterances.size(); }
  bool empty() const { return utterances.empty(); }
  /// Throws ConfigError on duplicate ids or empty transcripts.
  void validate() const;
  std::vector<std::string> transcripts() const;
};

/// One utterance per line, `id<TAB>transcript`. Blank lines are skipped.
Corpus load_corpus(const std::filesystem::path& path);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

/// Contiguous word n-grams of `words` for n in [1, n_max], in order of start
/// position then length. Duplicates are kept.
std::vector<std::string> ngrams_of(const std::vector<std::string>& words, std::size_t n_max);
/// The n-grams of `words` (n <= n_max) that contain `entity` as a whole word.
std::vector<std::string> ngrams_containing(const std::vector<std::string>& words,
                                           const std::string& entity, std::size_t n_max);

/// Deduplicated n-grams of a corpus in first-occurrence order.
class NGramPool {
 public:
  NGramPool() = default;
  NGramPool(std::size_t n_max, std::vector<std::string> ngrams, std::vector<std::size_t> counts);

  std::size_t n_max() const { return n_max_; }
  std::size_t size() const { return ngrams_.size(); }
  const std::string& operator[](std::size_t i) const { return ngrams_[i]; }
  const std::vector<std::string>& ngrams() const { return ngrams_; }
  const std::vector<std::size_t>& counts() const { return counts_; }
  bool contains(const std::string& g) const { return index_.count(g) != 0; }
  std::size_t count(const std::string& g) const;

 private:
  std::size_t n_max_ = 0;
  std::vector<std::string> ngrams_;
  std::vector<std::size_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Throws ConfigError for an empty corpus or n_max == 0.
NGramPool build_ngram_pool(const Corpus& corpus, std::size_t n_max);

/// Picks entity (named or rare) words out of a transcript.
class EntityDetector {
 public:
  virtual ~EntityDetector() = default;
  /// Returned words must occur in `words`; order follows the transcript,
  /// each entity reported once.
  virtual std::vector<std::string> detect(const std::vector<std::string>& words) const = 0;
  virtual std::string id() const = 0;
  /// Canonical textual form of the configuration, hashed into pool files.
  virtual std::string config_string() const = 0;
};

/// Frequency-threshold rare-word detector: a word is an entity when its count
/// in the reference corpus is <= rare_threshold and it has >= min_len chars.
class FrequencyEntityDetector final : public EntityDetector {
 public:
  static constexpr std::size_t kNoThreshold = std::numeric_limits<std::size_t>::max();

  FrequencyEntityDetector(const Corpus& reference, std::size_t rare_threshold,
                          std::size_t min_len);
  FrequencyEntityDetector(std::map<std::string, std::size_t> word_counts,
                          std::size_t rare_threshold, std::size_t min_len);

  std::vector<std::string> detect(const std::vector<std::string>& words) const override;
  std::string id() const override { return "frequency"; }
  std::string config_string() const override;

  std::size_t word_count(const std::string& w) const;
  std::size_t rare_threshold() const { return rare_threshold_; }
  std::size_t min_len() const { return min_len_; }
  const std::map<std::string, std::size_t>& word_counts() const { return counts_; }

 private:
  std::map<std::string, std::size_t> counts_;
  std::size_t rare_threshold_;
  std::size_t min_len_;
};

std::vector<std::string> detect_entities(const std::vector<std::string>& words,
                                         const EntityDetector& detector);

/// entity word -> deduplicated n-grams containing it, gathered from every
/// utterance where the entity was detected. Keys in first-detection order.
class EntityNGramMap {
 public:
  void add(const std::string& entity, const std::string& ngram);
  bool contains(const std::string& entity) const { return index_.count(entity) != 0; }
  /// Empty when the entity is unknown.
  const std::vector<std::string>& at(const std::string& entity) const;
  const std::vector<std::string>& entities() const { return keys_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }

 private:
  std::vector<std::string> keys_;
  std::vector<std::vector<std::string>> values_;
  std::unordered_map<std::string, std::size_t> index_;
  std::unordered_map<std::string, std::size_t> seen_;  // "entity\x1fngram"
};

EntityNGramMap build_entity_map(const Corpus& corpus, const EntityDetector& detector,
                                std::size_t n_max);

inline constexpr int kPoolSchemaVersion = 1;

/// 64-bit FNV-1a, used for config and input hashes.
std::uint64_t fnv1a(std::string_view data);
std::string hex64(std::uint64_t v);

struct PoolFiles {
  NGramPool ngram_pool;
  EntityNGramMap entity_map;
  std::string detector_id;
  std::string detector_hash;
  std::string corpus_hash;
};

/// Writes `ngram_pool.json` and `entity_map.json` into `dir`.
void save_pools(const std::filesystem::path& dir, const NGramPool& pool,
                const EntityNGramMap& map, const EntityDetector& detector,
                const std::string& corpus_hash);
PoolFiles load_pools(const std::filesystem::path& dir);

}  // namespace lecb::pools
