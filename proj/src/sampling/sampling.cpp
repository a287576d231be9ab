#include "lecb/sampling.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "lecb/error.hpp"

namespace lecb::sampling {

std::string to_string(Method m) {
  switch (m) {
    case Method::sma: return "sma";
    case Method::smb: return "smb";
    case Method::smc: return "smc";
    case Method::smd: return "smd";
  }
  return "?";
}

Method parse_method(const std::string& s) {
  std::string l;
  for (char c : s) l.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  if (l == "sma") return Method::sma;
  if (l == "smb") return Method::smb;
  if (l == "smc") return Method::smc;
  if (l == "smd") return Method::smd;
  throw ConfigError("unknown sampling method '" + s + "' (expected sma, smb, smc or smd)");
}

std::size_t ContextBatch::count_positive() const {
  return static_cast<std::size_t>(
      std::count_if(phrases.begin(), phrases.end(), [](const Phrase& p) { return p.positive(); }));
}

void SamplerConfig::validate() const {
  if (B < 1) throw ConfigError("sampler: B must be >= 1");
  if (n_max < 1) throw ConfigError("sampler: n_max must be >= 1");
  if (!(retention >= 0.0 && retention <= 1.0)) throw ConfigError("sampler: retention must lie in [0,1]");
  if (!(k_max_fraction > 0.0 && k_max_fraction <= 1.0)) {
    throw ConfigError("sampler: k_max_fraction must lie in (0,1]");
  }
  if (max_tokens < 1) throw ConfigError("sampler: max_tokens must be >= 1");
}

std::uint64_t utterance_seed(std::uint64_t base, const std::string& utterance_id,
                             std::uint64_t epoch) {
  return num::Rng::combine(num::Rng::combine(base, pools::fnv1a(utterance_id)), epoch);
}

Sampler::Sampler(const pools::NGramPool& pool, const pools::EntityNGramMap& entity_map,
                 const pools::EntityDetector& detector, const tok::SubwordVocab& vocab,
                 SamplerConfig cfg)
    : pool_(pool), entity_map_(entity_map), detector_(detector), vocab_(vocab), cfg_(cfg) {
  cfg_.validate();
}

Phrase Sampler::make_phrase(const std::string& words, Label label, std::string origin) const {
  Phrase p;
  p.words = words;
  p.tokens = tok::tokenize(words, vocab_);
  p.tokens.truncate(cfg_.max_tokens);
  if (p.tokens.empty()) throw Error("sampler: phrase '" + words + "' has no tokens");
  p.label = label;
  p.origin = std::move(origin);
  return p;
}

std::size_t Sampler::draw_k(std::size_t candidates, num::Rng& rng) const {
  if (candidates == 0) return 0;
  const auto cap = static_cast<std::size_t>(
      std::ceil(static_cast<double>(cfg_.B) * cfg_.k_max_fraction - 1e-12));
  const std::size_t hi = std::max<std::size_t>(1, std::min({cap, candidates, cfg_.B}));
  return 1 + static_cast<std::size_t>(rng.below(hi));
}

namespace {

/// Uniform draw of `k` distinct items, in draw order.
std::vector<std::string> choose(std::vector<std::string> items, std::size_t k, num::Rng& rng) {
  k = std::min(k, items.size());
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(items.size() - i));
    std::swap(items[i], items[j]);
  }
  items.resize(k);
  return items;
}

std::vector<std::string> dedup(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& s : items)
    if (seen.insert(s).second) out.push_back(s);
  return out;
}

}  // namespace

std::vector<std::string> Sampler::draw_negatives(
    const std::vector<std::string>& transcript_ngrams, const std::vector<std::string>& taken,
    std::size_t count, num::Rng& rng) const {
  if (count == 0) return {};
  std::unordered_set<std::string> excluded(transcript_ngrams.begin(), transcript_ngrams.end());
  excluded.insert(taken.begin(), taken.end());
  std::size_t blocked = 0;
  for (const auto& g : excluded)
    if (pool_.contains(g)) ++blocked;
  const std::size_t eligible = pool_.size() - blocked;
  if (eligible < count) {
    throw Error("sampler: n-gram pool cannot fill the batch, needs " + std::to_string(count) +
                " negatives but only " + std::to_string(eligible) + " are eligible (shortfall " +
                std::to_string(count - eligible) + ")");
  }
  std::vector<std::string> out;
  out.reserve(count);
  if (eligible * 4 < pool_.size()) {
    // Dense exclusion: enumerate the eligible set instead of rejecting.
    std::vector<std::string> cand;
    for (const auto& g : pool_.ngrams())
      if (!excluded.count(g)) cand.push_back(g);
    return choose(std::move(cand), count, rng);
  }
  while (out.size() < count) {
    const std::string& g = pool_[static_cast<std::size_t>(rng.below(pool_.size()))];
    if (excluded.insert(g).second) out.push_back(g);
  }
  return out;
}

ContextBatch Sampler::finish(const pools::Utterance& utt, Method method, std::uint64_t seed,
                             std::vector<std::string> positives,
                             const std::string& positive_origin, num::Rng& rng) const {
  const auto own = pools::ngrams_of(utt.words, cfg_.n_max);
  if (positives.size() > cfg_.B) positives.resize(cfg_.B);
  const auto negatives = draw_negatives(own, positives, cfg_.B - positives.size(), rng);

  std::vector<Phrase> slots;
  slots.reserve(cfg_.B);
  for (const auto& p : positives)
    slots.push_back(make_phrase(p, Label::positive, to_string(method) + ":" + positive_origin));
  for (const auto& n : negatives)
    slots.push_back(make_phrase(n, Label::negative, to_string(method) + ":ngram_pool"));

  ContextBatch batch;
  batch.utterance_id = utt.id;
  batch.method = method;
  batch.seed = seed;
  batch.k_positive = positives.size();
  batch.order.resize(slots.size());
  std::iota(batch.order.begin(), batch.order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(batch.order));
  batch.phrases.reserve(slots.size());
  for (std::size_t idx : batch.order) batch.phrases.push_back(slots[idx]);
  return batch;
}

ContextBatch Sampler::sample_sma(const pools::Utterance& utt, std::uint64_t seed) const {
  num::Rng rng(seed);
  const auto candidates = dedup(pools::ngrams_of(utt.words, cfg_.n_max));
  const std::size_t k = draw_k(candidates.size(), rng);
  auto positives = choose(candidates, k, rng);
  return finish(utt, Method::sma, seed, std::move(positives), "transcript", rng);
}

ContextBatch Sampler::sample_smb(const pools::Utterance& utt, std::uint64_t seed) const {
  num::Rng rng(seed);
  std::vector<std::string> candidates;
  for (const auto& e : pools::detect_entities(utt.words, detector_)) {
    for (auto& g : pools::ngrams_containing(utt.words, e, cfg_.n_max)) candidates.push_back(g);
  }
  candidates = dedup(candidates);
  // Every entity-neighbour n-gram is positive; only an overfull list is subsampled.
  auto positives = choose(candidates, std::min(candidates.size(), cfg_.B), rng);
  return finish(utt, Method::smb, seed, std::move(positives), "transcript", rng);
}

ContextBatch Sampler::sample_smc(const pools::Utterance& utt, std::uint64_t seed) const {
  num::Rng rng(seed);
  std::vector<std::string> candidates;
  std::vector<std::string> warnings;
  for (const auto& e : pools::detect_entities(utt.words, detector_)) {
    const auto& grams = entity_map_.at(e);
    if (grams.empty()) warnings.push_back("entity '" + e + "' has no entry in the entity-n-gram pool");
    candidates.insert(candidates.end(), grams.begin(), grams.end());
  }
  candidates = dedup(candidates);
  const std::size_t k = draw_k(candidates.size(), rng);
  auto positives = choose(candidates, k, rng);
  auto batch = finish(utt, Method::smc, seed, std::move(positives), "entity_map", rng);
  batch.warnings = std::move(warnings);
  return batch;
}

ContextBatch Sampler::sample_smd(const pools::Utterance& utt, std::uint64_t seed) const {
  num::Rng rng(seed);
  auto positives = pools::detect_entities(utt.words, detector_);
  if (positives.size() > cfg_.B) positives = choose(positives, cfg_.B, rng);
  return finish(utt, Method::smd, seed, std::move(positives), "entity", rng);
}

ContextBatch Sampler::sample(Method method, const pools::Utterance& utt,
                             std::uint64_t seed) const {
  ContextBatch b;
  switch (method) {
    case Method::sma: b = sample_sma(utt, seed); break;
    case Method::smb: b = sample_smb(utt, seed); break;
    case Method::smc: b = sample_smc(utt, seed); break;
    case Method::smd: b = sample_smd(utt, seed); break;
  }
  if (cfg_.retention < 1.0) b = apply_retention(b, utt, cfg_.retention, num::Rng::mix(seed));
  return b;
}

ContextBatch Sampler::apply_retention(const ContextBatch& batch, const pools::Utterance& utt,
                                      double p, std::uint64_t seed) const {
  if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("apply_retention: p must lie in [0,1]");
  if (p == 1.0) return batch;
  num::Rng rng(seed);
  std::vector<std::size_t> dropped;
  for (std::size_t i = 0; i < batch.phrases.size(); ++i) {
    if (batch.phrases[i].positive() && !rng.bernoulli(p)) dropped.push_back(i);
  }
  if (dropped.empty()) return batch;
  std::vector<std::string> taken;
  for (const auto& ph : batch.phrases) taken.push_back(ph.words);
  const auto own = pools::ngrams_of(utt.words, cfg_.n_max);
  const auto fresh = draw_negatives(own, taken, dropped.size(), rng);
  ContextBatch out = batch;
  for (std::size_t k = 0; k < dropped.size(); ++k) {
    out.phrases[dropped[k]] =
        make_phrase(fresh[k], Label::negative, to_string(batch.method) + ":retention");
  }
  out.k_positive = out.count_positive();
  return out;
}

nlohmann::json to_json(const ContextBatch& batch, const tok::SubwordVocab& vocab) {
  nlohmann::json phrases = nlohmann::json::array();
  for (const auto& p : batch.phrases) {
    phrases.push_back({{"words", p.words},
                       {"tokens", tok::token_strings(p.tokens, vocab)},
                       {"label", p.positive() ? "positive" : "negative"},
                       {"origin", p.origin}});
  }
  nlohmann::json j = {{"utterance_id", batch.utterance_id},
                      {"method", to_string(batch.method)},
                      {"seed", batch.seed},
                      {"k_positive", batch.k_positive},
                      {"order", batch.order},
                      {"phrases", phrases}};
  if (!batch.warnings.empty()) j["warnings"] = batch.warnings;
  return j;
}

}  // namespace lecb::sampling
