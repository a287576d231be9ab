#include "lecb/pools.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>

#include <json.hpp>

#include "lecb/error.hpp"
#include "lecb/tokenizer.hpp"

namespace lecb::pools {

using nlohmann::json;

std::string Utterance::transcript() const { return tok::join_words(words); }

void Corpus::validate() const {
  std::set<std::string> ids;
  for (const auto& u : utterances) {
    if (!ids.insert(u.id).second) throw ConfigError("corpus: duplicate utterance id '" + u.id + "'");
    if (u.words.empty()) throw ConfigError("corpus: utterance '" + u.id + "' has no words");
  }
}

std::vector<std::string> Corpus::transcripts() const {
  std::vector<std::string> out;
  out.reserve(utterances.size());
  for (const auto& u : utterances) out.push_back(u.transcript());
  return out;
}

Corpus load_corpus(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open corpus file: " + path.string());
  Corpus c;
  std::size_t lineno = 0;
  for (std::string line; std::getline(is, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw FormatError(path.string() + ":" + std::to_string(lineno) +
                        ": expected id<TAB>transcript");
    }
    Utterance u;
    u.id = line.substr(0, tab);
    u.words = tok::split_words(line.substr(tab + 1));
    c.utterances.push_back(std::move(u));
  }
  c.validate();
  return c;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write corpus: " + path.string());
  for (const auto& u : corpus.utterances) os << u.id << '\t' << u.transcript() << '\n';
}

std::vector<std::string> ngrams_of(const std::vector<std::string>& words, std::size_t n_max) {
  std::vector<std::string> out;
  for (std::size_t s = 0; s < words.size(); ++s)
    for (std::size_t n = 1; n <= n_max && s + n <= words.size(); ++n)
      out.push_back(tok::join_words(words, s, s + n));
  return out;
}

std::vector<std::string> ngrams_containing(const std::vector<std::string>& words,
                                           const std::string& entity, std::size_t n_max) {
  std::vector<std::string> out;
  std::set<std::string> seen;
  for (std::size_t s = 0; s < words.size(); ++s) {
    for (std::size_t n = 1; n <= n_max && s + n <= words.size(); ++n) {
      const bool has = std::find(words.begin() + static_cast<long>(s),
                                 words.begin() + static_cast<long>(s + n),
                                 entity) != words.begin() + static_cast<long>(s + n);
      if (!has) continue;
      auto g = tok::join_words(words, s, s + n);
      if (seen.insert(g).second) out.push_back(std::move(g));
    }
  }
  return out;
}

NGramPool::NGramPool(std::size_t n_max, std::vector<std::string> ngrams,
                     std::vector<std::size_t> counts)
    : n_max_(n_max), ngrams_(std::move(ngrams)), counts_(std::move(counts)) {
  if (counts_.size() != ngrams_.size()) throw FormatError("ngram pool: counts/ngrams mismatch");
  for (std::size_t i = 0; i < ngrams_.size(); ++i) {
    if (!index_.emplace(ngrams_[i], i).second) {
      throw FormatError("ngram pool: duplicate n-gram '" + ngrams_[i] + "'");
    }
  }
}

std::size_t NGramPool::count(const std::string& g) const {
  auto it = index_.find(g);
  return it == index_.end() ? 0 : counts_[it->second];
}

NGramPool build_ngram_pool(const Corpus& corpus, std::size_t n_max) {
  if (corpus.empty()) throw ConfigError("build_ngram_pool: corpus is empty");
  if (n_max == 0) throw ConfigError("build_ngram_pool: n_max must be >= 1");
  std::vector<std::string> order;
  std::unordered_map<std::string, std::size_t> counts;
  for (const auto& u : corpus.utterances) {
    for (auto& g : ngrams_of(u.words, n_max)) {
      auto [it, inserted] = counts.emplace(g, 0);
      if (inserted) order.push_back(g);
      ++it->second;
    }
  }
  std::vector<std::size_t> c;
  c.reserve(order.size());
  for (const auto& g : order) c.push_back(counts[g]);
  return NGramPool(n_max, std::move(order), std::move(c));
}

FrequencyEntityDetector::FrequencyEntityDetector(const Corpus& reference,
                                                 std::size_t rare_threshold, std::size_t min_len)
    : rare_threshold_(rare_threshold), min_len_(min_len) {
  for (const auto& u : reference.utterances)
    for (const auto& w : u.words) ++counts_[w];
}

FrequencyEntityDetector::FrequencyEntityDetector(std::map<std::string, std::size_t> word_counts,
                                                 std::size_t rare_threshold, std::size_t min_len)
    : counts_(std::move(word_counts)), rare_threshold_(rare_threshold), min_len_(min_len) {}

std::size_t FrequencyEntityDetector::word_count(const std::string& w) const {
  auto it = counts_.find(w);
  return it == counts_.end() ? 0 : it->second;
}

std::vector<std::string> FrequencyEntityDetector::detect(
    const std::vector<std::string>& words) const {
  std::vector<std::string> out;
  for (const auto& w : words) {
    if (w.size() < min_len_) continue;
    if (rare_threshold_ != kNoThreshold && word_count(w) > rare_threshold_) continue;
    if (std::find(out.begin(), out.end(), w) == out.end()) out.push_back(w);
  }
  return out;
}

std::string FrequencyEntityDetector::config_string() const {
  std::uint64_t h = fnv1a("");
  for (const auto& [w, c] : counts_) h = fnv1a(hex64(h) + w + "=" + std::to_string(c));
  const std::string thr =
      rare_threshold_ == kNoThreshold ? std::string("inf") : std::to_string(rare_threshold_);
  return "frequency;rare_threshold=" + thr + ";min_len=" + std::to_string(min_len_) +
         ";counts=" + hex64(h);
}

std::vector<std::string> detect_entities(const std::vector<std::string>& words,
                                         const EntityDetector& detector) {
  auto found = detector.detect(words);
  for (const auto& e : found) {
    if (std::find(words.begin(), words.end(), e) == words.end()) {
      throw Error("entity detector '" + detector.id() + "' returned '" + e +
                  "', which is not in the transcript");
    }
  }
  return found;
}

void EntityNGramMap::add(const std::string& entity, const std::string& ngram) {
  auto it = index_.find(entity);
  if (it == index_.end()) {
    it = index_.emplace(entity, keys_.size()).first;
    keys_.push_back(entity);
    values_.emplace_back();
  }
  if (seen_.emplace(entity + '\x1f' + ngram, 0).second) values_[it->second].push_back(ngram);
}

const std::vector<std::string>& EntityNGramMap::at(const std::string& entity) const {
  static const std::vector<std::string> kEmpty;
  auto it = index_.find(entity);
  return it == index_.end() ? kEmpty : values_[it->second];
}

EntityNGramMap build_entity_map(const Corpus& corpus, const EntityDetector& detector,
                                std::size_t n_max) {
  EntityNGramMap map;
  for (const auto& u : corpus.utterances) {
    for (const auto& e : detect_entities(u.words, detector)) {
      for (const auto& g : ngrams_containing(u.words, e, n_max)) map.add(e, g);
    }
  }
  return map;
}

std::uint64_t fnv1a(std::string_view data) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void save_pools(const std::filesystem::path& dir, const NGramPool& pool,
                const EntityNGramMap& map, const EntityDetector& detector,
                const std::string& corpus_hash) {
  std::filesystem::create_directories(dir);
  const std::string det_hash = hex64(fnv1a(detector.config_string()));
  json header = {{"schema_version", kPoolSchemaVersion},
                 {"n_max", pool.n_max()},
                 {"detector", detector.id()},
                 {"detector_config", detector.config_string()},
                 {"detector_hash", det_hash},
                 {"corpus_hash", corpus_hash}};

  json pj = header;
  pj["kind"] = "ngram_pool";
  pj["ngrams"] = json::array();
  for (std::size_t i = 0; i < pool.size(); ++i)
    pj["ngrams"].push_back({{"ngram", pool[i]}, {"count", pool.counts()[i]}});

  json mj = header;
  mj["kind"] = "entity_map";
  mj["entities"] = json::array();
  for (const auto& e : map.entities()) mj["entities"].push_back({{"entity", e}, {"ngrams", map.at(e)}});

  std::ofstream(dir / "ngram_pool.json", std::ios::trunc) << pj.dump(1) << '\n';
  std::ofstream(dir / "entity_map.json", std::ios::trunc) << mj.dump(1) << '\n';
}

namespace {

json read_json(const std::filesystem::path& p) {
  std::ifstream is(p);
  if (!is) throw ConfigError("cannot open pool file: " + p.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw FormatError(p.string() + ": " + e.what());
  }
}

}  // namespace

PoolFiles load_pools(const std::filesystem::path& dir) {
  const json pj = read_json(dir / "ngram_pool.json");
  const json mj = read_json(dir / "entity_map.json");
  for (const json* j : {&pj, &mj}) {
    if (j->value("schema_version", -1) != kPoolSchemaVersion) {
      throw FormatError("pool file in " + dir.string() + " has unsupported schema version");
    }
  }
  if (pj.at("detector_hash") != mj.at("detector_hash") ||
      pj.at("corpus_hash") != mj.at("corpus_hash")) {
    throw FormatError("pool files in " + dir.string() + " come from different builds");
  }
  std::vector<std::string> grams;
  std::vector<std::size_t> counts;
  for (const auto& e : pj.at("ngrams")) {
    grams.push_back(e.at("ngram").get<std::string>());
    counts.push_back(e.at("count").get<std::size_t>());
  }
  PoolFiles out;
  out.ngram_pool = NGramPool(pj.at("n_max").get<std::size_t>(), std::move(grams), std::move(counts));
  for (const auto& e : mj.at("entities")) {
    const auto ent = e.at("entity").get<std::string>();
    for (const auto& g : e.at("ngrams")) out.entity_map.add(ent, g.get<std::string>());
  }
  out.detector_id = pj.at("detector").get<std::string>();
  out.detector_hash = pj.at("detector_hash").get<std::string>();
  out.corpus_hash = pj.at("corpus_hash").get<std::string>();
  return out;
}

}  // namespace lecb::pools
