#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "lecb/error.hpp"
#include "lecb/harness.hpp"

namespace lecb::harness {

using num::Rng;
using num::Tensor;

void TaskConfig::validate() const {
  if (alphabet < 2 || alphabet > 26) throw ConfigError("task: alphabet must lie in [2, 26]");
  if (common_words < 2) throw ConfigError("task: need at least 2 common words");
  if (rare_words < 1) throw ConfigError("task: need at least 1 rare word");
  if (vocab_target < alphabet) throw ConfigError("task: vocab_target must cover the alphabet");
  if (pretrain_sentences < 1) throw ConfigError("task: pretrain_sentences must be positive");
  if (min_words < 1 || max_words < min_words) throw ConfigError("task: bad utterance length range");
  if (frames_per_token < 1) throw ConfigError("task: frames_per_token must be >= 1");
  if (coarse_dims < 1 || fine_dims < 1) throw ConfigError("task: feature dims must be positive");
  if (!(noise > 0.0) || !(ood_noise > 0.0)) throw ConfigError("task: noise must be positive");
  if (rare_train_occurrences > rare_threshold) {
    throw ConfigError("task: rare words must occur at most rare_threshold times in training");
  }
  if (!(logit_temperature > 0.0)) throw ConfigError("task: logit_temperature must be positive");
  if (probe_size < 1) throw ConfigError("task: probe_size must be positive");
}

nlohmann::json TaskConfig::to_json() const {
  return {{"alphabet", alphabet},
          {"common_words", common_words},
          {"rare_words", rare_words},
          {"vocab_target", vocab_target},
          {"pretrain_sentences", pretrain_sentences},
          {"train_common", train_common},
          {"rare_train_occurrences", rare_train_occurrences},
          {"dev_utterances", dev_utterances},
          {"test_clean", test_clean},
          {"test_rare_per_word", test_rare_per_word},
          {"test_ood", test_ood},
          {"min_words", min_words},
          {"max_words", max_words},
          {"frames_per_token", frames_per_token},
          {"blank_frames", blank_frames},
          {"coarse_dims", coarse_dims},
          {"fine_dims", fine_dims},
          {"coarse_scale", coarse_scale},
          {"fine_scale", fine_scale},
          {"noise", noise},
          {"ood_noise", ood_noise},
          {"ood_shift", ood_shift},
          {"logit_temperature", logit_temperature},
          {"rare_threshold", rare_threshold},
          {"min_entity_len", min_entity_len},
          {"probe_size", probe_size},
          {"zero_shot", zero_shot},
          {"seed", seed}};
}

TaskConfig TaskConfig::from_json(const nlohmann::json& j) {
  TaskConfig c;
  const nlohmann::json known = c.to_json();
  if (!j.is_object()) throw ConfigError("task config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!known.contains(key)) throw ConfigError("task config: unknown key '" + key + "'");
  }
  try {
#define LECB_FIELD(name) \
  if (j.contains(#name)) j.at(#name).get_to(c.name)
    LECB_FIELD(alphabet);
    LECB_FIELD(common_words);
    LECB_FIELD(rare_words);
    LECB_FIELD(vocab_target);
    LECB_FIELD(pretrain_sentences);
    LECB_FIELD(train_common);
    LECB_FIELD(rare_train_occurrences);
    LECB_FIELD(dev_utterances);
    LECB_FIELD(test_clean);
    LECB_FIELD(test_rare_per_word);
    LECB_FIELD(test_ood);
    LECB_FIELD(min_words);
    LECB_FIELD(max_words);
    LECB_FIELD(frames_per_token);
    LECB_FIELD(blank_frames);
    LECB_FIELD(coarse_dims);
    LECB_FIELD(fine_dims);
    LECB_FIELD(coarse_scale);
    LECB_FIELD(fine_scale);
    LECB_FIELD(noise);
    LECB_FIELD(ood_noise);
    LECB_FIELD(ood_shift);
    LECB_FIELD(logit_temperature);
    LECB_FIELD(rare_threshold);
    LECB_FIELD(min_entity_len);
    LECB_FIELD(probe_size);
    LECB_FIELD(zero_shot);
    LECB_FIELD(seed);
#undef LECB_FIELD
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("task config: ") + e.what());
  }
  c.validate();
  return c;
}

const pools::Corpus& SyntheticTask::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test_clean") return test_clean;
  if (name == "test_rare") return test_rare;
  if (name == "test_ood") return test_ood;
  if (name == "probe") return probe;
  throw ConfigError("unknown split '" + name +
                    "' (expected train, dev, test_clean, test_rare, test_ood or probe)");
}

const Alignment& SyntheticTask::alignment(const std::string& utterance_id) const {
  auto it = alignments.find(utterance_id);
  if (it == alignments.end()) throw Error("no alignment for utterance " + utterance_id);
  return it->second;
}

std::uint64_t SyntheticTask::hash() const {
  std::uint64_t h = pools::fnv1a(cfg.to_json().dump());
  for (const auto* c : {&train, &dev, &test_clean, &test_rare, &test_ood}) {
    for (const auto& u : c->utterances) {
      h = Rng::combine(h, pools::fnv1a(u.id + "\t" + u.transcript()));
      if (u.features) {
        const auto& v = u.features->values();
        h = Rng::combine(h, pools::fnv1a(std::string_view(
                                reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double))));
      }
    }
  }
  return h;
}

namespace {

Tensor random_rows(std::size_t rows, std::size_t cols, double norm, Rng& rng) {
  Tensor t(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      t(r, c) = rng.normal();
      s += t(r, c) * t(r, c);
    }
    s = std::sqrt(s);
    for (std::size_t c = 0; c < cols; ++c) t(r, c) *= norm / s;
  }
  return t;
}

std::string random_word(std::size_t alphabet, std::size_t len, Rng& rng) {
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w += static_cast<char>('a' + rng.below(alphabet));
  return w;
}

bool adjacent_repeat(const tok::TokenSeq& s) {
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s.ids[i] == s.ids[i - 1]) return true;
  return false;
}

std::vector<std::string> sentence(const std::vector<std::string>& words, std::size_t n, Rng& rng) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(words[rng.below(words.size())]);
  return out;
}

}  // namespace

std::pair<Tensor, Alignment> render(const SyntheticTask& task,
                                    const std::vector<std::string>& words, double noise,
                                    double shift, Rng& rng) {
  const TaskConfig& c = task.cfg;
  const std::size_t dims = c.feature_dims();
  std::vector<std::vector<double>> frames;
  Alignment al;
  auto push = [&](long token, long coarse_src, long word) {
    std::vector<double> f(dims);
    for (std::size_t k = 0; k < c.coarse_dims; ++k) {
      f[k] = coarse_src >= 0 ? task.coarse(static_cast<std::size_t>(coarse_src), k) : 0.0;
    }
    for (std::size_t k = 0; k < c.fine_dims; ++k) {
      f[c.coarse_dims + k] = token > 0 ? task.fine(static_cast<std::size_t>(token), k) : 0.0;
    }
    for (auto& v : f) v += shift + noise * rng.normal();
    frames.push_back(std::move(f));
    al.labels.push_back(token);
    al.word_index.push_back(word);
  };
  auto blanks = [&] {
    for (std::size_t b = 0; b < c.blank_frames; ++b) push(tok::kPadId, -1, -1);
  };
  blanks();
  for (std::size_t w = 0; w < words.size(); ++w) {
    const auto seq = tok::tokenize(words[w], task.vocab);
    auto partner = task.confusable.find(words[w]);
    tok::TokenSeq coarse_seq = seq;
    if (partner != task.confusable.end()) coarse_seq = tok::tokenize(partner->second, task.vocab);
    for (std::size_t t = 0; t < seq.size(); ++t) {
      const long src = t < coarse_seq.size() ? coarse_seq.ids[t] : seq.ids[t];
      for (std::size_t f = 0; f < c.frames_per_token; ++f) {
        push(seq.ids[t], src, static_cast<long>(w));
      }
    }
    blanks();
  }
  Tensor out(frames.size(), dims);
  for (std::size_t r = 0; r < frames.size(); ++r)
    for (std::size_t k = 0; k < dims; ++k) out(r, k) = frames[r][k];
  return {std::move(out), std::move(al)};
}

SyntheticTask generate_task(const TaskConfig& cfg) {
  cfg.validate();
  SyntheticTask task;
  task.cfg = cfg;
  Rng rng(Rng::combine(cfg.seed, pools::fnv1a("task")));

  // Common words and the text the backbone vocabulary is built from.
  std::vector<std::string> candidates;
  std::set<std::string> seen;
  while (candidates.size() < cfg.common_words * 3 / 2 + 4) {
    const std::string w = random_word(cfg.alphabet, 4 + rng.below(4), rng);
    if (seen.insert(w).second) candidates.push_back(w);
  }
  for (std::size_t s = 0; s < cfg.pretrain_sentences; ++s) {
    const std::size_t n = cfg.min_words + rng.below(cfg.max_words - cfg.min_words + 1);
    task.pretrain_text.push_back(tok::join_words(sentence(candidates, n, rng)));
  }
  task.vocab = tok::build_vocab(task.pretrain_text, cfg.vocab_target);

  std::map<std::size_t, std::vector<std::string>> common_by_len;
  for (const auto& w : candidates) {
    if (task.common_words.size() == cfg.common_words) break;
    const auto seq = tok::tokenize(w, task.vocab);
    if (adjacent_repeat(seq)) continue;
    task.common_words.push_back(w);
    common_by_len[seq.size()].push_back(w);
  }
  if (task.common_words.size() < cfg.common_words) {
    throw ConfigError("task: could not find enough common words; raise vocab_target");
  }

  // Rare words: concatenations of multi-character pieces that tokenize back
  // into exactly those pieces, paired with a common word of equal token count.
  std::vector<std::string> pieces;
  for (std::size_t i = 2 + task.vocab.alphabet_size(); i < task.vocab.size(); ++i) {
    pieces.push_back(task.vocab.piece(static_cast<tok::TokenId>(i)));
  }
  if (pieces.empty()) throw ConfigError("task: vocabulary has no merged pieces");
  std::set<std::string> taken(task.common_words.begin(), task.common_words.end());
  std::size_t attempts = 0;
  while (task.rare_words.size() < cfg.rare_words) {
    if (++attempts > 200000) throw ConfigError("task: could not generate enough rare words");
    const std::size_t n = 2 + rng.below(2);
    std::string w;
    for (std::size_t i = 0; i < n; ++i) w += pieces[rng.below(pieces.size())];
    if (w.size() < cfg.min_entity_len || taken.count(w)) continue;
    const auto seq = tok::tokenize(w, task.vocab);
    if (seq.size() != n || adjacent_repeat(seq)) continue;
    auto it = common_by_len.find(n);
    if (it == common_by_len.end() || it->second.empty()) continue;
    const std::string partner = it->second[rng.below(it->second.size())];
    const auto pseq = tok::tokenize(partner, task.vocab);
    bool differs = true;
    for (std::size_t i = 0; i < n; ++i) differs = differs && seq.ids[i] != pseq.ids[i];
    if (!differs) continue;
    taken.insert(w);
    task.rare_words.push_back(w);
    task.confusable[w] = partner;
  }

  task.coarse = random_rows(task.vocab.size(), cfg.coarse_dims, cfg.coarse_scale, rng);
  task.fine = random_rows(task.vocab.size(), cfg.fine_dims, cfg.fine_scale, rng);
  for (std::size_t k = 0; k < cfg.coarse_dims; ++k) task.coarse(tok::kPadId, k) = 0.0;
  for (std::size_t k = 0; k < cfg.fine_dims; ++k) task.fine(tok::kPadId, k) = 0.0;

  // Rare words seen in training and those reserved for evaluation.
  std::vector<std::string> train_rare = task.rare_words, eval_rare = task.rare_words;
  if (cfg.zero_shot) {
    const std::size_t half = task.rare_words.size() / 2;
    train_rare.assign(task.rare_words.begin(), task.rare_words.begin() + half);
    eval_rare.assign(task.rare_words.begin() + half, task.rare_words.end());
  }

  auto length = [&] { return cfg.min_words + rng.below(cfg.max_words - cfg.min_words + 1); };
  auto with_rare = [&](const std::string& rare) {
    auto words = sentence(task.common_words, std::max<std::size_t>(length(), 2) - 1, rng);
    words.insert(words.begin() + static_cast<long>(rng.below(words.size() + 1)), rare);
    return words;
  };
  auto plain = [&] { return sentence(task.common_words, length(), rng); };

  std::vector<std::vector<std::string>> train_words;
  for (const auto& r : train_rare)
    for (std::size_t k = 0; k < cfg.rare_train_occurrences; ++k) train_words.push_back(with_rare(r));
  for (std::size_t k = 0; k < cfg.train_common; ++k) train_words.push_back(plain());
  rng.shuffle(std::span<std::vector<std::string>>(train_words));

  std::vector<std::vector<std::string>> dev_words, clean_words, rare_words, ood_words;
  for (std::size_t k = 0; k < cfg.dev_utterances; ++k) {
    dev_words.push_back(k % 2 == 0 ? with_rare(eval_rare[rng.below(eval_rare.size())]) : plain());
  }
  for (std::size_t k = 0; k < cfg.test_clean; ++k) clean_words.push_back(plain());
  for (const auto& r : eval_rare)
    for (std::size_t k = 0; k < cfg.test_rare_per_word; ++k) rare_words.push_back(with_rare(r));
  for (std::size_t k = 0; k < cfg.test_ood; ++k) {
    ood_words.push_back(k % 2 == 0 ? with_rare(eval_rare[rng.below(eval_rare.size())]) : plain());
  }

  auto build = [&](pools::Corpus& corpus, const std::string& prefix,
                   const std::vector<std::vector<std::string>>& lists, double noise,
                   double shift) {
    for (std::size_t i = 0; i < lists.size(); ++i) {
      std::ostringstream id;
      id << prefix << '-';
      id.width(4);
      id.fill('0');
      id << i;
      pools::Utterance u;
      u.id = id.str();
      u.words = lists[i];
      Rng frame_rng(Rng::combine(cfg.seed, pools::fnv1a(u.id)));
      auto [features, al] = render(task, u.words, noise, shift, frame_rng);
      u.features = std::move(features);
      task.alignments[u.id] = std::move(al);
      corpus.utterances.push_back(std::move(u));
    }
    corpus.validate();
  };
  build(task.train, "train", train_words, cfg.noise, 0.0);
  build(task.dev, "dev", dev_words, cfg.noise, 0.0);
  build(task.test_clean, "clean", clean_words, cfg.noise, 0.0);
  build(task.test_rare, "rare", rare_words, cfg.noise, 0.0);
  build(task.test_ood, "ood", ood_words, cfg.ood_noise, cfg.ood_shift);
  const std::size_t probe = std::min(cfg.probe_size, task.train.size());
  task.probe.utterances.assign(task.train.utterances.begin(),
                               task.train.utterances.begin() + static_cast<long>(probe));
  return task;
}

}  // namespace lecb::harness
