#include "lecb/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include "lecb/error.hpp"

namespace lecb::tok {

SubwordVocab::SubwordVocab(std::vector<std::string> tokens,
                           std::vector<std::pair<std::string, std::string>> merges)
    : tokens_(std::move(tokens)), merges_(std::move(merges)) {
  if (tokens_.size() < 2 || tokens_[0] != kPadToken || tokens_[1] != kUnkToken) {
    throw FormatError("vocab must start with [PAD], [UNK]");
  }
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw FormatError("vocab: duplicate token '" + tokens_[i] + "'");
    }
    if (i >= 2) {
      if (tokens_[i].empty()) throw FormatError("vocab: empty token");
      max_len_ = std::max(max_len_, tokens_[i].size());
      if (tokens_[i].size() == 1) ++alphabet_size_;
    }
  }
}

TokenId SubwordVocab::id_of(std::string_view piece) const {
  auto it = index_.find(std::string(piece));
  return it == index_.end() ? kUnkId : it->second;
}

bool SubwordVocab::contains(std::string_view piece) const {
  return index_.count(std::string(piece)) != 0;
}

void SubwordVocab::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw Error("cannot write vocab: " + path.string());
  for (const auto& t : tokens_) os << t << '\n';
  std::ofstream ms(path.string() + ".merges", std::ios::trunc);
  if (!ms) throw Error("cannot write merges: " + path.string() + ".merges");
  for (const auto& [l, r] : merges_) ms << l << ' ' << r << '\n';
}

SubwordVocab SubwordVocab::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error("cannot read vocab: " + path.string());
  std::vector<std::string> tokens;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty()) tokens.push_back(line);
  }
  std::vector<std::pair<std::string, std::string>> merges;
  std::ifstream ms(path.string() + ".merges");
  for (std::string line; ms && std::getline(ms, line);) {
    const auto sp = line.find(' ');
    if (sp == std::string::npos) continue;
    merges.emplace_back(line.substr(0, sp), line.substr(sp + 1));
  }
  return SubwordVocab(std::move(tokens), std::move(merges));
}

void TokenSeq::truncate(std::size_t n) {
  if (ids.size() <= n) return;
  ids.resize(n);
  continuation.resize(n);
}

std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> words;
  std::string cur;
  for (char ch : text) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      if (!cur.empty()) words.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
    }
  }
  if (!cur.empty()) words.push_back(std::move(cur));
  return words;
}

std::string join_words(const std::vector<std::string>& words, std::size_t begin,
                       std::size_t end) {
  end = std::min(end, words.size());
  std::string out;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) out.push_back(' ');
    out += words[i];
  }
  return out;
}

SubwordVocab build_vocab(const std::vector<std::string>& corpus, std::size_t target_size) {
  if (corpus.empty()) throw ConfigError("build_vocab: corpus is empty");
  std::map<std::string, std::size_t> word_freq;
  std::set<char> alphabet;
  for (const auto& line : corpus) {
    for (auto& w : split_words(line)) {
      alphabet.insert(w.begin(), w.end());
      ++word_freq[w];
    }
  }
  if (alphabet.empty()) throw ConfigError("build_vocab: corpus has no words");
  if (target_size < alphabet.size()) {
    throw ConfigError("build_vocab: target size " + std::to_string(target_size) +
                      " is below the alphabet size " + std::to_string(alphabet.size()));
  }

  std::vector<std::string> tokens{std::string(kPadToken), std::string(kUnkToken)};
  std::set<std::string> known;
  for (char c : alphabet) {
    tokens.emplace_back(1, c);
    known.insert(tokens.back());
  }

  // Each word type as its current symbol sequence.
  std::vector<std::pair<std::vector<std::string>, std::size_t>> words;
  for (const auto& [w, f] : word_freq) {
    std::vector<std::string> syms;
    for (char c : w) syms.emplace_back(1, c);
    words.emplace_back(std::move(syms), f);
  }

  std::vector<std::pair<std::string, std::string>> merges;
  while (tokens.size() - 2 < target_size) {
    std::map<std::pair<std::string, std::string>, std::size_t> counts;
    for (const auto& [syms, f] : words)
      for (std::size_t i = 0; i + 1 < syms.size(); ++i) counts[{syms[i], syms[i + 1]}] += f;
    if (counts.empty()) break;
    // std::map iterates pairs in lexicographic order, so the first maximum wins ties.
    auto best = counts.begin();
    for (auto it = counts.begin(); it != counts.end(); ++it)
      if (it->second > best->second) best = it;
    const auto pair = best->first;
    const std::string merged = pair.first + pair.second;
    merges.push_back(pair);
    if (known.insert(merged).second) tokens.push_back(merged);
    for (auto& [syms, f] : words) {
      std::vector<std::string> next;
      next.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size() && syms[i] == pair.first && syms[i + 1] == pair.second) {
          next.push_back(merged);
          ++i;
        } else {
          next.push_back(syms[i]);
        }
      }
      syms = std::move(next);
    }
  }
  return SubwordVocab(std::move(tokens), std::move(merges));
}

TokenSeq tokenize(std::string_view text, const SubwordVocab& vocab) {
  TokenSeq seq;
  seq.text = std::string(text);
  for (const auto& word : split_words(text)) {
    std::size_t pos = 0;
    bool first = true;
    while (pos < word.size()) {
      std::size_t len = std::min(vocab.max_piece_length(), word.size() - pos);
      TokenId id = kUnkId;
      for (; len > 0; --len) {
        const std::string_view cand(word.data() + pos, len);
        if (vocab.contains(cand)) {
          id = vocab.id_of(cand);
          break;
        }
      }
      if (len == 0) len = 1;
      seq.ids.push_back(id);
      seq.continuation.push_back(!first);
      first = false;
      pos += len;
    }
  }
  return seq;
}

std::string detokenize(const std::vector<TokenId>& ids, const std::vector<bool>& continuation,
                       const SubwordVocab& vocab) {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0 && !continuation[i]) out.push_back(' ');
    out += vocab.piece(ids[i]);
  }
  return out;
}

std::string detokenize(const TokenSeq& seq, const SubwordVocab& vocab) {
  return detokenize(seq.ids, seq.continuation, vocab);
}

std::vector<std::string> token_strings(const TokenSeq& seq, const SubwordVocab& vocab) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    out.push_back((seq.continuation[i] ? std::string(kContinuation) : std::string()) +
                  vocab.piece(seq.ids[i]));
  }
  return out;
}

}  // namespace lecb::tok
