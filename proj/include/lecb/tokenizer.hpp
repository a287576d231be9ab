#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace lecb::tok {

using TokenId = long;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr std::string_view kPadToken = "[PAD]";
inline constexpr std::string_view kUnkToken = "[UNK]";
inline constexpr std::string_view kContinuation = "##";

/// Subword vocabulary: [PAD], [UNK], the single characters of the training
/// alphabet (sorted), then merged pieces in merge order. Pieces carry no
/// position marker; whether a token continues a word is recorded per token
/// in TokenSeq and rendered with the "##" prefix.
class SubwordVocab {
 public:
  SubwordVocab() = default;
  SubwordVocab(std::vector<std::string> tokens,
               std::vector<std::pair<std::string, std::string>> merges);

  std::size_t size() const { return tokens_.size(); }
  const std::string& piece(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  /// kUnkId when absent.
  TokenId id_of(std::string_view piece) const;
  bool contains(std::string_view piece) const;
  std::size_t alphabet_size() const { return alphabet_size_; }
  std::size_t max_piece_length() const { return max_len_; }

  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::vector<std::pair<std::string, std::string>>& merges() const { return merges_; }

  /// Writes `<path>` (one token per line) and `<path>.merges` ("left right").
  void save(const std::filesystem::path& path) const;
  static SubwordVocab load(const std::filesystem::path& path);

 private:
  std::vector<std::string> tokens_;
  std::vector<std::pair<std::string, std::string>> merges_;
  std::unordered_map<std::string, TokenId> index_;
  std::size_t alphabet_size_ = 0;
  std::size_t max_len_ = 0;
};

struct TokenSeq {
  std::vector<TokenId> ids;
  /// continuation[i] is true when ids[i] continues the previous token's word.
  std::vector<bool> continuation;
  std::string text;

  std::size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  /// Keeps the first n tokens.
  void truncate(std::size_t n);
};

/// Lowercases and splits on ASCII whitespace.
std::vector<std::string> split_words(std::string_view text);
std::string join_words(const std::vector<std::string>& words, std::size_t begin = 0,
                       std::size_t end = std::string::npos);

/// BPE-style construction: pair counts over word types weighted by frequency,
/// most frequent pair merged first, ties broken by the lexicographically
/// smallest (left, right). Stops at target_size non-special tokens or when no
/// pair remains. Throws ConfigError when target_size < alphabet size or the
/// corpus is empty.
SubwordVocab build_vocab(const std::vector<std::string>& corpus, std::size_t target_size);

/// Greedy longest-match-first segmentation of each word. Characters outside
/// the alphabet become [UNK].
TokenSeq tokenize(std::string_view text, const SubwordVocab& vocab);

std::string detokenize(const TokenSeq& seq, const SubwordVocab& vocab);
std::string detokenize(const std::vector<TokenId>& ids, const std::vector<bool>& continuation,
                       const SubwordVocab& vocab);

/// Display form of each token, continuation pieces prefixed with "##".
std::vector<std::string> token_strings(const TokenSeq& seq, const SubwordVocab& vocab);

}  // namespace lecb::tok
