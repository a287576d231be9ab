#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "lecb/numerics/ops.hpp"
#include "lecb/numerics/parameter.hpp"
#include "lecb/sampling.hpp"
#include "lecb/tokenizer.hpp"

namespace lecb::encoder {

struct EncoderConfig {
  std::size_t layers = 5;
  std::size_t d = 64;
  std::size_t heads = 4;
  std::size_t ff = 128;
  /// Maximum tokens per phrase; every phrase occupies exactly l rows of K.
  std::size_t l = 8;
  double dropout = 0.0;
  double ln_eps = 1e-5;

  void validate() const;
};

/// Row layout of the key/value matrices: phrase p owns rows [p*l, p*l + l),
/// of which the first lengths[p] hold real tokens.
struct PhraseLayout {
  std::size_t l = 0;
  std::vector<std::size_t> lengths;

  std::size_t phrases() const { return lengths.size(); }
  std::size_t rows() const { return lengths.size() * l; }
  std::size_t offset(std::size_t phrase) const { return phrase * l; }
  /// true for rows that hold a real token.
  std::vector<bool> valid_rows() const;
  void validate() const;
};

/// Successor row of every K row inside its own phrase, -1 for phrase-final
/// and padding rows. V = gather_rows(K, left_shift_index(layout)).
std::vector<long> left_shift_index(const PhraseLayout& layout);

/// V[r] = K[r+1] within a phrase; zero at phrase-final and padding rows.
num::Var left_shift(num::Var keys, const PhraseLayout& layout);

struct KeyValueStore {
  num::Var K;
  num::Var V;
  PhraseLayout layout;
  std::vector<bool> key_valid;  // padding rows are false
};

/// Five-layer (configurable) pre-norm transformer over the subword tokens of
/// each phrase. Attention is bidirectional inside a phrase and never crosses
/// phrase boundaries.
class ContextEncoder {
 public:
  /// Registers parameters named "<prefix>..." in `store`.
  ContextEncoder(num::ParameterStore& store, const std::string& prefix, std::size_t vocab_size,
                 EncoderConfig cfg);

  const EncoderConfig& config() const { return cfg_; }

  /// Returns K ((N*l) x d) with padding rows zeroed, plus the layout.
  /// Throws lecb::Error for an empty phrase or a phrase longer than l.
  KeyValueStore encode(num::Tape& tape, const std::vector<tok::TokenSeq>& phrases,
                       std::uint64_t dropout_seed = 0, bool training = false) const;
  KeyValueStore encode(num::Tape& tape, const sampling::ContextBatch& batch,
                       std::uint64_t dropout_seed = 0, bool training = false) const;

 private:
  struct Layer {
    num::Parameter *ln1_g, *ln1_b, *wq, *wk, *wv, *wo, *ln2_g, *ln2_b, *ff1_w, *ff1_b, *ff2_w,
        *ff2_b;
  };
  EncoderConfig cfg_;
  std::size_t vocab_size_;
  num::Parameter* embed_;
  std::vector<Layer> layers_;
  num::Parameter *lnf_g_, *lnf_b_;
};

/// Sinusoidal encoding for positions [0, l) in d dims.
num::Tensor sinusoidal_positions(std::size_t l, std::size_t d);

}  // namespace lecb::encoder
