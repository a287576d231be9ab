#include "lecb/context_encoder.hpp"

#include <cmath>

#include "lecb/error.hpp"
#include "lecb/numerics/rng.hpp"

namespace lecb::encoder {

using num::Init;
using num::Var;

void EncoderConfig::validate() const {
  if (layers < 1) throw ConfigError("encoder: layers must be >= 1");
  if (d == 0 || heads == 0 || d % heads != 0) {
    throw ConfigError("encoder: d=" + std::to_string(d) + " must be divisible by heads=" +
                      std::to_string(heads));
  }
  if (l < 1) throw ConfigError("encoder: l must be >= 1");
  if (ff < 1) throw ConfigError("encoder: ff must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("encoder: dropout must lie in [0,1)");
}

std::vector<bool> PhraseLayout::valid_rows() const {
  std::vector<bool> v(rows(), false);
  for (std::size_t p = 0; p < lengths.size(); ++p)
    for (std::size_t t = 0; t < lengths[p]; ++t) v[offset(p) + t] = true;
  return v;
}

void PhraseLayout::validate() const {
  if (l == 0) throw ConfigError("phrase layout: l must be >= 1");
  for (std::size_t p = 0; p < lengths.size(); ++p) {
    if (lengths[p] == 0) throw Error("phrase " + std::to_string(p) + " has no tokens");
    if (lengths[p] > l) {
      throw Error("phrase " + std::to_string(p) + " has " + std::to_string(lengths[p]) +
                  " tokens, limit is " + std::to_string(l));
    }
  }
}

std::vector<long> left_shift_index(const PhraseLayout& layout) {
  std::vector<long> idx(layout.rows(), -1);
  for (std::size_t p = 0; p < layout.phrases(); ++p) {
    const std::size_t base = layout.offset(p);
    for (std::size_t t = 0; t + 1 < layout.lengths[p]; ++t)
      idx[base + t] = static_cast<long>(base + t + 1);
  }
  return idx;
}

Var left_shift(Var keys, const PhraseLayout& layout) {
  if (keys.rows() != layout.rows()) {
    throw DimensionError("left_shift: K has " + std::to_string(keys.rows()) +
                         " rows, layout expects " + std::to_string(layout.rows()));
  }
  return num::gather_rows(keys, left_shift_index(layout));
}

num::Tensor sinusoidal_positions(std::size_t l, std::size_t d) {
  num::Tensor pe(l, d);
  for (std::size_t pos = 0; pos < l; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      pe(pos, i) = (i % 2 == 0) ? std::sin(static_cast<double>(pos) * rate)
                                : std::cos(static_cast<double>(pos) * rate);
    }
  }
  return pe;
}

ContextEncoder::ContextEncoder(num::ParameterStore& store, const std::string& prefix,
                               std::size_t vocab_size, EncoderConfig cfg)
    : cfg_(cfg), vocab_size_(vocab_size) {
  cfg_.validate();
  const std::size_t d = cfg_.d;
  embed_ = &store.add(prefix + "embed", vocab_size, d, Init::xavier_uniform);
  for (std::size_t i = 0; i < cfg_.layers; ++i) {
    const std::string p = prefix + "layer" + std::to_string(i) + ".";
    Layer L{};
    L.ln1_g = &store.add(p + "ln1.gain", 1, d, Init::ones);
    L.ln1_b = &store.add(p + "ln1.bias", 1, d, Init::zeros);
    L.wq = &store.add(p + "attn.wq", d, d, Init::xavier_uniform);
    L.wk = &store.add(p + "attn.wk", d, d, Init::xavier_uniform);
    L.wv = &store.add(p + "attn.wv", d, d, Init::xavier_uniform);
    L.wo = &store.add(p + "attn.wo", d, d, Init::xavier_uniform);
    L.ln2_g = &store.add(p + "ln2.gain", 1, d, Init::ones);
    L.ln2_b = &store.add(p + "ln2.bias", 1, d, Init::zeros);
    L.ff1_w = &store.add(p + "ff1.weight", d, cfg_.ff, Init::xavier_uniform);
    L.ff1_b = &store.add(p + "ff1.bias", 1, cfg_.ff, Init::zeros);
    L.ff2_w = &store.add(p + "ff2.weight", cfg_.ff, d, Init::xavier_uniform);
    L.ff2_b = &store.add(p + "ff2.bias", 1, d, Init::zeros);
    layers_.push_back(L);
  }
  lnf_g_ = &store.add(prefix + "ln_final.gain", 1, d, Init::ones);
  lnf_b_ = &store.add(prefix + "ln_final.bias", 1, d, Init::zeros);
}

KeyValueStore ContextEncoder::encode(num::Tape& tape, const sampling::ContextBatch& batch,
                                     std::uint64_t dropout_seed, bool training) const {
  std::vector<tok::TokenSeq> phrases;
  phrases.reserve(batch.phrases.size());
  for (const auto& p : batch.phrases) phrases.push_back(p.tokens);
  return encode(tape, phrases, dropout_seed, training);
}

KeyValueStore ContextEncoder::encode(num::Tape& tape, const std::vector<tok::TokenSeq>& phrases,
                                     std::uint64_t dropout_seed, bool training) const {
  PhraseLayout layout;
  layout.l = cfg_.l;
  for (const auto& p : phrases) layout.lengths.push_back(p.size());
  layout.validate();
  const std::size_t rows = layout.rows();
  if (rows == 0) throw Error("encode_phrases: no phrases");

  std::vector<long> ids(rows, tok::kPadId);
  for (std::size_t p = 0; p < phrases.size(); ++p) {
    for (std::size_t t = 0; t < phrases[p].size(); ++t) {
      const long id = phrases[p].ids[t];
      if (id < 0 || static_cast<std::size_t>(id) >= vocab_size_) {
        throw Error("encode_phrases: token id " + std::to_string(id) + " outside vocabulary");
      }
      ids[layout.offset(p) + t] = id;
    }
  }
  const auto valid = layout.valid_rows();
  std::vector<double> valid_scale(rows);
  for (std::size_t r = 0; r < rows; ++r) valid_scale[r] = valid[r] ? 1.0 : 0.0;

  num::AttentionMask mask;
  mask.key_valid = valid;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t p = r / cfg_.l;
    mask.range_begin.push_back(layout.offset(p));
    mask.range_end.push_back(layout.offset(p) + cfg_.l);
  }

  num::Tensor pos(rows, cfg_.d);
  const num::Tensor pe = sinusoidal_positions(cfg_.l, cfg_.d);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cfg_.d; ++c) pos(r, c) = pe(r % cfg_.l, c);

  num::Rng drop_rng(dropout_seed);
  auto dropout = [&](Var x) {
    if (!training || cfg_.dropout <= 0.0) return x;
    num::Tensor m(x.rows(), x.cols());
    const double keep = 1.0 - cfg_.dropout;
    for (auto& v : m.values()) v = drop_rng.bernoulli(keep) ? 1.0 / keep : 0.0;
    return num::mul(x, tape.constant(std::move(m)));
  };

  Var h = num::gather_rows(tape.param(*embed_), ids);
  h = num::add(num::scale(h, std::sqrt(static_cast<double>(cfg_.d))), tape.constant(std::move(pos)));
  for (const Layer& L : layers_) {
    Var x = num::layer_norm(h, tape.param(*L.ln1_g), tape.param(*L.ln1_b), cfg_.ln_eps);
    Var q = num::matmul(x, tape.param(*L.wq));
    Var k = num::matmul(x, tape.param(*L.wk));
    Var v = num::matmul(x, tape.param(*L.wv));
    Var a = num::attention(q, k, v, cfg_.heads, mask).out;
    h = num::add(h, dropout(num::matmul(a, tape.param(*L.wo))));
    x = num::layer_norm(h, tape.param(*L.ln2_g), tape.param(*L.ln2_b), cfg_.ln_eps);
    Var f = num::relu(num::linear(x, tape.param(*L.ff1_w), tape.param(*L.ff1_b)));
    f = num::linear(f, tape.param(*L.ff2_w), tape.param(*L.ff2_b));
    h = num::add(h, dropout(f));
  }
  h = num::layer_norm(h, tape.param(*lnf_g_), tape.param(*lnf_b_), cfg_.ln_eps);
  Var K = num::scale_rows(h, valid_scale);

  KeyValueStore kv;
  kv.K = K;
  kv.V = left_shift(K, layout);
  kv.layout = std::move(layout);
  kv.key_valid = valid;
  return kv;
}

}  // namespace lecb::encoder
