#include <cmath>

#include "lecb/biasing.hpp"
#include "lecb/error.hpp"

namespace lecb::bias {

using num::Init;
using num::Tape;
using num::Var;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::none: return "none";
    case Variant::baseline_nam: return "baseline_nam";
    case Variant::lecb_v1: return "lecb_v1";
    case Variant::lecb_v2: return "lecb_v2";
    case Variant::cb_c: return "cb_c";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "none") return Variant::none;
  if (s == "baseline_nam" || s == "nam") return Variant::baseline_nam;
  if (s == "lecb_v1" || s == "v1") return Variant::lecb_v1;
  if (s == "lecb_v2" || s == "v2") return Variant::lecb_v2;
  if (s == "cb_c" || s == "cbc") return Variant::cb_c;
  throw ConfigError("unknown variant '" + s +
                    "' (expected none, baseline_nam, lecb_v1, lecb_v2 or cb_c)");
}

void BiasConfig::validate() const {
  if (window == 0 || window % 2 == 0) {
    throw ConfigError("bias: window k must be odd and >= 1, got " + std::to_string(window));
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("bias: lambda must be >= 0");
  if (d == 0 || d_a == 0) throw ConfigError("bias: d and d_a must be positive");
  if (heads == 0 || d % heads != 0) throw ConfigError("bias: d must be divisible by heads");
  const std::size_t nh = effective_na_heads();
  if (d % nh != 0) throw ConfigError("bias: d must be divisible by the NA heads");
}

namespace {

encoder::EncoderConfig checked_encoder_config(encoder::EncoderConfig enc, const BiasConfig& cfg) {
  cfg.validate();
  enc.d = cfg.d;
  return enc;
}

}  // namespace

ContextualBiasModel::ContextualBiasModel(std::size_t vocab_size, encoder::EncoderConfig enc_cfg,
                                         BiasConfig cfg, std::uint64_t seed)
    : store_(seed),
      cfg_(cfg),
      encoder_(store_, "encoder.", vocab_size, checked_encoder_config(enc_cfg, cfg)) {
  const std::size_t d = cfg_.d, da = cfg_.d_a, k = cfg_.window;
  mha_wq_ = &store_.add("mha.wq", da, d, Init::xavier_uniform);
  mha_bq_ = &store_.add("mha.bq", 1, d, Init::zeros);
  mha_wk_ = &store_.add("mha.wk", d, d, Init::xavier_uniform);
  mha_wv_ = &store_.add("mha.wv", d, d, Init::xavier_uniform);

  const std::size_t in_dim = cfg_.variant == Variant::lecb_v1 ? da : d;
  ffn_in_w_ = &store_.add("ffn_in.weight", in_dim, d, Init::xavier_uniform);
  ffn_in_b_ = &store_.add("ffn_in.bias", 1, d, Init::zeros);

  na_wq_ = &store_.add("na.wq", d, d, Init::xavier_uniform);
  na_wk_ = &store_.add("na.wk", d, d, Init::xavier_uniform);
  na_wv_ = &store_.add("na.wv", d, d, Init::xavier_uniform);
  na_rel_ = &store_.add("na.relative_bias", cfg_.effective_na_heads(), k, Init::zeros);

  conv_kernel_ = &store_.add("conv.depthwise", k, d, Init::xavier_uniform);
  conv_bias_ = &store_.add("conv.depthwise_bias", 1, d, Init::zeros);
  conv_pw_w_ = &store_.add("conv.pointwise", d, d, Init::xavier_uniform);
  conv_pw_b_ = &store_.add("conv.pointwise_bias", 1, d, Init::zeros);

  // Zero-initialised projection back to d_a: the untrained module is an identity on X.
  ffn_out_w_ = &store_.add("ffn_out.weight", d, da, Init::zeros);
  ffn_out_b_ = &store_.add("ffn_out.bias", 1, da, Init::zeros);
}

num::AttentionResult ContextualBiasModel::mha_bias(Tape& tape, Var X,
                                                   const encoder::KeyValueStore& kv) const {
  if (X.cols() != cfg_.d_a) {
    throw DimensionError("mha_bias: X has " + std::to_string(X.cols()) + " columns, expected d_a=" +
                         std::to_string(cfg_.d_a));
  }
  Var q = num::linear(X, tape.param(*mha_wq_), tape.param(*mha_bq_));
  Var k = num::matmul(kv.K, tape.param(*mha_wk_));
  Var v = num::matmul(kv.V, tape.param(*mha_wv_));
  return num::attention(q, k, v, cfg_.heads, num::AttentionMask::full(X.rows(), kv.key_valid));
}

NeighbourhoodResult ContextualBiasModel::neighbourhood(Tape& tape, Var H) const {
  Var q = num::matmul(H, tape.param(*na_wq_));
  Var k = num::matmul(H, tape.param(*na_wk_));
  Var v = num::matmul(H, tape.param(*na_wv_));
  return neighbourhood_attention(q, k, v, tape.param(*na_rel_), cfg_.effective_na_heads(),
                                 cfg_.window);
}

Var ContextualBiasModel::outer_ffn(Tape& tape, Var z) const {
  return num::linear(z, tape.param(*ffn_out_w_), tape.param(*ffn_out_b_));
}

Var ContextualBiasModel::inner_ffn(Tape& tape, Var z) const {
  if (z.cols() != ffn_in_w_->value.rows()) {
    throw DimensionError("inner FFN expects " + std::to_string(ffn_in_w_->value.rows()) +
                         " input columns, got " + std::to_string(z.cols()));
  }
  return num::linear(z, tape.param(*ffn_in_w_), tape.param(*ffn_in_b_));
}

Var ContextualBiasModel::conv_branch(Tape& tape, Var z) const {
  Var dw = depthwise_conv1d(z, tape.param(*conv_kernel_), tape.param(*conv_bias_));
  Var pw = num::linear(dw, tape.param(*conv_pw_w_), tape.param(*conv_pw_b_));
  return num::add(z, pw);
}

namespace {

void check_dims(Var X, Var H_cb, std::size_t d_a, std::size_t d) {
  if (X.cols() != d_a || H_cb.cols() != d || X.rows() != H_cb.rows()) {
    throw DimensionError("combiner: X " + X.value().shape_string() + " / H_cb " +
                         H_cb.value().shape_string() + " do not match d_a=" +
                         std::to_string(d_a) + ", d=" + std::to_string(d));
  }
}

}  // namespace

Var ContextualBiasModel::combine_v1(Tape& tape, Var X, Var H_cb, BiasOutput* out) const {
  check_dims(X, H_cb, cfg_.d_a, cfg_.d);
  if (cfg_.variant != Variant::lecb_v1) throw ConfigError("combine_v1 requires variant lecb_v1");
  auto na = neighbourhood(tape, inner_ffn(tape, X));
  if (out != nullptr) {
    out->local = na.out;
    out->na_weights = na.weights;
  }
  Var mixed = num::add(H_cb, num::scale(na.out, cfg_.lambda));
  return num::add(X, outer_ffn(tape, mixed));
}

Var ContextualBiasModel::combine_v2(Tape& tape, Var X, Var H_cb, BiasOutput* out) const {
  check_dims(X, H_cb, cfg_.d_a, cfg_.d);
  if (cfg_.variant == Variant::lecb_v1) throw ConfigError("combine_v2: inner FFN is sized for v1");
  auto na = neighbourhood(tape, inner_ffn(tape, H_cb));
  if (out != nullptr) {
    out->local = na.out;
    out->na_weights = na.weights;
  }
  Var mixed = num::add(H_cb, num::scale(na.out, cfg_.lambda));
  return num::add(X, outer_ffn(tape, mixed));
}

Var ContextualBiasModel::combine_cbc(Tape& tape, Var X, Var H_cb, BiasOutput* out) const {
  check_dims(X, H_cb, cfg_.d_a, cfg_.d);
  if (cfg_.variant == Variant::lecb_v1) throw ConfigError("combine_cbc: inner FFN is sized for v1");
  Var local = conv_branch(tape, inner_ffn(tape, H_cb));
  if (out != nullptr) out->local = local;
  Var mixed = num::add(H_cb, num::scale(local, cfg_.lambda));
  return num::add(X, outer_ffn(tape, mixed));
}

Var ContextualBiasModel::combine_nam(Tape& tape, Var X, Var H_cb) const {
  check_dims(X, H_cb, cfg_.d_a, cfg_.d);
  return num::add(X, outer_ffn(tape, H_cb));
}

BiasOutput ContextualBiasModel::forward(Tape& tape, Var X, const sampling::ContextBatch& batch,
                                        std::uint64_t dropout_seed, bool training) const {
  std::vector<tok::TokenSeq> phrases;
  phrases.reserve(batch.phrases.size());
  for (const auto& p : batch.phrases) phrases.push_back(p.tokens);
  return forward(tape, X, phrases, dropout_seed, training);
}

BiasOutput ContextualBiasModel::forward(Tape& tape, Var X,
                                        const std::vector<tok::TokenSeq>& phrases,
                                        std::uint64_t dropout_seed, bool training) const {
  BiasOutput out;
  if (cfg_.variant == Variant::none) {
    out.H = X;
    return out;
  }
  if (X.cols() != cfg_.d_a) {
    throw DimensionError("forward: X has " + std::to_string(X.cols()) + " columns, expected d_a=" +
                         std::to_string(cfg_.d_a));
  }
  auto kv = encoder_.encode(tape, phrases, dropout_seed, training);
  auto mha = mha_bias(tape, X, kv);
  out.H_cb = mha.out;
  out.attention_weights = mha.weights;
  switch (cfg_.variant) {
    case Variant::baseline_nam: out.H = combine_nam(tape, X, mha.out); break;
    case Variant::lecb_v1: out.H = combine_v1(tape, X, mha.out, &out); break;
    case Variant::lecb_v2: out.H = combine_v2(tape, X, mha.out, &out); break;
    case Variant::cb_c: out.H = combine_cbc(tape, X, mha.out, &out); break;
    case Variant::none: break;
  }
  out.kv = std::move(kv);
  return out;
}

std::vector<num::Parameter*> ContextualBiasModel::active_parameters() {
  std::vector<num::Parameter*> out;
  for (num::Parameter* p : store_.all()) {
    const std::string& n = p->name;
    const bool uses_na = cfg_.variant == Variant::lecb_v1 || cfg_.variant == Variant::lecb_v2;
    const bool uses_conv = cfg_.variant == Variant::cb_c;
    const bool uses_inner = uses_na || uses_conv;
    if (cfg_.variant == Variant::none) continue;
    if (n.rfind("na.", 0) == 0 && !uses_na) continue;
    if (n.rfind("conv.", 0) == 0 && !uses_conv) continue;
    if (n.rfind("ffn_in.", 0) == 0 && !uses_inner) continue;
    out.push_back(p);
  }
  return out;
}

}  // namespace lecb::bias
