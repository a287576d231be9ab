#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lecb/context_encoder.hpp"
#include "lecb/numerics/ops.hpp"
#include "lecb/numerics/parameter.hpp"
#include "lecb/sampling.hpp"

namespace lecb::bias {

enum class Variant { none, baseline_nam, lecb_v1, lecb_v2, cb_c };

std::string to_string(Variant v);
/// Accepts none, baseline_nam, lecb_v1, lecb_v2, cb_c.
Variant parse_variant(const std::string& s);

struct BiasConfig {
  Variant variant = Variant::lecb_v2;
  double lambda = 1.0;
  /// Neighbourhood window (also the CB-C kernel size); odd.
  std::size_t window = 3;
  /// Heads of the bias-retrieval attention.
  std::size_t heads = 4;
  /// Heads of the neighbourhood attention (0 = same as `heads`).
  std::size_t na_heads = 0;
  /// Context-encoder / bias dimension.
  std::size_t d = 64;
  /// Acoustic representation dimension.
  std::size_t d_a = 64;

  std::size_t effective_na_heads() const { return na_heads == 0 ? heads : na_heads; }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Neighbourhood attention kernel

/// Window of frame i: the min(k, tau) consecutive frames starting at `start`.
/// The window is centred on i and shifted inward at the sequence edges.
struct Window {
  std::size_t start = 0;
  std::size_t size = 0;
};
Window neighbourhood_window(std::size_t i, std::size_t tau, std::size_t k);

/// Index of the relative bias used for key frame j seen from query frame i:
/// the offset j - i clamped to [-(k-1)/2, (k-1)/2], shifted to [0, k).
std::size_t relative_bias_index(std::size_t i, std::size_t j, std::size_t k);

struct NeighbourhoodResult {
  num::Var out;
  /// Per head: tau x window-size probabilities (column s = frame start+s).
  std::shared_ptr<std::vector<num::Tensor>> weights;
  /// Set when k > 2*tau - 1 and the window covers the whole sequence.
  bool clamped_to_full = false;
};

/// softmax((q_i k_j^T + B[h][rel(i,j)]) / sqrt(d_head)) v_j over the window
/// of every frame i, per head. `rel_bias` is heads x k.
NeighbourhoodResult neighbourhood_attention(num::Var q, num::Var k, num::Var v,
                                            num::Var rel_bias, std::size_t heads,
                                            std::size_t window);

/// Per-channel 1-D convolution over time, zero padded, kernel rows ordered by
/// offset -(k-1)/2 .. (k-1)/2. `kernel` is k x d, `bias` 1 x d.
num::Var depthwise_conv1d(num::Var x, num::Var kernel, num::Var bias);

// ---------------------------------------------------------------------------
// Model

struct BiasOutput {
  /// Multi-head bias retrieval output, tau x d (absent for Variant::none).
  std::optional<num::Var> H_cb;
  /// Neighbourhood (or convolution) branch output, tau x d, before lambda.
  std::optional<num::Var> local;
  /// Biased representation, tau x d_a.
  num::Var H;
  /// Per head: tau x (N*l) retrieval weights.
  std::shared_ptr<std::vector<num::Tensor>> attention_weights;
  /// Per head: tau x window neighbourhood weights.
  std::shared_ptr<std::vector<num::Tensor>> na_weights;
  std::optional<encoder::KeyValueStore> kv;
};

/// Context encoder plus bias retrieval and combiners. All parameters live in
/// one store ("encoder.", "mha.", "na.", "conv.", "ffn_in.", "ffn_out.").
class ContextualBiasModel {
 public:
  ContextualBiasModel(std::size_t vocab_size, encoder::EncoderConfig enc_cfg, BiasConfig cfg,
                      std::uint64_t seed);

  const BiasConfig& config() const { return cfg_; }
  const encoder::EncoderConfig& encoder_config() const { return encoder_.config(); }
  num::ParameterStore& parameters() { return store_; }
  const num::ParameterStore& parameters() const { return store_; }

  /// Multi-head retrieval of the bias vector from the phrase key/value store.
  /// Returns H_cb (tau x d) and the per-head weights.
  num::AttentionResult mha_bias(num::Tape& tape, num::Var X,
                                const encoder::KeyValueStore& kv) const;

  /// NA over a projection of H (tau x d).
  NeighbourhoodResult neighbourhood(num::Tape& tape, num::Var H) const;

  /// X + FFN(H_cb + lambda * NA(FFN(X)))
  num::Var combine_v1(num::Tape& tape, num::Var X, num::Var H_cb, BiasOutput* out = nullptr) const;
  /// X + FFN(H_cb + lambda * NA(FFN(H_cb)))
  num::Var combine_v2(num::Tape& tape, num::Var X, num::Var H_cb, BiasOutput* out = nullptr) const;
  /// v2 with the NA replaced by depthwise+pointwise convolution with a skip.
  num::Var combine_cbc(num::Tape& tape, num::Var X, num::Var H_cb, BiasOutput* out = nullptr) const;
  /// X + FFN(H_cb)
  num::Var combine_nam(num::Tape& tape, num::Var X, num::Var H_cb) const;

  /// Full pipeline: encode phrases, left shift, retrieval, combiner.
  BiasOutput forward(num::Tape& tape, num::Var X, const sampling::ContextBatch& batch,
                     std::uint64_t dropout_seed = 0, bool training = false) const;
  BiasOutput forward(num::Tape& tape, num::Var X, const std::vector<tok::TokenSeq>& phrases,
                     std::uint64_t dropout_seed = 0, bool training = false) const;

  /// Names of the parameters used by the configured variant.
  std::vector<num::Parameter*> active_parameters();

 private:
  num::Var outer_ffn(num::Tape& tape, num::Var z) const;
  num::Var inner_ffn(num::Tape& tape, num::Var z) const;
  num::Var conv_branch(num::Tape& tape, num::Var z) const;

  num::ParameterStore store_;
  BiasConfig cfg_;
  encoder::ContextEncoder encoder_;
  num::Parameter *mha_wq_, *mha_bq_, *mha_wk_, *mha_wv_;
  num::Parameter *na_wq_, *na_wk_, *na_wv_, *na_rel_;
  num::Parameter *conv_kernel_, *conv_bias_, *conv_pw_w_, *conv_pw_b_;
  num::Parameter *ffn_in_w_, *ffn_in_b_;
  num::Parameter *ffn_out_w_, *ffn_out_b_;
};

}  // namespace lecb::bias
