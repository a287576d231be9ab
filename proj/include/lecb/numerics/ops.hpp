#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "lecb/numerics/tape.hpp"

namespace lecb::num {

// Differentiable ops over 2-D tensors. Every op records its result on the
// tape of its first argument and validates shapes eagerly.

Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product.
Var mul(Var a, Var b);
/// a + row, row broadcast over every row of a (row is 1 x a.cols).
Var add_row(Var a, Var row);
Var scale(Var a, double s);
Var relu(Var a);
Var tanh(Var a);

/// Row-wise softmax of (scale * t), stabilised by per-row max subtraction.
Var softmax_rows(Var t, double scale);

/// Per-row normalisation followed by gain/bias (1 x cols each).
Var layer_norm(Var t, Var gain, Var bias, double eps);

/// Sum of all entries, as a 1x1 tensor.
Var sum(Var a);
Var mean(Var a);

/// out.row(i) = a.row(index[i]) or zeros when index[i] < 0.
/// Used both for embedding lookup and for row shifting.
Var gather_rows(Var a, const std::vector<long>& index);

/// Multiply row i by row_scale[i] (e.g. a 0/1 padding mask).
Var scale_rows(Var a, const std::vector<double>& row_scale);

/// Mean token-level cross-entropy of row-wise softmax(logits) against targets.
/// Rows with a negative target are ignored.
Var cross_entropy(Var logits, const std::vector<long>& targets);

/// Affine map x * w + b with b broadcast (b may be a null Var for no bias).
Var linear(Var x, Var w, Var b);
Var linear(Var x, Var w);

/// Which keys a query may attend to: keys in [range_begin[i], range_end[i])
/// that are flagged valid. A query with no admissible key is an error.
struct AttentionMask {
  std::vector<std::size_t> range_begin;
  std::vector<std::size_t> range_end;
  std::vector<bool> key_valid;

  /// Every query may see every valid key.
  static AttentionMask full(std::size_t queries, std::vector<bool> key_valid);
};

struct AttentionResult {
  Var out;
  /// Per head: queries x keys probabilities (zero for inadmissible keys).
  std::shared_ptr<std::vector<Tensor>> weights;
};

/// Multi-head scaled dot-product attention, softmax(Q K^T / sqrt(d_head)) V per
/// head, on column slices of q/k/v; heads concatenated in the output.
AttentionResult attention(Var q, Var k, Var v, std::size_t heads, const AttentionMask& mask);

}  // namespace lecb::num
