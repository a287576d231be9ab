#include "lecb/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "lecb/error.hpp"

namespace lecb::num {

namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape) throw Error(std::string(op) + ": operands on different tapes");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
  }
}

void accumulate(Tensor& dst, const Tensor& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  Tensor out = matmul_plain(a.value(), b.value());
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t.grad(ia), matmul_nt_plain(g, t.value(ib)));
    if (t.requires_grad(ib)) accumulate(t.grad(ib), matmul_tn_plain(t.value(ia), g));
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b, "matmul_nt");
  Tensor out = matmul_nt_plain(a.value(), b.value());
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t.grad(ia), matmul_plain(g, t.value(ib)));
    if (t.requires_grad(ib)) accumulate(t.grad(ib), matmul_tn_plain(g, t.value(ia)));
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b, "add");
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  accumulate(out, b.value());
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t.grad(ia), g);
    if (t.requires_grad(ib)) accumulate(t.grad(ib), g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b, "sub");
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t.grad(ia), g);
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b, "mul");
  require_same_shape(a.value(), b.value(), "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ia = a.id, ib = b.id;
  return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) {
      Tensor& ga = t.grad(ia);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * t.value(ib)[i];
    }
    if (t.requires_grad(ib)) {
      Tensor& gb = t.grad(ib);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * t.value(ia)[i];
    }
  });
}

Var add_row(Var a, Var row) {
  require_same_tape(a, row, "add_row");
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.rows() != 1 || rv.cols() != av.cols()) {
    throw DimensionError("add_row: row " + rv.shape_string() + " does not broadcast over " +
                         av.shape_string());
  }
  Tensor out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += rv[c];
  const std::size_t ia = a.id, ir = row.id;
  return a.tape->record(std::move(out), {a, row}, [ia, ir](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ia)) accumulate(t.grad(ia), g);
    if (t.requires_grad(ir)) {
      Tensor& gr = t.grad(ir);
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t c = 0; c < g.cols(); ++c) gr[c] += g(r, c);
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {a}, [ia, s](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += s * g[i];
  });
}

Var relu(Var a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = v > 0.0 ? v : 0.0;
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& x = t.value(ia);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (x[i] > 0.0) ga[i] += g[i];
  });
}

Var tanh(Var a) {
  Tensor out = a.value();
  for (auto& v : out.values()) v = std::tanh(v);
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {a}, [ia](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
  });
}

Var softmax_rows(Var t_in, double scale_factor) {
  const Tensor& x = t_in.value();
  if (!(scale_factor > 0.0)) throw ConfigError("softmax_rows: scale must be > 0");
  if (x.cols() == 0) throw DimensionError("softmax_rows: rows are empty");
  Tensor out(x.rows(), x.cols());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto in = x.row(r);
    auto o = out.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(scale_factor * (in[c] - m));
      z += o[c];
    }
    for (auto& v : o) v /= z;
  }
  const std::size_t ia = t_in.id;
  return t_in.tape->record(std::move(out), {t_in},
                           [ia, scale_factor](Tape& t, std::size_t self) {
                             const Tensor& g = t.grad(self);
                             const Tensor& y = t.value(self);
                             Tensor& ga = t.grad(ia);
                             for (std::size_t r = 0; r < y.rows(); ++r) {
                               double dot = 0.0;
                               for (std::size_t c = 0; c < y.cols(); ++c) dot += g(r, c) * y(r, c);
                               for (std::size_t c = 0; c < y.cols(); ++c)
                                 ga(r, c) += scale_factor * y(r, c) * (g(r, c) - dot);
                             }
                           });
}

Var layer_norm(Var t_in, Var gain, Var bias, double eps) {
  if (!(eps > 0.0)) throw ConfigError("layer_norm: eps must be > 0");
  const Tensor& x = t_in.value();
  const std::size_t n = x.cols();
  if (gain.value().rows() != 1 || gain.value().cols() != n || bias.value().rows() != 1 ||
      bias.value().cols() != n) {
    throw DimensionError("layer_norm: gain/bias must be [1," + std::to_string(n) + "], got " +
                         gain.value().shape_string() + " and " + bias.value().shape_string());
  }
  Tensor out(x.rows(), n);
  Tensor xhat(x.rows(), n);
  std::vector<double> inv_std(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += x(r, c);
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (x(r, c) - mu) * (x(r, c) - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < n; ++c) {
      xhat(r, c) = (x(r, c) - mu) * inv_std[r];
      out(r, c) = xhat(r, c) * gain.value()[c] + bias.value()[c];
    }
  }
  const std::size_t ix = t_in.id, ig = gain.id, ib = bias.id;
  return t_in.tape->record(
      std::move(out), {t_in, gain, bias},
      [ix, ig, ib, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t,
                                                                          std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& gv = t.value(ig);
        const std::size_t rows = g.rows(), n = g.cols();
        if (t.requires_grad(ig)) {
          Tensor& gg = t.grad(ig);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < n; ++c) gg[c] += g(r, c) * xhat(r, c);
        }
        if (t.requires_grad(ib)) {
          Tensor& gb = t.grad(ib);
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t c = 0; c < n; ++c) gb[c] += g(r, c);
        }
        if (t.requires_grad(ix)) {
          Tensor& gx = t.grad(ix);
          const double inv_n = 1.0 / static_cast<double>(n);
          for (std::size_t r = 0; r < rows; ++r) {
            double s1 = 0.0, s2 = 0.0;
            for (std::size_t c = 0; c < n; ++c) {
              const double dxh = g(r, c) * gv[c];
              s1 += dxh;
              s2 += dxh * xhat(r, c);
            }
            for (std::size_t c = 0; c < n; ++c) {
              const double dxh = g(r, c) * gv[c];
              gx(r, c) += inv_std[r] * (dxh - inv_n * s1 - xhat(r, c) * inv_n * s2);
            }
          }
        }
      });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  const std::size_t ia = a.id;
  return a.tape->record(Tensor(1, 1, {s}), {a}, [ia](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    for (auto& v : t.grad(ia).values()) v += g;
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw DimensionError("mean: empty tensor");
  return scale(sum(a), 1.0 / n);
}

Var gather_rows(Var a, const std::vector<long>& index) {
  const Tensor& x = a.value();
  Tensor out(index.size(), x.cols());
  for (std::size_t r = 0; r < index.size(); ++r) {
    const long src = index[r];
    if (src < 0) continue;
    if (static_cast<std::size_t>(src) >= x.rows()) {
      throw DimensionError("gather_rows: index " + std::to_string(src) + " out of range for " +
                           x.shape_string());
    }
    std::copy_n(x.data() + src * x.cols(), x.cols(), out.data() + r * x.cols());
  }
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {a}, [ia, index](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    const std::size_t cols = g.cols();
    for (std::size_t r = 0; r < index.size(); ++r) {
      if (index[r] < 0) continue;
      double* dst = ga.data() + static_cast<std::size_t>(index[r]) * cols;
      const double* src = g.data() + r * cols;
      for (std::size_t c = 0; c < cols; ++c) dst[c] += src[c];
    }
  });
}

Var scale_rows(Var a, const std::vector<double>& row_scale) {
  const Tensor& x = a.value();
  if (row_scale.size() != x.rows()) {
    throw DimensionError("scale_rows: " + std::to_string(row_scale.size()) + " scales for " +
                         x.shape_string());
  }
  Tensor out = x;
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (auto& v : out.row(r)) v *= row_scale[r];
  const std::size_t ia = a.id;
  return a.tape->record(std::move(out), {a}, [ia, row_scale](Tape& t, std::size_t self) {
    const Tensor& g = t.grad(self);
    Tensor& ga = t.grad(ia);
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t c = 0; c < g.cols(); ++c) ga(r, c) += row_scale[r] * g(r, c);
  });
}

Var cross_entropy(Var logits, const std::vector<long>& targets) {
  const Tensor& x = logits.value();
  if (targets.size() != x.rows()) {
    throw DimensionError("cross_entropy: " + std::to_string(targets.size()) +
                         " targets for logits " + x.shape_string());
  }
  Tensor prob(x.rows(), x.cols());
  double loss = 0.0;
  std::size_t counted = 0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    if (targets[r] < 0) continue;
    if (static_cast<std::size_t>(targets[r]) >= x.cols()) {
      throw DimensionError("cross_entropy: target " + std::to_string(targets[r]) +
                           " out of range for " + std::to_string(x.cols()) + " classes");
    }
    auto in = x.row(r);
    auto p = prob.row(r);
    const double m = *std::max_element(in.begin(), in.end());
    double z = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      p[c] = std::exp(in[c] - m);
      z += p[c];
    }
    for (auto& v : p) v /= z;
    loss += -(in[static_cast<std::size_t>(targets[r])] - m - std::log(z));
    ++counted;
  }
  const double norm = counted == 0 ? 0.0 : 1.0 / static_cast<double>(counted);
  const std::size_t ia = logits.id;
  return logits.tape->record(
      Tensor(1, 1, {loss * norm}), {logits},
      [ia, targets, norm, prob = std::move(prob)](Tape& t, std::size_t self) {
        const double g = t.grad(self)[0] * norm;
        Tensor& ga = t.grad(ia);
        for (std::size_t r = 0; r < ga.rows(); ++r) {
          if (targets[r] < 0) continue;
          for (std::size_t c = 0; c < ga.cols(); ++c) ga(r, c) += g * prob(r, c);
          ga(r, static_cast<std::size_t>(targets[r])) -= g;
        }
      });
}

Var linear(Var x, Var w, Var b) { return add_row(matmul(x, w), b); }
Var linear(Var x, Var w) { return matmul(x, w); }

AttentionMask AttentionMask::full(std::size_t queries, std::vector<bool> key_valid) {
  AttentionMask m;
  m.range_begin.assign(queries, 0);
  m.range_end.assign(queries, key_valid.size());
  m.key_valid = std::move(key_valid);
  return m;
}

AttentionResult attention(Var q, Var k, Var v, std::size_t heads, const AttentionMask& mask) {
  require_same_tape(q, k, "attention");
  require_same_tape(q, v, "attention");
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  const std::size_t nq = qv.rows(), nk = kv.rows(), d = qv.cols();
  if (kv.cols() != d || vv.cols() != d || vv.rows() != nk) {
    throw DimensionError("attention: q " + qv.shape_string() + ", k " + kv.shape_string() +
                         ", v " + vv.shape_string() + " are incompatible");
  }
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("attention: model dim " + std::to_string(d) + " not divisible by " +
                      std::to_string(heads) + " heads");
  }
  if (mask.range_begin.size() != nq || mask.range_end.size() != nq ||
      mask.key_valid.size() != nk) {
    throw DimensionError("attention: mask does not match " + std::to_string(nq) + " queries x " +
                         std::to_string(nk) + " keys");
  }
  const std::size_t dh = d / heads;
  const double scl = 1.0 / std::sqrt(static_cast<double>(dh));

  auto weights = std::make_shared<std::vector<Tensor>>(heads, Tensor(nq, nk));
  Tensor out(nq, d);
  for (std::size_t i = 0; i < nq; ++i) {
    const std::size_t lo = mask.range_begin[i], hi = std::min(mask.range_end[i], nk);
    bool any = false;
    for (std::size_t j = lo; j < hi && !any; ++j) any = mask.key_valid[j];
    if (!any) {
      throw NumericError("attention: query " + std::to_string(i) +
                         " has every key masked; cannot normalise");
    }
    for (std::size_t h = 0; h < heads; ++h) {
      Tensor& w = (*weights)[h];
      const double* qi = qv.data() + i * d + h * dh;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t j = lo; j < hi; ++j) {
        if (!mask.key_valid[j]) continue;
        const double* kj = kv.data() + j * d + h * dh;
        double s = 0.0;
        for (std::size_t c = 0; c < dh; ++c) s += qi[c] * kj[c];
        s *= scl;
        w(i, j) = s;
        m = std::max(m, s);
      }
      double z = 0.0;
      for (std::size_t j = lo; j < hi; ++j) {
        if (!mask.key_valid[j]) continue;
        w(i, j) = std::exp(w(i, j) - m);
        z += w(i, j);
      }
      double* oi = out.data() + i * d + h * dh;
      for (std::size_t j = lo; j < hi; ++j) {
        if (!mask.key_valid[j]) continue;
        w(i, j) /= z;
        const double p = w(i, j);
        const double* vj = vv.data() + j * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) oi[c] += p * vj[c];
      }
    }
  }

  const std::size_t iq = q.id, ik = k.id, iv = v.id;
  Var result = q.tape->record(
      std::move(out), {q, k, v},
      [iq, ik, iv, heads, dh, scl, weights, mask](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& qv = t.value(iq);
        const Tensor& kv = t.value(ik);
        const Tensor& vv = t.value(iv);
        const std::size_t d = qv.cols();
        const bool need_q = t.requires_grad(iq), need_k = t.requires_grad(ik),
                   need_v = t.requires_grad(iv);
        Tensor* gq = need_q ? &t.grad(iq) : nullptr;
        Tensor* gk = need_k ? &t.grad(ik) : nullptr;
        Tensor* gv = need_v ? &t.grad(iv) : nullptr;
        std::vector<double> dp;
        for (std::size_t i = 0; i < qv.rows(); ++i) {
          const std::size_t lo = mask.range_begin[i];
          const std::size_t hi = std::min(mask.range_end[i], kv.rows());
          dp.assign(hi - lo, 0.0);
          for (std::size_t h = 0; h < heads; ++h) {
            const Tensor& w = (*weights)[h];
            const double* gi = g.data() + i * d + h * dh;
            double dot = 0.0;
            for (std::size_t j = lo; j < hi; ++j) {
              if (!mask.key_valid[j]) continue;
              const double* vj = vv.data() + j * d + h * dh;
              double s = 0.0;
              for (std::size_t c = 0; c < dh; ++c) s += gi[c] * vj[c];
              dp[j - lo] = s;
              dot += s * w(i, j);
              if (gv != nullptr) {
                double* gvj = gv->data() + j * d + h * dh;
                const double p = w(i, j);
                for (std::size_t c = 0; c < dh; ++c) gvj[c] += p * gi[c];
              }
            }
            const double* qi = qv.data() + i * d + h * dh;
            for (std::size_t j = lo; j < hi; ++j) {
              if (!mask.key_valid[j]) continue;
              const double ds = w(i, j) * (dp[j - lo] - dot) * scl;
              if (ds == 0.0) continue;
              const double* kj = kv.data() + j * d + h * dh;
              if (gq != nullptr) {
                double* gqi = gq->data() + i * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) gqi[c] += ds * kj[c];
              }
              if (gk != nullptr) {
                double* gkj = gk->data() + j * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) gkj[c] += ds * qi[c];
              }
            }
          }
        }
      });
  return {result, weights};
}

}  // namespace lecb::num
