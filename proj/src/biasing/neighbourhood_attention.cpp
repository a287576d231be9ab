#include <algorithm>
#include <cmath>
#include <limits>

#include "lecb/biasing.hpp"
#include "lecb/error.hpp"

namespace lecb::bias {

using num::Tape;
using num::Tensor;
using num::Var;

Window neighbourhood_window(std::size_t i, std::size_t tau, std::size_t k) {
  const std::size_t size = std::min(k, tau);
  const std::size_t radius = (k - 1) / 2;
  const std::size_t centred = i >= radius ? i - radius : 0;
  return {std::min(centred, tau - size), size};
}

std::size_t relative_bias_index(std::size_t i, std::size_t j, std::size_t k) {
  const long radius = static_cast<long>((k - 1) / 2);
  const long off = std::clamp(static_cast<long>(j) - static_cast<long>(i), -radius, radius);
  return static_cast<std::size_t>(off + radius);
}

NeighbourhoodResult neighbourhood_attention(Var q, Var k, Var v, Var rel_bias, std::size_t heads,
                                            std::size_t window) {
  const Tensor& qv = q.value();
  const Tensor& kv = k.value();
  const Tensor& vv = v.value();
  const std::size_t tau = qv.rows(), d = qv.cols();
  if (tau == 0) throw DimensionError("neighbourhood_attention: empty sequence");
  if (!kv.same_shape(qv) || !vv.same_shape(qv)) {
    throw DimensionError("neighbourhood_attention: q " + qv.shape_string() + ", k " +
                         kv.shape_string() + ", v " + vv.shape_string() + " must match");
  }
  if (window == 0 || window % 2 == 0) {
    throw ConfigError("neighbourhood_attention: window must be odd, got " + std::to_string(window));
  }
  if (heads == 0 || d % heads != 0) {
    throw ConfigError("neighbourhood_attention: dim " + std::to_string(d) +
                      " not divisible by " + std::to_string(heads) + " heads");
  }
  if (rel_bias.rows() != heads || rel_bias.cols() != window) {
    throw DimensionError("neighbourhood_attention: relative bias must be [" +
                         std::to_string(heads) + "," + std::to_string(window) + "], got " +
                         rel_bias.value().shape_string());
  }
  const std::size_t dh = d / heads;
  const double scl = 1.0 / std::sqrt(static_cast<double>(dh));
  const std::size_t span = std::min(window, tau);
  const Tensor& bias = rel_bias.value();

  NeighbourhoodResult result;
  result.clamped_to_full = window > 2 * tau - 1;
  result.weights = std::make_shared<std::vector<Tensor>>(heads, Tensor(tau, span));
  Tensor out(tau, d);
  std::vector<double> logits(span);
  for (std::size_t i = 0; i < tau; ++i) {
    const Window w = neighbourhood_window(i, tau, window);
    for (std::size_t h = 0; h < heads; ++h) {
      const double* qi = qv.data() + i * d + h * dh;
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < span; ++s) {
        const std::size_t j = w.start + s;
        const double* kj = kv.data() + j * d + h * dh;
        double dot = 0.0;
        for (std::size_t c = 0; c < dh; ++c) dot += qi[c] * kj[c];
        logits[s] = (dot + bias(h, relative_bias_index(i, j, window))) * scl;
        m = std::max(m, logits[s]);
      }
      double z = 0.0;
      for (std::size_t s = 0; s < span; ++s) {
        logits[s] = std::exp(logits[s] - m);
        z += logits[s];
      }
      Tensor& P = (*result.weights)[h];
      double* oi = out.data() + i * d + h * dh;
      for (std::size_t s = 0; s < span; ++s) {
        const double p = logits[s] / z;
        P(i, s) = p;
        const double* vj = vv.data() + (w.start + s) * d + h * dh;
        for (std::size_t c = 0; c < dh; ++c) oi[c] += p * vj[c];
      }
    }
  }

  const std::size_t iq = q.id, ik = k.id, iv = v.id, ib = rel_bias.id;
  auto weights = result.weights;
  result.out = q.tape->record(
      std::move(out), {q, k, v, rel_bias},
      [iq, ik, iv, ib, heads, dh, scl, window, span, weights](Tape& t, std::size_t self) {
        const Tensor& g = t.grad(self);
        const Tensor& qv = t.value(iq);
        const Tensor& kv = t.value(ik);
        const Tensor& vv = t.value(iv);
        const std::size_t tau = qv.rows(), d = qv.cols();
        Tensor* gq = t.requires_grad(iq) ? &t.grad(iq) : nullptr;
        Tensor* gk = t.requires_grad(ik) ? &t.grad(ik) : nullptr;
        Tensor* gv = t.requires_grad(iv) ? &t.grad(iv) : nullptr;
        Tensor* gb = t.requires_grad(ib) ? &t.grad(ib) : nullptr;
        std::vector<double> dp(span);
        for (std::size_t i = 0; i < tau; ++i) {
          const Window w = neighbourhood_window(i, tau, window);
          for (std::size_t h = 0; h < heads; ++h) {
            const Tensor& P = (*weights)[h];
            const double* gi = g.data() + i * d + h * dh;
            double dot = 0.0;
            for (std::size_t s = 0; s < span; ++s) {
              const std::size_t j = w.start + s;
              const double* vj = vv.data() + j * d + h * dh;
              double acc = 0.0;
              for (std::size_t c = 0; c < dh; ++c) acc += gi[c] * vj[c];
              dp[s] = acc;
              dot += acc * P(i, s);
              if (gv != nullptr) {
                double* gvj = gv->data() + j * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) gvj[c] += P(i, s) * gi[c];
              }
            }
            const double* qi = qv.data() + i * d + h * dh;
            for (std::size_t s = 0; s < span; ++s) {
              const std::size_t j = w.start + s;
              const double dlogit = P(i, s) * (dp[s] - dot) * scl;
              if (gb != nullptr) (*gb)(h, relative_bias_index(i, j, window)) += dlogit;
              const double* kj = kv.data() + j * d + h * dh;
              if (gq != nullptr) {
                double* gqi = gq->data() + i * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) gqi[c] += dlogit * kj[c];
              }
              if (gk != nullptr) {
                double* gkj = gk->data() + j * d + h * dh;
                for (std::size_t c = 0; c < dh; ++c) gkj[c] += dlogit * qi[c];
              }
            }
          }
        }
      });
  return result;
}

Var depthwise_conv1d(Var x, Var kernel, Var bias) {
  const Tensor& xv = x.value();
  const Tensor& kv = kernel.value();
  const std::size_t tau = xv.rows(), d = xv.cols(), k = kv.rows();
  if (kv.cols() != d || bias.rows() != 1 || bias.cols() != d) {
    throw DimensionError("depthwise_conv1d: kernel " + kv.shape_string() + " / bias " +
                         bias.value().shape_string() + " do not match input " +
                         xv.shape_string());
  }
  if (k == 0 || k % 2 == 0) throw ConfigError("depthwise_conv1d: kernel size must be odd");
  const long radius = static_cast<long>(k - 1) / 2;
  Tensor out(tau, d);
  for (std::size_t t = 0; t < tau; ++t) {
    for (std::size_t c = 0; c < d; ++c) out(t, c) = bias.value()[c];
    for (long o = -radius; o <= radius; ++o) {
      const long src = static_cast<long>(t) + o;
      if (src < 0 || src >= static_cast<long>(tau)) continue;
      const double* xr = xv.data() + static_cast<std::size_t>(src) * d;
      const double* kr = kv.data() + static_cast<std::size_t>(o + radius) * d;
      for (std::size_t c = 0; c < d; ++c) out(t, c) += kr[c] * xr[c];
    }
  }
  const std::size_t ix = x.id, ik = kernel.id, ib = bias.id;
  return x.tape->record(std::move(out), {x, kernel, bias},
                        [ix, ik, ib, radius](Tape& t, std::size_t self) {
                          const Tensor& g = t.grad(self);
                          const Tensor& xv = t.value(ix);
                          const Tensor& kv = t.value(ik);
                          const std::size_t tau = g.rows(), d = g.cols();
                          Tensor* gx = t.requires_grad(ix) ? &t.grad(ix) : nullptr;
                          Tensor* gk = t.requires_grad(ik) ? &t.grad(ik) : nullptr;
                          if (t.requires_grad(ib)) {
                            Tensor& gb = t.grad(ib);
                            for (std::size_t r = 0; r < tau; ++r)
                              for (std::size_t c = 0; c < d; ++c) gb[c] += g(r, c);
                          }
                          for (std::size_t r = 0; r < tau; ++r) {
                            for (long o = -radius; o <= radius; ++o) {
                              const long src = static_cast<long>(r) + o;
                              if (src < 0 || src >= static_cast<long>(tau)) continue;
                              const auto s = static_cast<std::size_t>(src);
                              const auto tap = static_cast<std::size_t>(o + radius);
                              for (std::size_t c = 0; c < d; ++c) {
                                if (gx != nullptr) (*gx)(s, c) += kv(tap, c) * g(r, c);
                                if (gk != nullptr) (*gk)(tap, c) += xv(s, c) * g(r, c);
                              }
                            }
                          }
                        });
}

}  // namespace lecb::bias
