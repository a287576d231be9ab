#include <cmath>

#include "lecb/error.hpp"
#include "lecb/harness.hpp"

namespace lecb::harness {

using num::Init;
using num::Rng;
using num::Tensor;

namespace {

constexpr std::size_t kCalibrationFrames = 32;

Tensor random_orthogonal(std::size_t n, Rng& rng) {
  Tensor q(n, n);
  for (auto& v : q.values()) v = rng.normal();
  // Modified Gram-Schmidt over rows.
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      double dot = 0.0;
      for (std::size_t k = 0; k < n; ++k) dot += q(i, k) * q(j, k);
      for (std::size_t k = 0; k < n; ++k) q(i, k) -= dot * q(j, k);
    }
    double norm = 0.0;
    for (std::size_t k = 0; k < n; ++k) norm += q(i, k) * q(i, k);
    norm = std::sqrt(norm);
    for (std::size_t k = 0; k < n; ++k) q(i, k) /= norm;
  }
  return q;
}

}  // namespace

FrozenBackbone::FrozenBackbone(const SyntheticTask& task)
    : d_a_(task.cfg.feature_dims()), store_(Rng::combine(task.cfg.seed, 0xbac0)) {
  const std::size_t V = task.vocab.size();
  const TaskConfig& c = task.cfg;
  Rng rng(Rng::combine(c.seed, pools::fnv1a("backbone")));
  rotation_ = &store_.add("backbone.encoder", d_a_, d_a_, Init::zeros);
  rotation_->value = random_orthogonal(d_a_, rng);

  // Closed-form linear discriminant fitted on calibration renderings of
  // every token: class means and a pooled isotropic variance.
  Tensor means(V, d_a_);
  double sq = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 0; t < V; ++t) {
    if (t == static_cast<std::size_t>(tok::kUnkId)) continue;
    Tensor frames(kCalibrationFrames, d_a_);
    for (std::size_t f = 0; f < kCalibrationFrames; ++f) {
      for (std::size_t k = 0; k < c.coarse_dims; ++k)
        frames(f, k) = task.coarse(t, k) + c.noise * rng.normal();
      for (std::size_t k = 0; k < c.fine_dims; ++k)
        frames(f, c.coarse_dims + k) = task.fine(t, k) + c.noise * rng.normal();
    }
    const Tensor enc = num::matmul_plain(frames, rotation_->value);
    for (std::size_t f = 0; f < kCalibrationFrames; ++f)
      for (std::size_t k = 0; k < d_a_; ++k) means(t, k) += enc(f, k) / kCalibrationFrames;
    for (std::size_t f = 0; f < kCalibrationFrames; ++f) {
      for (std::size_t k = 0; k < d_a_; ++k) {
        const double dlt = enc(f, k) - means(t, k);
        sq += dlt * dlt;
        ++count;
      }
    }
  }
  const double var = sq / static_cast<double>(count);

  // Class priors from the pretraining text, add-one smoothed.
  std::vector<double> prior(V, 1.0);
  for (const auto& s : task.pretrain_text) {
    for (const auto& w : tok::split_words(s)) {
      for (auto id : tok::tokenize(w, task.vocab).ids)
        prior[static_cast<std::size_t>(id)] += static_cast<double>(c.frames_per_token);
      prior[tok::kPadId] += static_cast<double>(c.blank_frames);
    }
  }
  double total = 0.0;
  for (double p : prior) total += p;

  weight_ = &store_.add("backbone.classifier.weight", d_a_, V, Init::zeros);
  bias_ = &store_.add("backbone.classifier.bias", 1, V, Init::zeros);
  const double T = c.logit_temperature;
  for (std::size_t t = 0; t < V; ++t) {
    double norm2 = 0.0;
    for (std::size_t k = 0; k < d_a_; ++k) {
      weight_->value(k, t) = means(t, k) / (var * T);
      norm2 += means(t, k) * means(t, k);
    }
    bias_->value[t] = (-norm2 / (2.0 * var) + std::log(prior[t] / total)) / T;
  }
  store_.set_trainable(false);
}

Tensor FrozenBackbone::encode(const Tensor& features) const {
  if (features.cols() != d_a_) {
    throw DimensionError("backbone: features " + features.shape_string() + " but expected " +
                         std::to_string(d_a_) + " columns");
  }
  return num::matmul_plain(features, rotation_->value);
}

num::Var FrozenBackbone::logits(num::Tape& tape, num::Var H) const {
  return num::linear(H, tape.param(*weight_), tape.param(*bias_));
}

Tensor FrozenBackbone::logits(const Tensor& H) const {
  Tensor out = num::matmul_plain(H, weight_->value);
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t c = 0; c < out.cols(); ++c) out(r, c) += bias_->value[c];
  return out;
}

bool FrozenBackbone::grads_zero() const {
  for (const auto* p : std::as_const(store_).all())
    for (double g : p->grad.values())
      if (g != 0.0) return false;
  return true;
}

std::vector<std::string> greedy_decode(const Tensor& logits, const tok::SubwordVocab& vocab) {
  std::vector<std::string> words;
  std::string current;
  long prev = -1;
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    const auto id = static_cast<long>(best);
    if (id == tok::kPadId) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
    } else if (id != prev) {
      current += vocab.piece(id);
    }
    prev = id;
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

}  // namespace lecb::harness
