#include <cmath>

#include <gtest/gtest.h>

#include "lecb/context_encoder.hpp"
#include "lecb/error.hpp"
#include "lecb/numerics/grad_check.hpp"

using namespace lecb;
using namespace lecb::encoder;
using num::Tensor;

namespace {

tok::TokenSeq seq(std::vector<tok::TokenId> ids) {
  tok::TokenSeq s;
  s.continuation.assign(ids.size(), false);
  s.ids = std::move(ids);
  return s;
}

EncoderConfig small(std::size_t l = 4, std::size_t d = 8) {
  EncoderConfig c;
  c.layers = 2;
  c.d = d;
  c.heads = 2;
  c.ff = 16;
  c.l = l;
  return c;
}

}  // namespace

TEST(Encoder, PaddingRowsAreMaskedAndZero) {
  num::ParameterStore store(1);
  ContextEncoder enc(store, "e.", 10, small(4));
  num::Tape tape;
  const auto kv = enc.encode(tape, {seq({3})});
  EXPECT_EQ(kv.key_valid, (std::vector<bool>{true, false, false, false}));
  for (std::size_t r = 1; r < 4; ++r)
    for (double v : kv.K.value().row(r)) EXPECT_EQ(v, 0.0);
}

TEST(Encoder, Shape) {
  num::ParameterStore store(2);
  ContextEncoder enc(store, "e.", 20, small(8, 32));
  num::Tape tape;
  std::vector<tok::TokenSeq> phrases;
  for (int i = 0; i < 10; ++i) phrases.push_back(seq({2 + i % 5, 3, 4}));
  const auto kv = enc.encode(tape, phrases);
  EXPECT_EQ(kv.K.rows(), 80u);
  EXPECT_EQ(kv.K.cols(), 32u);
  EXPECT_EQ(kv.V.rows(), 80u);
}

TEST(Encoder, PermutationAndIndependence) {
  num::ParameterStore store(3);
  ContextEncoder enc(store, "e.", 12, small(3));
  const std::vector<tok::TokenSeq> a{seq({2, 3}), seq({4}), seq({5, 6, 7})};
  const std::vector<tok::TokenSeq> b{seq({5, 6, 7}), seq({2, 3}), seq({4})};
  num::Tape t1, t2;
  const Tensor ka = enc.encode(t1, a).K.value();
  const Tensor kb = enc.encode(t2, b).K.value();
  const std::size_t perm[3] = {1, 2, 0};  // phrase i of a sits at perm[i] in b
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t r = 0; r < 3; ++r)
      for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(ka(p * 3 + r, c), kb(perm[p] * 3 + r, c));

  // Changing phrase 1 leaves phrases 0 and 2 bit-identical.
  num::Tape t3;
  const Tensor kc = enc.encode(t3, {seq({2, 3}), seq({9, 10}), seq({5, 6, 7})}).K.value();
  for (std::size_t r : {0, 1, 2, 6, 7, 8})
    for (std::size_t c = 0; c < 8; ++c) EXPECT_EQ(ka(r, c), kc(r, c));
}

TEST(Encoder, Errors) {
  num::ParameterStore store(4);
  ContextEncoder enc(store, "e.", 10, small(2));
  num::Tape tape;
  EXPECT_THROW(enc.encode(tape, {seq({})}), Error);
  EXPECT_THROW(enc.encode(tape, {seq({2, 3, 4})}), Error);
  EncoderConfig bad = small();
  bad.heads = 3;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = small();
  bad.layers = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Encoder, GradientCheck) {
  num::ParameterStore store(5);
  ContextEncoder enc(store, "e.", 8, small(3, 4));
  num::Rng rng(1);
  Tensor w(6, 4);
  for (auto& v : w.values()) v = rng.normal();
  auto f = [&](num::Tape& t) {
    const auto kv = enc.encode(t, {seq({2, 3, 4}), seq({5, 6})});
    return num::sum(num::mul(num::add(kv.K, kv.V), t.constant(w)));
  };
  EXPECT_LT(num::grad_check(f, store.all()), 1e-4);
}

TEST(LeftShift, Examples) {
  num::Tape tape;
  const Tensor k = Tensor::from({{1}, {2}, {3}, {0}, {4}, {0}, {0}, {0}});
  PhraseLayout layout{4, {3, 1}};
  const Tensor v = left_shift(tape.constant(k), layout).value();
  EXPECT_EQ(v, Tensor::from({{2}, {3}, {0}, {0}, {0}, {0}, {0}, {0}}));

  PhraseLayout two{2, {2, 2}};
  const Tensor v2 = left_shift(tape.constant(Tensor::from({{1}, {2}, {3}, {4}})), two).value();
  EXPECT_EQ(v2, Tensor::from({{2}, {0}, {4}, {0}}));
}

TEST(LeftShift, RandomLayoutsAgainstEnumeration) {
  num::Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    PhraseLayout layout;
    layout.l = 1 + rng.below(6);
    const auto n = 1 + rng.below(6);
    for (std::size_t p = 0; p < n; ++p) layout.lengths.push_back(1 + rng.below(layout.l));
    const auto index = left_shift_index(layout);
    for (std::size_t p = 0; p < n; ++p) {
      for (std::size_t t = 0; t < layout.l; ++t) {
        const std::size_t r = p * layout.l + t;
        const long want = t + 1 < layout.lengths[p] ? static_cast<long>(r + 1) : -1;
        EXPECT_EQ(index[r], want);
      }
    }
  }
}

TEST(Sinusoid, FirstPosition) {
  const Tensor pe = sinusoidal_positions(3, 4);
  EXPECT_DOUBLE_EQ(pe(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(pe(0, 1), 1.0);
  EXPECT_NEAR(pe(1, 0), std::sin(1.0), 1e-15);
}
