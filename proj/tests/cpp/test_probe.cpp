#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "semv2x/errors.hpp"
#include "semv2x/probe.hpp"
#include "semv2x/rng.hpp"

using namespace semv2x;

namespace {

TokenMatrix random_tokens(Rng& rng, std::size_t L, std::size_t D, double sd = 1.0) {
  TokenMatrix z(L, D);
  for (auto& v : z.values()) v = rng.normal() * sd;
  return z;
}

std::vector<double> random_vector(Rng& rng, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

// Straight-line forward pass without the associativity rewrite: project every
// token, score, pool, then run the head.
std::vector<double> oracle_probs(const ProbeParams& p, const TokenMatrix& z) {
  const std::size_t L = z.rows(), D = z.cols();
  Matrix k(L, D), v(L, D);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < D; ++j)
      for (std::size_t m = 0; m < D; ++m) {
        k(i, j) += z(i, m) * p.w_key(m, j);
        v(i, j) += z(i, m) * p.w_value(m, j);
      }
  std::vector<double> s(L);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < D; ++j) s[i] += k(i, j) * p.query[j];
    s[i] /= std::sqrt(static_cast<double>(D));
  }
  const double mx = *std::max_element(s.begin(), s.end());
  double total = 0.0;
  for (auto& x : s) total += (x = std::exp(x - mx));
  std::vector<double> pooled(D);
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < D; ++j) pooled[j] += s[i] / total * v(i, j);

  std::vector<double> h = p.b_mlp1;
  for (std::size_t j = 0; j < h.size(); ++j) {
    for (std::size_t m = 0; m < D; ++m) h[j] += pooled[m] * p.w_mlp1(m, j);
    const double x = h[j];
    h[j] = p.activation == Activation::RELU
               ? std::max(0.0, x)
               : 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
  }
  std::vector<double> f = p.b_mlp2;
  for (std::size_t j = 0; j < D; ++j)
    for (std::size_t m = 0; m < h.size(); ++m) f[j] += h[m] * p.w_mlp2(m, j);
  std::vector<double> logits = p.b_cls;
  for (std::size_t c = 0; c < logits.size(); ++c)
    for (std::size_t m = 0; m < D; ++m) logits[c] += f[m] * p.w_cls(m, c);
  const double lm = *std::max_element(logits.begin(), logits.end());
  double lt = 0.0;
  for (auto& x : logits) lt += (x = std::exp(x - lm));
  for (auto& x : logits) x /= lt;
  return logits;
}

// Max relative error of the analytic gradient against central differences.
double max_gradient_error(ProbeParams params, const TokenMatrix& z, std::size_t label) {
  const auto grads = probe_backward(params, z, label);
  const auto g = grads.tensors();
  auto p = params.tensors();
  const double h = 1e-5;
  double worst = 0.0;
  for (std::size_t t = 0; t < p.size(); ++t) {
    for (std::size_t i = 0; i < p[t].size(); ++i) {
      const double saved = p[t][i];
      p[t][i] = saved + h;
      const double up = probe_loss(params, z, label);
      p[t][i] = saved - h;
      const double down = probe_loss(params, z, label);
      p[t][i] = saved;
      const double numeric = (up - down) / (2 * h);
      const double denom = std::max({std::abs(numeric), std::abs(g[t][i]), 1e-6});
      worst = std::max(worst, std::abs(numeric - g[t][i]) / denom);
    }
  }
  return worst;
}

// Two classes whose tokens share a class-specific offset 3 sigma from the origin.
std::vector<Sample> separable_set(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t L = 4, D = 6;
  const auto dir = random_vector(rng, D);
  const double norm = std::sqrt(dot(dir, dir));
  std::vector<Sample> out;
  for (std::size_t i = 0; i < n; ++i) {
    Sample s{random_tokens(rng, L, D, 0.5), i % 2};
    const double sign = s.label ? 1.0 : -1.0;
    for (std::size_t r = 0; r < L; ++r)
      for (std::size_t c = 0; c < D; ++c) s.tokens(r, c) += sign * 1.5 * dir[c] / norm;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

TEST(Attention, HandComputedTwoByTwo) {
  const std::vector<double> q{1.0, 0.0};
  const auto r = cross_attention(q, TokenMatrix{{1, 0}, {0, 1}});
  const double a = std::exp(1 / std::sqrt(2.0));
  EXPECT_NEAR(r.weights[0], 0.6697, 1e-3);
  EXPECT_NEAR(r.weights[1], 0.3303, 1e-3);
  EXPECT_NEAR(r.weights[0], a / (a + 1), 1e-15);
  EXPECT_NEAR(r.pooled[0], r.weights[0], 1e-15);
  EXPECT_NEAR(r.pooled[1], r.weights[1], 1e-15);
}

TEST(Attention, TrivialCases) {
  auto r = cross_attention(std::vector<double>{5, -3}, TokenMatrix{{1, 2}});
  EXPECT_EQ(r.weights, std::vector<double>{1.0});
  EXPECT_EQ(r.pooled, (std::vector<double>{1, 2}));
  r = cross_attention(std::vector<double>{0.3, 7}, TokenMatrix{{3, 3}, {3, 3}});
  EXPECT_DOUBLE_EQ(r.pooled[0], 3.0);
  EXPECT_DOUBLE_EQ(r.pooled[1], 3.0);
}

TEST(Attention, Errors) {
  const std::vector<double> q{1, 0};
  EXPECT_THROW(cross_attention(q, TokenMatrix(0, 2)), DomainError);
  EXPECT_THROW(cross_attention(q, TokenMatrix{{1, 2, 3}}), DomainError);
  EXPECT_THROW(cross_attention(q, TokenMatrix{{1, NAN}}), DomainError);
  EXPECT_THROW(cross_attention(std::vector<double>{INFINITY, 0}, TokenMatrix{{1, 2}}), DomainError);
}

TEST(Attention, WeightsNormalized) {
  Rng rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t L = 1 + rng.below(32), D = 1 + rng.below(16);
    const auto z = random_tokens(rng, L, D, std::pow(10.0, rng.uniform(-2, 2)));
    const auto r = cross_attention(random_vector(rng, D), z);
    EXPECT_NEAR(std::accumulate(r.weights.begin(), r.weights.end(), 0.0), 1.0, 1e-9);
    for (double w : r.weights) EXPECT_GE(w, 0.0);
  }
}

TEST(Attention, PermutationInvariant) {
  Rng rng(12);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t L = 2 + rng.below(16), D = 1 + rng.below(8);
    const auto z = random_tokens(rng, L, D);
    const auto q = random_vector(rng, D);
    std::vector<std::size_t> perm(L);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = L - 1; i > 0; --i) std::swap(perm[i], perm[rng.below(i + 1)]);
    TokenMatrix zp(L, D);
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < D; ++j) zp(i, j) = z(perm[i], j);
    const auto a = cross_attention(q, z), b = cross_attention(q, zp);
    for (std::size_t j = 0; j < D; ++j) EXPECT_NEAR(a.pooled[j], b.pooled[j], 1e-12);
    for (std::size_t i = 0; i < L; ++i) EXPECT_NEAR(b.weights[i], a.weights[perm[i]], 1e-12);
  }
}

TEST(Attention, ShiftInvariantSoftmax) {
  Rng rng(13);
  for (int trial = 0; trial < 100; ++trial) {
    const auto logits = random_vector(rng, 1 + rng.below(20));
    const double c = rng.uniform(-50, 50);
    std::vector<double> shifted = logits;
    for (auto& x : shifted) x += c;
    const auto a = softmax(logits), b = softmax(shifted);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
  }
  const auto half = softmax(std::vector<double>{1e300, 1e300});
  EXPECT_EQ(half[0], 0.5);
}

TEST(Probe, ZeroHeadGivesUniform) {
  auto p = ProbeParams::zeros(3, 4, 5);
  for (std::size_t i = 0; i < 3; ++i) p.w_key(i, i) = p.w_value(i, i) = 1.0;
  Rng rng(1);
  const auto out = probe_forward(p, random_tokens(rng, 6, 3));
  for (double x : out.probs) EXPECT_DOUBLE_EQ(x, 0.25);
  EXPECT_EQ(classify(p, random_tokens(rng, 2, 3)).label, 0u);
}

TEST(Probe, ForwardMatchesOracle) {
  for (auto act : {Activation::RELU, Activation::GELU}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      Rng rng(seed + 100);
      const std::size_t D = 2 + rng.below(8), L = 1 + rng.below(10), C = 2 + rng.below(3);
      const auto p = init_probe(D, C, 1 + rng.below(10), act, seed);
      const auto z = random_tokens(rng, L, D);
      const auto got = probe_forward(p, z).probs;
      const auto want = oracle_probs(p, z);
      for (std::size_t c = 0; c < C; ++c) EXPECT_NEAR(got[c], want[c], 1e-12);
      const auto split = classify_pooled(p, probe_pool(p, z).pooled).probs;
      for (std::size_t c = 0; c < C; ++c) EXPECT_NEAR(split[c], got[c], 1e-15);
    }
  }
}

TEST(Probe, GradientsMatchFiniteDifferences) {
  int configs = 0;
  for (auto act : {Activation::RELU, Activation::GELU}) {
    for (std::uint64_t seed = 0; seed < 12; ++seed, ++configs) {
      Rng rng(seed * 7 + 3);
      const std::size_t D = 1 + rng.below(8), L = 1 + rng.below(6), C = 2 + rng.below(2);
      auto p = init_probe(D, C, 1 + rng.below(8), act, seed);
      // Non-zero biases and a larger query so every term contributes.
      for (auto* b : {&p.b_mlp1, &p.b_mlp2, &p.b_cls})
        for (auto& x : *b) x = 0.3 * rng.normal();
      for (auto& x : p.query) x *= 3.0;
      const auto z = random_tokens(rng, L, D);
      EXPECT_LT(max_gradient_error(p, z, rng.below(C)), 1e-4) << "seed " << seed;
    }
  }
  EXPECT_GE(configs, 20);
}

TEST(Probe, GradientWithDuplicatedToken) {
  Rng rng(5);
  const auto p = init_probe(4, 2, 6, Activation::GELU, 9);
  auto z = random_tokens(rng, 3, 4);
  TokenMatrix dup(4, 4);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 4; ++j) dup(i, j) = z(i, j);
  for (std::size_t j = 0; j < 4; ++j) dup(3, j) = z(0, j);
  EXPECT_LT(max_gradient_error(p, dup, 1), 1e-4);
  EXPECT_NE(probe_backward(p, dup, 1).query, probe_backward(p, z, 1).query);
}

TEST(Probe, PerfectPredictionHasZeroLogitGradient) {
  auto p = ProbeParams::zeros(2, 2, 2);
  p.b_cls = {800.0, 0.0};
  double loss = -1;
  const auto g = probe_backward(p, TokenMatrix{{1, 2}}, 0, &loss);
  EXPECT_EQ(loss, 0.0);
  EXPECT_EQ(g.b_cls, (std::vector<double>{0.0, 0.0}));
}

TEST(Probe, Argmax) {
  EXPECT_EQ(argmax(std::vector<double>{0.9, 0.1}), 0u);
  EXPECT_EQ(argmax(std::vector<double>{0.5, 0.5}), 0u);
  EXPECT_EQ(argmax(std::vector<double>{0.2, 0.4, 0.4}), 1u);
  EXPECT_THROW(argmax(std::vector<double>{}), DomainError);
}

TEST(Train, SeparableSetIsLearned) {
  const auto train = separable_set(200, 1), test = separable_set(200, 1);
  TrainSpec spec;
  spec.epochs = 40;
  spec.lr = 1e-2;
  const auto r = train_probe(train, init_probe(6, 2, 6, Activation::RELU, 3), spec);
  EXPECT_GE(accuracy(r.params, train), 0.99);
  EXPECT_GE(accuracy(r.params, separable_set(200, 2)), 0.95);
  ASSERT_EQ(r.loss_history.size(), 40u);
}

TEST(Train, FullBatchLossIsNonIncreasing) {
  const auto data = separable_set(200, 4);
  TrainSpec spec;
  spec.epochs = 40;
  spec.batch = 200;
  const auto r = train_probe(data, init_probe(6, 2, 6, Activation::RELU, 3), spec);
  for (std::size_t e = 1; e < r.loss_history.size(); ++e) EXPECT_LE(r.loss_history[e], r.loss_history[e - 1]);
}

TEST(Train, ZeroLearningRateKeepsParameters) {
  const auto data = separable_set(20, 5);
  const auto init = init_probe(6, 2, 4, Activation::GELU, 8);
  TrainSpec spec;
  spec.epochs = 3;
  spec.lr = 0.0;
  EXPECT_EQ(train_probe(data, init, spec).params, init);
}

TEST(Train, Deterministic) {
  const auto data = separable_set(30, 6);
  TrainSpec spec;
  spec.epochs = 5;
  spec.seed = 77;
  const auto a = train_probe(data, init_probe(6, 2, 4, Activation::RELU, 1), spec);
  const auto b = train_probe(data, init_probe(6, 2, 4, Activation::RELU, 1), spec);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.loss_history, b.loss_history);
}

TEST(Train, Errors) {
  const auto init = init_probe(6, 2, 4, Activation::RELU, 1);
  EXPECT_THROW(train_probe({}, init, TrainSpec{}), DomainError);
  auto data = separable_set(2, 1);
  data[0].label = 2;
  EXPECT_THROW(train_probe(data, init, TrainSpec{}), DomainError);
}

TEST(Checkpoint, RoundTrip) {
  const auto p = init_probe(5, 3, 7, Activation::GELU, 4);
  std::stringstream s;
  write_checkpoint(s, p);
  EXPECT_EQ(s.str().size(), 24 + 8 * p.parameter_count());
  EXPECT_EQ(static_cast<unsigned char>(s.str()[0]), 5);  // little-endian D
  EXPECT_EQ(read_checkpoint(s, Activation::GELU), p);

  std::string truncated = s.str().substr(0, s.str().size() - 1);
  std::istringstream t(truncated);
  EXPECT_THROW(read_checkpoint(t), FormatError);
  std::istringstream extra(s.str() + "x");
  EXPECT_THROW(read_checkpoint(extra), FormatError);
}

TEST(Checkpoint, LossHistoryCsv) {
  EXPECT_EQ(loss_history_csv(std::vector<double>{0.5, 0.25}), "epoch,loss\n1,0.5\n2,0.25\n");
}
