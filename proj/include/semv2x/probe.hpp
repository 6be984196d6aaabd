#pragma once

// Single-query attentive probe over frozen token embeddings.
//
// Given tokens Z (L x D), a learnable query q (length D), key/value
// projections Wk, Wv (D x D), the probe computes
//
//   weights = softmax((Z Wk) q / sqrt(D))        length L
//   pooled  = weights^T (Z Wv)                   length D  (the 1 x D payload)
//   hidden  = act(pooled W1 + b1)                length D_h
//   feature = hidden W2 + b2                     length D
//   logits  = feature Wc + bc                    length C
//   probs   = softmax(logits)
//
// The projections are applied through associativity ((Z Wk) q = Z (Wk q),
// weights^T (Z Wv) = (weights^T Z) Wv) so a forward pass costs O(LD + D^2).
// Pooling runs at the roadside unit; the MLP and classifier (the "head") run
// on the vehicle and only see the pooled vector.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "semv2x/config.hpp"
#include "semv2x/tensor.hpp"

namespace semv2x {

struct ProbeParams {
  std::vector<double> query;
  Matrix w_key;
  Matrix w_value;
  Matrix w_mlp1;
  std::vector<double> b_mlp1;
  Matrix w_mlp2;
  std::vector<double> b_mlp2;
  Matrix w_cls;
  std::vector<double> b_cls;
  Activation activation = Activation::RELU;

  std::size_t dim() const { return query.size(); }
  std::size_t hidden() const { return b_mlp1.size(); }
  std::size_t classes() const { return b_cls.size(); }

  /// Zero-filled parameters (or gradients) of the given shape.
  static ProbeParams zeros(std::size_t dim, std::size_t classes, std::size_t hidden,
                           Activation act = Activation::RELU);

  /// Every tensor in checkpoint order: query, w_key, w_value, w_mlp1, b_mlp1,
  /// w_mlp2, b_mlp2, w_cls, b_cls.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  std::size_t parameter_count() const;

  bool operator==(const ProbeParams&) const = default;
};

/// Gradients share the parameter layout.
using ProbeGrads = ProbeParams;

/// Uniform(-1/sqrt(D), 1/sqrt(D)) weights, zero biases; seeded.
ProbeParams init_probe(std::size_t dim, std::size_t classes, std::size_t hidden,
                       Activation act, std::uint64_t seed);

ProbeParams init_probe(const ProbeSpec& spec, std::size_t dim, std::uint64_t seed);

struct AttentionResult {
  std::vector<double> pooled;
  std::vector<double> weights;
};

/// Single-query attention with keys = values = Z: softmax(Z q / sqrt(D))^T Z.
/// Throws DomainError for empty Z, shape mismatch, or non-finite input.
AttentionResult cross_attention(std::span<const double> query, const TokenMatrix& tokens);

struct ProbeOutput {
  std::vector<double> pooled;
  std::vector<double> attn_weights;
  std::vector<double> logits;
  std::vector<double> probs;
};

/// Roadside half: attention pooling through the key/value projections.
AttentionResult probe_pool(const ProbeParams& params, const TokenMatrix& tokens);

struct HeadOutput {
  std::vector<double> logits;
  std::vector<double> probs;
};

/// Vehicle half: MLP + linear classifier + softmax on a pooled vector.
HeadOutput probe_head(const ProbeParams& params, std::span<const double> pooled);

ProbeOutput probe_forward(const ProbeParams& params, const TokenMatrix& tokens);

/// Cross-entropy -log probs[label].
double probe_loss(const ProbeParams& params, const TokenMatrix& tokens, std::size_t label);

/// Exact gradient of probe_loss with respect to every parameter.
ProbeGrads probe_backward(const ProbeParams& params, const TokenMatrix& tokens, std::size_t label,
                          double* loss = nullptr);

/// Index of the largest probability; ties go to the lowest index.
std::size_t argmax(std::span<const double> probs);

struct Classification {
  std::size_t label = 0;
  std::vector<double> probs;
};

Classification classify(const ProbeParams& params, const TokenMatrix& tokens);
Classification classify_pooled(const ProbeParams& params, std::span<const double> pooled);

struct Sample {
  TokenMatrix tokens;
  std::size_t label = 0;
};

struct TrainResult {
  ProbeParams params;
  /// Mean training-set loss measured after each epoch.
  std::vector<double> loss_history;
};

/// Mini-batch Adam (beta1 0.9, beta2 0.999, eps 1e-8) with optional
/// decoupled weight decay. Samples are reshuffled each epoch from
/// spec.seed. Throws DomainError on an empty dataset or out-of-range label.
TrainResult train_probe(std::span<const Sample> data, ProbeParams init, const TrainSpec& spec);

double mean_loss(const ProbeParams& params, std::span<const Sample> data);
double accuracy(const ProbeParams& params, std::span<const Sample> data);

/// Little-endian checkpoint: u64 D, u64 C, u64 D_h, then float64 tensors in
/// ProbeParams::tensors() order. The activation is not stored.
void write_checkpoint(std::ostream& out, const ProbeParams& params);
ProbeParams read_checkpoint(std::istream& in, Activation act = Activation::RELU);
void save_checkpoint(const std::filesystem::path& path, const ProbeParams& params);
ProbeParams load_checkpoint(const std::filesystem::path& path, Activation act = Activation::RELU);

/// CSV with header epoch,loss.
std::string loss_history_csv(std::span<const double> history);

}  // namespace semv2x
