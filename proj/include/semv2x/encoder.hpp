#pragma once

#include <cstdint>
#include <span>

#include "semv2x/config.hpp"
#include "semv2x/scenario.hpp"
#include "semv2x/tensor.hpp"

namespace semv2x {

/// Fixed pixel normalization applied before flattening: (v / 255 - mean) / std.
inline constexpr double kPixelMean = 0.2;
inline constexpr double kPixelStd = 0.25;

/// Deterministic stand-in for a frozen video encoder.
///
/// Each t_p x p x p tubelet (pixels normalized by kPixelMean / kPixelStd) is flattened,
/// concatenated with its difference to the same patch in the previous
/// tubelet (zeros for the first), and multiplied by a fixed seeded
/// projection to D dimensions. Tokens are ordered tubelet-major, then patch
/// row, then patch column, giving (N / t_p) * (H / p) * (W / p) rows.
class EncoderStub {
 public:
  EncoderStub(const TokenizerSpec& tok, std::int64_t channels, std::int64_t dim, std::uint64_t seed);

  /// Throws DomainError when frame shapes disagree with each other or the
  /// tokenizer, or the frame count is not a multiple of t_p.
  TokenMatrix encode(std::span<const Frame> frames) const;

  std::int64_t dim() const { return dim_; }
  std::int64_t input_dim() const { return input_dim_; }

 private:
  TokenizerSpec tok_;
  std::int64_t channels_;
  std::int64_t dim_;
  std::int64_t input_dim_;
  Matrix projection_;  // input_dim x dim
};

TokenMatrix encode_stub(std::span<const Frame> frames, const TokenizerSpec& tok, std::int64_t dim,
                        std::uint64_t seed);

inline TokenMatrix encode_stub(const ScenarioClip& clip, const TokenizerSpec& tok, std::int64_t dim,
                               std::uint64_t seed) {
  return encode_stub(clip.frames, tok, dim, seed);
}

}  // namespace semv2x
