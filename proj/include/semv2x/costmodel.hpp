#pragma once

// Analytic cost model of a frozen ViT encoder followed by a single-query
// attentive probe. FLOP counts use checked 64-bit integer arithmetic and
// throw std::overflow_error rather than wrap.

#include <cstdint>
#include <span>
#include <string>

#include "semv2x/config.hpp"

namespace semv2x {

using Flops = std::uint64_t;

struct CostReport {
  std::int64_t tokens = 0;
  Flops flops_block = 0;
  Flops flops_encoder = 0;
  Flops flops_probe = 0;
  Flops flops_probe_effective = 0;
  Flops flops_total = 0;
  std::int64_t activation_elems = 0;
  double infer_time_s = 0.0;
};

/// (N / t_p) * (H / p) * (W / p); throws DomainError naming the field that
/// does not divide.
std::int64_t token_count(const ClipSpec& clip, const TokenizerSpec& tok);

/// (H / p) * (W / p).
std::int64_t patches_per_frame(const ClipSpec& clip, const TokenizerSpec& tok);

/// 2 L^2 D + (4 + 2r) L D^2. `r` must make 2r an integer (e.g. 4, 2.5);
/// other ratios throw DomainError since the count would not be integral.
Flops block_flops(std::int64_t tokens, std::int64_t dim, double mlp_ratio);

/// depth * block_flops.
Flops encoder_flops(std::int64_t tokens, const EncoderSpec& enc);

/// 3 L D^2 + 2 L D + 3 D^2 + D C, the probe cost including key/value
/// projections of every token.
Flops probe_flops(std::int64_t tokens, std::int64_t dim, std::int64_t classes);

/// 2 L D + 3 D^2 + D C: the probe cost once key/value projections are folded
/// into the encoder pass, so only the O(D^2 + DC) head remains per token set.
Flops probe_flops_effective(std::int64_t tokens, std::int64_t dim, std::int64_t classes);

Flops total_flops(Flops encoder, Flops probe);

/// V * total / phi + V * t_io.
double inference_time(Flops total, const DeviceSpec& dev);

/// L * D, the element count behind the O(LD) activation bound.
std::int64_t activation_memory_elems(std::int64_t tokens, std::int64_t dim);

/// activation_memory_elems scaled by the byte width of `fmt`.
std::int64_t activation_memory_bytes(std::int64_t tokens, std::int64_t dim, QuantFormat fmt);

CostReport cost_report(const ClipSpec& clip, const TokenizerSpec& tok, const EncoderSpec& enc,
                       std::int64_t classes, const DeviceSpec& dev);

CostReport cost_report(const ExperimentConfig& cfg);

/// CSV with header L,D,L_e,r,C,F_enc,F_probe,F_probe_effective,F_total,M_enc_elems,t_infer_ms.
std::string flops_csv_header();
std::string flops_csv_row(const ExperimentConfig& cfg, const CostReport& r);

}  // namespace semv2x
