#pragma once

// Semantic V2X channel model: raw vs. semantic payload sizes, compression
// ratio, embedding quantization, and link latency.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "semv2x/config.hpp"

namespace semv2x {

struct PayloadReport {
  std::int64_t raw_bytes = 0;
  std::int64_t sem_bytes = 0;
  double ratio = 0.0;
};

/// Quantized 1xD embedding as it crosses the link. `payload` holds `dim`
/// little-endian elements: IEEE binary32, IEEE binary16, or int8 codes.
/// `scale` is only meaningful for INT8 (code * scale reconstructs a value).
struct QuantizedEmbedding {
  QuantFormat format = QuantFormat::FP32;
  double scale = 1.0;
  std::vector<std::uint8_t> payload;
  std::int64_t dim = 0;
};

/// N * H_o * W_o * 3 bytes of uncompressed RGB video.
std::int64_t raw_payload_bytes(const ClipSpec& clip);

/// 1 * D * b bytes for one pooled embedding.
std::int64_t semantic_payload_bytes(std::int64_t dim, QuantFormat fmt);

/// raw / sem; throws DomainError when sem is zero.
double compression_ratio(std::int64_t raw_bytes, std::int64_t sem_bytes);

PayloadReport payload_report(const ClipSpec& clip, std::int64_t dim, QuantFormat fmt);

/// INT8 uses a symmetric per-vector scale max|x|/127 with codes rounded half
/// away from zero; an all-zero vector gets scale 1. FP16 rounds to nearest
/// even. Throws DomainError on non-finite input.
QuantizedEmbedding quantize_embedding(std::span<const float> vec, QuantFormat fmt);

/// Throws FormatError when the payload length does not match dim * b.
std::vector<double> dequantize_embedding(const QuantizedEmbedding& q);

/// Shannon rate B * log2(1 + 10^(snr_db / 10)).
double link_rate_bps(const LinkSpec& link);

/// Serialization delay 8 * bytes / rate.
double tx_latency_s(std::int64_t payload_bytes, const LinkSpec& link);

inline constexpr double kV2xDeadlineS = 5e-3;

/// True when the latency fits the 5 ms V2X budget (inclusive).
bool meets_v2x_deadline(double latency_s);

struct LatencyRow {
  QuantFormat format;
  std::int64_t payload_bytes;
  LinkSpec link;
  double rate_bps;
  double latency_s;
  bool meets_deadline;
};

LatencyRow latency_row(std::int64_t dim, QuantFormat fmt, const LinkSpec& link);

/// CSV with header format,payload_bytes,modulation,snr_db,rate_bps,latency_ms,meets_deadline.
/// latency_ms is printed with 4 significant digits.
std::string latency_csv(std::span<const LatencyRow> rows);

}  // namespace semv2x
