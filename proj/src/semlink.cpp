#include "semv2x/semlink.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "semv2x/csv.hpp"
#include "semv2x/errors.hpp"

namespace semv2x {

std::int64_t raw_payload_bytes(const ClipSpec& clip) {
  return clip.n_frames * clip.orig_height_px * clip.orig_width_px * 3;
}

std::int64_t semantic_payload_bytes(std::int64_t dim, QuantFormat fmt) {
  if (dim < 1) throw DomainError("embedding dimension must be >= 1");
  return 1 * dim * bytes_per_element(fmt);
}

double compression_ratio(std::int64_t raw_bytes, std::int64_t sem_bytes) {
  if (sem_bytes == 0) throw DomainError("compression ratio: semantic payload is zero");
  return static_cast<double>(raw_bytes) / static_cast<double>(sem_bytes);
}

PayloadReport payload_report(const ClipSpec& clip, std::int64_t dim, QuantFormat fmt) {
  PayloadReport r;
  r.raw_bytes = raw_payload_bytes(clip);
  r.sem_bytes = semantic_payload_bytes(dim, fmt);
  r.ratio = compression_ratio(r.raw_bytes, r.sem_bytes);
  return r;
}

namespace {

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U bits) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<U>(p[i]) << (8 * i));
  return v;
}

}  // namespace

QuantizedEmbedding quantize_embedding(std::span<const float> vec, QuantFormat fmt) {
  for (float x : vec)
    if (!std::isfinite(x)) throw DomainError("quantize_embedding: non-finite element");

  QuantizedEmbedding q;
  q.format = fmt;
  q.dim = static_cast<std::int64_t>(vec.size());
  q.payload.reserve(vec.size() * static_cast<std::size_t>(bytes_per_element(fmt)));

  switch (fmt) {
    case QuantFormat::FP32:
      for (float x : vec) put_le(q.payload, std::bit_cast<std::uint32_t>(x));
      break;
    case QuantFormat::FP16:
      for (float x : vec) put_le(q.payload, Eigen::numext::bit_cast<std::uint16_t>(Eigen::half(x)));
      break;
    case QuantFormat::INT8: {
      double max_abs = 0.0;
      for (float x : vec) max_abs = std::max(max_abs, std::abs(static_cast<double>(x)));
      // Zero vector: any scale reconstructs zeros; 1 keeps it well defined.
      q.scale = max_abs > 0.0 ? max_abs / 127.0 : 1.0;
      for (float x : vec) {
        // x * 127 / max avoids the extra rounding of dividing by a rounded scale.
        const double code = max_abs > 0.0 ? std::round(static_cast<double>(x) * 127.0 / max_abs) : 0.0;
        const auto c = static_cast<std::int8_t>(std::clamp(code, -127.0, 127.0));
        q.payload.push_back(static_cast<std::uint8_t>(c));
      }
      break;
    }
  }
  return q;
}

std::vector<double> dequantize_embedding(const QuantizedEmbedding& q) {
  const auto b = bytes_per_element(q.format);
  if (q.dim < 0 || static_cast<std::int64_t>(q.payload.size()) != q.dim * b)
    throw FormatError("dequantize_embedding: payload has " + std::to_string(q.payload.size()) +
                      " bytes, expected " + std::to_string(q.dim * b));
  if (q.format == QuantFormat::INT8 && !(q.scale >= 0.0))
    throw FormatError("dequantize_embedding: negative INT8 scale");

  std::vector<double> out(static_cast<std::size_t>(q.dim));
  const std::uint8_t* p = q.payload.data();
  for (auto& v : out) {
    switch (q.format) {
      case QuantFormat::FP32:
        v = std::bit_cast<float>(get_le<std::uint32_t>(p));
        break;
      case QuantFormat::FP16:
        v = static_cast<float>(Eigen::numext::bit_cast<Eigen::half>(get_le<std::uint16_t>(p)));
        break;
      case QuantFormat::INT8:
        v = static_cast<std::int8_t>(*p) * q.scale;
        break;
    }
    p += b;
  }
  return out;
}

double link_rate_bps(const LinkSpec& link) {
  const double snr = std::pow(10.0, link.snr_db / 10.0);
  return link.bandwidth_hz * std::log2(1.0 + snr);
}

double tx_latency_s(std::int64_t payload_bytes, const LinkSpec& link) {
  return 8.0 * static_cast<double>(payload_bytes) / link_rate_bps(link);
}

bool meets_v2x_deadline(double latency_s) { return latency_s <= kV2xDeadlineS; }

LatencyRow latency_row(std::int64_t dim, QuantFormat fmt, const LinkSpec& link) {
  LatencyRow r{fmt, semantic_payload_bytes(dim, fmt), link, link_rate_bps(link), 0.0, false};
  r.latency_s = tx_latency_s(r.payload_bytes, link);
  r.meets_deadline = meets_v2x_deadline(r.latency_s);
  return r;
}

std::string latency_csv(std::span<const LatencyRow> rows) {
  CsvWriter csv({"format", "payload_bytes", "modulation", "snr_db", "rate_bps", "latency_ms",
                 "meets_deadline"});
  for (const auto& r : rows) {
    csv.row({std::string(to_string(r.format)), std::to_string(r.payload_bytes),
             std::string(to_string(r.link.modulation)), fmt_sig(r.link.snr_db, 6),
             fmt_sig(r.rate_bps, 6), fmt_sig(r.latency_s * 1e3, 4),
             r.meets_deadline ? "true" : "false"});
  }
  return csv.str();
}

}  // namespace semv2x
