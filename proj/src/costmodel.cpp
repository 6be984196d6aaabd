#include "semv2x/costmodel.hpp"

#include <cmath>
#include <stdexcept>

#include "semv2x/csv.hpp"
#include "semv2x/errors.hpp"

namespace semv2x {

namespace {

Flops mul(Flops a, Flops b) {
  Flops out;
  if (__builtin_mul_overflow(a, b, &out)) throw std::overflow_error("FLOP count overflows 64 bits");
  return out;
}

Flops add(Flops a, Flops b) {
  Flops out;
  if (__builtin_add_overflow(a, b, &out)) throw std::overflow_error("FLOP count overflows 64 bits");
  return out;
}

Flops count(std::int64_t v, const char* what) {
  if (v < 0) throw DomainError(std::string(what) + " must be non-negative");
  return static_cast<Flops>(v);
}

}  // namespace

std::int64_t patches_per_frame(const ClipSpec& clip, const TokenizerSpec& tok) {
  if (tok.patch_px < 1) throw DomainError("tokenizer.patch_px must be >= 1");
  if (clip.height_px % tok.patch_px != 0)
    throw DomainError("tokenizer.patch_px: patch must divide clip.height_px");
  if (clip.width_px % tok.patch_px != 0)
    throw DomainError("tokenizer.patch_px: patch must divide clip.width_px");
  return (clip.height_px / tok.patch_px) * (clip.width_px / tok.patch_px);
}

std::int64_t token_count(const ClipSpec& clip, const TokenizerSpec& tok) {
  if (tok.tubelet_frames < 1) throw DomainError("tokenizer.tubelet_frames must be >= 1");
  if (clip.n_frames % tok.tubelet_frames != 0)
    throw DomainError("tokenizer.tubelet_frames: tubelet must divide clip.n_frames");
  return (clip.n_frames / tok.tubelet_frames) * patches_per_frame(clip, tok);
}

Flops block_flops(std::int64_t tokens, std::int64_t dim, double mlp_ratio) {
  const Flops l = count(tokens, "token count");
  const Flops d = count(dim, "embedding dimension");
  const double twice_r = 2.0 * mlp_ratio;
  if (!(mlp_ratio > 0) || twice_r != std::round(twice_r))
    throw DomainError("mlp_ratio must be a positive multiple of 0.5");
  const Flops proj = 4 + static_cast<Flops>(twice_r);
  const Flops attention = mul(mul(2, mul(l, l)), d);
  const Flops feed_forward = mul(mul(proj, l), mul(d, d));
  return add(attention, feed_forward);
}

Flops encoder_flops(std::int64_t tokens, const EncoderSpec& enc) {
  return mul(count(enc.depth, "encoder depth"), block_flops(tokens, enc.embed_dim, enc.mlp_ratio));
}

Flops probe_flops(std::int64_t tokens, std::int64_t dim, std::int64_t classes) {
  const Flops l = count(tokens, "token count");
  const Flops d = count(dim, "embedding dimension");
  return add(mul(mul(3, l), mul(d, d)), probe_flops_effective(tokens, dim, classes));
}

Flops probe_flops_effective(std::int64_t tokens, std::int64_t dim, std::int64_t classes) {
  const Flops l = count(tokens, "token count");
  const Flops d = count(dim, "embedding dimension");
  const Flops c = count(classes, "class count");
  return add(add(mul(mul(2, l), d), mul(3, mul(d, d))), mul(d, c));
}

Flops total_flops(Flops encoder, Flops probe) { return add(encoder, probe); }

double inference_time(Flops total, const DeviceSpec& dev) {
  if (!(dev.throughput_flops > 0)) throw DomainError("device.throughput_flops must be > 0");
  const auto views = static_cast<double>(dev.n_views);
  return views * static_cast<double>(total) / dev.throughput_flops + views * dev.io_latency_s;
}

std::int64_t activation_memory_elems(std::int64_t tokens, std::int64_t dim) {
  return static_cast<std::int64_t>(mul(count(tokens, "token count"), count(dim, "embedding dimension")));
}

std::int64_t activation_memory_bytes(std::int64_t tokens, std::int64_t dim, QuantFormat fmt) {
  return activation_memory_elems(tokens, dim) * bytes_per_element(fmt);
}

CostReport cost_report(const ClipSpec& clip, const TokenizerSpec& tok, const EncoderSpec& enc,
                       std::int64_t classes, const DeviceSpec& dev) {
  CostReport r;
  r.tokens = token_count(clip, tok);
  r.flops_block = block_flops(r.tokens, enc.embed_dim, enc.mlp_ratio);
  r.flops_encoder = encoder_flops(r.tokens, enc);
  r.flops_probe = probe_flops(r.tokens, enc.embed_dim, classes);
  r.flops_probe_effective = probe_flops_effective(r.tokens, enc.embed_dim, classes);
  r.flops_total = total_flops(r.flops_encoder, r.flops_probe);
  r.activation_elems = activation_memory_elems(r.tokens, enc.embed_dim);
  r.infer_time_s = inference_time(r.flops_total, dev);
  return r;
}

CostReport cost_report(const ExperimentConfig& cfg) {
  return cost_report(cfg.clip, cfg.tokenizer, cfg.encoder, cfg.probe.n_classes, cfg.device);
}

std::string flops_csv_header() {
  return "L,D,L_e,r,C,F_enc,F_probe,F_probe_effective,F_total,M_enc_elems,t_infer_ms\n";
}

std::string flops_csv_row(const ExperimentConfig& cfg, const CostReport& r) {
  return std::to_string(r.tokens) + "," + std::to_string(cfg.encoder.embed_dim) + "," +
         std::to_string(cfg.encoder.depth) + "," + fmt_sig(cfg.encoder.mlp_ratio, 6) + "," +
         std::to_string(cfg.probe.n_classes) + "," + std::to_string(r.flops_encoder) + "," +
         std::to_string(r.flops_probe) + "," + std::to_string(r.flops_probe_effective) + "," +
         std::to_string(r.flops_total) + "," + std::to_string(r.activation_elems) + "," +
         fmt_sig(r.infer_time_s * 1e3, 6) + "\n";
}

}  // namespace semv2x
