#include "semv2x/encoder.hpp"

#include <cmath>

#include "semv2x/errors.hpp"
#include "semv2x/rng.hpp"

namespace semv2x {

EncoderStub::EncoderStub(const TokenizerSpec& tok, std::int64_t channels, std::int64_t dim,
                         std::uint64_t seed)
    : tok_(tok), channels_(channels), dim_(dim) {
  if (tok.patch_px < 1 || tok.tubelet_frames < 1 || channels < 1 || dim < 1)
    throw DomainError("encoder stub: sizes must be >= 1");
  input_dim_ = 2 * tok.tubelet_frames * tok.patch_px * tok.patch_px * channels;
  projection_ = Matrix(static_cast<std::size_t>(input_dim_), static_cast<std::size_t>(dim));
  Rng rng(seed);
  const double bound = std::sqrt(3.0 / static_cast<double>(input_dim_));
  for (auto& v : projection_.values()) v = rng.uniform(-bound, bound);
}

TokenMatrix EncoderStub::encode(std::span<const Frame> frames) const {
  if (frames.empty()) throw DomainError("encoder stub: no frames");
  const auto h = frames.front().height, w = frames.front().width;
  for (const auto& f : frames)
    if (f.height != h || f.width != w || f.channels != channels_ ||
        static_cast<std::int64_t>(f.pixels.size()) != h * w * channels_)
      throw DomainError("encoder stub: inconsistent frame shape");
  const auto p = tok_.patch_px, tp = tok_.tubelet_frames;
  if (h % p != 0 || w % p != 0) throw DomainError("encoder stub: patch must divide frame size");
  const auto n = static_cast<std::int64_t>(frames.size());
  if (n % tp != 0) throw DomainError("encoder stub: tubelet must divide frame count");

  const auto rows_p = h / p, cols_p = w / p, tubelets = n / tp;
  const auto patch_len = tp * p * p * channels_;
  TokenMatrix out(static_cast<std::size_t>(tubelets * rows_p * cols_p), static_cast<std::size_t>(dim_));

  std::vector<double> current(static_cast<std::size_t>(patch_len));
  std::vector<double> features(static_cast<std::size_t>(input_dim_));
  // Previous tubelet's patch contents, indexed by patch.
  std::vector<std::vector<double>> previous(static_cast<std::size_t>(rows_p * cols_p),
                                            std::vector<double>(static_cast<std::size_t>(patch_len), 0.0));
  std::vector<bool> have_previous(previous.size(), false);

  std::size_t token = 0;
  for (std::int64_t t = 0; t < tubelets; ++t) {
    for (std::int64_t pr = 0; pr < rows_p; ++pr) {
      for (std::int64_t pc = 0; pc < cols_p; ++pc, ++token) {
        std::size_t k = 0;
        for (std::int64_t f = 0; f < tp; ++f) {
          const auto& frame = frames[static_cast<std::size_t>(t * tp + f)];
          for (std::int64_t r = 0; r < p; ++r)
            for (std::int64_t c = 0; c < p; ++c)
              for (std::int64_t ch = 0; ch < channels_; ++ch)
                current[k++] = (frame.at(pr * p + r, pc * p + c, ch) / 255.0 - kPixelMean) / kPixelStd;
        }
        const auto patch = static_cast<std::size_t>(pr * cols_p + pc);
        auto& prev = previous[patch];
        for (std::size_t i = 0; i < current.size(); ++i) {
          features[i] = current[i];
          features[current.size() + i] = have_previous[patch] ? current[i] - prev[i] : 0.0;
        }
        prev = current;
        have_previous[patch] = true;

        auto row = out.row(token);
        for (std::size_t i = 0; i < features.size(); ++i) {
          const double x = features[i];
          if (x == 0.0) continue;
          const auto proj = projection_.row(i);
          for (std::size_t j = 0; j < row.size(); ++j) row[j] += x * proj[j];
        }
      }
    }
  }
  return out;
}

TokenMatrix encode_stub(std::span<const Frame> frames, const TokenizerSpec& tok, std::int64_t dim,
                        std::uint64_t seed) {
  if (frames.empty()) throw DomainError("encoder stub: no frames");
  return EncoderStub(tok, frames.front().channels, dim, seed).encode(frames);
}

}  // namespace semv2x
