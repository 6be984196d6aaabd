#pragma once

// Configuration records for the whole pipeline. Defaults reproduce the
// evaluation setup: 64-frame 2048x2048 source clips resized to 384x384,
// 16x16 patches, 1280-dim ViT-H embeddings, two output classes, a 20 MHz link
// at BPSK/12 dB or QAM-16/22 dB, and Adam at lr 1e-3 for the probe.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace semv2x {

enum class QuantFormat { FP32, FP16, INT8 };
enum class Modulation { BPSK, QAM16 };
enum class Layout { FOUR_WAY, THREE_WAY, SIDE_ROAD, ROUNDABOUT };
enum class PostProcess { NONE, HEATMAP, MASK, HYBRID };
enum class Activation { RELU, GELU };

/// Bytes per transmitted element: FP32 4, FP16 2, INT8 1.
constexpr std::int64_t bytes_per_element(QuantFormat f) {
  switch (f) {
    case QuantFormat::FP32: return 4;
    case QuantFormat::FP16: return 2;
    case QuantFormat::INT8: return 1;
  }
  return 0;
}

std::string_view to_string(QuantFormat f);
std::string_view to_string(Modulation m);
std::string_view to_string(Layout l);
std::string_view to_string(PostProcess p);
std::string_view to_string(Activation a);

// Case-insensitive parsers; throw std::invalid_argument on unknown names.
QuantFormat parse_quant_format(std::string_view s);
Modulation parse_modulation(std::string_view s);
Layout parse_layout(std::string_view s);
PostProcess parse_post_process(std::string_view s);
Activation parse_activation(std::string_view s);

/// Clip geometry. (height_px, width_px) is the encoder input size; the
/// orig_* pair is the camera resolution used for raw payload accounting.
struct ClipSpec {
  std::int64_t n_frames = 64;
  std::int64_t height_px = 384;
  std::int64_t width_px = 384;
  std::int64_t channels = 3;
  std::int64_t orig_height_px = 2048;
  std::int64_t orig_width_px = 2048;
  double fps = 20.0;

  bool operator==(const ClipSpec&) const = default;
};

struct TokenizerSpec {
  std::int64_t patch_px = 16;
  std::int64_t tubelet_frames = 2;

  bool operator==(const TokenizerSpec&) const = default;
};

struct EncoderSpec {
  std::int64_t embed_dim = 1280;
  std::int64_t depth = 32;
  double mlp_ratio = 4.0;

  bool operator==(const EncoderSpec&) const = default;
};

struct ProbeSpec {
  std::int64_t n_queries = 1;
  std::int64_t n_classes = 2;
  /// MLP hidden width; 0 means "same as the embedding dimension".
  std::int64_t hidden_dim = 0;
  Activation activation = Activation::RELU;

  bool operator==(const ProbeSpec&) const = default;
};

struct LinkSpec {
  double bandwidth_hz = 20e6;
  double snr_db = 12.0;
  Modulation modulation = Modulation::BPSK;

  bool operator==(const LinkSpec&) const = default;
};

/// The two (modulation, SNR) operating points evaluated on a 20 MHz channel.
std::vector<LinkSpec> standard_links(double bandwidth_hz = 20e6);

struct DeviceSpec {
  double throughput_flops = 100e12;
  double io_latency_s = 0.0;
  std::int64_t n_views = 1;

  bool operator==(const DeviceSpec&) const = default;
};

struct WorldSpec {
  double extent_m = 40.0;
  Layout layout = Layout::FOUR_WAY;
  double lane_width_m = 3.5;
  double collision_dist_m = 2.0;
  double max_speed_mps = 10.0;
  /// SAFE clips keep at least this distance between vehicles.
  double safe_separation_m = 20.0;
  double vehicle_length_m = 4.5;
  double vehicle_width_m = 1.8;

  bool operator==(const WorldSpec&) const = default;
};

/// Desk-scale rendering and encoding sizes for the end-to-end simulation.
/// Kept separate from ClipSpec/EncoderSpec, which describe the paper-scale
/// system used by the payload and FLOPs tables.
struct SimSpec {
  std::int64_t height_px = 48;
  std::int64_t width_px = 48;
  std::int64_t channels = 1;
  std::int64_t patch_px = 16;
  std::int64_t tubelet_frames = 2;
  std::int64_t embed_dim = 96;
  std::int64_t max_frames = 64;
  /// Seed of the encoder stub's projection; shared by every clip.
  std::uint64_t encoder_seed = 7;

  bool operator==(const SimSpec&) const = default;
};

struct DatasetSpec {
  std::int64_t n_safe = 385;
  std::int64_t n_collision = 115;
  PostProcess post = PostProcess::MASK;
  std::int64_t gap = 8;
  double train_fraction = 0.8;
  double gain_vehicle = 1.5;
  double gain_road = 1.0;
  double gain_background = 0.3;

  bool operator==(const DatasetSpec&) const = default;
};

struct TrainSpec {
  std::int64_t epochs = 200;
  double lr = 1e-3;
  std::int64_t batch = 8;
  std::uint64_t seed = 0;
  double weight_decay = 0.0;

  bool operator==(const TrainSpec&) const = default;
};

struct ExperimentConfig {
  ClipSpec clip;
  TokenizerSpec tokenizer;
  EncoderSpec encoder;
  ProbeSpec probe;
  LinkSpec link;
  DeviceSpec device;
  WorldSpec world;
  SimSpec sim;
  DatasetSpec dataset;
  TrainSpec train;
  QuantFormat quant = QuantFormat::FP32;
  bool probe_at_vehicle = false;
  std::uint64_t seed = 0;

  bool operator==(const ExperimentConfig&) const = default;
};

/// One problem found by validate_config; `field` is the dotted config key.
struct Violation {
  std::string field;
  std::string message;

  bool operator==(const Violation&) const = default;
};

/// Every invariant violation in `cfg`; empty when the config is valid.
std::vector<Violation> validate_config(const ExperimentConfig& cfg);

/// Parses YAML config text. Absent keys keep their defaults.
/// Throws ConfigError (with line) on malformed text, unknown keys, or bad
/// value types, and ValidationError naming the first violated field.
ExperimentConfig parse_config(std::string_view text);

/// As above, but absent keys keep the values in `base`.
ExperimentConfig parse_config(std::string_view text, const ExperimentConfig& base);

ExperimentConfig load_config(const std::filesystem::path& path);

/// Canonical YAML form; parse_config(serialize_config(c)) == c.
std::string serialize_config(const ExperimentConfig& cfg);

/// 64-bit FNV-1a of the canonical serialization, as 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

}  // namespace semv2x
