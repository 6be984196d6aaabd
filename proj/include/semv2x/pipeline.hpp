#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "semv2x/config.hpp"
#include "semv2x/probe.hpp"
#include "semv2x/scenario.hpp"

namespace semv2x {

/// Positive class is COLLISION.
struct ConfusionMatrix {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  void add(Label truth, Label predicted);
  bool operator==(const ConfusionMatrix&) const = default;
};

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool operator==(const Metrics&) const = default;
};

/// Precision (recall) is 1 when tp + fp (tp + fn) is 0; f1 is 0 when
/// precision + recall is 0. Throws DomainError on an empty matrix.
Metrics compute_metrics(const ConfusionMatrix& cm);

/// F1 from a precision/recall pair, with the same zero convention.
double f1_score(double precision, double recall);

/// Normal-length (33) and large-length (64) clips against each format.
std::string cmd_payload(const ExperimentConfig& cfg);

/// The two standard links (BPSK at 12 dB, QAM-16 at 22 dB) against each format.
std::string cmd_latency(const ExperimentConfig& cfg);

/// One CSV row per configuration.
std::string cmd_flops(const std::vector<ExperimentConfig>& configs);

/// A sweep file is a YAML sequence of partial configs, each overriding
/// `base`. An empty document yields just `base`.
std::vector<ExperimentConfig> parse_sweep(std::string_view text, const ExperimentConfig& base);

struct Condition {
  PostProcess post = PostProcess::MASK;
  std::int64_t gap = 8;

  std::string name() const;
  bool operator==(const Condition&) const = default;
};

/// Post-processing sweep at the configured gap, then a gap sweep over
/// {4, 8, 12} at the configured post-processing (duplicates dropped).
std::vector<Condition> default_conditions(const ExperimentConfig& cfg);

struct ClipPrediction {
  std::int64_t clip_id = 0;
  Label truth = Label::SAFE;
  /// Vehicle-side prediction after the link, one per format (FP32, FP16, INT8).
  Label predicted[3] = {Label::SAFE, Label::SAFE, Label::SAFE};
  /// Collision probability through the configured format.
  double p_collision = 0.0;
  bool operator==(const ClipPrediction&) const = default;
};

struct SkippedClip {
  std::int64_t clip_id = 0;
  std::string reason;
  bool operator==(const SkippedClip&) const = default;
};

struct ConditionResult {
  Condition condition;
  std::int64_t train_clips = 0;
  ConfusionMatrix confusion;  // through the configured format
  Metrics metrics;
  /// Fraction of test clips whose INT8 (FP16) prediction equals the FP32 one.
  double int8_agreement = 1.0;
  double fp16_agreement = 1.0;
  std::vector<double> loss_history;
  std::vector<ClipPrediction> predictions;
  std::vector<SkippedClip> skipped;
  bool operator==(const ConditionResult&) const = default;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::string config_hash;
  std::string payload_csv;
  std::string latency_csv;
  std::string flops_csv;
  std::int64_t tokens_per_clip = 0;
  /// Bytes crossing the link per clip: the pooled 1 x D vector, or the full
  /// L x D token matrix when the probe runs at the vehicle.
  std::int64_t link_payload_bytes = 0;
  std::int64_t pooled_payload_bytes = 0;
  std::int64_t token_payload_bytes = 0;
  std::vector<ConditionResult> conditions;
  bool operator==(const ExperimentReport&) const = default;
};

struct E2eOptions {
  /// Empty means default_conditions(cfg).
  std::vector<Condition> conditions;
  /// Optional plain-text run log with stage timings.
  std::ostream* log = nullptr;
};

/// Generates the raw dataset once, then per condition prepares, encodes,
/// trains the probe on the training split and classifies the test split
/// through the quantized link. Throws ValidationError when the dataset is
/// empty.
ExperimentReport cmd_e2e(const ExperimentConfig& cfg, const E2eOptions& opts = {});

/// Encodes every clip with the configured encoder stub.
std::vector<Sample> encode_clips(const ExperimentConfig& cfg, const std::vector<ScenarioClip>& clips);

/// Builds the configured dataset and trains a probe on its training split.
TrainResult cmd_train(const ExperimentConfig& cfg);

std::string metrics_csv(const ExperimentReport& report);
std::string predictions_csv(const ExperimentReport& report);
std::string summary_yaml(const ExperimentReport& report);

std::string report_to_json(const ExperimentReport& report);
ExperimentReport report_from_json(std::string_view text);

/// Writes payload.csv, latency.csv, flops.csv, metrics.csv,
/// predictions.csv, loss_<condition>.csv and summary.yaml.
void cmd_report(const ExperimentReport& report, const std::filesystem::path& out_dir);

}  // namespace semv2x
