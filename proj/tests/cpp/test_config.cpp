#include <gtest/gtest.h>

#include "semv2x/config.hpp"
#include "semv2x/errors.hpp"
#include "semv2x/rng.hpp"

using namespace semv2x;

TEST(Config, DefaultsAreValid) { EXPECT_TRUE(validate_config(ExperimentConfig{}).empty()); }

TEST(Config, EmptyDocumentGivesDefaults) { EXPECT_EQ(parse_config(""), ExperimentConfig{}); }

TEST(Config, SerializeRoundTrip) {
  ExperimentConfig cfg;
  cfg.quant = QuantFormat::INT8;
  cfg.probe_at_vehicle = true;
  cfg.seed = 12345678901234ULL;
  cfg.link = {10e6, 22.0, Modulation::QAM16};
  cfg.world.layout = Layout::ROUNDABOUT;
  cfg.world.lane_width_m = 3.1;
  cfg.dataset.post = PostProcess::HYBRID;
  cfg.dataset.gain_background = 0.1;
  cfg.train.lr = 0.1 + 0.2;  // not exactly representable in short decimal
  cfg.probe.activation = Activation::GELU;
  const auto text = serialize_config(cfg);
  EXPECT_EQ(parse_config(text), cfg);
  EXPECT_EQ(serialize_config(parse_config(text)), text);
}

TEST(Config, OverridesMergeIntoBase) {
  const auto cfg = parse_config("clip:\n  n_frames: 32\nquant: fp16\n");
  EXPECT_EQ(cfg.clip.n_frames, 32);
  EXPECT_EQ(cfg.clip.height_px, 384);
  EXPECT_EQ(cfg.quant, QuantFormat::FP16);

  ExperimentConfig base;
  base.seed = 9;
  EXPECT_EQ(parse_config("train:\n  epochs: 3\n", base).seed, 9u);
}

TEST(Config, EnumsAreCaseInsensitive) {
  EXPECT_EQ(parse_modulation("qam-16"), Modulation::QAM16);
  EXPECT_EQ(parse_modulation("QAM16"), Modulation::QAM16);
  EXPECT_EQ(parse_post_process("Hybrid"), PostProcess::HYBRID);
  EXPECT_EQ(parse_layout("four_way"), Layout::FOUR_WAY);
  EXPECT_EQ(parse_quant_format("INT8"), QuantFormat::INT8);
  EXPECT_THROW(parse_quant_format("int4"), std::invalid_argument);
}

TEST(Config, UnknownKeyReportsLine) {
  try {
    parse_config("seed: 1\nclip:\n  n_frames: 64\n  colour: 3\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_NE(std::string(e.what()).find("colour"), std::string::npos);
  }
}

TEST(Config, BadScalarReportsLine) {
  try {
    parse_config("train:\n  epochs: many\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.line(), 1);
  }
  EXPECT_THROW(parse_config("quant: fp64\n"), ConfigError);
  EXPECT_THROW(parse_config("clip: [1, 2]\n"), ConfigError);
  EXPECT_THROW(parse_config("clip:\n  n_frames: [\n"), ConfigError);
}

TEST(Config, ViolationsNameTheField) {
  try {
    parse_config("tokenizer:\n  patch_px: 15\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "tokenizer.patch_px");
    EXPECT_NE(std::string(e.what()).find("patch must divide height"), std::string::npos);
  }
  try {
    parse_config("probe:\n  n_queries: 2\n");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_EQ(e.field(), "probe.n_queries");
  }
  ExperimentConfig cfg;
  cfg.clip.n_frames = 33;
  const auto v = validate_config(cfg);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].field, "tokenizer.tubelet_frames");
}

TEST(Config, HashIsStableAndSensitive) {
  ExperimentConfig a, b;
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 16u);
  b.seed = 1;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Config, BytesPerElement) {
  EXPECT_EQ(bytes_per_element(QuantFormat::FP32), 4);
  EXPECT_EQ(bytes_per_element(QuantFormat::FP16), 2);
  EXPECT_EQ(bytes_per_element(QuantFormat::INT8), 1);
}

TEST(Rng, DeterministicStreams) {
  Rng a(42), b(42), c(mix_seed(42, 1));
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next(), b.next());
  EXPECT_NE(Rng(42).next(), c.next());
  static_assert(mix_seed(1, 2) != mix_seed(2, 1));
}

TEST(Rng, BelowAndUniformStayInRange) {
  Rng r(7);
  for (int i = 0; i < 10000; ++i) {
    EXPECT_LT(r.below(13), 13u);
    const double u = r.uniform(-2.0, 3.0);
    EXPECT_GE(u, -2.0);
    EXPECT_LT(u, 3.0);
  }
}
