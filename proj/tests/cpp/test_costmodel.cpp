#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_int.hpp>

#include "semv2x/costmodel.hpp"
#include "semv2x/errors.hpp"

using namespace semv2x;
using boost::multiprecision::cpp_int;

namespace {

// Independent arbitrary-precision evaluation; r is passed as 2r to stay integral.
cpp_int big_block(cpp_int L, cpp_int D, cpp_int two_r) { return 2 * L * L * D + (4 + two_r) * L * D * D; }
cpp_int big_probe(cpp_int L, cpp_int D, cpp_int C) { return 3 * L * D * D + 2 * L * D + 3 * D * D + D * C; }

struct Case {
  std::int64_t L, D;
  double r;
  std::int64_t depth, C;
  Flops block, encoder, probe, total;
};

// Worked by hand.
const Case kCases[] = {
    {2, 4, 1.0, 3, 2, 224, 672, 168, 840},
    {1, 1, 1.0, 1, 1, 8, 8, 9, 17},
    {3, 2, 4.0, 2, 2, 180, 360, 64, 424},
    {4, 3, 2.5, 1, 3, 420, 420, 168, 588},
    {6, 8, 4.0, 2, 2, 5184, 10368, 1456, 11824},
};

}  // namespace

TEST(CostModel, HandComputedCases) {
  for (const auto& c : kCases) {
    SCOPED_TRACE(c.L);
    EXPECT_EQ(block_flops(c.L, c.D, c.r), c.block);
    EXPECT_EQ(encoder_flops(c.L, EncoderSpec{c.D, c.depth, c.r}), c.encoder);
    EXPECT_EQ(probe_flops(c.L, c.D, c.C), c.probe);
    EXPECT_EQ(total_flops(c.encoder, c.probe), c.total);
  }
  EXPECT_EQ(probe_flops_effective(2, 4, 2), 72u);
}

TEST(CostModel, TokenCounts) {
  EXPECT_EQ(token_count(ClipSpec{}, TokenizerSpec{}), 18432);
  EXPECT_EQ(patches_per_frame(ClipSpec{}, TokenizerSpec{}), 576);
  ClipSpec odd;
  odd.n_frames = 33;
  EXPECT_THROW(token_count(odd, TokenizerSpec{}), DomainError);
  EXPECT_THROW(token_count(ClipSpec{}, TokenizerSpec{15, 2}), DomainError);
}

TEST(CostModel, ActivationMemory) {
  EXPECT_EQ(activation_memory_elems(18432, 1280), 23'592'960);
  EXPECT_EQ(activation_memory_bytes(18432, 1280, QuantFormat::FP16), 47'185'920);
}

TEST(CostModel, FullScaleMatchesBigIntegerOracle) {
  const auto r = cost_report(ExperimentConfig{});
  const cpp_int L = 18432, D = 1280;
  const cpp_int enc = 32 * big_block(L, D, 8);
  const cpp_int probe = big_probe(L, D, 2);
  EXPECT_EQ(cpp_int(r.flops_block), big_block(L, D, 8));
  EXPECT_EQ(cpp_int(r.flops_encoder), enc);
  EXPECT_EQ(cpp_int(r.flops_probe), probe);
  EXPECT_EQ(cpp_int(r.flops_total), enc + probe);
  EXPECT_EQ(r.flops_encoder, 39'427'799'777'280u);
  EXPECT_EQ(r.flops_probe, 90'649'070'080u);
  EXPECT_EQ(r.flops_total, 39'518'448'847'360u);
  EXPECT_GT(static_cast<double>(r.flops_encoder) / static_cast<double>(r.flops_total), 0.99);
}

TEST(CostModel, OverflowIsReported) {
  EXPECT_THROW(block_flops(std::int64_t{1} << 30, std::int64_t{1} << 20, 4.0), std::overflow_error);
  EXPECT_THROW(block_flops(4, 4, 1.3), DomainError);
  EXPECT_THROW(block_flops(-1, 4, 4.0), DomainError);
  EXPECT_EQ(block_flops(0, 4, 4.0), 0u);
}

TEST(CostModel, InferenceTime) {
  DeviceSpec dev{1e12, 0.5e-3, 2};
  EXPECT_DOUBLE_EQ(inference_time(2'000'000'000'000u, dev), 2 * 2.0 + 2 * 0.5e-3);
}

TEST(CostModel, CsvRow) {
  const ExperimentConfig cfg;
  EXPECT_EQ(flops_csv_header(), "L,D,L_e,r,C,F_enc,F_probe,F_probe_effective,F_total,M_enc_elems,t_infer_ms\n");
  const auto row = flops_csv_row(cfg, cost_report(cfg));
  EXPECT_EQ(row.rfind("18432,1280,32,4,2,39427799777280,90649070080,", 0), 0u) << row;
}
