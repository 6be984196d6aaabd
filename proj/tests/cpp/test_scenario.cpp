#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "semv2x/encoder.hpp"
#include "semv2x/errors.hpp"
#include "semv2x/netpbm.hpp"
#include "semv2x/scenario.hpp"

using namespace semv2x;
namespace fs = std::filesystem;

namespace {

Trajectory straight(Vec2 start, Vec2 vel, int frames, double dt = 0.05) {
  Trajectory t;
  for (int i = 0; i < frames; ++i) t.push_back({start + vel * (i * dt), vel});
  return t;
}

double brute_force_first(const std::vector<Trajectory>& ts, double thr, std::int64_t* frame) {
  for (std::size_t f = 0; f < ts[0].size(); ++f)
    for (std::size_t a = 0; a < ts.size(); ++a)
      for (std::size_t b = a + 1; b < ts.size(); ++b)
        if (distance(ts[a][f].pos, ts[b][f].pos) < thr) {
          *frame = static_cast<std::int64_t>(f);
          return 1;
        }
  return 0;
}

ScenarioClip numbered_clip(std::int64_t n, Label label) {
  ScenarioClip c;
  c.label = label;
  for (std::int64_t i = 0; i < n; ++i) c.frames.emplace_back(2, 2, 1, static_cast<std::uint8_t>(i));
  c.boxes.resize(static_cast<std::size_t>(n));
  if (label == Label::COLLISION) c.collision_frame = n - 1;
  return c;
}

const RenderSpec kRender{48, 48, 1};

}  // namespace

TEST(Scenario, DetectCollision) {
  const std::vector parallel{straight({-10, 0}, {5, 0}, 40), straight({-10, 10}, {5, 0}, 40)};
  EXPECT_FALSE(detect_collision(parallel, 2.0));

  const std::vector head_on{straight({-10, 0}, {10, 0}, 40), straight({10, 0}, {-10, 0}, 40)};
  std::int64_t want = -1;
  ASSERT_TRUE(brute_force_first(head_on, 2.0, &want));
  EXPECT_EQ(detect_collision(head_on, 2.0), want);
  EXPECT_FALSE(detect_collision(head_on, 0.0));

  const std::vector same{straight({0, 0}, {0, 0}, 3), straight({0, 0}, {0, 0}, 3)};
  EXPECT_FALSE(detect_collision(same, 0.0));
  EXPECT_EQ(detect_collision(same, 1e-9), 0);
  EXPECT_THROW(detect_collision(std::vector<Trajectory>{parallel[0]}, 2.0), DomainError);
}

TEST(Scenario, GeneratedLabelsHold) {
  const WorldSpec world;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = generate_scenario(world, Label::COLLISION, seed, kRender);
    ASSERT_EQ(c.label, Label::COLLISION);
    EXPECT_EQ(detect_collision(c.trajectories, world.collision_dist_m), c.length() - 1);
    EXPECT_EQ(c.collision_frame, c.length() - 1);

    const auto s = generate_scenario(world, Label::SAFE, seed, kRender);
    EXPECT_FALSE(s.collision_frame);
    EXPECT_GE(min_pair_distance(s.trajectories), 2 * world.collision_dist_m);
    EXPECT_GE(min_pair_distance(s.trajectories), world.safe_separation_m);
  }
}

TEST(Scenario, Deterministic) {
  const WorldSpec world;
  const auto a = generate_scenario(world, Label::COLLISION, 42, kRender);
  const auto b = generate_scenario(world, Label::COLLISION, 42, kRender);
  EXPECT_EQ(a.frames, b.frames);
  EXPECT_EQ(a.trajectories, b.trajectories);
  EXPECT_EQ(a.boxes, b.boxes);
  EXPECT_NE(a.frames, generate_scenario(world, Label::COLLISION, 43, kRender).frames);
}

TEST(Scenario, TrimmedClipHoldsNoCollision) {
  const WorldSpec world;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto c = generate_scenario(world, Label::COLLISION, seed, kRender);
    for (std::int64_t gap : {4, 8, 12}) {
      const auto t = frame_gap_trim(c, gap);
      EXPECT_EQ(t.length(), c.length() - gap);
      EXPECT_FALSE(detect_collision(t.trajectories, world.collision_dist_m));
      EXPECT_EQ(t.collision_frame, c.collision_frame);
      EXPECT_EQ(t.trimmed_gap, gap);
    }
  }
}

TEST(Raster, EmptyWorldHasOnlyRoadAndBackground) {
  const WorldSpec world;
  for (auto layout : {Layout::FOUR_WAY, Layout::THREE_WAY, Layout::SIDE_ROAD, Layout::ROUNDABOUT}) {
    const std::vector<Trajectory> none{Trajectory(2, VehicleState{{1e4, 1e4}, {0, 0}})};
    const auto r = rasterize(world, layout, none, kRender);
    ASSERT_EQ(r.frames.size(), 2u);
    std::int64_t road = 0;
    for (auto v : r.frames[0].pixels) {
      EXPECT_TRUE(v == kBackgroundLevel || v == kRoadLevel);
      road += v == kRoadLevel;
    }
    EXPECT_EQ(road, r.road_mask.popcount());
    EXPECT_GT(road, 0);
  }
}

TEST(Raster, BoxIsTightOnRenderedVehicle) {
  const WorldSpec world;
  const std::vector<Trajectory> one{{VehicleState{{0, 0}, {1, 0}}}};
  const auto r = rasterize(world, Layout::FOUR_WAY, one, {64, 64, 3});
  ASSERT_EQ(r.boxes[0].size(), 1u);
  Box want{64, 64, -1, -1};
  const auto& f = r.frames[0];
  for (std::int64_t y = 0; y < 64; ++y)
    for (std::int64_t x = 0; x < 64; ++x)
      if (f.at(y, x, 0) == kVehicleLevel) {
        want.x0 = std::min(want.x0, x);
        want.x1 = std::max(want.x1, x);
        want.y0 = std::min(want.y0, y);
        want.y1 = std::max(want.y1, y);
      }
  EXPECT_EQ(r.boxes[0][0], want);
  EXPECT_EQ(r.frames, rasterize(world, Layout::FOUR_WAY, one, {64, 64, 3}).frames);
}

TEST(Raster, VehicleOutsideViewIsClipped) {
  const std::vector<Trajectory> far{{VehicleState{{1000, 1000}, {0, 0}}}};
  const auto r = rasterize(WorldSpec{}, Layout::FOUR_WAY, far, kRender);
  EXPECT_TRUE(r.boxes[0].empty());
}

TEST(PostProcess, BinaryMask) {
  Frame f(1, 3, 1);
  f.pixels = {200, 128, 7};
  const BitMask m{1, 3, {0, 1, 1}};
  const auto out = apply_binary_mask(f, m);
  EXPECT_EQ(out.pixels, (std::vector<std::uint8_t>{0, 128, 7}));
  EXPECT_EQ(apply_binary_mask(out, m), out);
  EXPECT_THROW(apply_binary_mask(f, BitMask{3, 1, {1, 1, 1}}), DomainError);
}

TEST(PostProcess, Heatmap) {
  Frame f(1, 3, 1);
  f.pixels = {100, 110, 230};
  const BitMask m{1, 3, {0, 1, 1}};
  const std::vector<Box> boxes{{2, 0, 2, 0}};
  EXPECT_EQ(apply_heatmap(f, m, boxes).pixels, (std::vector<std::uint8_t>{30, 110, 255}));
  EXPECT_EQ(apply_heatmap(f, m, boxes, {1.0, 1.0, 1.0}), f);
}

TEST(PostProcess, HybridEqualsMaskedHeatmap) {
  const auto c = generate_scenario(WorldSpec{}, Label::COLLISION, 3, kRender);
  for (std::size_t i = 0; i < c.frames.size(); i += 5) {
    for (double bg : {0.0, 0.3, 2.0}) {
      const auto via_heatmap = apply_binary_mask(apply_heatmap(c.frames[i], c.road_mask, c.boxes[i], {1.5, 1.0, bg}),
                                                 c.road_mask);
      EXPECT_EQ(apply_hybrid(c.frames[i], c.road_mask, c.boxes[i], 1.5), via_heatmap);
    }
  }
}

TEST(Protocol, CapLength) {
  const auto c = cap_length(numbered_clip(80, Label::COLLISION));
  ASSERT_EQ(c.length(), 64);
  EXPECT_EQ(c.frames.front().pixels[0], 16);
  EXPECT_EQ(c.collision_frame, 63);
  EXPECT_EQ(cap_length(numbered_clip(30, Label::SAFE)).length(), 30);
}

TEST(Protocol, FrameGapTrim) {
  const auto c = numbered_clip(64, Label::COLLISION);
  const auto t = frame_gap_trim(c, 8);
  EXPECT_EQ(t.length(), 56);
  EXPECT_EQ(t.label, Label::COLLISION);
  EXPECT_EQ(t.frames.back().pixels[0], 55);
  EXPECT_EQ(frame_gap_trim(c, 0).length(), 64);
  EXPECT_THROW(frame_gap_trim(c, 64), DomainError);
  EXPECT_THROW(frame_gap_trim(numbered_clip(10, Label::SAFE), 4), DomainError);
}

TEST(Dataset, SplitIsStratified) {
  std::vector<ScenarioClip> clips;
  for (int i = 0; i < 500; ++i) {
    clips.emplace_back();
    clips.back().id = i;
    clips.back().label = i < 115 ? Label::COLLISION : Label::SAFE;
  }
  const auto d = split_dataset(clips, 0.8, 1);
  auto count = [](const std::vector<ScenarioClip>& v, Label l) {
    return std::count_if(v.begin(), v.end(), [&](const auto& c) { return c.label == l; });
  };
  EXPECT_EQ(count(d.train, Label::SAFE), 308);
  EXPECT_EQ(count(d.train, Label::COLLISION), 92);
  EXPECT_EQ(count(d.test, Label::SAFE), 77);
  EXPECT_EQ(count(d.test, Label::COLLISION), 23);
  const auto again = split_dataset(clips, 0.8, 1);
  for (std::size_t i = 0; i < d.train.size(); ++i) EXPECT_EQ(d.train[i].id, again.train[i].id);
}

TEST(Dataset, SmallBuildIsDeterministic) {
  DatasetOptions o;
  o.n_safe = 1;
  o.n_collision = 1;
  o.render = kRender;
  const auto a = generate_clips(WorldSpec{}, o, 5);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].label, Label::COLLISION);
  EXPECT_EQ(a[1].label, Label::SAFE);
  const auto b = build_dataset(WorldSpec{}, o, 5), c = build_dataset(WorldSpec{}, o, 5);
  EXPECT_EQ(b.train.size() + b.test.size(), 2u);
  ASSERT_EQ(b.train.size(), c.train.size());
  for (std::size_t i = 0; i < b.train.size(); ++i) EXPECT_EQ(b.train[i].frames, c.train[i].frames);
  o.n_safe = 0;
  EXPECT_THROW(generate_clips(WorldSpec{}, o, 5), DomainError);
}

TEST(Encoder, ShapeAndDeterminism) {
  const auto c = generate_scenario(WorldSpec{}, Label::SAFE, 1, kRender);
  std::vector<Frame> frames(c.frames.end() - 8, c.frames.end());
  const TokenizerSpec tok{16, 2};
  const auto a = encode_stub(frames, tok, 12, 7);
  EXPECT_EQ(a.rows(), 4u * 9u);
  EXPECT_EQ(a.cols(), 12u);
  EXPECT_EQ(a, encode_stub(frames, tok, 12, 7));
  EXPECT_NE(a, encode_stub(frames, tok, 12, 8));
  frames.pop_back();
  EXPECT_THROW(encode_stub(frames, tok, 12, 7), DomainError);
}

TEST(Encoder, ConstantClipGivesEqualTokens) {
  const std::vector<Frame> black(4, Frame(32, 32, 1, 0));
  const auto z = encode_stub(black, TokenizerSpec{16, 2}, 8, 3);
  for (std::size_t i = 1; i < z.rows(); ++i)
    for (std::size_t j = 0; j < z.cols(); ++j) EXPECT_EQ(z(i, j), z(0, j));
}

TEST(Encoder, MovingBlockChangesItsPatches) {
  // Two tubelets of two frames; a 4x4 block sits in patch (0,0), then either
  // stays or moves to patch (0,1). Token index = tubelet * 4 + row * 2 + col.
  auto make = [](bool moves) {
    std::vector<Frame> f(4, Frame(32, 32, 1, 0));
    for (int i = 0; i < 4; ++i) {
      const int x0 = (moves && i >= 2) ? 20 : 4;
      for (int y = 4; y < 8; ++y)
        for (int x = x0; x < x0 + 4; ++x) f[static_cast<std::size_t>(i)].at(y, x) = 255;
    }
    return f;
  };
  const EncoderStub enc(TokenizerSpec{16, 2}, 1, 8, 3);
  const auto still = enc.encode(make(false)), moving = enc.encode(make(true));
  for (std::size_t row = 0; row < 8; ++row) {
    const bool differs = std::vector<double>(still.row(row).begin(), still.row(row).end()) !=
                         std::vector<double>(moving.row(row).begin(), moving.row(row).end());
    EXPECT_EQ(differs, row == 4 || row == 5) << "token " << row;
  }
}

TEST(Netpbm, FrameRoundTrip) {
  for (std::int64_t ch : {1, 3}) {
    Frame f(5, 7, ch);
    for (std::size_t i = 0; i < f.pixels.size(); ++i) f.pixels[i] = static_cast<std::uint8_t>(i * 37);
    std::stringstream s;
    write_pnm(s, f);
    EXPECT_EQ(s.str().substr(0, 2), ch == 1 ? "P5" : "P6");
    EXPECT_EQ(read_pnm(s), f);
  }
}

TEST(Netpbm, HeaderCommentsAndErrors) {
  std::istringstream s("P5\n# a comment\n2 1\n255\n\x01\x02");
  const auto f = read_pnm(s);
  EXPECT_EQ(f.width, 2);
  EXPECT_EQ(f.pixels, (std::vector<std::uint8_t>{1, 2}));
  std::istringstream bad("P2\n2 1\n255\n1 2\n");
  EXPECT_THROW(read_pnm(bad), FormatError);
  std::istringstream short_body("P5\n2 2\n255\n\x01");
  EXPECT_THROW(read_pnm(short_body), FormatError);
  std::istringstream deep("P5\n1 1\n65535\n\x00\x01");
  EXPECT_THROW(read_pnm(deep), FormatError);
}

TEST(Netpbm, BitmapRoundTrip) {
  BitMask m{3, 11, std::vector<std::uint8_t>(33)};
  for (std::size_t i = 0; i < m.bits.size(); ++i) m.bits[i] = (i * 7) % 3 == 0;
  std::stringstream s;
  write_pbm(s, m);
  EXPECT_EQ(s.str().size(), std::string("P4\n11 3\n").size() + 3 * 2);
  EXPECT_EQ(read_pbm(s), m);
}

TEST(Netpbm, ClipDirectoryRoundTrip) {
  auto c = post_process(generate_scenario(WorldSpec{}, Label::COLLISION, 9, kRender), PostProcess::HYBRID);
  c = frame_gap_trim(c, 4);
  c.id = 17;
  const auto dir = fs::temp_directory_path() / "semv2x_clip_test";
  fs::remove_all(dir);
  save_clip(dir, c);
  EXPECT_TRUE(fs::exists(dir / "frame_000.pgm"));
  EXPECT_TRUE(fs::exists(dir / "road_mask.pbm"));
  const auto back = load_clip(dir);
  EXPECT_EQ(back.id, 17);
  EXPECT_EQ(back.label, c.label);
  EXPECT_EQ(back.collision_frame, c.collision_frame);
  EXPECT_EQ(back.trimmed_gap, 4);
  EXPECT_EQ(back.frames, c.frames);
  EXPECT_EQ(back.road_mask, c.road_mask);
  EXPECT_EQ(back.boxes, c.boxes);
  EXPECT_EQ(back.post, PostProcess::HYBRID);
  EXPECT_EQ(back.seed, c.seed);
  fs::remove_all(dir);
}
