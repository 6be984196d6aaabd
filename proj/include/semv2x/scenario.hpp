#pragma once

// Synthetic traffic-camera clips: road layouts, two-vehicle kinematic
// scenarios that either collide or pass safely, rasterization, the three
// post-processing transforms, and the clip-length / frame-gap protocol.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "semv2x/config.hpp"

namespace semv2x {

enum class Label { SAFE = 0, COLLISION = 1 };

std::string_view to_string(Label l);

/// Pixel intensities used by the rasterizer.
inline constexpr std::uint8_t kBackgroundLevel = 40;
inline constexpr std::uint8_t kRoadLevel = 110;
inline constexpr std::uint8_t kVehicleLevel = 230;

inline constexpr double kDefaultFps = 20.0;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  bool operator==(const Vec2&) const = default;
};

double norm(Vec2 v);
double distance(Vec2 a, Vec2 b);

/// Polyline lane path parameterized by arc length. Positions before 0 or past
/// the end extrapolate along the first or last segment.
class Path {
 public:
  Path() = default;
  explicit Path(std::vector<Vec2> points);

  double length() const { return cum_.empty() ? 0.0 : cum_.back(); }
  Vec2 at(double s) const;
  /// Unit direction of travel at arc length s.
  Vec2 heading(double s) const;
  const std::vector<Vec2>& points() const { return points_; }

 private:
  std::size_t segment(double s) const;

  std::vector<Vec2> points_;
  std::vector<double> cum_;
};

/// Arc lengths (s_a, s_b) of the first crossing of two paths, if any.
std::optional<std::pair<double, double>> first_intersection(const Path& a, const Path& b);

struct VehicleState {
  Vec2 pos;
  Vec2 vel;
  double length = 4.5;
  double width = 1.8;

  bool operator==(const VehicleState&) const = default;
};

/// One vehicle's states, one per frame.
using Trajectory = std::vector<VehicleState>;

/// Road geometry: straight road segments with a half width, plus an optional
/// roundabout ring.
class RoadNetwork {
 public:
  struct Segment {
    Vec2 a;
    Vec2 b;
    double half_width;
  };

  RoadNetwork(const WorldSpec& world, Layout layout);

  bool on_road(Vec2 p) const;
  /// Candidate lane routes through the junction (right-hand traffic).
  const std::vector<Path>& routes() const { return routes_; }
  /// Index of the arm each route enters from.
  const std::vector<int>& route_entry() const { return entry_; }

 private:
  std::vector<Segment> segments_;
  Vec2 ring_center_;
  double ring_radius_ = 0.0;
  double ring_half_width_ = 0.0;
  std::vector<Path> routes_;
  std::vector<int> entry_;
};

struct Frame {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::int64_t channels = 1;
  /// Row-major, channels interleaved.
  std::vector<std::uint8_t> pixels;

  Frame() = default;
  Frame(std::int64_t h, std::int64_t w, std::int64_t c, std::uint8_t fill = 0)
      : height(h), width(w), channels(c), pixels(static_cast<std::size_t>(h * w * c), fill) {}

  std::uint8_t& at(std::int64_t r, std::int64_t c, std::int64_t ch = 0) {
    return pixels[static_cast<std::size_t>((r * width + c) * channels + ch)];
  }
  std::uint8_t at(std::int64_t r, std::int64_t c, std::int64_t ch = 0) const {
    return pixels[static_cast<std::size_t>((r * width + c) * channels + ch)];
  }

  bool operator==(const Frame&) const = default;
};

struct BitMask {
  std::int64_t height = 0;
  std::int64_t width = 0;
  std::vector<std::uint8_t> bits;  // one byte per pixel, 0 or 1

  bool at(std::int64_t r, std::int64_t c) const {
    return bits[static_cast<std::size_t>(r * width + c)] != 0;
  }
  std::int64_t popcount() const;

  bool operator==(const BitMask&) const = default;
};

/// Inclusive pixel extents.
struct Box {
  std::int64_t x0 = 0;
  std::int64_t y0 = 0;
  std::int64_t x1 = 0;
  std::int64_t y1 = 0;

  bool contains(std::int64_t r, std::int64_t c) const {
    return c >= x0 && c <= x1 && r >= y0 && r <= y1;
  }
  bool operator==(const Box&) const = default;
};

struct RenderSpec {
  std::int64_t height_px = 64;
  std::int64_t width_px = 64;
  std::int64_t channels = 1;
};

struct ScenarioClip {
  std::int64_t id = 0;
  std::vector<Frame> frames;
  Label label = Label::SAFE;
  /// Collision frame in this clip's indexing. Equals the last frame index,
  /// or lies `trimmed_gap` frames past it after frame_gap_trim.
  std::optional<std::int64_t> collision_frame;
  std::int64_t trimmed_gap = 0;
  BitMask road_mask;
  std::vector<std::vector<Box>> boxes;
  std::vector<Trajectory> trajectories;
  double fps = kDefaultFps;
  std::uint64_t seed = 0;
  Layout layout = Layout::FOUR_WAY;
  PostProcess post = PostProcess::NONE;

  std::int64_t length() const { return static_cast<std::int64_t>(frames.size()); }
};

/// Earliest frame at which any two vehicle centers are closer than
/// `threshold` (strict), or nullopt. Throws DomainError with < 2 vehicles.
std::optional<std::int64_t> detect_collision(std::span<const Trajectory> trajectories,
                                             double threshold);

/// Smallest pairwise center distance over all frames.
double min_pair_distance(std::span<const Trajectory> trajectories);

struct RasterResult {
  std::vector<Frame> frames;
  BitMask road_mask;
  std::vector<std::vector<Box>> boxes;
};

/// Background 40, road 110, vehicles 230 (oriented footprints). Each box is
/// the tight extent of one vehicle's rendered pixels; vehicles fully outside
/// the view get no box.
RasterResult rasterize(const WorldSpec& world, Layout layout,
                       std::span<const Trajectory> trajectories, const RenderSpec& render);

/// Deterministic in (world, kind, seed). COLLISION clips end at the first
/// frame where the vehicles are closer than world.collision_dist_m; SAFE
/// clips keep at least world.safe_separation_m between vehicles throughout.
/// Throws std::runtime_error if 1000 derived sub-seeds all fail.
ScenarioClip generate_scenario(const WorldSpec& world, Label kind, std::uint64_t seed,
                               const RenderSpec& render = {});

struct HeatmapGains {
  double vehicle = 1.5;
  double road = 1.0;
  double background = 0.3;
};

/// Zeroes pixels outside the road mask. Throws DomainError on shape mismatch.
Frame apply_binary_mask(const Frame& frame, const BitMask& road_mask);

/// Scales each pixel by its region gain (vehicle box > road > background),
/// rounding and clamping to [0, 255].
Frame apply_heatmap(const Frame& frame, const BitMask& road_mask, std::span<const Box> boxes,
                    const HeatmapGains& gains = {});

/// Off-road pixels become 0; on-road vehicle pixels are scaled by
/// `gain_vehicle`; other road pixels are unchanged.
Frame apply_hybrid(const Frame& frame, const BitMask& road_mask, std::span<const Box> boxes,
                   double gain_vehicle = 1.5);

/// Applies `post` to every frame of the clip.
ScenarioClip post_process(const ScenarioClip& clip, PostProcess post, const HeatmapGains& gains = {});

/// Keeps the last `max_frames` frames, reindexing the collision frame.
ScenarioClip cap_length(const ScenarioClip& clip, std::int64_t max_frames = 64);

/// Drops the final `gap` frames of a COLLISION clip; the label is kept.
/// Throws DomainError for SAFE clips or gap >= length.
ScenarioClip frame_gap_trim(const ScenarioClip& clip, std::int64_t gap);

struct DatasetOptions {
  std::int64_t n_safe = 385;
  std::int64_t n_collision = 115;
  PostProcess post = PostProcess::MASK;
  std::int64_t gap = 8;
  double train_fraction = 0.8;
  std::int64_t max_frames = 64;
  HeatmapGains gains;
  RenderSpec render;
  /// Cycle clips through all four layouts instead of using world.layout.
  bool mixed_layouts = true;
};

struct Dataset {
  std::vector<ScenarioClip> train;
  std::vector<ScenarioClip> test;
};

/// Raw clips (before capping, gap trimming, and post-processing) in id order;
/// the first n_collision ids are collisions.
std::vector<ScenarioClip> generate_clips(const WorldSpec& world, const DatasetOptions& opts,
                                         std::uint64_t seed);

/// Caps, gap-trims (collision clips only) and post-processes one raw clip.
ScenarioClip prepare_clip(const ScenarioClip& raw, const DatasetOptions& opts);

/// Stratified train/test split of prepared clips; deterministic in seed.
Dataset split_dataset(std::vector<ScenarioClip> clips, double train_fraction, std::uint64_t seed);

/// generate_clips + prepare_clip + split_dataset.
Dataset build_dataset(const WorldSpec& world, const DatasetOptions& opts, std::uint64_t seed);

DatasetOptions dataset_options(const ExperimentConfig& cfg);

}  // namespace semv2x
