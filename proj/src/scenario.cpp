#include "semv2x/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "semv2x/errors.hpp"
#include "semv2x/rng.hpp"

namespace semv2x {

std::string_view to_string(Label l) { return l == Label::COLLISION ? "collision" : "safe"; }

double norm(Vec2 v) { return std::hypot(v.x, v.y); }
double distance(Vec2 a, Vec2 b) { return norm(a - b); }

namespace {

double dot2(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
double cross2(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

Vec2 unit(Vec2 v) {
  const double n = norm(v);
  return n > 0 ? v * (1.0 / n) : Vec2{1.0, 0.0};
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot2(ab, ab);
  double t = len2 > 0 ? dot2(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + ab * t);
}

}  // namespace

// --- Path -----------------------------------------------------------------------

Path::Path(std::vector<Vec2> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw DomainError("a path needs at least two points");
  cum_.push_back(0.0);
  for (std::size_t i = 1; i < points_.size(); ++i)
    cum_.push_back(cum_.back() + distance(points_[i - 1], points_[i]));
}

std::size_t Path::segment(double s) const {
  const auto it = std::upper_bound(cum_.begin(), cum_.end(), s);
  const auto idx = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, it - cum_.begin() - 1));
  return std::min(idx, points_.size() - 2);
}

Vec2 Path::at(double s) const {
  const auto i = segment(s);
  const Vec2 a = points_[i], b = points_[i + 1];
  const double seg = cum_[i + 1] - cum_[i];
  return a + unit(b - a) * (s - cum_[i]) * (seg > 0 ? 1.0 : 0.0);
}

Vec2 Path::heading(double s) const {
  const auto i = segment(s);
  return unit(points_[i + 1] - points_[i]);
}

std::optional<std::pair<double, double>> first_intersection(const Path& a, const Path& b) {
  const auto& pa = a.points();
  const auto& pb = b.points();
  double sa_acc = 0.0;
  for (std::size_t i = 0; i + 1 < pa.size(); ++i) {
    const Vec2 p = pa[i], r = pa[i + 1] - pa[i];
    std::optional<std::pair<double, double>> best;
    double sb_acc = 0.0;
    for (std::size_t j = 0; j + 1 < pb.size(); ++j) {
      const Vec2 q = pb[j], s = pb[j + 1] - pb[j];
      const double denom = cross2(r, s);
      if (std::abs(denom) > 1e-12) {
        const double t = cross2(q - p, s) / denom;
        const double u = cross2(q - p, r) / denom;
        if (t >= 0 && t <= 1 && u >= 0 && u <= 1) {
          const double sa = sa_acc + t * norm(r);
          const double sb = sb_acc + u * norm(s);
          if (!best || sa < best->first) best = {{sa, sb}};
        }
      }
      sb_acc += norm(s);
    }
    if (best) return best;
    sa_acc += norm(r);
  }
  return std::nullopt;
}

// --- RoadNetwork ----------------------------------------------------------------

RoadNetwork::RoadNetwork(const WorldSpec& world, Layout layout) {
  const double half = world.extent_m / 2.0;
  const double lane = world.lane_width_m;
  const double offset = lane / 2.0;
  const double far = 2.0 * world.extent_m;

  Vec2 center{0.0, 0.0};
  std::vector<Vec2> arms;
  switch (layout) {
    case Layout::FOUR_WAY:
    case Layout::ROUNDABOUT:
      arms = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
      break;
    case Layout::THREE_WAY:
      arms = {{1, 0}, {-1, 0}, {0, 1}};
      break;
    case Layout::SIDE_ROAD:
      center = {-half / 4.0, half / 6.0};
      arms = {{1, 0}, {-1, 0}, {0.6, -0.8}};
      break;
  }

  const bool ring = layout == Layout::ROUNDABOUT;
  if (ring) {
    ring_center_ = center;
    ring_radius_ = 0.25 * world.extent_m;
    ring_half_width_ = lane;
  }
  const double arm_start = ring ? ring_radius_ : 0.0;
  for (const auto& u : arms) segments_.push_back({center + u * arm_start, center + u * far, lane});

  // Right-hand traffic: inbound lanes sit right of the inward direction,
  // outbound lanes right of the outward direction.
  auto in_offset = [&](Vec2 u) { return Vec2{-u.y, u.x} * offset; };
  auto out_offset = [&](Vec2 u) { return Vec2{u.y, -u.x} * offset; };

  for (std::size_t a = 0; a < arms.size(); ++a) {
    for (std::size_t b = 0; b < arms.size(); ++b) {
      if (a == b) continue;
      const Vec2 ua = arms[a], ub = arms[b];
      std::vector<Vec2> pts;
      pts.push_back(center + ua * far + in_offset(ua));
      if (!ring) {
        pts.push_back(center + ua * lane + in_offset(ua));
        pts.push_back(center + ub * lane + out_offset(ub));
      } else {
        pts.push_back(center + ua * (ring_radius_ + lane) + in_offset(ua));
        // Counter-clockwise circulation on the ring centerline.
        const double eps = std::asin(std::min(1.0, offset / ring_radius_));
        const double start = std::atan2(ua.y, ua.x) + eps;
        double stop = std::atan2(ub.y, ub.x) - eps;
        while (stop <= start) stop += 2.0 * std::numbers::pi;
        const int steps = std::max(2, static_cast<int>(std::ceil((stop - start) / (std::numbers::pi / 18))));
        for (int k = 0; k <= steps; ++k) {
          const double th = start + (stop - start) * k / steps;
          pts.push_back(center + Vec2{std::cos(th), std::sin(th)} * ring_radius_);
        }
        pts.push_back(center + ub * (ring_radius_ + lane) + out_offset(ub));
      }
      pts.push_back(center + ub * far + out_offset(ub));
      routes_.emplace_back(std::move(pts));
      entry_.push_back(static_cast<int>(a));
    }
  }
}

bool RoadNetwork::on_road(Vec2 p) const {
  for (const auto& s : segments_)
    if (point_segment_distance(p, s.a, s.b) <= s.half_width) return true;
  if (ring_radius_ > 0 && std::abs(distance(p, ring_center_) - ring_radius_) <= ring_half_width_)
    return true;
  return false;
}

// --- collision oracle -------------------------------------------------------------

std::optional<std::int64_t> detect_collision(std::span<const Trajectory> trajectories,
                                             double threshold) {
  if (trajectories.size() < 2) throw DomainError("detect_collision needs at least two vehicles");
  std::size_t frames = std::numeric_limits<std::size_t>::max();
  for (const auto& t : trajectories) frames = std::min(frames, t.size());
  for (std::size_t k = 0; k < frames; ++k)
    for (std::size_t i = 0; i < trajectories.size(); ++i)
      for (std::size_t j = i + 1; j < trajectories.size(); ++j)
        if (distance(trajectories[i][k].pos, trajectories[j][k].pos) < threshold)
          return static_cast<std::int64_t>(k);
  return std::nullopt;
}

double min_pair_distance(std::span<const Trajectory> trajectories) {
  double best = std::numeric_limits<double>::infinity();
  std::size_t frames = std::numeric_limits<std::size_t>::max();
  for (const auto& t : trajectories) frames = std::min(frames, t.size());
  for (std::size_t k = 0; k < frames; ++k)
    for (std::size_t i = 0; i < trajectories.size(); ++i)
      for (std::size_t j = i + 1; j < trajectories.size(); ++j)
        best = std::min(best, distance(trajectories[i][k].pos, trajectories[j][k].pos));
  return best;
}

// --- rasterization ----------------------------------------------------------------

std::int64_t BitMask::popcount() const {
  return std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; });
}

RasterResult rasterize(const WorldSpec& world, Layout layout,
                       std::span<const Trajectory> trajectories, const RenderSpec& render) {
  const auto h = render.height_px, w = render.width_px, ch = render.channels;
  if (h < 1 || w < 1 || ch < 1) throw DomainError("rasterize: empty render size");
  const double half = world.extent_m / 2.0;
  const double px_w = world.extent_m / static_cast<double>(w);
  const double px_h = world.extent_m / static_cast<double>(h);
  auto pixel_center = [&](std::int64_t r, std::int64_t c) {
    return Vec2{(static_cast<double>(c) + 0.5) * px_w - half,
                half - (static_cast<double>(r) + 0.5) * px_h};
  };

  const RoadNetwork roads(world, layout);
  RasterResult out;
  out.road_mask = {h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h * w), 0)};
  Frame base(h, w, ch, kBackgroundLevel);
  for (std::int64_t r = 0; r < h; ++r)
    for (std::int64_t c = 0; c < w; ++c)
      if (roads.on_road(pixel_center(r, c))) {
        out.road_mask.bits[static_cast<std::size_t>(r * w + c)] = 1;
        for (std::int64_t k = 0; k < ch; ++k) base.at(r, c, k) = kRoadLevel;
      }

  std::size_t frames = trajectories.empty() ? 0 : std::numeric_limits<std::size_t>::max();
  for (const auto& t : trajectories) frames = std::min(frames, t.size());

  for (std::size_t k = 0; k < frames; ++k) {
    Frame f = base;
    std::vector<Box> boxes;
    for (const auto& traj : trajectories) {
      const auto& v = traj[k];
      const Vec2 fwd = unit(v.vel);
      const Vec2 side{-fwd.y, fwd.x};
      const double reach = 0.5 * std::hypot(v.length, v.width);
      // Candidate pixel window around the footprint, clipped to the frame.
      const auto c0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((v.pos.x - reach + half) / px_w)));
      const auto c1 = std::min<std::int64_t>(w - 1, static_cast<std::int64_t>(std::floor((v.pos.x + reach + half) / px_w)));
      const auto r0 = std::max<std::int64_t>(0, static_cast<std::int64_t>(std::floor((half - v.pos.y - reach) / px_h)));
      const auto r1 = std::min<std::int64_t>(h - 1, static_cast<std::int64_t>(std::floor((half - v.pos.y + reach) / px_h)));
      Box box{w, h, -1, -1};
      for (std::int64_t r = r0; r <= r1; ++r)
        for (std::int64_t c = c0; c <= c1; ++c) {
          const Vec2 d = pixel_center(r, c) - v.pos;
          if (std::abs(dot2(d, fwd)) <= v.length / 2 && std::abs(dot2(d, side)) <= v.width / 2) {
            for (std::int64_t kk = 0; kk < ch; ++kk) f.at(r, c, kk) = kVehicleLevel;
            box.x0 = std::min(box.x0, c);
            box.x1 = std::max(box.x1, c);
            box.y0 = std::min(box.y0, r);
            box.y1 = std::max(box.y1, r);
          }
        }
      if (box.x1 >= 0) boxes.push_back(box);
    }
    out.frames.push_back(std::move(f));
    out.boxes.push_back(std::move(boxes));
  }
  return out;
}

// --- scenario generation ----------------------------------------------------------

namespace {

struct Plan {
  const Path* path;
  double speed;
  double start;  // arc length at t = 0
};

std::vector<Trajectory> simulate(const std::vector<Plan>& plans, std::int64_t frames, double fps,
                                 const WorldSpec& world) {
  std::vector<Trajectory> out;
  for (const auto& p : plans) {
    Trajectory t;
    for (std::int64_t k = 0; k < frames; ++k) {
      const double s = p.start + p.speed * static_cast<double>(k) / fps;
      t.push_back({p.path->at(s), p.path->heading(s) * p.speed, world.vehicle_length_m,
                   world.vehicle_width_m});
    }
    out.push_back(std::move(t));
  }
  return out;
}

struct RoutePair {
  std::size_t a;
  std::size_t b;
  std::optional<std::pair<double, double>> crossing;
};

RoutePair pick_routes(const RoadNetwork& roads, Rng& rng, bool need_crossing) {
  const auto& routes = roads.routes();
  const auto a = static_cast<std::size_t>(rng.below(routes.size()));
  std::vector<std::size_t> others;
  for (std::size_t j = 0; j < routes.size(); ++j)
    if (roads.route_entry()[j] != roads.route_entry()[a]) others.push_back(j);
  const auto b = others[static_cast<std::size_t>(rng.below(others.size()))];
  RoutePair pair{a, b, first_intersection(routes[a], routes[b])};
  if (need_crossing && !pair.crossing) return {a, b, std::nullopt};
  return pair;
}

}  // namespace

ScenarioClip generate_scenario(const WorldSpec& world, Label kind, std::uint64_t seed,
                               const RenderSpec& render) {
  const RoadNetwork roads(world, world.layout);
  const auto& routes = roads.routes();
  const double fps = kDefaultFps;
  const double safe_gap = world.safe_separation_m;
  constexpr int kAttempts = 1000;
  constexpr std::int64_t kMinFrames = 24;

  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(attempt)));
    const double v1 = rng.uniform(0.45, 1.0) * world.max_speed_mps;
    const double v2 = rng.uniform(0.45, 1.0) * world.max_speed_mps;
    std::vector<Trajectory> trajs;
    std::optional<std::int64_t> collision;

    if (kind == Label::COLLISION) {
      const auto pair = pick_routes(roads, rng, true);
      if (!pair.crossing) continue;
      const double t_meet = rng.uniform(1.8, 4.0);
      const double skew = rng.uniform(-0.08, 0.08);
      const std::vector<Plan> plans{
          {&routes[pair.a], v1, pair.crossing->first - v1 * t_meet},
          {&routes[pair.b], v2, pair.crossing->second - v2 * (t_meet + skew)}};
      const auto horizon = static_cast<std::int64_t>(std::ceil((t_meet + 0.6) * fps));
      trajs = simulate(plans, horizon, fps, world);
      collision = detect_collision(trajs, world.collision_dist_m);
      if (!collision || *collision < kMinFrames) continue;
      for (auto& t : trajs) t.resize(static_cast<std::size_t>(*collision + 1));
    } else {
      const bool crossing = rng.uniform() < 0.7;
      const auto pair = pick_routes(roads, rng, crossing);
      if (crossing && !pair.crossing) continue;
      const auto frames = static_cast<std::int64_t>(36 + rng.below(45));
      double t1, t2;
      if (pair.crossing) {
        t1 = rng.uniform(0.8, 3.5);
        const double lag = rng.uniform(2.5, 4.5);
        t2 = rng.uniform() < 0.5 ? t1 + lag : t1 - lag;
      } else {
        t1 = rng.uniform(0.5, 4.0);
        t2 = rng.uniform(0.5, 4.0);
      }
      // Without a crossing, time both vehicles relative to mid-route.
      const double s1 = pair.crossing ? pair.crossing->first : routes[pair.a].length() / 2;
      const double s2 = pair.crossing ? pair.crossing->second : routes[pair.b].length() / 2;
      const std::vector<Plan> plans{{&routes[pair.a], v1, s1 - v1 * t1},
                                    {&routes[pair.b], v2, s2 - v2 * t2}};
      trajs = simulate(plans, frames, fps, world);
      if (min_pair_distance(trajs) < safe_gap) continue;
    }

    auto raster = rasterize(world, world.layout, trajs, render);
    ScenarioClip clip;
    clip.frames = std::move(raster.frames);
    clip.road_mask = std::move(raster.road_mask);
    clip.boxes = std::move(raster.boxes);
    clip.trajectories = std::move(trajs);
    clip.label = kind;
    clip.collision_frame = collision;
    clip.fps = fps;
    clip.seed = seed;
    clip.layout = world.layout;
    return clip;
  }
  throw std::runtime_error("generate_scenario: no feasible " + std::string(to_string(kind)) +
                           " scenario for seed " + std::to_string(seed) + " after " + std::to_string(kAttempts) + " attempts");
}

// --- post-processing --------------------------------------------------------------

namespace {

void check_mask(const Frame& frame, const BitMask& mask) {
  if (frame.height != mask.height || frame.width != mask.width)
    throw DomainError("frame and road mask shapes differ");
}

bool in_any(std::span<const Box> boxes, std::int64_t r, std::int64_t c) {
  return std::any_of(boxes.begin(), boxes.end(), [&](const Box& b) { return b.contains(r, c); });
}

std::uint8_t scale_pixel(std::uint8_t v, double gain) {
  return static_cast<std::uint8_t>(std::clamp(std::round(v * gain), 0.0, 255.0));
}

}  // namespace

Frame apply_binary_mask(const Frame& frame, const BitMask& road_mask) {
  check_mask(frame, road_mask);
  Frame out = frame;
  for (std::int64_t r = 0; r < frame.height; ++r)
    for (std::int64_t c = 0; c < frame.width; ++c)
      if (!road_mask.at(r, c))
        for (std::int64_t k = 0; k < frame.channels; ++k) out.at(r, c, k) = 0;
  return out;
}

Frame apply_heatmap(const Frame& frame, const BitMask& road_mask, std::span<const Box> boxes,
                    const HeatmapGains& gains) {
  check_mask(frame, road_mask);
  if (gains.vehicle < 0 || gains.road < 0 || gains.background < 0)
    throw DomainError("heatmap gains must be non-negative");
  Frame out = frame;
  for (std::int64_t r = 0; r < frame.height; ++r)
    for (std::int64_t c = 0; c < frame.width; ++c) {
      const double g = in_any(boxes, r, c) ? gains.vehicle
                       : road_mask.at(r, c) ? gains.road
                                            : gains.background;
      for (std::int64_t k = 0; k < frame.channels; ++k) out.at(r, c, k) = scale_pixel(frame.at(r, c, k), g);
    }
  return out;
}

Frame apply_hybrid(const Frame& frame, const BitMask& road_mask, std::span<const Box> boxes,
                   double gain_vehicle) {
  return apply_binary_mask(apply_heatmap(frame, road_mask, boxes, {gain_vehicle, 1.0, 0.0}), road_mask);
}

ScenarioClip post_process(const ScenarioClip& clip, PostProcess post, const HeatmapGains& gains) {
  ScenarioClip out = clip;
  out.post = post;
  if (post == PostProcess::NONE) return out;
  for (std::size_t i = 0; i < out.frames.size(); ++i) {
    const auto& boxes = clip.boxes[i];
    switch (post) {
      case PostProcess::MASK:
        out.frames[i] = apply_binary_mask(clip.frames[i], clip.road_mask);
        break;
      case PostProcess::HEATMAP:
        out.frames[i] = apply_heatmap(clip.frames[i], clip.road_mask, boxes, gains);
        break;
      case PostProcess::HYBRID:
        out.frames[i] = apply_hybrid(clip.frames[i], clip.road_mask, boxes, gains.vehicle);
        break;
      case PostProcess::NONE:
        break;
    }
  }
  return out;
}

// --- clip protocol ----------------------------------------------------------------

namespace {

template <typename T>
void drop_front(std::vector<T>& v, std::size_t n) {
  v.erase(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(std::min(n, v.size())));
}

template <typename T>
void drop_back(std::vector<T>& v, std::size_t n) {
  v.resize(v.size() - std::min(n, v.size()));
}

}  // namespace

ScenarioClip cap_length(const ScenarioClip& clip, std::int64_t max_frames) {
  if (max_frames < 1) throw DomainError("cap_length: max_frames must be >= 1");
  ScenarioClip out = clip;
  if (clip.length() <= max_frames) return out;
  const auto drop = static_cast<std::size_t>(clip.length() - max_frames);
  drop_front(out.frames, drop);
  drop_front(out.boxes, drop);
  for (auto& t : out.trajectories) drop_front(t, drop);
  if (out.collision_frame) *out.collision_frame -= static_cast<std::int64_t>(drop);
  return out;
}

ScenarioClip frame_gap_trim(const ScenarioClip& clip, std::int64_t gap) {
  if (clip.label != Label::COLLISION) throw DomainError("frame_gap_trim applies to collision clips");
  if (gap < 0 || gap >= clip.length())
    throw DomainError("frame_gap_trim: gap " + std::to_string(gap) + " must be below clip length " +
                      std::to_string(clip.length()));
  ScenarioClip out = clip;
  const auto n = static_cast<std::size_t>(gap);
  drop_back(out.frames, n);
  drop_back(out.boxes, n);
  for (auto& t : out.trajectories) drop_back(t, n);
  out.trimmed_gap += gap;
  return out;
}

// --- datasets ---------------------------------------------------------------------

std::vector<ScenarioClip> generate_clips(const WorldSpec& world, const DatasetOptions& opts,
                                         std::uint64_t seed) {
  if (opts.n_safe < 1 || opts.n_collision < 1) throw DomainError("dataset counts must be >= 1");
  constexpr Layout kLayouts[] = {Layout::FOUR_WAY, Layout::THREE_WAY, Layout::SIDE_ROAD,
                                 Layout::ROUNDABOUT};
  std::vector<ScenarioClip> clips;
  const auto total = opts.n_safe + opts.n_collision;
  for (std::int64_t id = 0; id < total; ++id) {
    WorldSpec w = world;
    if (opts.mixed_layouts) w.layout = kLayouts[id % 4];
    const auto kind = id < opts.n_collision ? Label::COLLISION : Label::SAFE;
    auto clip = generate_scenario(w, kind, mix_seed(seed, static_cast<std::uint64_t>(id)), opts.render);
    clip.id = id;
    clips.push_back(std::move(clip));
  }
  return clips;
}

ScenarioClip prepare_clip(const ScenarioClip& raw, const DatasetOptions& opts) {
  auto clip = cap_length(raw, opts.max_frames);
  if (clip.label == Label::COLLISION && opts.gap > 0) clip = frame_gap_trim(clip, opts.gap);
  return post_process(clip, opts.post, opts.gains);
}

Dataset split_dataset(std::vector<ScenarioClip> clips, double train_fraction, std::uint64_t seed) {
  Dataset ds;
  for (const Label label : {Label::SAFE, Label::COLLISION}) {
    std::vector<ScenarioClip*> group;
    for (auto& c : clips)
      if (c.label == label) group.push_back(&c);
    std::sort(group.begin(), group.end(), [](auto* a, auto* b) { return a->id < b->id; });
    Rng rng(mix_seed(seed, 1000 + static_cast<std::uint64_t>(label)));
    rng.shuffle(group.begin(), group.end());
    const auto n_train = static_cast<std::size_t>(
        std::clamp(std::llround(train_fraction * static_cast<double>(group.size())), 0LL,
                   static_cast<long long>(group.size())));
    for (std::size_t i = 0; i < group.size(); ++i)
      (i < n_train ? ds.train : ds.test).push_back(std::move(*group[i]));
  }
  auto by_id = [](const ScenarioClip& a, const ScenarioClip& b) { return a.id < b.id; };
  std::sort(ds.train.begin(), ds.train.end(), by_id);
  std::sort(ds.test.begin(), ds.test.end(), by_id);
  return ds;
}

Dataset build_dataset(const WorldSpec& world, const DatasetOptions& opts, std::uint64_t seed) {
  auto raw = generate_clips(world, opts, seed);
  std::vector<ScenarioClip> prepared;
  prepared.reserve(raw.size());
  for (const auto& c : raw) prepared.push_back(prepare_clip(c, opts));
  return split_dataset(std::move(prepared), opts.train_fraction, seed);
}

DatasetOptions dataset_options(const ExperimentConfig& cfg) {
  DatasetOptions o;
  o.n_safe = cfg.dataset.n_safe;
  o.n_collision = cfg.dataset.n_collision;
  o.post = cfg.dataset.post;
  o.gap = cfg.dataset.gap;
  o.train_fraction = cfg.dataset.train_fraction;
  o.max_frames = cfg.sim.max_frames;
  o.gains = {cfg.dataset.gain_vehicle, cfg.dataset.gain_road, cfg.dataset.gain_background};
  o.render = {cfg.sim.height_px, cfg.sim.width_px, cfg.sim.channels};
  return o;
}

}  // namespace semv2x
