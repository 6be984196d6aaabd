#include "semv2x/config.hpp"

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "semv2x/errors.hpp"

namespace semv2x {

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
  out.erase(std::remove(out.begin(), out.end(), '-'), out.end());
  return out;
}

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::pair<E, std::string_view> (&table)[N],
             std::string_view what) {
  const auto key = upper(s);
  for (const auto& [value, name] : table) {
    std::string normalized = upper(name);
    if (normalized == key) return value;
  }
  throw std::invalid_argument("unknown " + std::string(what) + " '" + std::string(s) + "'");
}

constexpr std::pair<QuantFormat, std::string_view> kQuant[] = {
    {QuantFormat::FP32, "fp32"}, {QuantFormat::FP16, "fp16"}, {QuantFormat::INT8, "int8"}};
constexpr std::pair<Modulation, std::string_view> kModulation[] = {
    {Modulation::BPSK, "BPSK"}, {Modulation::QAM16, "QAM16"}};
constexpr std::pair<Layout, std::string_view> kLayout[] = {{Layout::FOUR_WAY, "four_way"},
                                                           {Layout::THREE_WAY, "three_way"},
                                                           {Layout::SIDE_ROAD, "side_road"},
                                                           {Layout::ROUNDABOUT, "roundabout"}};
constexpr std::pair<PostProcess, std::string_view> kPost[] = {{PostProcess::NONE, "none"},
                                                              {PostProcess::HEATMAP, "heatmap"},
                                                              {PostProcess::MASK, "mask"},
                                                              {PostProcess::HYBRID, "hybrid"}};
constexpr std::pair<Activation, std::string_view> kActivation[] = {{Activation::RELU, "relu"},
                                                                   {Activation::GELU, "gelu"}};

template <typename E, std::size_t N>
std::string_view enum_name(E v, const std::pair<E, std::string_view> (&table)[N]) {
  for (const auto& [value, name] : table)
    if (value == v) return name;
  return "?";
}

// --- schema -----------------------------------------------------------------

template <typename T>
T scalar(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar())
    throw ConfigError(field + ": expected a scalar value", node.Mark().line);
  try {
    return node.as<T>();
  } catch (const YAML::BadConversion&) {
    throw ConfigError(field + ": cannot convert '" + node.Scalar() + "'", node.Mark().line);
  }
}

template <typename E, std::size_t N>
E enum_scalar(const YAML::Node& node, const std::string& field,
              const std::pair<E, std::string_view> (&table)[N]) {
  const auto text = scalar<std::string>(node, field);
  try {
    return parse_enum(text, table, field);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), node.Mark().line);
  }
}

// Bidirectional field binding: read from YAML into the config, emit from it.
struct Field {
  std::string key;
  std::function<void(const YAML::Node&, ExperimentConfig&, const std::string&)> read;
  std::function<void(YAML::Emitter&, const ExperimentConfig&)> write;
};

template <typename T, typename Get>
Field num(std::string key, Get get) {
  return {key,
          [get](const YAML::Node& n, ExperimentConfig& c, const std::string& f) {
            get(c) = scalar<T>(n, f);
          },
          [get](YAML::Emitter& out, const ExperimentConfig& c) {
            out << get(c);
          }};
}

template <typename E, std::size_t N, typename Get>
Field enumeration(std::string key, Get get, const std::pair<E, std::string_view> (&table)[N]) {
  return {key,
          [get, &table](const YAML::Node& n, ExperimentConfig& c, const std::string& f) {
            get(c) = enum_scalar(n, f, table);
          },
          [get, &table](YAML::Emitter& out, const ExperimentConfig& c) {
            out << std::string(enum_name(get(c), table));
          }};
}

#define SEMV2X_REF(expr) [](auto& c) -> auto& { return c.expr; }

using Schema = std::vector<std::pair<std::string, std::vector<Field>>>;

const Schema& schema() {
  static const Schema s = {
      {"clip",
       {num<std::int64_t>("n_frames", SEMV2X_REF(clip.n_frames)),
        num<std::int64_t>("height_px", SEMV2X_REF(clip.height_px)),
        num<std::int64_t>("width_px", SEMV2X_REF(clip.width_px)),
        num<std::int64_t>("channels", SEMV2X_REF(clip.channels)),
        num<std::int64_t>("orig_height_px", SEMV2X_REF(clip.orig_height_px)),
        num<std::int64_t>("orig_width_px", SEMV2X_REF(clip.orig_width_px)),
        num<double>("fps", SEMV2X_REF(clip.fps))}},
      {"tokenizer",
       {num<std::int64_t>("patch_px", SEMV2X_REF(tokenizer.patch_px)),
        num<std::int64_t>("tubelet_frames", SEMV2X_REF(tokenizer.tubelet_frames))}},
      {"encoder",
       {num<std::int64_t>("embed_dim", SEMV2X_REF(encoder.embed_dim)),
        num<std::int64_t>("depth", SEMV2X_REF(encoder.depth)),
        num<double>("mlp_ratio", SEMV2X_REF(encoder.mlp_ratio))}},
      {"probe",
       {num<std::int64_t>("n_queries", SEMV2X_REF(probe.n_queries)),
        num<std::int64_t>("n_classes", SEMV2X_REF(probe.n_classes)),
        num<std::int64_t>("hidden_dim", SEMV2X_REF(probe.hidden_dim)),
        enumeration("activation", SEMV2X_REF(probe.activation), kActivation)}},
      {"link",
       {num<double>("bandwidth_hz", SEMV2X_REF(link.bandwidth_hz)),
        num<double>("snr_db", SEMV2X_REF(link.snr_db)),
        enumeration("modulation", SEMV2X_REF(link.modulation), kModulation)}},
      {"device",
       {num<double>("throughput_flops", SEMV2X_REF(device.throughput_flops)),
        num<double>("io_latency_s", SEMV2X_REF(device.io_latency_s)),
        num<std::int64_t>("n_views", SEMV2X_REF(device.n_views))}},
      {"world",
       {num<double>("extent_m", SEMV2X_REF(world.extent_m)),
        enumeration("layout", SEMV2X_REF(world.layout), kLayout),
        num<double>("lane_width_m", SEMV2X_REF(world.lane_width_m)),
        num<double>("collision_dist_m", SEMV2X_REF(world.collision_dist_m)),
        num<double>("max_speed_mps", SEMV2X_REF(world.max_speed_mps)),
        num<double>("safe_separation_m", SEMV2X_REF(world.safe_separation_m)),
        num<double>("vehicle_length_m", SEMV2X_REF(world.vehicle_length_m)),
        num<double>("vehicle_width_m", SEMV2X_REF(world.vehicle_width_m))}},
      {"sim",
       {num<std::int64_t>("height_px", SEMV2X_REF(sim.height_px)),
        num<std::int64_t>("width_px", SEMV2X_REF(sim.width_px)),
        num<std::int64_t>("channels", SEMV2X_REF(sim.channels)),
        num<std::int64_t>("patch_px", SEMV2X_REF(sim.patch_px)),
        num<std::int64_t>("tubelet_frames", SEMV2X_REF(sim.tubelet_frames)),
        num<std::int64_t>("embed_dim", SEMV2X_REF(sim.embed_dim)),
        num<std::int64_t>("max_frames", SEMV2X_REF(sim.max_frames)),
        num<std::uint64_t>("encoder_seed", SEMV2X_REF(sim.encoder_seed))}},
      {"dataset",
       {num<std::int64_t>("n_safe", SEMV2X_REF(dataset.n_safe)),
        num<std::int64_t>("n_collision", SEMV2X_REF(dataset.n_collision)),
        enumeration("post", SEMV2X_REF(dataset.post), kPost),
        num<std::int64_t>("gap", SEMV2X_REF(dataset.gap)),
        num<double>("train_fraction", SEMV2X_REF(dataset.train_fraction)),
        num<double>("gain_vehicle", SEMV2X_REF(dataset.gain_vehicle)),
        num<double>("gain_road", SEMV2X_REF(dataset.gain_road)),
        num<double>("gain_background", SEMV2X_REF(dataset.gain_background))}},
      {"train",
       {num<std::int64_t>("epochs", SEMV2X_REF(train.epochs)),
        num<double>("lr", SEMV2X_REF(train.lr)),
        num<std::int64_t>("batch", SEMV2X_REF(train.batch)),
        num<std::uint64_t>("seed", SEMV2X_REF(train.seed)),
        num<double>("weight_decay", SEMV2X_REF(train.weight_decay))}},
  };
  return s;
}

const std::vector<Field>& top_level_fields() {
  static const std::vector<Field> f = {
      enumeration("quant", SEMV2X_REF(quant), kQuant),
      num<bool>("probe_at_vehicle", SEMV2X_REF(probe_at_vehicle)),
      num<std::uint64_t>("seed", SEMV2X_REF(seed)),
  };
  return f;
}

#undef SEMV2X_REF

const Field* find_field(const std::vector<Field>& fields, const std::string& key) {
  for (const auto& f : fields)
    if (f.key == key) return &f;
  return nullptr;
}

void apply(const YAML::Node& root, ExperimentConfig& cfg) {
  if (!root.IsDefined() || root.IsNull()) return;
  if (!root.IsMap()) throw ConfigError("top level must be a mapping", root.Mark().line);

  for (const auto& entry : root) {
    const auto key = entry.first.as<std::string>();
    const int line = entry.first.Mark().line;
    if (const auto* f = find_field(top_level_fields(), key)) {
      f->read(entry.second, cfg, key);
      continue;
    }
    const auto section = std::find_if(schema().begin(), schema().end(),
                                      [&](const auto& s) { return s.first == key; });
    if (section == schema().end()) throw ConfigError("unknown key '" + key + "'", line);
    const auto& body = entry.second;
    if (body.IsNull()) continue;
    if (!body.IsMap()) throw ConfigError("section '" + key + "' must be a mapping", line);
    for (const auto& item : body) {
      const auto name = item.first.as<std::string>();
      const auto* f = find_field(section->second, name);
      if (f == nullptr)
        throw ConfigError("unknown key '" + key + "." + name + "'", item.first.Mark().line);
      f->read(item.second, cfg, key + "." + name);
    }
  }
}

bool divides(std::int64_t d, std::int64_t n) { return d > 0 && n % d == 0; }

}  // namespace

std::string_view to_string(QuantFormat f) { return enum_name(f, kQuant); }
std::string_view to_string(Modulation m) { return enum_name(m, kModulation); }
std::string_view to_string(Layout l) { return enum_name(l, kLayout); }
std::string_view to_string(PostProcess p) { return enum_name(p, kPost); }
std::string_view to_string(Activation a) { return enum_name(a, kActivation); }

QuantFormat parse_quant_format(std::string_view s) { return parse_enum(s, kQuant, "format"); }
Modulation parse_modulation(std::string_view s) { return parse_enum(s, kModulation, "modulation"); }
Layout parse_layout(std::string_view s) { return parse_enum(s, kLayout, "layout"); }
PostProcess parse_post_process(std::string_view s) {
  return parse_enum(s, kPost, "post-processing");
}
Activation parse_activation(std::string_view s) { return parse_enum(s, kActivation, "activation"); }

std::vector<LinkSpec> standard_links(double bandwidth_hz) {
  return {{bandwidth_hz, 12.0, Modulation::BPSK}, {bandwidth_hz, 22.0, Modulation::QAM16}};
}

std::vector<Violation> validate_config(const ExperimentConfig& cfg) {
  std::vector<Violation> out;
  auto check = [&](bool ok, const char* field, const char* message) {
    if (!ok) out.push_back({field, message});
  };

  const auto& clip = cfg.clip;
  check(clip.n_frames >= 1, "clip.n_frames", "must be >= 1");
  check(clip.n_frames <= 64, "clip.n_frames", "must be <= 64 (clips are capped to 64 frames)");
  check(clip.height_px >= 1, "clip.height_px", "must be >= 1");
  check(clip.width_px >= 1, "clip.width_px", "must be >= 1");
  check(clip.channels == 1 || clip.channels == 3, "clip.channels", "must be 1 or 3");
  check(clip.orig_height_px >= 1, "clip.orig_height_px", "must be >= 1");
  check(clip.orig_width_px >= 1, "clip.orig_width_px", "must be >= 1");
  check(clip.fps > 0, "clip.fps", "must be > 0");

  const auto& tok = cfg.tokenizer;
  check(tok.patch_px >= 1, "tokenizer.patch_px", "must be >= 1");
  check(tok.tubelet_frames >= 1, "tokenizer.tubelet_frames", "must be >= 1");
  check(divides(tok.patch_px, clip.height_px), "tokenizer.patch_px", "patch must divide height");
  check(divides(tok.patch_px, clip.width_px), "tokenizer.patch_px", "patch must divide width");
  check(divides(tok.tubelet_frames, clip.n_frames), "tokenizer.tubelet_frames",
        "tubelet must divide n_frames");

  check(cfg.encoder.embed_dim >= 1, "encoder.embed_dim", "must be >= 1");
  check(cfg.encoder.depth >= 1, "encoder.depth", "must be >= 1");
  check(cfg.encoder.mlp_ratio > 0, "encoder.mlp_ratio", "must be > 0");

  check(cfg.probe.n_queries == 1, "probe.n_queries", "Q must equal 1");
  check(cfg.probe.n_classes >= 2, "probe.n_classes", "must be >= 2");
  check(cfg.probe.hidden_dim >= 0, "probe.hidden_dim", "must be >= 0");

  check(cfg.link.bandwidth_hz > 0, "link.bandwidth_hz", "must be > 0");
  check(std::isfinite(cfg.link.snr_db), "link.snr_db", "must be finite");

  check(cfg.device.throughput_flops > 0, "device.throughput_flops", "must be > 0");
  check(cfg.device.io_latency_s >= 0, "device.io_latency_s", "must be >= 0");
  check(cfg.device.n_views >= 1, "device.n_views", "must be >= 1");

  const auto& w = cfg.world;
  check(w.extent_m > 0, "world.extent_m", "must be > 0");
  check(w.lane_width_m > 0, "world.lane_width_m", "must be > 0");
  check(w.collision_dist_m > 0, "world.collision_dist_m", "must be > 0");
  check(w.max_speed_mps > 0, "world.max_speed_mps", "must be > 0");
  check(w.safe_separation_m >= w.collision_dist_m, "world.safe_separation_m", "must be >= collision_dist_m");
  check(w.vehicle_length_m > 0 && w.vehicle_width_m > 0, "world.vehicle_length_m",
        "vehicle size must be positive");

  const auto& sim = cfg.sim;
  check(sim.channels == 1 || sim.channels == 3, "sim.channels", "must be 1 or 3");
  check(divides(sim.patch_px, sim.height_px), "sim.patch_px", "patch must divide height");
  check(divides(sim.patch_px, sim.width_px), "sim.patch_px", "patch must divide width");
  check(sim.tubelet_frames >= 1, "sim.tubelet_frames", "must be >= 1");
  check(sim.embed_dim >= 1, "sim.embed_dim", "must be >= 1");
  check(sim.max_frames >= 1 && sim.max_frames <= 64, "sim.max_frames", "must be in [1, 64]");

  const auto& ds = cfg.dataset;
  check(ds.n_safe >= 1, "dataset.n_safe", "must be >= 1");
  check(ds.n_collision >= 1, "dataset.n_collision", "must be >= 1");
  check(ds.gap >= 0, "dataset.gap", "must be >= 0");
  check(ds.gap + sim.tubelet_frames <= sim.max_frames, "dataset.gap",
        "gap leaves no complete tubelet");
  check(ds.train_fraction > 0 && ds.train_fraction < 1, "dataset.train_fraction",
        "must be in (0, 1)");
  check(ds.gain_vehicle >= 0 && ds.gain_road >= 0 && ds.gain_background >= 0,
        "dataset.gain_vehicle", "gains must be >= 0");

  const auto& tr = cfg.train;
  check(tr.epochs >= 0, "train.epochs", "must be >= 0");
  check(tr.lr >= 0, "train.lr", "must be >= 0");
  check(tr.batch >= 1, "train.batch", "must be >= 1");
  check(tr.weight_decay >= 0, "train.weight_decay", "must be >= 0");
  return out;
}

ExperimentConfig parse_config(std::string_view text, const ExperimentConfig& base) {
  YAML::Node root;
  try {
    root = YAML::Load(std::string(text));
  } catch (const YAML::ParserException& e) {
    throw ConfigError(e.msg, e.mark.line);
  }
  ExperimentConfig cfg = base;
  apply(root, cfg);
  if (const auto v = validate_config(cfg); !v.empty())
    throw ValidationError(v.front().field, v.front().message);
  return cfg;
}

ExperimentConfig parse_config(std::string_view text) { return parse_config(text, {}); }

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'", -1);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  for (const auto& f : top_level_fields()) {
    out << YAML::Key << f.key << YAML::Value;
    f.write(out, cfg);
  }
  for (const auto& [section, fields] : schema()) {
    out << YAML::Key << section << YAML::Value << YAML::BeginMap;
    for (const auto& f : fields) {
      out << YAML::Key << f.key << YAML::Value;
      f.write(out, cfg);
    }
    out << YAML::EndMap;
  }
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

std::string config_hash(const ExperimentConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : serialize_config(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace semv2x
