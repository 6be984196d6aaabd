#include "semv2x/netpbm.hpp"

#include <yaml-cpp/yaml.h>

#include <cctype>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "semv2x/errors.hpp"

namespace semv2x {

namespace {

// Header tokens are separated by whitespace and may be interleaved with
// '#' comments running to end of line.
std::int64_t read_header_int(std::istream& in) {
  int ch = in.get();
  while (true) {
    if (ch == '#') {
      while (ch != '\n' && ch != EOF) ch = in.get();
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  if (!std::isdigit(ch)) throw FormatError("netpbm: expected a header integer");
  std::int64_t v = 0;
  while (std::isdigit(ch)) {
    v = v * 10 + (ch - '0');
    if (v > (1 << 24)) throw FormatError("netpbm: header value too large");
    ch = in.get();
  }
  // Exactly one whitespace character separates the header from the raster.
  if (!std::isspace(ch)) throw FormatError("netpbm: malformed header");
  return v;
}

std::string read_magic(std::istream& in) {
  char m[2];
  if (!in.read(m, 2)) throw FormatError("netpbm: missing magic number");
  return {m, 2};
}

}  // namespace

void write_pnm(std::ostream& out, const Frame& frame) {
  if (frame.channels != 1 && frame.channels != 3) throw FormatError("netpbm: need 1 or 3 channels");
  out << (frame.channels == 1 ? "P5" : "P6") << '\n' << frame.width << ' ' << frame.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(frame.pixels.data()),
            static_cast<std::streamsize>(frame.pixels.size()));
}

Frame read_pnm(std::istream& in) {
  const auto magic = read_magic(in);
  if (magic != "P5" && magic != "P6") throw FormatError("netpbm: expected P5 or P6, got " + magic);
  const auto w = read_header_int(in), h = read_header_int(in), maxval = read_header_int(in);
  if (maxval != 255) throw FormatError("netpbm: only maxval 255 is supported");
  if (w < 1 || h < 1) throw FormatError("netpbm: empty image");
  Frame f(h, w, magic == "P5" ? 1 : 3);
  if (!in.read(reinterpret_cast<char*>(f.pixels.data()), static_cast<std::streamsize>(f.pixels.size())))
    throw FormatError("netpbm: truncated raster");
  return f;
}

void write_pbm(std::ostream& out, const BitMask& mask) {
  out << "P4\n" << mask.width << ' ' << mask.height << '\n';
  const auto row_bytes = (mask.width + 7) / 8;
  std::vector<char> row(static_cast<std::size_t>(row_bytes));
  for (std::int64_t r = 0; r < mask.height; ++r) {
    std::fill(row.begin(), row.end(), 0);
    for (std::int64_t c = 0; c < mask.width; ++c)
      if (mask.at(r, c)) row[static_cast<std::size_t>(c / 8)] |= static_cast<char>(0x80 >> (c % 8));
    out.write(row.data(), row_bytes);
  }
}

BitMask read_pbm(std::istream& in) {
  const auto magic = read_magic(in);
  if (magic != "P4") throw FormatError("netpbm: expected P4, got " + magic);
  const auto w = read_header_int(in), h = read_header_int(in);
  if (w < 1 || h < 1) throw FormatError("netpbm: empty image");
  BitMask m{h, w, std::vector<std::uint8_t>(static_cast<std::size_t>(h * w), 0)};
  const auto row_bytes = (w + 7) / 8;
  std::vector<unsigned char> row(static_cast<std::size_t>(row_bytes));
  for (std::int64_t r = 0; r < h; ++r) {
    if (!in.read(reinterpret_cast<char*>(row.data()), row_bytes)) throw FormatError("netpbm: truncated raster");
    for (std::int64_t c = 0; c < w; ++c)
      m.bits[static_cast<std::size_t>(r * w + c)] = (row[static_cast<std::size_t>(c / 8)] >> (7 - c % 8)) & 1;
  }
  return m;
}

void save_pnm(const std::filesystem::path& path, const Frame& frame) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  write_pnm(out, frame);
}

Frame load_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path.string() + "'");
  return read_pnm(in);
}

namespace {

std::string frame_name(std::size_t i, std::int64_t channels) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%03zu.%s", i, channels == 1 ? "pgm" : "ppm");
  return buf;
}

}  // namespace

void save_clip(const std::filesystem::path& dir, const ScenarioClip& clip) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < clip.frames.size(); ++i)
    save_pnm(dir / frame_name(i, clip.frames[i].channels), clip.frames[i]);
  {
    std::ofstream out(dir / "road_mask.pbm", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + (dir / "road_mask.pbm").string() + "'");
    write_pbm(out, clip.road_mask);
  }

  YAML::Emitter m;
  m << YAML::BeginMap;
  m << YAML::Key << "id" << YAML::Value << clip.id;
  m << YAML::Key << "label" << YAML::Value << std::string(to_string(clip.label));
  m << YAML::Key << "collision_frame" << YAML::Value;
  if (clip.collision_frame)
    m << *clip.collision_frame;
  else
    m << YAML::Null;
  m << YAML::Key << "trimmed_gap" << YAML::Value << clip.trimmed_gap;
  m << YAML::Key << "fps" << YAML::Value << clip.fps;
  m << YAML::Key << "post" << YAML::Value << std::string(to_string(clip.post));
  m << YAML::Key << "seed" << YAML::Value << clip.seed;
  m << YAML::Key << "layout" << YAML::Value << std::string(to_string(clip.layout));
  m << YAML::Key << "n_frames" << YAML::Value << clip.length();
  m << YAML::Key << "channels" << YAML::Value << (clip.frames.empty() ? 1 : clip.frames.front().channels);
  m << YAML::Key << "boxes" << YAML::Value << YAML::BeginSeq;
  for (const auto& frame_boxes : clip.boxes) {
    m << YAML::Flow << YAML::BeginSeq;
    for (const auto& b : frame_boxes)
      m << YAML::Flow << YAML::BeginSeq << b.x0 << b.y0 << b.x1 << b.y1 << YAML::EndSeq;
    m << YAML::EndSeq;
  }
  m << YAML::EndSeq;
  m << YAML::EndMap;
  std::ofstream out(dir / "manifest.yaml");
  if (!out) throw std::runtime_error("cannot write '" + (dir / "manifest.yaml").string() + "'");
  out << m.c_str() << '\n';
}

ScenarioClip load_clip(const std::filesystem::path& dir) {
  YAML::Node m;
  try {
    m = YAML::LoadFile((dir / "manifest.yaml").string());
  } catch (const YAML::Exception& e) {
    throw FormatError("clip manifest: " + std::string(e.what()));
  }
  ScenarioClip clip;
  try {
    clip.id = m["id"].as<std::int64_t>();
    clip.label = m["label"].as<std::string>() == "collision" ? Label::COLLISION : Label::SAFE;
    if (m["collision_frame"] && !m["collision_frame"].IsNull())
      clip.collision_frame = m["collision_frame"].as<std::int64_t>();
    clip.trimmed_gap = m["trimmed_gap"].as<std::int64_t>();
    clip.fps = m["fps"].as<double>();
    clip.post = parse_post_process(m["post"].as<std::string>());
    clip.seed = m["seed"].as<std::uint64_t>();
    clip.layout = parse_layout(m["layout"].as<std::string>());
    const auto n = m["n_frames"].as<std::int64_t>();
    const auto channels = m["channels"].as<std::int64_t>();
    for (std::int64_t i = 0; i < n; ++i)
      clip.frames.push_back(load_pnm(dir / frame_name(static_cast<std::size_t>(i), channels)));
    for (const auto& frame_boxes : m["boxes"]) {
      std::vector<Box> boxes;
      for (const auto& b : frame_boxes)
        boxes.push_back({b[0].as<std::int64_t>(), b[1].as<std::int64_t>(), b[2].as<std::int64_t>(),
                         b[3].as<std::int64_t>()});
      clip.boxes.push_back(std::move(boxes));
    }
  } catch (const YAML::Exception& e) {
    throw FormatError("clip manifest: " + std::string(e.what()));
  }
  std::ifstream in(dir / "road_mask.pbm", std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + (dir / "road_mask.pbm").string() + "'");
  clip.road_mask = read_pbm(in);
  return clip;
}

}  // namespace semv2x
