#pragma once

// Binary Netpbm I/O (P4 bitmaps, P5 graymaps, P6 pixmaps, maxval 255) and
// on-disk clip directories.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "semv2x/scenario.hpp"

namespace semv2x {

/// P5 for 1-channel frames, P6 for 3-channel frames.
void write_pnm(std::ostream& out, const Frame& frame);
Frame read_pnm(std::istream& in);

/// P4; a set bit (black in viewers) marks a road pixel.
void write_pbm(std::ostream& out, const BitMask& mask);
BitMask read_pbm(std::istream& in);

void save_pnm(const std::filesystem::path& path, const Frame& frame);
Frame load_pnm(const std::filesystem::path& path);

/// Writes frame_NNN.pgm|ppm, road_mask.pbm and manifest.yaml into `dir`.
void save_clip(const std::filesystem::path& dir, const ScenarioClip& clip);

/// Reads what save_clip wrote. Trajectories are not persisted.
ScenarioClip load_clip(const std::filesystem::path& dir);

}  // namespace semv2x
