#pragma once

#include "smart/encoding.hpp"
#include "smart/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace smart {

namespace fs = std::filesystem;

/// Sidecar path for a raw file: "<path>.json".
fs::path sidecar_path(const fs::path& raw);

/// Complex series as little-endian float32 (re, im) pairs, x fastest, then y,
/// z and TSL. Sidecar: {dims: [n_tsl, nz, ny, nx], tsl_ms, dtype: "c64le", order}.
void write_series(const fs::path& path, const ImageSeries& x);
ImageSeries read_series(const fs::path& path);

/// K-space with the same encoding; dims [n_tsl, n_coils, nz, ny, nx]. The mask is
/// stored separately.
void write_kspace(const fs::path& path, const KSpaceData& y);
KSpaceData read_kspace(const fs::path& path, const SamplingMask& mask);

/// uint8 0/1 per (voxel, TSL); sidecar {dims, R_requested, R_achieved, seed, pattern, center}.
void write_mask(const fs::path& path, const SamplingMask& mask);
SamplingMask read_mask(const fs::path& path);

/// Real map as float32 with sidecar {dims: [nz, ny, nx], dtype: "f32le", units}.
void write_map(const fs::path& path, const RealImage& map, const std::string& units = "");
RealImage read_map(const fs::path& path);

/// uint16 labels with 65535 for background.
void write_labels(const fs::path& path, const std::vector<int>& labels, const Grid& grid);

void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

} // namespace smart
