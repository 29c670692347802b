#pragma once

#include "smart/grid.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace smart {

struct PngWindow {
    double lo = 0.0;
    double hi = 1.0;
};

/// 8-bit grey levels for one slice: value * amplify is mapped linearly from
/// [lo, hi] to [0, 255] and clipped.
std::vector<std::uint8_t> window_slice(const RealImage& img, int slice, PngWindow window, double amplify = 1.0);

/// Writes one slice of a real image as an 8-bit grayscale PNG (row y = 0 on top).
void emit_png(const RealImage& img, const std::filesystem::path& path, PngWindow window, double amplify = 1.0,
              int slice = 0);

/// Reads an 8-bit grayscale PNG; width and height are returned through the arguments.
std::vector<std::uint8_t> read_png_gray(const std::filesystem::path& path, int& width, int& height);

} // namespace smart
