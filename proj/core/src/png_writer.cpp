#include "smart/png_writer.hpp"

#include "smart/errors.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

namespace smart {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

} // namespace

std::vector<std::uint8_t> window_slice(const RealImage& img, int slice, PngWindow window, double amplify) {
    const Grid& g = img.grid;
    if (slice < 0 || slice >= g.nz) throw DataError("emit_png: slice index out of range");
    if (!(window.hi > window.lo)) throw ConfigError("emit_png: window upper bound must exceed the lower bound");
    std::vector<std::uint8_t> px(static_cast<std::size_t>(g.nx) * static_cast<std::size_t>(g.ny));
    for (int y = 0; y < g.ny; ++y) {
        for (int x = 0; x < g.nx; ++x) {
            const double v = (amplify * img[g.index(x, y, slice)] - window.lo) / (window.hi - window.lo);
            const double c = std::clamp(std::isfinite(v) ? v : 0.0, 0.0, 1.0);
            px[static_cast<std::size_t>(x + g.nx * y)] = static_cast<std::uint8_t>(std::lround(255.0 * c));
        }
    }
    return px;
}

void emit_png(const RealImage& img, const std::filesystem::path& path, PngWindow window, double amplify, int slice) {
    const auto px = window_slice(img, slice, window, amplify);
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("cannot create " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("failed to write " + path.string());
    }
    png_init_io(png, fp.get());
    const int w = img.grid.nx;
    const int h = img.grid.ny;
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h; ++y) {
        png_write_row(png, const_cast<png_bytep>(px.data() + static_cast<std::size_t>(w) * y));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<std::uint8_t> read_png_gray(const std::filesystem::path& path, int& width, int& height) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("failed to read " + path.string());
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);
    if (png_get_color_type(png, info) != PNG_COLOR_TYPE_GRAY || png_get_bit_depth(png, info) != 8) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError(path.string() + " is not an 8-bit grayscale PNG");
    }
    width = static_cast<int>(png_get_image_width(png, info));
    height = static_cast<int>(png_get_image_height(png, info));
    std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
    for (int y = 0; y < height; ++y) png_read_row(png, px.data() + static_cast<std::size_t>(width) * y, nullptr);
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return px;
}

} // namespace smart
