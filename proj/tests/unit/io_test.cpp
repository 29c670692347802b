#include "helpers.hpp"

#include <smart/errors.hpp>
#include <smart/io.hpp>
#include <smart/png_writer.hpp>

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <json.hpp>

using namespace smart;
using smart::test::random_matrix;
using smart::test::scratch_dir;

TEST(SeriesIo, RoundTripIsFloat32Exact) {
    std::mt19937_64 rng(1);
    const auto dir = scratch_dir("series");
    const Grid g{7, 5, 3};
    const ImageSeries x(g, {1, 20, 40}, random_matrix(g.voxels(), 3, rng));
    write_series(dir / "x.c64", x);
    EXPECT_EQ(fs::file_size(dir / "x.c64"), static_cast<std::uintmax_t>(g.voxels() * 3 * 8));
    const ImageSeries back = read_series(dir / "x.c64");
    EXPECT_EQ(back.grid(), g);
    EXPECT_EQ(back.tsl_ms(), x.tsl_ms());
    for (Eigen::Index i = 0; i < x.data().size(); ++i) {
        const Complex a = x.data().data()[i];
        const Complex b = back.data().data()[i];
        ASSERT_EQ(b.real(), static_cast<double>(static_cast<float>(a.real())));
        ASSERT_EQ(b.imag(), static_cast<double>(static_cast<float>(a.imag())));
    }
    const auto side = nlohmann::json::parse(read_text(sidecar_path(dir / "x.c64")));
    EXPECT_EQ(side["dims"], nlohmann::json({3, 3, 5, 7}));
    EXPECT_EQ(side["dtype"], "c64le");
}

TEST(SeriesIo, ByteLayoutIsXFastestThenTsl) {
    const auto dir = scratch_dir("layout");
    const Grid g{2, 2, 1};
    CMatrix d(4, 2);
    for (Eigen::Index t = 0; t < 2; ++t) {
        for (Eigen::Index v = 0; v < 4; ++v) d(v, t) = Complex(double(v + 4 * t), -1.0);
    }
    write_series(dir / "l.c64", ImageSeries(g, {1, 2}, d));
    std::ifstream in(dir / "l.c64", std::ios::binary);
    std::vector<float> f(16);
    in.read(reinterpret_cast<char*>(f.data()), 64);
    for (int i = 0; i < 8; ++i) {
        EXPECT_EQ(f[static_cast<std::size_t>(2 * i)], float(i));
        EXPECT_EQ(f[static_cast<std::size_t>(2 * i + 1)], -1.0f);
    }
}

TEST(SeriesIo, TruncatedFileIsADataError) {
    std::mt19937_64 rng(2);
    const auto dir = scratch_dir("trunc");
    const Grid g{4, 4, 1};
    write_series(dir / "x.c64", ImageSeries(g, {1, 2}, random_matrix(16, 2, rng)));
    fs::resize_file(dir / "x.c64", 100);
    EXPECT_THROW(read_series(dir / "x.c64"), DataError);
    EXPECT_THROW(read_series(dir / "missing.c64"), DataError);
    write_text(sidecar_path(dir / "y.c64"), "{\"dims\": [1, 1, 2, 2], \"dtype\": \"f32le\", \"tsl_ms\": [1]}");
    EXPECT_THROW(read_series(dir / "y.c64"), DataError);
}

TEST(MaskIo, RoundTripWithMetadata) {
    const auto dir = scratch_dir("mask");
    const Grid g{16, 12, 1};
    const SamplingMask m = make_mask_1d(g, 3, 3.0, 4, 99);
    write_mask(dir / "m.u8", m);
    const SamplingMask back = read_mask(dir / "m.u8");
    EXPECT_EQ(back.bits, m.bits);
    EXPECT_EQ(back.grid, g);
    EXPECT_EQ(back.seed, 99u);
    EXPECT_EQ(back.pattern, "1d");
    EXPECT_DOUBLE_EQ(back.r_requested, 3.0);
    const auto side = nlohmann::json::parse(read_text(sidecar_path(dir / "m.u8")));
    EXPECT_NEAR(side["R_achieved"].get<double>(), m.r_achieved(), 1e-12);
}

TEST(KSpaceIo, RoundTripMultiCoil) {
    std::mt19937_64 rng(3);
    const auto dir = scratch_dir("kspace");
    KSpaceData y;
    y.grid = {6, 4, 1};
    y.n_coils = 2;
    y.n_tsl = 3;
    y.mask = SamplingMask::full(y.grid, 3);
    y.data = random_matrix(24, 6, rng).cast<std::complex<float>>().cast<Complex>();
    write_kspace(dir / "k.c64", y);
    const KSpaceData back = read_kspace(dir / "k.c64", y.mask);
    EXPECT_EQ(back.n_coils, 2);
    EXPECT_EQ(back.data, y.data);
    EXPECT_THROW(read_kspace(dir / "k.c64", SamplingMask::full({6, 4, 1}, 2)), DataError);
}

TEST(MapIo, RoundTripAndLabels) {
    const auto dir = scratch_dir("map");
    const Grid g{3, 2, 2};
    RealImage m(g);
    for (Eigen::Index v = 0; v < g.voxels(); ++v) m[v] = 0.5 * double(v);
    write_map(dir / "t.f32", m, "ms");
    const RealImage back = read_map(dir / "t.f32");
    EXPECT_EQ(back.data, m.data);
    EXPECT_EQ(nlohmann::json::parse(read_text(sidecar_path(dir / "t.f32")))["units"], "ms");

    write_labels(dir / "l.u16", {0, 3, -1, 2, -1, 1, 0, 0, 0, 0, 0, 0}, g);
    std::ifstream in(dir / "l.u16", std::ios::binary);
    std::vector<std::uint16_t> raw(12);
    in.read(reinterpret_cast<char*>(raw.data()), 24);
    EXPECT_EQ(raw[2], 65535);
    EXPECT_EQ(raw[1], 3);
}

TEST(Png, WindowMapsLinearlyAndClips) {
    const Grid g{4, 1, 1};
    const RealImage img(g, std::vector<double>{-1.0, 0.0, 0.5, 2.0});
    const auto px = window_slice(img, 0, {0.0, 1.0});
    EXPECT_EQ(px, (std::vector<std::uint8_t>{0, 0, 128, 255}));
}

TEST(Png, RoundTripAndAmplifiedRamp) {
    const auto dir = scratch_dir("png");
    const Grid g{32, 8, 1};
    RealImage ramp(g);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 32; ++x) ramp[g.index(x, y)] = x / 310.0;
    }
    emit_png(ramp, dir / "plain.png", {0.0, 1.0});
    emit_png(ramp, dir / "amp.png", {0.0, 1.0}, 10.0);
    int w = 0;
    int h = 0;
    const auto plain = read_png_gray(dir / "plain.png", w, h);
    EXPECT_EQ(w, 32);
    EXPECT_EQ(h, 8);
    const auto amp = read_png_gray(dir / "amp.png", w, h);
    EXPECT_EQ(plain, window_slice(ramp, 0, {0.0, 1.0}));
    for (int x = 0; x < 32; ++x) {
        const double want = std::min(255.0, std::round(255.0 * 10.0 * x / 310.0));
        EXPECT_NEAR(amp[static_cast<std::size_t>(x)], want, 1.0) << x;
        EXPECT_LE(plain[static_cast<std::size_t>(x)], amp[static_cast<std::size_t>(x)]);
    }
}

TEST(Png, SliceOutOfRangeThrows) {
    const auto dir = scratch_dir("png_bad");
    EXPECT_ANY_THROW(emit_png(RealImage({4, 4, 2}), dir / "x.png", {0.0, 1.0}, 1.0, 2));
}
