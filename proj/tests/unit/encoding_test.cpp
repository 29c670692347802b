#include "helpers.hpp"

#include <smart/encoding.hpp>
#include <smart/errors.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

using namespace smart;
using smart::test::inner;
using smart::test::random_matrix;
using smart::test::rel_diff;

namespace {

// Unitary DFT by direct summation over all voxels.
CVector dft_oracle(const CVector& img, const Grid& g) {
    CVector out = CVector::Zero(img.size());
    const double scale = 1.0 / std::sqrt(static_cast<double>(g.voxels()));
    for (int kz = 0; kz < g.nz; ++kz) {
        for (int ky = 0; ky < g.ny; ++ky) {
            for (int kx = 0; kx < g.nx; ++kx) {
                Complex s = 0.0;
                for (int z = 0; z < g.nz; ++z) {
                    for (int y = 0; y < g.ny; ++y) {
                        for (int x = 0; x < g.nx; ++x) {
                            const double phase = -2.0 * std::numbers::pi *
                                                 (double(kx) * x / g.nx + double(ky) * y / g.ny + double(kz) * z / g.nz);
                            s += img[g.index(x, y, z)] * std::polar(1.0, phase);
                        }
                    }
                }
                out[g.index(kx, ky, kz)] = s * scale;
            }
        }
    }
    return out;
}

SamplingMask random_mask(const Grid& g, int n_tsl, std::mt19937_64& rng) {
    SamplingMask m;
    m.grid = g;
    m.n_tsl = n_tsl;
    m.pattern = "random";
    std::bernoulli_distribution keep(0.4);
    m.bits.resize(static_cast<std::size_t>(g.voxels() * n_tsl));
    for (auto& b : m.bits) b = keep(rng) ? 1 : 0;
    return m;
}

CoilSensitivities random_coils(const Grid& g, int n, std::mt19937_64& rng) {
    std::vector<CVector> maps;
    for (int c = 0; c < n; ++c) maps.push_back(random_matrix(g.voxels(), 1, rng));
    return CoilSensitivities(g, maps);
}

} // namespace

TEST(Fft, MatchesDirectSummation) {
    std::mt19937_64 rng(1);
    for (const Grid g : {Grid{5, 4, 1}, Grid{4, 3, 3}}) {
        const CVector img = random_matrix(g.voxels(), 1, rng);
        CVector k = img;
        fft_unitary(k, g);
        EXPECT_LT(rel_diff(k, dft_oracle(img, g)), 1e-12);
        ifft_unitary(k, g);
        EXPECT_LT(rel_diff(k, img), 1e-12);
    }
}

TEST(Forward, FullMaskIsUnitary) {
    std::mt19937_64 rng(2);
    const Grid g{8, 6, 1};
    const ImageSeries x(g, {1, 2, 3}, random_matrix(g.voxels(), 3, rng));
    const auto mask = SamplingMask::full(g, 3);
    const KSpaceData y = forward(x, CoilSensitivities::identity(), mask);
    EXPECT_NEAR(y.data.norm(), x.data().norm(), 1e-12 * x.data().norm());
    const ImageSeries back = adjoint(y, CoilSensitivities::identity(), x.tsl_ms());
    EXPECT_LT(rel_diff(back.data(), x.data()), 1e-12);
}

TEST(Forward, ZeroImageGivesZeroKSpace) {
    const Grid g{6, 6, 1};
    const ImageSeries x(g, {1, 2});
    const KSpaceData y = forward(x, CoilSensitivities::identity(), SamplingMask::full(g, 2));
    EXPECT_EQ(y.data.norm(), 0.0);
    EXPECT_EQ(adjoint(y, CoilSensitivities::identity(), x.tsl_ms()).data().norm(), 0.0);
}

TEST(Forward, DeltaHasFlatSpectrum) {
    const Grid g{6, 5, 1};
    ImageSeries x(g, {1, 2});
    x.data()(g.index(2, 3), 0) = 1.0;
    const KSpaceData y = forward(x, CoilSensitivities::identity(), SamplingMask::full(g, 2));
    const CVector oracle = dft_oracle(x.data().col(0), g);
    const double expected = 1.0 / std::sqrt(static_cast<double>(g.voxels()));
    for (Eigen::Index v = 0; v < g.voxels(); ++v) {
        EXPECT_NEAR(std::abs(y.data(v, 0)), expected, 1e-14);
        EXPECT_NEAR(std::abs(y.data(v, 0) - oracle[v]), 0.0, 1e-14);
    }
}

TEST(Forward, DotProductAdjointness) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Grid g = trial % 2 == 0 ? Grid{7, 6, 1} : Grid{5, 4, 3};
        const int n_tsl = 3;
        const int n_coils = 1 + trial % 3;
        const auto coils = trial % 3 == 0 ? CoilSensitivities::identity() : random_coils(g, n_coils, rng);
        const auto mask = random_mask(g, n_tsl, rng);
        const CMatrix x = random_matrix(g.voxels(), n_tsl, rng);
        const CMatrix y = random_matrix(g.voxels(), coils.n_coils() * n_tsl, rng);
        const CMatrix ex = apply_forward(x, g, coils, mask);
        const CMatrix ehy = apply_adjoint(y, g, coils, mask);
        const double err = std::abs(inner(ex, y) - inner(x, ehy)) / (ex.norm() * y.norm());
        EXPECT_LT(err, 1e-10);
        EXPECT_LT(rel_diff(apply_normal(x, g, coils, mask), apply_adjoint(ex, g, coils, mask)), 1e-12);
    }
}

TEST(Mask1d, FullSamplingAtUnitR) {
    const Grid g{16, 32, 1};
    const auto m = make_mask_1d(g, 3, 1.0, -1, 9);
    EXPECT_EQ(m.sampled_count(), g.voxels() * 3);
}

TEST(Mask1d, LineBudget) {
    const Grid g{4, 384, 1};
    const auto m = make_mask_1d(g, 2, 4.0, 24, 5);
    for (int t = 0; t < 2; ++t) {
        std::set<int> lines;
        for (int y = 0; y < g.ny; ++y) {
            if (m.sampled(g.index(0, y), t)) lines.insert(y);
            // Lines are fully sampled along x.
            for (int x = 1; x < g.nx; ++x) ASSERT_EQ(m.sampled(g.index(x, y), t), m.sampled(g.index(0, y), t));
        }
        EXPECT_EQ(lines.size(), 96u);
        for (int f = -12; f < 12; ++f) EXPECT_TRUE(lines.contains((f + g.ny) % g.ny)) << f;
    }
    EXPECT_NEAR(m.r_achieved(), 4.0, 1e-12);
}

TEST(Mask1d, DeterministicPerSeedAndVariesPerEcho) {
    const Grid g{8, 64, 1};
    const auto a = make_mask_1d(g, 3, 4.0, -1, 42);
    const auto b = make_mask_1d(g, 3, 4.0, -1, 42);
    EXPECT_EQ(a.bits, b.bits);
    const auto per_echo = static_cast<std::ptrdiff_t>(g.voxels());
    EXPECT_FALSE(std::equal(a.bits.begin(), a.bits.begin() + per_echo, a.bits.begin() + per_echo));
}

TEST(Mask1d, InfeasibleCentreThrows) {
    EXPECT_THROW(make_mask_1d(Grid{4, 32, 1}, 1, 8.0, 16, 1), ConfigError);
    EXPECT_THROW(make_mask_1d(Grid{4, 32, 1}, 1, 0.5, -1, 1), ConfigError);
}

TEST(MaskPoisson, FullSamplingAtUnitR) {
    const Grid g{20, 24, 1};
    EXPECT_EQ(make_mask_poisson(g, 2, 1.0, -1, 3).sampled_count(), g.voxels() * 2);
}

TEST(MaskPoisson, AchievedRateOnVolumetricPlane) {
    const auto plane = poisson_disk_plane(216, 86, 6.76, -1, 7);
    const auto sampled = std::count(plane.bits.begin(), plane.bits.end(), std::uint8_t{1});
    const double r = 216.0 * 86.0 / static_cast<double>(sampled);
    EXPECT_GE(r, 6.42);
    EXPECT_LE(r, 7.10);
}

TEST(MaskPoisson, MinimumDistanceRespectsLocalRadius) {
    const auto plane = poisson_disk_plane(64, 48, 4.0, -1, 11);
    std::vector<std::pair<int, int>> pts;
    for (int j = 0; j < plane.n2; ++j) {
        for (int i = 0; i < plane.n1; ++i) {
            const auto c = static_cast<std::size_t>(i + plane.n1 * j);
            if (plane.bits[c] && !plane.centre[c]) pts.emplace_back(i, j);
        }
    }
    ASSERT_GT(pts.size(), 10u);
    for (std::size_t a = 0; a < pts.size(); ++a) {
        for (std::size_t b = a + 1; b < pts.size(); ++b) {
            const double d = std::hypot(double(pts[a].first - pts[b].first), double(pts[a].second - pts[b].second));
            const double floor = std::min(plane.radius_at(pts[a].first, pts[a].second),
                                          plane.radius_at(pts[b].first, pts[b].second));
            ASSERT_GE(d + 1e-12, floor);
        }
    }
}

TEST(MaskPoisson, VolumetricMaskIsConstantAlongReadout) {
    const Grid g{5, 24, 20};
    const auto m = make_mask_poisson(g, 1, 3.0, -1, 2);
    for (int z = 0; z < g.nz; ++z) {
        for (int y = 0; y < g.ny; ++y) {
            for (int x = 1; x < g.nx; ++x) ASSERT_EQ(m.sampled(g.index(x, y, z), 0), m.sampled(g.index(0, y, z), 0));
        }
    }
}

TEST(Noise, InfiniteSnrLeavesInputUnchanged) {
    std::mt19937_64 rng(4);
    const Grid g{6, 6, 1};
    const ImageSeries x(g, {1, 2}, random_matrix(g.voxels(), 2, rng));
    const ImageSeries y = add_noise(x, std::numeric_limits<double>::infinity(), 1);
    EXPECT_EQ(rel_diff(y.data(), x.data()), 0.0);
    EXPECT_THROW(add_noise(x, 0.0, 1), ConfigError);
}

TEST(Noise, StandardDeviationMatchesSnr) {
    const Grid g{128, 128, 1};
    ImageSeries x(g, {1, 2});
    x.data().setConstant(Complex(1.0, 0.0));
    const ImageSeries y = add_noise(x, 50.0, 99);
    const CMatrix d = y.data() - x.data();
    const double sd = std::sqrt(d.squaredNorm() / static_cast<double>(d.size()));
    EXPECT_NEAR(sd, 0.02, 0.05 * 0.02);
}

TEST(Noise, SameSeedSameRealisation) {
    const Grid g{16, 16, 1};
    ImageSeries x(g, {1, 2});
    x.data().setConstant(Complex(1.0, 0.5));
    EXPECT_EQ(add_noise(x, 30, 5).data(), add_noise(x, 30, 5).data());
    EXPECT_NE(add_noise(x, 30, 5).data(), add_noise(x, 30, 6).data());
}

TEST(Noise, KSpaceNoiseOnlyOnSampledEntries) {
    const Grid g{16, 16, 1};
    ImageSeries x(g, {1, 2});
    x.data().setConstant(Complex(1.0, 0.0));
    const auto mask = make_mask_1d(g, 2, 4.0, -1, 3);
    const KSpaceData y = forward(x, CoilSensitivities::identity(), mask);
    const KSpaceData n = add_noise(y, 20.0, 8);
    for (Eigen::Index v = 0; v < g.voxels(); ++v) {
        for (int t = 0; t < 2; ++t) {
            if (!mask.sampled(v, t)) { ASSERT_EQ(n.data(v, t), Complex(0.0, 0.0)); }
        }
    }
}
