#include "helpers.hpp"

#include <smart/errors.hpp>
#include <smart/patching.hpp>

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace smart;
using smart::test::random_matrix;
using smart::test::rel_diff;

namespace {

// Brute-force block matching written from the definition: candidates within
// the search window whose normalised distance is <= lambda_m, ordered by
// (distance, corner), capped at np_max - 1 next to the reference.
std::vector<std::vector<Eigen::Index>> match_oracle(const RealImage& img, const PatchConfig& cfg) {
    const Grid& g = img.grid;
    const int bz = g.is3d() ? cfg.b : 1;
    auto dist = [&](int rx, int ry, int rz, int x, int y, int z) {
        double diff = 0.0;
        double norm = 0.0;
        for (int dz = 0; dz < bz; ++dz) {
            for (int dy = 0; dy < cfg.b; ++dy) {
                for (int dx = 0; dx < cfg.b; ++dx) {
                    const double a = img[g.index(rx + dx, ry + dy, rz + dz)];
                    const double c = img[g.index(x + dx, y + dy, z + dz)];
                    diff += (a - c) * (a - c);
                    norm += c * c;
                }
            }
        }
        if (norm == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
        return diff / norm;
    };
    const auto xs = reference_positions(g.nx, cfg.b, cfg.stride);
    const auto ys = reference_positions(g.ny, cfg.b, cfg.stride);
    const auto zs = g.is3d() ? reference_positions(g.nz, cfg.b, cfg.stride) : std::vector<int>{0};
    const int rz = g.is3d() ? cfg.search_radius : 0;
    std::vector<std::vector<Eigen::Index>> out;
    for (int rzp : zs) {
        for (int ry : ys) {
            for (int rx : xs) {
                std::vector<std::pair<double, Eigen::Index>> cands;
                for (int z = 0; z + bz <= g.nz; ++z) {
                    for (int y = 0; y + cfg.b <= g.ny; ++y) {
                        for (int x = 0; x + cfg.b <= g.nx; ++x) {
                            if (std::abs(x - rx) > cfg.search_radius || std::abs(y - ry) > cfg.search_radius ||
                                std::abs(z - rzp) > rz) {
                                continue;
                            }
                            if (x == rx && y == ry && z == rzp) continue;
                            const double d = dist(rx, ry, rzp, x, y, z);
                            if (d <= cfg.lambda_m) cands.emplace_back(d, g.index(x, y, z));
                        }
                    }
                }
                std::sort(cands.begin(), cands.end());
                std::vector<Eigen::Index> group{g.index(rx, ry, rzp)};
                for (std::size_t i = 0; i < cands.size() && group.size() < static_cast<std::size_t>(cfg.np_max); ++i) {
                    group.push_back(cands[i].second);
                }
                out.push_back(group);
            }
        }
    }
    return out;
}

std::vector<std::vector<Eigen::Index>> corners_of(const PatchGroupIndex& idx) {
    std::vector<std::vector<Eigen::Index>> out;
    for (const auto& g : idx.groups) {
        std::vector<Eigen::Index> c;
        for (const auto& m : g.members) c.push_back(m.corner);
        out.push_back(c);
    }
    return out;
}

// Coverage by explicit scatter of ones.
std::vector<int> coverage_oracle(const PatchGroupIndex& idx) {
    std::vector<int> cov(static_cast<std::size_t>(idx.grid.voxels()), 0);
    for (const auto& g : idx.groups) {
        for (const auto& m : g.members) {
            for (int z = 0; z < idx.extent[2]; ++z) {
                for (int y = 0; y < idx.extent[1]; ++y) {
                    for (int x = 0; x < idx.extent[0]; ++x) ++cov[static_cast<std::size_t>(m.corner + idx.grid.index(x, y, z))];
                }
            }
        }
    }
    return cov;
}

PatchGroupIndex manual_index(Grid grid, std::array<int, 3> extent, std::vector<std::vector<Eigen::Index>> groups) {
    PatchGroupIndex idx;
    idx.grid = grid;
    idx.extent = extent;
    for (auto& g : groups) {
        PatchGroup pg;
        pg.reference = g.front();
        for (auto c : g) pg.members.push_back({c, 0.0});
        idx.groups.push_back(pg);
    }
    return idx;
}

RealImage random_image(Grid g, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.5, 1.5);
    RealImage img(g);
    for (auto& v : img.data) v = u(rng);
    return img;
}

} // namespace

TEST(ReferencePositions, ReachesTheBorder) {
    EXPECT_EQ(reference_positions(10, 3, 3), (std::vector<int>{0, 3, 6, 7}));
    EXPECT_EQ(reference_positions(9, 3, 3), (std::vector<int>{0, 3, 6}));
    EXPECT_EQ(reference_positions(4, 4, 2), (std::vector<int>{0}));
}

TEST(PatchDistance, IdenticalPatchIsZero) {
    std::mt19937_64 rng(1);
    const RealImage img = random_image({12, 12, 1}, rng);
    PatchGroupIndex idx;
    idx.grid = img.grid;
    idx.extent = {3, 3, 1};
    EXPECT_EQ(patch_distance(img, 14, 14, idx.patch_offsets()), 0.0);
}

TEST(BlockMatch, ConstantImageTiesBreakByCorner) {
    const RealImage img({16, 16, 1}, 2.0);
    PatchConfig cfg;
    cfg.b = 4;
    cfg.stride = 4;
    cfg.search_radius = 3;
    cfg.np_max = 5;
    const auto idx = block_match(img, cfg);
    const auto oracle = match_oracle(img, cfg);
    EXPECT_EQ(corners_of(idx), oracle);
    for (const auto& g : idx.groups) {
        for (const auto& m : g.members) EXPECT_EQ(m.distance, 0.0);
        EXPECT_EQ(g.members.size(), 5u);
    }
}

TEST(BlockMatch, TwoClassBlocksNeverMix) {
    // 4x4 blocks alternating between 1 and 3.
    RealImage img({24, 24, 1});
    for (int y = 0; y < 24; ++y) {
        for (int x = 0; x < 24; ++x) img[img.grid.index(x, y)] = ((x / 4 + y / 4) % 2 == 0) ? 1.0 : 3.0;
    }
    PatchConfig cfg;
    cfg.b = 4;
    cfg.stride = 4;
    cfg.search_radius = 8;
    cfg.np_max = 8;
    // Between-class distance for aligned blocks: (3 - 1)^2 / 3^2 = 0.444 or (1 - 3)^2 / 1 = 4.
    cfg.lambda_m = 0.3;
    const auto idx = block_match(img, cfg);
    EXPECT_EQ(corners_of(idx), match_oracle(img, cfg));
    for (const auto& g : idx.groups) {
        const double ref_value = img[g.reference];
        for (const auto& m : g.members) {
            if (m.corner % 4 == 0 && (m.corner / 24) % 4 == 0) { EXPECT_EQ(img[m.corner], ref_value); }
        }
    }
}

TEST(BlockMatch, MatchesBruteForceOnRandomImages) {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 6; ++trial) {
        const Grid g = trial < 4 ? Grid{20, 17, 1} : Grid{9, 8, 7};
        const RealImage img = random_image(g, rng);
        PatchConfig cfg;
        cfg.b = g.is3d() ? 3 : 4;
        cfg.stride = 2 + trial % 2;
        cfg.search_radius = 3 + trial;
        cfg.lambda_m = 0.05 + 0.05 * trial;
        cfg.np_max = 6;
        const auto idx = block_match(img, cfg);
        ASSERT_EQ(corners_of(idx), match_oracle(img, cfg)) << "trial " << trial;
    }
}

TEST(BlockMatch, InvalidConfigThrows) {
    const RealImage img({8, 8, 1}, 1.0);
    PatchConfig cfg;
    cfg.b = 9;
    EXPECT_THROW(block_match(img, cfg), ConfigError);
}

TEST(ExtractTensors, SingleMemberIsThePatchCube) {
    std::mt19937_64 rng(3);
    const Grid g{10, 9, 1};
    const CMatrix x = random_matrix(g.voxels(), 3, rng);
    const auto idx = manual_index(g, {3, 2, 1}, {{g.index(4, 5)}});
    const auto t = extract_tensors(x, idx);
    ASSERT_EQ(t.size(), 1u);
    ASSERT_EQ(t[0].dims(), (Dims3{6, 1, 3}));
    for (int k = 0; k < 3; ++k) {
        for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 3; ++dx) EXPECT_EQ(t[0](dx + 3 * dy, 0, k), x(g.index(4 + dx, 5 + dy), k));
        }
    }
}

TEST(ExtractTensors, RepeatedPatchGivesEqualSlices) {
    std::mt19937_64 rng(4);
    const Grid g{8, 8, 1};
    const CMatrix x = random_matrix(g.voxels(), 2, rng);
    const auto idx = manual_index(g, {3, 3, 1}, {{g.index(1, 1), g.index(1, 1)}});
    const auto t = extract_tensors(x, idx);
    for (int k = 0; k < 2; ++k) {
        for (int p = 0; p < 9; ++p) EXPECT_EQ(t[0](p, 0, k), t[0](p, 1, k));
    }
}

TEST(Aggregate, ReproducesCoveredVoxels) {
    std::mt19937_64 rng(5);
    const Grid g{18, 15, 1};
    const RealImage img = random_image(g, rng);
    PatchConfig cfg;
    cfg.b = 5;
    cfg.stride = 3;
    cfg.search_radius = 4;
    cfg.lambda_m = 0.1;
    const auto idx = block_match(img, cfg);
    const CMatrix x = random_matrix(g.voxels(), 3, rng);
    const CMatrix back = aggregate_patches(extract_tensors(x, idx), idx, 3);
    const auto cov = coverage_counts(idx);
    for (Eigen::Index v = 0; v < g.voxels(); ++v) {
        if (cov[static_cast<std::size_t>(v)] > 0) {
            ASSERT_LT((back.row(v) - x.row(v)).norm(), 1e-12);
        } else {
            ASSERT_EQ(back.row(v).norm(), 0.0);
        }
    }
}

TEST(Aggregate, CornerGroupStaysInsideFootprint) {
    const Grid g{8, 8, 1};
    const auto idx = manual_index(g, {3, 3, 1}, {{0}});
    Tensor3 t({9, 1, 1});
    t.data().setConstant(Complex(2.0, 1.0));
    const CMatrix out = aggregate_patches({t}, idx, 1);
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 8; ++x) {
            const bool inside = x < 3 && y < 3;
            EXPECT_EQ(out(g.index(x, y), 0), inside ? Complex(2.0, 1.0) : Complex(0.0, 0.0));
        }
    }
}

TEST(Aggregate, ConflictingValuesAverageByCoverage) {
    std::mt19937_64 rng(6);
    const Grid g{9, 7, 1};
    const auto idx = manual_index(g, {3, 3, 1}, {{g.index(0, 0), g.index(1, 1)}, {g.index(2, 2), g.index(1, 0)}});
    std::vector<Tensor3> tensors;
    for (const auto& grp : idx.groups) {
        tensors.push_back(smart::test::random_tensor({9, static_cast<Eigen::Index>(grp.members.size()), 2}, rng));
    }
    // Oracle: explicit sum and count per voxel.
    CMatrix sum = CMatrix::Zero(g.voxels(), 2);
    std::vector<int> count(static_cast<std::size_t>(g.voxels()), 0);
    for (std::size_t gi = 0; gi < idx.groups.size(); ++gi) {
        for (std::size_t m = 0; m < idx.groups[gi].members.size(); ++m) {
            for (int dy = 0; dy < 3; ++dy) {
                for (int dx = 0; dx < 3; ++dx) {
                    const auto v = idx.groups[gi].members[m].corner + g.index(dx, dy);
                    for (int k = 0; k < 2; ++k) sum(v, k) += tensors[gi](dx + 3 * dy, static_cast<Eigen::Index>(m), k);
                    ++count[static_cast<std::size_t>(v)];
                }
            }
        }
    }
    const CMatrix out = aggregate_patches(tensors, idx, 2);
    const CMatrix scattered = scatter_patches(tensors, idx, 2);
    for (Eigen::Index v = 0; v < g.voxels(); ++v) {
        const int c = count[static_cast<std::size_t>(v)];
        ASSERT_LT((scattered.row(v) - sum.row(v)).norm(), 1e-12);
        if (c == 0) {
            ASSERT_EQ(out.row(v).norm(), 0.0);
        } else {
            ASSERT_LT((out.row(v) - sum.row(v) / double(c)).norm(), 1e-12);
        }
    }
}

TEST(CoverageCounts, TilingAndDuplicates) {
    const Grid g{6, 6, 1};
    const auto tiling = manual_index(g, {3, 3, 1}, {{0, 3}, {g.index(0, 3), g.index(3, 3)}});
    for (int c : coverage_counts(tiling)) EXPECT_EQ(c, 1);
    const auto twice = manual_index(g, {3, 3, 1}, {{g.index(1, 1)}, {g.index(1, 1)}});
    const auto cov = coverage_counts(twice);
    for (int y = 0; y < 6; ++y) {
        for (int x = 0; x < 6; ++x) {
            const bool inside = x >= 1 && x < 4 && y >= 1 && y < 4;
            EXPECT_EQ(cov[static_cast<std::size_t>(g.index(x, y))], inside ? 2 : 0);
        }
    }
}

TEST(CoverageCounts, MatchesScatterOnRandomIndex) {
    std::mt19937_64 rng(7);
    const Grid g{14, 11, 5};
    const RealImage img = random_image(g, rng);
    PatchConfig cfg;
    cfg.b = 3;
    cfg.stride = 2;
    cfg.search_radius = 2;
    cfg.lambda_m = 0.2;
    const auto idx = block_match(img, cfg);
    EXPECT_EQ(coverage_counts(idx), coverage_oracle(idx));
}

TEST(ScatterPatches, IsTheAdjointOfExtraction) {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        const Grid g = trial % 2 ? Grid{12, 10, 1} : Grid{8, 7, 6};
        const RealImage img = random_image(g, rng);
        PatchConfig cfg;
        cfg.b = 3;
        cfg.stride = 2;
        cfg.search_radius = 2;
        cfg.lambda_m = 0.3;
        const auto idx = block_match(img, cfg);
        const CMatrix x = random_matrix(g.voxels(), 3, rng);
        const auto px = extract_tensors(x, idx);
        std::vector<Tensor3> t;
        for (const auto& p : px) t.push_back(smart::test::random_tensor(p.dims(), rng));
        Complex lhs = 0.0;
        double px_norm_sq = 0.0;
        double t_norm_sq = 0.0;
        for (std::size_t i = 0; i < t.size(); ++i) {
            lhs += px[i].data().dot(t[i].data());
            px_norm_sq += px[i].data().squaredNorm();
            t_norm_sq += t[i].data().squaredNorm();
        }
        const CMatrix ptt = scatter_patches(t, idx, 3);
        const Complex rhs = smart::test::inner(x, ptt);
        ASSERT_LT(std::abs(lhs - rhs) / std::sqrt(px_norm_sq * t_norm_sq), 1e-10);
    }
}

TEST(PatchIndexJson, ListsEveryGroup) {
    const Grid g{6, 6, 1};
    const auto idx = manual_index(g, {3, 3, 1}, {{0, 3}, {g.index(0, 3)}});
    const std::string j = idx.to_json();
    EXPECT_NE(j.find("\"groups\""), std::string::npos);
    EXPECT_NE(j.find("\"patch_extent\":[3,3,1]"), std::string::npos);
}
