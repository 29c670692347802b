#include "smart/encoding.hpp"
#include "smart/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>

namespace smart {

namespace {

std::mt19937_64 echo_rng(std::uint64_t seed, int tsl, std::uint32_t salt) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(tsl), salt};
    return std::mt19937_64(seq);
}

void check_r(double r) {
    if (!(r >= 1.0) || !std::isfinite(r)) {
        throw ConfigError("acceleration factor R must be a finite value >= 1");
    }
}

// Weighted sampling without replacement (Efraimidis-Spirakis keys).
std::vector<int> weighted_pick(const std::vector<int>& items, const std::vector<double>& weights, std::size_t count,
                               std::mt19937_64& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::vector<std::pair<double, int>> keyed;
    keyed.reserve(items.size());
    for (std::size_t i = 0; i < items.size(); ++i) {
        double u = uni(rng);
        while (u <= 0.0) u = uni(rng);
        keyed.emplace_back(std::log(u) / weights[i], items[i]);
    }
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(count), keyed.end(),
                      [](const auto& a, const auto& b) { return a.first > b.first || (a.first == b.first && a.second < b.second); });
    std::vector<int> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(keyed[i].second);
    return out;
}

constexpr double kDensityPower = 4.0;
constexpr double kRadiusSlope = 2.0;

struct PlaneGeometry {
    int n1;
    int n2;
    double centre_radius;

    [[nodiscard]] double normalised_distance(int i, int j) const {
        const double a = centred_frequency(i, n1) / (0.5 * n1);
        const double b = centred_frequency(j, n2) / (0.5 * n2);
        return std::sqrt(a * a + b * b);
    }
    [[nodiscard]] bool in_centre(int i, int j) const {
        const double a = centred_frequency(i, n1);
        const double b = centred_frequency(j, n2);
        return a * a + b * b <= centre_radius * centre_radius;
    }
    [[nodiscard]] double radius(double scale, int i, int j) const {
        return scale * (1.0 + kRadiusSlope * normalised_distance(i, j));
    }
};

// Dart throwing with Bridson-style annulus search followed by a raster sweep
// that fills remaining gaps. Every accepted sample q keeps all earlier
// non-centre samples at distance >= radius(q).
std::vector<std::uint8_t> poisson_samples(const PlaneGeometry& g, double scale, std::mt19937_64& rng) {
    const int n1 = g.n1;
    const int n2 = g.n2;
    std::vector<std::uint8_t> occ(static_cast<std::size_t>(n1) * n2, 0);
    auto at = [&](int i, int j) -> std::uint8_t& { return occ[static_cast<std::size_t>(i + n1 * j)]; };

    auto admissible = [&](int i, int j) {
        if (i < 0 || j < 0 || i >= n1 || j >= n2) return false;
        if (at(i, j) != 0 || g.in_centre(i, j)) return false;
        const double r = g.radius(scale, i, j);
        const int w = static_cast<int>(std::ceil(r));
        for (int dj = -w; dj <= w; ++dj) {
            const int jj = j + dj;
            if (jj < 0 || jj >= n2) continue;
            for (int di = -w; di <= w; ++di) {
                const int ii = i + di;
                if (ii < 0 || ii >= n1 || at(ii, jj) == 0) continue;
                if (std::hypot(double(di), double(dj)) < r) return false;
            }
        }
        return true;
    };

    std::uniform_int_distribution<int> pick1(0, n1 - 1);
    std::uniform_int_distribution<int> pick2(0, n2 - 1);
    std::uniform_real_distribution<double> uni(0.0, 1.0);

    std::vector<std::pair<int, int>> active;
    for (int attempt = 0; attempt < 1000 && active.empty(); ++attempt) {
        const int i = pick1(rng);
        const int j = pick2(rng);
        if (admissible(i, j)) {
            at(i, j) = 1;
            active.emplace_back(i, j);
        }
    }
    constexpr int kCandidates = 30;
    while (!active.empty()) {
        std::uniform_int_distribution<std::size_t> pick(0, active.size() - 1);
        const std::size_t idx = pick(rng);
        const auto [pi, pj] = active[idx];
        const double rp = g.radius(scale, pi, pj);
        bool placed = false;
        for (int c = 0; c < kCandidates; ++c) {
            const double theta = 2.0 * std::numbers::pi * uni(rng);
            const double rho = rp * (1.0 + uni(rng));
            const int qi = static_cast<int>(std::lround(pi + rho * std::cos(theta)));
            const int qj = static_cast<int>(std::lround(pj + rho * std::sin(theta)));
            if (admissible(qi, qj)) {
                at(qi, qj) = 1;
                active.emplace_back(qi, qj);
                placed = true;
                break;
            }
        }
        if (!placed) {
            active[idx] = active.back();
            active.pop_back();
        }
    }

    std::vector<int> order(static_cast<std::size_t>(n1) * n2);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (int cell : order) {
        const int i = cell % n1;
        const int j = cell / n1;
        if (admissible(i, j)) at(i, j) = 1;
    }
    return occ;
}

} // namespace

SamplingMask make_mask_1d(Grid grid, int n_tsl, double r, int centre_lines, std::uint64_t seed) {
    check_r(r);
    const int ny = grid.ny;
    if (centre_lines < 0) centre_lines = std::max(1, ny / 16);
    const int budget = static_cast<int>(std::lround(ny / r));
    if (centre_lines > budget) {
        std::ostringstream os;
        os << "infeasible R = " << r << ": " << centre_lines << " centre lines exceed the budget of " << budget
           << " lines";
        throw ConfigError(os.str());
    }

    SamplingMask mask;
    mask.grid = grid;
    mask.n_tsl = n_tsl;
    mask.pattern = "1d";
    mask.r_requested = r;
    mask.center = centre_lines;
    mask.seed = seed;
    mask.bits.assign(static_cast<std::size_t>(grid.voxels() * n_tsl), 0);

    const double ky_max = 0.5 * ny;
    const int centre_lo = -(centre_lines / 2);
    const int centre_hi = centre_lo + centre_lines; // exclusive
    for (int t = 0; t < n_tsl; ++t) {
        std::vector<std::uint8_t> lines(static_cast<std::size_t>(ny), 0);
        std::vector<int> pool;
        std::vector<double> weights;
        for (int k = 0; k < ny; ++k) {
            const int f = centred_frequency(k, ny);
            if (f >= centre_lo && f < centre_hi) {
                lines[static_cast<std::size_t>(k)] = 1;
            } else {
                pool.push_back(k);
                weights.push_back(std::max(std::pow(1.0 - std::abs(f) / ky_max, kDensityPower), 1e-12));
            }
        }
        auto rng = echo_rng(seed, t, 0x31646d6bu);
        for (int k : weighted_pick(pool, weights, static_cast<std::size_t>(budget - centre_lines), rng)) {
            lines[static_cast<std::size_t>(k)] = 1;
        }
        for (int z = 0; z < grid.nz; ++z) {
            for (int y = 0; y < ny; ++y) {
                if (lines[static_cast<std::size_t>(y)] == 0) continue;
                for (int x = 0; x < grid.nx; ++x) {
                    mask.bits[static_cast<std::size_t>(grid.index(x, y, z) + grid.voxels() * t)] = 1;
                }
            }
        }
    }
    return mask;
}

double PoissonPlane::radius_at(int i, int j) const {
    const PlaneGeometry g{n1, n2, 0.0};
    return g.radius(radius_scale, i, j);
}

PoissonPlane poisson_disk_plane(int n1, int n2, double r, double centre_radius, std::uint64_t seed) {
    check_r(r);
    if (n1 <= 0 || n2 <= 0) throw ConfigError("poisson mask: plane dimensions must be positive");
    if (centre_radius < 0.0) centre_radius = std::min(n1, n2) / 16.0;
    const PlaneGeometry g{n1, n2, centre_radius};
    const std::size_t total = static_cast<std::size_t>(n1) * n2;
    const auto target = static_cast<std::size_t>(std::lround(static_cast<double>(total) / r));

    PoissonPlane plane;
    plane.n1 = n1;
    plane.n2 = n2;
    plane.centre.assign(total, 0);
    std::size_t centre_count = 0;
    for (int j = 0; j < n2; ++j) {
        for (int i = 0; i < n1; ++i) {
            if (g.in_centre(i, j)) {
                plane.centre[static_cast<std::size_t>(i + n1 * j)] = 1;
                ++centre_count;
            }
        }
    }
    if (centre_count > target) {
        std::ostringstream os;
        os << "infeasible R = " << r << ": the centre disk alone holds " << centre_count << " of " << target
           << " allowed samples";
        throw ConfigError(os.str());
    }
    if (target >= total) {
        plane.bits.assign(total, 1);
        plane.radius_scale = 0.0;
        return plane;
    }

    // count(scale) decreases with scale; keep the largest scale whose sample
    // count still reaches the target, then thin at random.
    auto rng_for = [&](int attempt) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(attempt), 0x706f6973u};
        return std::mt19937_64(seq);
    };
    auto count_of = [&](const std::vector<std::uint8_t>& occ) {
        return static_cast<std::size_t>(std::count(occ.begin(), occ.end(), std::uint8_t{1})) + centre_count;
    };
    double lo = 0.0;
    double hi = std::max(n1, n2);
    std::vector<std::uint8_t> best;
    double best_scale = 0.0;
    for (int it = 0; it < 30; ++it) {
        const double mid = 0.5 * (lo + hi);
        auto rng = rng_for(it);
        auto occ = poisson_samples(g, mid, rng);
        const std::size_t c = count_of(occ);
        if (c >= target) {
            lo = mid;
            best = std::move(occ);
            best_scale = mid;
            if (c <= target + target / 200) break;
        } else {
            hi = mid;
        }
    }
    if (best.empty()) {
        auto rng = rng_for(-1);
        best = poisson_samples(g, 0.0, rng);
    }

    std::vector<int> picked;
    for (std::size_t c = 0; c < total; ++c) {
        if (best[c] != 0) picked.push_back(static_cast<int>(c));
    }
    auto rng = rng_for(1000);
    std::shuffle(picked.begin(), picked.end(), rng);
    std::size_t excess = count_of(best) - target;
    for (std::size_t k = 0; k < excess && k < picked.size(); ++k) best[static_cast<std::size_t>(picked[k])] = 0;

    plane.bits.assign(total, 0);
    for (std::size_t c = 0; c < total; ++c) plane.bits[c] = (best[c] != 0 || plane.centre[c] != 0) ? 1 : 0;
    plane.radius_scale = best_scale;
    return plane;
}

SamplingMask make_mask_poisson(Grid grid, int n_tsl, double r, double centre_radius, std::uint64_t seed) {
    check_r(r);
    const bool volumetric = grid.is3d();
    const int n1 = volumetric ? grid.ny : grid.nx;
    const int n2 = volumetric ? grid.nz : grid.ny;
    if (centre_radius < 0.0) centre_radius = std::min(n1, n2) / 16.0;

    SamplingMask mask;
    mask.grid = grid;
    mask.n_tsl = n_tsl;
    mask.pattern = "poisson";
    mask.r_requested = r;
    mask.center = centre_radius;
    mask.seed = seed;
    mask.bits.assign(static_cast<std::size_t>(grid.voxels() * n_tsl), 0);

    for (int t = 0; t < n_tsl; ++t) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(t), 0x65636f68u};
        std::mt19937_64 derive(seq);
        const PoissonPlane plane = poisson_disk_plane(n1, n2, r, centre_radius, derive());
        for (int z = 0; z < grid.nz; ++z) {
            for (int y = 0; y < grid.ny; ++y) {
                for (int x = 0; x < grid.nx; ++x) {
                    const int i = volumetric ? y : x;
                    const int j = volumetric ? z : y;
                    if (plane.bits[static_cast<std::size_t>(i + n1 * j)] != 0) {
                        mask.bits[static_cast<std::size_t>(grid.index(x, y, z) + grid.voxels() * t)] = 1;
                    }
                }
            }
        }
    }
    return mask;
}

} // namespace smart
