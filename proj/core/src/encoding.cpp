#include "smart/encoding.hpp"

#include "smart/errors.hpp"
#include "smart/parallel.hpp"

#include <fftw3.h>

#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <random>
#include <tuple>

namespace smart {

namespace {

// FFTW planning is not thread-safe; executing an existing plan on new arrays is.
class PlanCache {
public:
    static PlanCache& instance() {
        static PlanCache cache;
        return cache;
    }

    fftw_plan get(const Grid& grid, int sign) {
        std::lock_guard lock(mutex_);
        const auto key = std::make_tuple(grid.nx, grid.ny, grid.nz, sign);
        if (auto it = plans_.find(key); it != plans_.end()) return it->second;
        CVector scratch(grid.voxels());
        auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
        fftw_plan plan = nullptr;
        const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
        if (grid.nz > 1) {
            plan = fftw_plan_dft_3d(grid.nz, grid.ny, grid.nx, buf, buf, sign, flags);
        } else {
            plan = fftw_plan_dft_2d(grid.ny, grid.nx, buf, buf, sign, flags);
        }
        if (plan == nullptr) throw NumericalError("FFTW failed to create a plan");
        plans_.emplace(key, plan);
        return plan;
    }

    PlanCache(const PlanCache&) = delete;
    PlanCache& operator=(const PlanCache&) = delete;

private:
    PlanCache() = default;
    ~PlanCache() {
        for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
    }

    std::mutex mutex_;
    std::map<std::tuple<int, int, int, int>, fftw_plan> plans_;
};

void transform(CVector& v, const Grid& grid, int sign) {
    if (v.size() != grid.voxels()) throw DataError("fft: vector length does not match grid");
    fftw_plan plan = PlanCache::instance().get(grid, sign);
    auto* buf = reinterpret_cast<fftw_complex*>(v.data());
    fftw_execute_dft(plan, buf, buf);
    v *= 1.0 / std::sqrt(static_cast<double>(grid.voxels()));
}

void check_mask(const Grid& grid, int n_tsl, const SamplingMask& mask, const char* what) {
    require_same_grid(grid, mask.grid, what);
    if (mask.n_tsl != n_tsl) throw DataError(std::string(what) + ": mask echo count does not match data");
}

void check_coils(const Grid& grid, const CoilSensitivities& coils, const char* what) {
    if (!coils.is_identity()) require_same_grid(grid, coils.grid(), what);
}

void apply_mask(CVector& k, const SamplingMask& mask, int tsl) {
    const Eigen::Index n = k.size();
    const std::uint8_t* bits = mask.bits.data() + n * tsl;
    for (Eigen::Index v = 0; v < n; ++v) {
        if (bits[v] == 0) k[v] = Complex(0.0, 0.0);
    }
}

} // namespace

CoilSensitivities::CoilSensitivities(Grid grid, std::vector<CVector> maps) : grid_(grid), maps_(std::move(maps)) {
    for (const auto& m : maps_) {
        if (m.size() != grid_.voxels()) throw DataError("CoilSensitivities: map size does not match grid");
    }
}

bool CoilSensitivities::covers(const BinaryImage& support) const {
    if (is_identity()) return true;
    for (Eigen::Index v = 0; v < grid_.voxels(); ++v) {
        if (!support[v]) continue;
        double s = 0.0;
        for (const auto& m : maps_) s += std::norm(m[v]);
        if (!(s > 0.0)) return false;
    }
    return true;
}

SamplingMask SamplingMask::full(Grid grid, int n_tsl) {
    SamplingMask m;
    m.grid = grid;
    m.n_tsl = n_tsl;
    m.bits.assign(static_cast<std::size_t>(grid.voxels() * n_tsl), 1);
    return m;
}

Eigen::Index SamplingMask::sampled_count(int tsl) const {
    const auto n = grid.voxels();
    Eigen::Index c = 0;
    for (Eigen::Index v = 0; v < n; ++v) c += bits[static_cast<std::size_t>(v + n * tsl)] != 0;
    return c;
}

Eigen::Index SamplingMask::sampled_count() const {
    Eigen::Index c = 0;
    for (auto b : bits) c += b != 0;
    return c;
}

double SamplingMask::r_achieved() const {
    const auto s = sampled_count();
    if (s == 0) return std::numeric_limits<double>::infinity();
    return static_cast<double>(bits.size()) / static_cast<double>(s);
}

void fft_unitary(CVector& image, const Grid& grid) { transform(image, grid, FFTW_FORWARD); }

void ifft_unitary(CVector& kspace, const Grid& grid) { transform(kspace, grid, FFTW_BACKWARD); }

CMatrix apply_forward(const CMatrix& x, const Grid& grid, const CoilSensitivities& coils, const SamplingMask& mask) {
    const int n_tsl = static_cast<int>(x.cols());
    const int nc = coils.n_coils();
    CMatrix y(x.rows(), Eigen::Index(nc) * n_tsl);
    parallel_for(static_cast<std::size_t>(n_tsl) * nc, [&](std::size_t job) {
        const int c = static_cast<int>(job) % nc;
        const int t = static_cast<int>(job) / nc;
        CVector tmp = coils.is_identity() ? CVector(x.col(t)) : CVector(coils.maps()[c].cwiseProduct(x.col(t)));
        fft_unitary(tmp, grid);
        apply_mask(tmp, mask, t);
        y.col(c + Eigen::Index(nc) * t) = tmp;
    });
    return y;
}

CMatrix apply_adjoint(const CMatrix& y, const Grid& grid, const CoilSensitivities& coils, const SamplingMask& mask) {
    const int nc = coils.n_coils();
    const int n_tsl = static_cast<int>(y.cols()) / nc;
    CMatrix x = CMatrix::Zero(y.rows(), n_tsl);
    parallel_for(static_cast<std::size_t>(n_tsl), [&](std::size_t job) {
        const int t = static_cast<int>(job);
        for (int c = 0; c < nc; ++c) {
            CVector tmp = y.col(c + Eigen::Index(nc) * t);
            apply_mask(tmp, mask, t);
            ifft_unitary(tmp, grid);
            if (coils.is_identity()) {
                x.col(t) += tmp;
            } else {
                x.col(t) += coils.maps()[c].conjugate().cwiseProduct(tmp);
            }
        }
    });
    return x;
}

CMatrix apply_normal(const CMatrix& x, const Grid& grid, const CoilSensitivities& coils, const SamplingMask& mask) {
    if (!coils.is_identity()) return apply_adjoint(apply_forward(x, grid, coils, mask), grid, coils, mask);
    CMatrix out(x.rows(), x.cols());
    parallel_for(static_cast<std::size_t>(x.cols()), [&](std::size_t job) {
        const int t = static_cast<int>(job);
        CVector tmp = x.col(t);
        fft_unitary(tmp, grid);
        apply_mask(tmp, mask, t);
        ifft_unitary(tmp, grid);
        out.col(t) = tmp;
    });
    return out;
}

KSpaceData forward(const ImageSeries& x, const CoilSensitivities& coils, const SamplingMask& mask) {
    check_mask(x.grid(), x.n_tsl(), mask, "forward");
    check_coils(x.grid(), coils, "forward");
    KSpaceData y;
    y.grid = x.grid();
    y.n_coils = coils.n_coils();
    y.n_tsl = x.n_tsl();
    y.data = apply_forward(x.data(), x.grid(), coils, mask);
    y.mask = mask;
    return y;
}

ImageSeries adjoint(const KSpaceData& y, const CoilSensitivities& coils, const std::vector<double>& tsl_ms) {
    check_mask(y.grid, y.n_tsl, y.mask, "adjoint");
    check_coils(y.grid, coils, "adjoint");
    if (coils.n_coils() != y.n_coils) throw DataError("adjoint: coil count does not match k-space data");
    if (static_cast<int>(tsl_ms.size()) != y.n_tsl) throw DataError("adjoint: spin-lock list does not match data");
    if (y.data.rows() != y.grid.voxels() || y.data.cols() != Eigen::Index(y.n_coils) * y.n_tsl) {
        throw DataError("adjoint: k-space array shape does not match its header");
    }
    return ImageSeries(y.grid, tsl_ms, apply_adjoint(y.data, y.grid, coils, y.mask));
}

namespace {

double mean_magnitude(const CMatrix& m, const SamplingMask* mask, int n_coils) {
    double sum = 0.0;
    Eigen::Index count = 0;
    for (Eigen::Index col = 0; col < m.cols(); ++col) {
        const int t = static_cast<int>(col / n_coils);
        for (Eigen::Index v = 0; v < m.rows(); ++v) {
            if (mask != nullptr && !mask->sampled(v, t)) continue;
            sum += std::abs(m(v, col));
            ++count;
        }
    }
    return count > 0 ? sum / static_cast<double>(count) : 0.0;
}

void add_gaussian(CMatrix& m, double sigma, std::uint64_t seed, const SamplingMask* mask, int n_coils) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x6e6f6973u};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, sigma / std::sqrt(2.0));
    for (Eigen::Index col = 0; col < m.cols(); ++col) {
        const int t = static_cast<int>(col / n_coils);
        for (Eigen::Index v = 0; v < m.rows(); ++v) {
            if (mask != nullptr && !mask->sampled(v, t)) continue;
            const double re = normal(rng);
            const double im = normal(rng);
            m(v, col) += Complex(re, im);
        }
    }
}

} // namespace

ImageSeries add_noise(const ImageSeries& x, double snr, std::uint64_t seed) {
    if (!(snr > 0.0)) throw ConfigError("add_noise: snr must be positive");
    const double sigma = mean_magnitude(x.data(), nullptr, 1) / snr;
    ImageSeries out = x;
    if (sigma > 0.0) add_gaussian(out.data(), sigma, seed, nullptr, 1);
    return out;
}

KSpaceData add_noise(const KSpaceData& y, double snr, std::uint64_t seed) {
    if (!(snr > 0.0)) throw ConfigError("add_noise: snr must be positive");
    const double sigma = mean_magnitude(y.data, &y.mask, y.n_coils) / snr;
    KSpaceData out = y;
    if (sigma > 0.0) add_gaussian(out.data, sigma, seed, &y.mask, y.n_coils);
    return out;
}

} // namespace smart
