#pragma once

#include "smart/grid.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace smart {

/// Receiver coil maps. An empty set means a single identity coil.
class CoilSensitivities {
public:
    CoilSensitivities() = default;
    CoilSensitivities(Grid grid, std::vector<CVector> maps);

    static CoilSensitivities identity() { return {}; }

    [[nodiscard]] bool is_identity() const { return maps_.empty(); }
    [[nodiscard]] int n_coils() const { return maps_.empty() ? 1 : static_cast<int>(maps_.size()); }
    [[nodiscard]] const std::vector<CVector>& maps() const { return maps_; }
    [[nodiscard]] const Grid& grid() const { return grid_; }

    /// Checks sum_c |s_c|^2 > 0 on every voxel of the support.
    [[nodiscard]] bool covers(const BinaryImage& support) const;

private:
    Grid grid_;
    std::vector<CVector> maps_;
};

/// Per-TSL binary k-space masks. K-space arrays use the FFT-native layout
/// (DC at index 0, negative frequencies in the upper half of each axis).
struct SamplingMask {
    Grid grid;
    int n_tsl = 0;
    std::vector<std::uint8_t> bits; // voxels x n_tsl, voxel fastest
    std::string pattern = "full";
    double r_requested = 1.0;
    double center = 0.0; // centre lines (1d) or centre radius (poisson)
    std::uint64_t seed = 0;

    static SamplingMask full(Grid grid, int n_tsl);

    [[nodiscard]] bool sampled(Eigen::Index v, int tsl) const {
        return bits[static_cast<std::size_t>(v + grid.voxels() * tsl)] != 0;
    }
    [[nodiscard]] Eigen::Index sampled_count(int tsl) const;
    [[nodiscard]] Eigen::Index sampled_count() const;
    /// Total points / sampled points over all echoes.
    [[nodiscard]] double r_achieved() const;
};

/// Multi-coil k-space. `data` is voxels x (n_coils * n_tsl) with column
/// c + n_coils * t; entries at unsampled locations are zero.
struct KSpaceData {
    Grid grid;
    int n_coils = 1;
    int n_tsl = 0;
    CMatrix data;
    SamplingMask mask;

    [[nodiscard]] Eigen::Index column(int coil, int tsl) const { return coil + Eigen::Index(n_coils) * tsl; }
};

/// Unitary (1/sqrt(N)) multidimensional DFT of one image in place.
void fft_unitary(CVector& image, const Grid& grid);
void ifft_unitary(CVector& kspace, const Grid& grid);

/// Centred frequency index for FFT-native position k on an axis of length n.
inline int centred_frequency(int k, int n) { return k < (n + 1) / 2 ? k : k - n; }

/// E = A F S applied to an image series.
KSpaceData forward(const ImageSeries& x, const CoilSensitivities& coils, const SamplingMask& mask);

/// Exact adjoint of forward, masking y first.
ImageSeries adjoint(const KSpaceData& y, const CoilSensitivities& coils, const std::vector<double>& tsl_ms);

/// Raw encoding operators on an N_voxel x N_TSL matrix, used by iterative solvers.
CMatrix apply_forward(const CMatrix& x, const Grid& grid, const CoilSensitivities& coils, const SamplingMask& mask);
CMatrix apply_adjoint(const CMatrix& y, const Grid& grid, const CoilSensitivities& coils, const SamplingMask& mask);
/// E^H E x, staying in image space.
CMatrix apply_normal(const CMatrix& x, const Grid& grid, const CoilSensitivities& coils, const SamplingMask& mask);

/// Pseudo-random ky-line masks (phase encoding along y). The centre block is
/// always sampled; the remaining lines are drawn without replacement with
/// probability proportional to (1 - |ky| / ky_max)^4. Lines per echo is
/// round(ny / R). A negative centre_lines selects the default ny / 16.
SamplingMask make_mask_1d(Grid grid, int n_tsl, double r, int centre_lines, std::uint64_t seed);

/// Variable-density Poisson-disk sampling on one phase-encode plane.
struct PoissonPlane {
    int n1 = 0;
    int n2 = 0;
    std::vector<std::uint8_t> bits;   // n1 x n2, first axis fastest
    std::vector<std::uint8_t> centre; // fully sampled disk
    double radius_scale = 1.0;

    /// Minimum allowed distance from a sample at plane position (i, j) to any
    /// other non-centre sample.
    [[nodiscard]] double radius_at(int i, int j) const;
};

PoissonPlane poisson_disk_plane(int n1, int n2, double r, double centre_radius, std::uint64_t seed);

/// Poisson-disk masks for every echo. For 3D grids the (y, z) plane is the
/// phase-encode plane and x is fully sampled; for 2D grids the (x, y) plane is
/// used. A negative centre_radius selects min(n1, n2) / 16.
SamplingMask make_mask_poisson(Grid grid, int n_tsl, double r, double centre_radius, std::uint64_t seed);

/// Complex Gaussian noise with total standard deviation sigma = mean|signal| / snr
/// (sigma / sqrt(2) per component). For k-space the mean runs over sampled
/// entries and only sampled entries receive noise.
ImageSeries add_noise(const ImageSeries& x, double snr, std::uint64_t seed);
KSpaceData add_noise(const KSpaceData& y, double snr, std::uint64_t seed);

} // namespace smart
