#pragma once

#include <Eigen/Core>

#include <complex>
#include <cstdint>
#include <vector>

namespace smart {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Spatial sampling grid. Voxels are linearised with x fastest:
/// v = x + nx * (y + ny * z). A 2D grid has nz == 1.
struct Grid {
    int nx = 0;
    int ny = 0;
    int nz = 1;

    [[nodiscard]] Eigen::Index voxels() const { return Eigen::Index(nx) * ny * nz; }
    [[nodiscard]] bool is3d() const { return nz > 1; }
    [[nodiscard]] Eigen::Index index(int x, int y, int z = 0) const {
        return x + Eigen::Index(nx) * (y + Eigen::Index(ny) * z);
    }
    friend bool operator==(const Grid&, const Grid&) = default;
};

/// Real-valued image on a grid (parameter maps, magnitudes, similarity images).
struct RealImage {
    Grid grid;
    std::vector<double> data;

    RealImage() = default;
    explicit RealImage(Grid g, double fill = 0.0)
        : grid(g), data(static_cast<std::size_t>(g.voxels()), fill) {}
    RealImage(Grid g, std::vector<double> values);

    double& operator[](Eigen::Index v) { return data[static_cast<std::size_t>(v)]; }
    double operator[](Eigen::Index v) const { return data[static_cast<std::size_t>(v)]; }
};

/// Binary voxel mask (support regions).
struct BinaryImage {
    Grid grid;
    std::vector<std::uint8_t> data;

    BinaryImage() = default;
    explicit BinaryImage(Grid g, std::uint8_t fill = 0)
        : grid(g), data(static_cast<std::size_t>(g.voxels()), fill) {}

    [[nodiscard]] bool operator[](Eigen::Index v) const { return data[static_cast<std::size_t>(v)] != 0; }
    [[nodiscard]] Eigen::Index count() const;
};

/// Complex image stack over spin-lock times. `data` is N_voxel x N_TSL with one
/// column per echo.
class ImageSeries {
public:
    ImageSeries() = default;
    ImageSeries(Grid grid, std::vector<double> tsl_ms);
    ImageSeries(Grid grid, std::vector<double> tsl_ms, CMatrix data);

    [[nodiscard]] const Grid& grid() const { return grid_; }
    [[nodiscard]] const std::vector<double>& tsl_ms() const { return tsl_ms_; }
    [[nodiscard]] int n_tsl() const { return static_cast<int>(tsl_ms_.size()); }
    [[nodiscard]] Eigen::Index voxels() const { return grid_.voxels(); }

    [[nodiscard]] const CMatrix& data() const { return data_; }
    CMatrix& data() { return data_; }

    /// Magnitude image of one echo.
    [[nodiscard]] RealImage magnitude(int tsl_index) const;

private:
    Grid grid_;
    std::vector<double> tsl_ms_;
    CMatrix data_;
};

/// Throws DataError when the two grids differ; `what` names the caller.
void require_same_grid(const Grid& a, const Grid& b, const char* what);

} // namespace smart
