#pragma once

#include "smart/grid.hpp"
#include "smart/tensor.hpp"

#include <string>
#include <vector>

namespace smart {

struct PatchConfig {
    int b = 9;              // patch side (b x b in 2D, b x b x b in 3D)
    int stride = 3;         // offset between reference patches
    int search_radius = 16; // candidate window half-width
    double lambda_m = 0.2;  // normalised distance threshold
    int np_max = 30;        // group size cap, reference included

    /// Throws ConfigError if the configuration cannot be used on `grid`.
    void validate(const Grid& grid) const;
    /// 3D defaults: b = 5, search radius 8.
    static PatchConfig defaults_for(const Grid& grid);
};

struct PatchMember {
    Eigen::Index corner = 0; // voxel index of the patch's lowest corner
    double distance = 0.0;
};

struct PatchGroup {
    Eigen::Index reference = 0; // corner of the reference patch
    std::vector<PatchMember> members; // reference first, then by (distance, corner)
};

/// Groups of similar patches, one per reference corner on the stride lattice.
struct PatchGroupIndex {
    Grid grid;
    std::array<int, 3> extent{1, 1, 1}; // patch size along x, y, z
    std::vector<PatchGroup> groups;

    [[nodiscard]] Eigen::Index patch_voxels() const { return Eigen::Index(extent[0]) * extent[1] * extent[2]; }
    /// Voxel offsets of a patch relative to its corner, x fastest.
    [[nodiscard]] std::vector<Eigen::Index> patch_offsets() const;
    [[nodiscard]] std::string to_json() const;
};

/// Reference corners along one axis: multiples of stride plus the last valid
/// corner so the lattice reaches the border.
std::vector<int> reference_positions(int n, int extent, int stride);

/// Normalised distance ||a - b||^2 / ||b||^2. Returns 0 when both patches are
/// zero and +inf when only `b` is zero.
double patch_distance(const RealImage& img, Eigen::Index ref_corner, Eigen::Index cand_corner,
                      const std::vector<Eigen::Index>& offsets);

/// Block matching on a real similarity image.
PatchGroupIndex block_match(const RealImage& img, const PatchConfig& cfg);

/// P_i(X) for every group: tensors of dims (N_b, N_p^i, N_TSL).
std::vector<Tensor3> extract_tensors(const CMatrix& x, const PatchGroupIndex& idx);
std::vector<Tensor3> extract_tensors(const ImageSeries& x, const PatchGroupIndex& idx);

/// P^T: scatter-sum of patch tensors back onto the grid (N_voxel x N_TSL).
CMatrix scatter_patches(const std::vector<Tensor3>& tensors, const PatchGroupIndex& idx, int n_tsl);

/// Number of patch entries covering each voxel (the diagonal of P^T P).
std::vector<int> coverage_counts(const PatchGroupIndex& idx);

/// Averaging aggregation: scatter-sum divided by coverage, zero where uncovered.
CMatrix aggregate_patches(const std::vector<Tensor3>& tensors, const PatchGroupIndex& idx, int n_tsl);
ImageSeries aggregate(const std::vector<Tensor3>& tensors, const PatchGroupIndex& idx,
                      const std::vector<double>& tsl_ms);

} // namespace smart
