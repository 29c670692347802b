#pragma once

#include "smart/grid.hpp"
#include "smart/tensor.hpp"

#include <string>
#include <vector>

namespace smart {

inline constexpr int kBackground = -1;

/// Per-voxel tissue labels from a histogram of the parameter map.
struct TissuePartition {
    Grid grid;
    int n_groups = 0;
    std::vector<int> labels;   // kBackground or 0..n_groups-1
    std::vector<double> edges; // n_groups + 1 bin edges in ms

    /// Voxel indices of one group in ascending order.
    [[nodiscard]] std::vector<Eigen::Index> members(int group) const;
    /// Member lists of every non-empty group, in label order.
    [[nodiscard]] std::vector<std::vector<Eigen::Index>> populated_groups() const;
    [[nodiscard]] std::string edges_json() const;
};

/// Hankel layout for a signal of n_tsl samples: (n_tsl - k + 1) x k.
struct HankelSpec {
    int n_tsl = 0;
    int k = 0;

    /// k = ceil(n_tsl / 2).
    static HankelSpec for_echoes(int n_tsl);
    [[nodiscard]] int rows() const { return n_tsl - k + 1; }
    void validate() const;
};

/// Equal-width bins between the 1st and 99th percentile of the foreground
/// values; values outside the range land in the end bins.
TissuePartition cluster_tissues(const RealImage& map, const BinaryImage& support, int n_groups);

/// Foreground support: first-echo magnitude above `fraction` of its maximum.
BinaryImage support_from_first_echo(const CMatrix& x, const Grid& grid, double fraction = 0.05);

/// Entry (p, q) = signal[p + q].
CMatrix build_hankel(const CVector& signal, const HankelSpec& spec);

/// H_j(X) for every populated group: dims (N_tissue^j, n_tsl - k + 1, k).
std::vector<Tensor3> extract_parametric_tensors(const CMatrix& x, const std::vector<std::vector<Eigen::Index>>& groups,
                                                const HankelSpec& spec);
std::vector<Tensor3> extract_parametric_tensors(const ImageSeries& x, const TissuePartition& part,
                                                const HankelSpec& spec);

/// H^T: sums every Hankel entry back onto its (voxel, p + q) sample.
CMatrix hankel_scatter(const std::vector<Tensor3>& tensors, const std::vector<std::vector<Eigen::Index>>& groups,
                       const HankelSpec& spec, Eigen::Index n_voxels);

/// Anti-diagonal averaging: scatter divided by multiplicity, zero on background.
CMatrix hankel_average(const std::vector<Tensor3>& tensors, const std::vector<std::vector<Eigen::Index>>& groups,
                       const HankelSpec& spec, Eigen::Index n_voxels);
ImageSeries hankel_adjoint(const std::vector<Tensor3>& tensors, const TissuePartition& part, const HankelSpec& spec,
                           const std::vector<double>& tsl_ms);

/// Number of Hankel entries with p + q = m, for m in 0..n_tsl-1.
std::vector<int> antidiagonal_multiplicity(const HankelSpec& spec);

/// The diagonal of H^T H: N_voxel x n_tsl, zero for background voxels.
Eigen::ArrayXXi multiplicity_counts(const HankelSpec& spec, const TissuePartition& part);

} // namespace smart
