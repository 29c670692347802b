#pragma once

#include "smart/cg.hpp"
#include "smart/encoding.hpp"
#include "smart/parametric.hpp"
#include "smart/patching.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace smart {

enum class ReconMode { smart, spatial_only, parametric_only };

/// How the auxiliary tensors enter P1. `scatter` uses P^T / H^T literally, so a
/// voxel's weight is its coverage count. `average` uses the aggregated image
/// estimates (coverage-normalised adjoints), giving every covered voxel weight mu.
enum class Consensus { average, scatter };

Consensus parse_consensus(const std::string& name);
std::string to_string(Consensus c);

ReconMode parse_mode(const std::string& name);
std::string to_string(ReconMode mode);

struct ReconConfig {
    int admm_iters = 15;
    int cg_iters = 15;
    double cg_tol = 1e-7;
    // Thresholds for the absolute rule on data scaled to unit zero-filled peak.
    // The ratio preset is lambda1 = (0.2, 0.1, 0.1), lambda2 = (0.05, 0.01, 0.01),
    // mu2 = 0.01 with ThresholdRule::core_entries.
    std::array<double, 3> lambda1{0.87, 0.435, 0.435};
    std::array<double, 3> lambda2{3.5, 0.7, 0.7};
    double mu1 = 0.01;
    double mu2 = 0.005;
    PatchConfig patch;
    int n_groups = 60;
    int hankel_k = 0; // 0 selects ceil(N_TSL / 2)
    ReconMode mode = ReconMode::smart;
    int refit_period = 3;
    double support_fraction = 0.0; // first-echo threshold for the clustered foreground; 0 clusters every voxel
    Consensus consensus = Consensus::average;
    ThresholdRule threshold_rule = ThresholdRule::absolute_entries;

    /// Defaults for the grid: 3D uses lambda1 = (0.65, 0.435, 0.435) and the 3D patch defaults.
    static ReconConfig defaults_for(const Grid& grid);
    void validate(const Grid& grid, int n_tsl) const;

    [[nodiscard]] bool uses_spatial() const { return mode != ReconMode::parametric_only && mu1 > 0.0; }
    [[nodiscard]] bool uses_parametric() const { return mode != ReconMode::spatial_only && mu2 > 0.0; }
};

/// Encoding operator E = A F S with its geometry.
struct EncodingOps {
    Grid grid;
    CoilSensitivities coils;
    SamplingMask mask;

    [[nodiscard]] CMatrix forward(const CMatrix& x) const { return apply_forward(x, grid, coils, mask); }
    [[nodiscard]] CMatrix adjoint(const CMatrix& y) const { return apply_adjoint(y, grid, coils, mask); }
    [[nodiscard]] CMatrix normal(const CMatrix& x) const { return apply_normal(x, grid, coils, mask); }
};

struct SolverState {
    Grid grid;
    std::vector<double> tsl_ms;
    CMatrix x; // N_voxel x N_TSL

    PatchGroupIndex patches;
    std::vector<Tensor3> t;      // spatial auxiliary tensors
    std::vector<Tensor3> alpha1; // conforms to t

    TissuePartition partition;
    std::vector<std::vector<Eigen::Index>> groups; // populated tissue groups
    HankelSpec hankel;
    std::vector<Tensor3> z;      // parametric auxiliary tensors
    std::vector<Tensor3> alpha2; // conforms to z

    RealImage t1rho;
    std::vector<double> relative_change; // entry n-2 belongs to iteration n >= 2
};

/// P2: T_i = denoise(P_i X + alpha1_i / mu1). Returns the averaged image estimate.
CMatrix solve_p2(SolverState& state, const ReconConfig& cfg);

/// P3: Z_j = denoise(H_j X + alpha2_j / mu2). Returns the anti-diagonal average.
CMatrix solve_p3(SolverState& state, const ReconConfig& cfg);

/// Right-hand side of the P1 normal equations.
CMatrix p1_rhs(const SolverState& state, const CMatrix& ehy, const ReconConfig& cfg);

/// Diagonal regulariser weight: mu1 * coverage + mu2 * multiplicity for the
/// scatter consensus, mu1 + mu2 on covered voxels for the average consensus.
Eigen::ArrayXXd p1_weights(const SolverState& state, const ReconConfig& cfg);

/// P1: CG on (E^H E + mu1 P^T P + mu2 H^T H) X = rhs, warm-started from state.x.
CgResult solve_p1(const SolverState& state, const EncodingOps& enc, const CMatrix& ehy, const ReconConfig& cfg);

/// alpha1 += mu1 (P X - T), alpha2 += mu2 (H X - Z).
void update_multipliers(SolverState& state, const ReconConfig& cfg);

/// Smooth part of the augmented Lagrangian in scaled form:
/// 0.5||EX - Y||^2 + mu1/2 ||PX - T + alpha1/mu1||^2 - ||alpha1||^2/(2 mu1) + (same for H).
double augmented_lagrangian(const SolverState& state, const EncodingOps& enc, const CMatrix& y, const ReconConfig& cfg);

/// Re-runs block matching on |X(:, 0)| and carries alpha1 over to the new groups.
void refresh_patches(SolverState& state, const ReconConfig& cfg);

/// Refits the T1rho map on the current iterate, rebuilds the tissue partition and
/// carries alpha2 over.
void refresh_partition(SolverState& state, const ReconConfig& cfg);

struct IterationRecord {
    int iteration = 0;
    double relative_change = 0.0; // NaN for the first iteration
    double data_residual = 0.0;   // ||EX - Y|| / ||Y||
    int cg_iterations = 0;
    bool cg_breakdown = false;
    int patch_groups = 0;
    int tissue_groups = 0;
};

struct ReconResult {
    ImageSeries x;
    RealImage t1rho;
    std::vector<IterationRecord> history;
    std::vector<double> relative_change;
    PatchGroupIndex patches;
    TissuePartition partition;
};

using IterationObserver = std::function<void(const IterationRecord&)>;

/// Zero-filled reconstruction E^H Y.
ImageSeries zero_filled(const KSpaceData& y, const CoilSensitivities& coils, const std::vector<double>& tsl_ms);

/// Full ADMM reconstruction. Internally the data are scaled so the zero-filled
/// image has unit peak magnitude; the result is returned on the input scale.
ReconResult reconstruct(const KSpaceData& y, const CoilSensitivities& coils, const std::vector<double>& tsl_ms,
                        const ReconConfig& cfg, const IterationObserver& observer = {});

std::string history_csv(const std::vector<IterationRecord>& history);

} // namespace smart
