#pragma once

#include "smart/encoding.hpp"
#include "smart/fitting.hpp"
#include "smart/grid.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace smart {

enum class DecayModel { mono, bi };

struct Tube {
    double cx = 0.0; // centre in voxel coordinates
    double cy = 0.0;
    double radius = 0.0;
    BiExpParams params; // mono tubes use m0 and t1rho_long with alpha = 1
};

struct PhantomSpec {
    Grid grid{192, 192, 1};
    std::vector<double> tsl_ms{1, 20, 40, 60, 80};
    DecayModel model = DecayModel::mono;
    std::vector<Tube> tubes;

    /// Five disks of radius 20 on a ring of radius 60 around the grid centre.
    static PhantomSpec standard(DecayModel model = DecayModel::mono);
    void validate() const;
};

struct Phantom {
    ImageSeries images;
    RealImage t1rho;       // mono T1rho or the long component
    RealImage t1rho_short; // zero for mono phantoms
    RealImage alpha;       // long-component fraction, zero outside tubes
    RealImage m0;
    std::vector<int> tube_of; // tube index per voxel, -1 outside
    BinaryImage support;
};

Phantom generate_phantom(const PhantomSpec& spec);

/// Number of singular values >= ratio * largest. A zero matrix has rank 0.
int estimate_rank(const CMatrix& m, double ratio);

struct RankExperimentConfig {
    std::vector<double> snr{30, 35, 40, 45, 50, 55, 60};
    int runs = 100;
    double ratio = 0.01;
    std::uint64_t seed = 0;
    /// Optional undersampled variant: R > 1 ranks the zero-filled images of a
    /// single-coil 1D-masked acquisition instead of the noisy images.
    double undersampling = 1.0;

    void validate() const;
};

struct RankRow {
    int tube_id = 0; // 1-based
    double snr = 0.0;
    double mean_pixel_rank = 0.0;
    double block_rank = 0.0;
    double stderr_pixel_rank = 0.0;
    int runs = 0;
    std::uint64_t seed = 0;
};

/// Per-pixel Hankel ranks and the block Hankel rank of each tube ROI.
struct TubeRanks {
    std::vector<double> mean_pixel_rank;
    std::vector<int> block_rank;
};
TubeRanks tube_ranks(const CMatrix& x, const Phantom& phantom, double ratio);

std::vector<RankRow> rank_experiment(const PhantomSpec& spec, const RankExperimentConfig& cfg);
std::string rank_csv(const std::vector<RankRow>& rows);

/// Single-coil acquisition of the phantom through a 1D variable-density mask.
KSpaceData undersample_experiment(const Phantom& phantom, double r, std::uint64_t seed, const std::string& pattern = "1d");

} // namespace smart
