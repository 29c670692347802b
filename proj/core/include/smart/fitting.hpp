#pragma once

#include "smart/grid.hpp"

#include <Eigen/Core>

#include <string>
#include <vector>

namespace smart {

inline constexpr double kT1rhoMin = 1.0;
inline constexpr double kT1rhoMax = 1000.0;

struct MonoExpParams {
    double m0 = 0.0;
    double t1rho = 0.0; // ms
};

struct BiExpParams {
    double m0 = 0.0;
    double t1rho_long = 0.0;
    double t1rho_short = 0.0;
    double alpha = 1.0; // long-component fraction
};

/// M0 * exp(-t / T1rho) per echo.
Eigen::VectorXd mono_model(const MonoExpParams& p, const std::vector<double>& tsl_ms);
/// M0 * ((1 - alpha) exp(-t / T_short) + alpha exp(-t / T_long)).
Eigen::VectorXd bi_model(const BiExpParams& p, const std::vector<double>& tsl_ms);
/// Columns d/dM0 and d/dT1rho of mono_model.
Eigen::MatrixX2d mono_jacobian(const MonoExpParams& p, const std::vector<double>& tsl_ms);

struct LmOptions {
    int max_iters = 200;
    double rel_tol = 1e-10;
    double lambda0 = 1e-3;
};

struct MonoFit {
    MonoExpParams params;
    double residual = 0.0; // sum of squared residuals
    int iterations = 0;
    bool converged = false;
    bool degenerate = false; // all-zero or non-finite signal
    bool clamped = false;    // T1rho sits on a bound
    std::vector<double> residual_history; // accepted-step residuals, starting with the initial guess
};

/// Levenberg-Marquardt fit of the mono-exponential model to magnitude data.
MonoFit fit_mono(const Eigen::VectorXd& signal, const std::vector<double>& tsl_ms, const LmOptions& opts = {});
MonoFit fit_mono(const CVector& signal, const std::vector<double>& tsl_ms, const LmOptions& opts = {});

struct FitQc {
    Eigen::Index fitted = 0;
    Eigen::Index non_converged = 0;
    Eigen::Index degenerate = 0;
    Eigen::Index clamped = 0;

    [[nodiscard]] std::string to_json() const;
};

struct MapFit {
    RealImage t1rho;
    RealImage m0;
    FitQc qc;
};

/// Voxelwise fit over the support; background voxels are 0.
MapFit fit_map(const ImageSeries& x, const BinaryImage& support, const LmOptions& opts = {});

} // namespace smart
