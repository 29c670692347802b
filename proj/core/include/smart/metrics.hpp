#pragma once

#include "smart/grid.hpp"

#include <string>
#include <vector>

namespace smart {

inline constexpr double kPsnrCap = 300.0;

/// Magnitude of every entry, as a flat image over voxels x echoes.
Eigen::ArrayXd magnitudes(const CMatrix& x);

/// ||x - ref|| / ||ref|| on magnitudes. Throws DataError on a zero reference.
double nrmse(const Eigen::ArrayXd& x, const Eigen::ArrayXd& ref);
double nrmse(const RealImage& x, const RealImage& ref);
double nrmse(const ImageSeries& x, const ImageSeries& ref);

/// 20 log10(max|ref| / RMSE), capped at kPsnrCap.
double psnr(const Eigen::ArrayXd& x, const Eigen::ArrayXd& ref);
double psnr(const RealImage& x, const RealImage& ref);
double psnr(const ImageSeries& x, const ImageSeries& ref);

/// Gaussian-windowed SSIM (11 x 11, sigma 1.5, K1 = 0.01, K2 = 0.03, dynamic
/// range max|ref|) averaged over valid windows; 3D grids average per-slice maps.
double ssim(const RealImage& x, const RealImage& ref);

/// 15 x 15 Laplacian-of-Gaussian kernel (sigma 1.5), zero-sum, row-major.
std::vector<double> log_kernel(int size = 15, double sigma = 1.5);

/// Per-slice LoG filtering with symmetric boundary extension.
RealImage log_filter(const RealImage& img);

/// ||LoG(x) - LoG(ref)|| / ||LoG(ref)||.
double hfen(const RealImage& x, const RealImage& ref);

struct MetricReport {
    std::string reference;
    std::vector<double> nrmse_per_tsl, psnr_per_tsl, ssim_per_tsl, hfen_per_tsl;
    double nrmse = 0.0; // pooled over all echoes
    double psnr = 0.0;  // pooled over all echoes
    double ssim = 0.0;  // mean over echoes
    double hfen = 0.0;  // pooled LoG norms over all echoes

    [[nodiscard]] std::string to_json() const;
    [[nodiscard]] std::string to_csv() const;
};

MetricReport evaluate(const ImageSeries& x, const ImageSeries& ref, const std::string& reference_name = "");

} // namespace smart
