#include "smart/metrics.hpp"

#include "smart/errors.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

namespace smart {

namespace {

void check_sizes(Eigen::Index a, Eigen::Index b, const char* what) {
    if (a != b) throw DataError(std::string(what) + ": image sizes differ");
}

Eigen::ArrayXd as_array(const RealImage& img) {
    return Eigen::Map<const Eigen::ArrayXd>(img.data.data(), static_cast<Eigen::Index>(img.data.size()));
}

std::vector<double> gaussian_window(int size, double sigma) {
    std::vector<double> w(static_cast<std::size_t>(size * size));
    const int h = size / 2;
    double sum = 0.0;
    for (int j = 0; j < size; ++j) {
        for (int i = 0; i < size; ++i) {
            const double v = std::exp(-((i - h) * (i - h) + (j - h) * (j - h)) / (2.0 * sigma * sigma));
            w[static_cast<std::size_t>(i + size * j)] = v;
            sum += v;
        }
    }
    for (auto& v : w) v /= sum;
    return w;
}

// MATLAB-style symmetric extension: -1 -> 0, n -> n - 1.
int reflect(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

RealImage echo(const ImageSeries& s, int t) { return s.magnitude(t); }

double log_error_sq(const RealImage& x, const RealImage& ref, double& ref_sq) {
    const Eigen::ArrayXd lx = as_array(log_filter(x));
    const Eigen::ArrayXd lr = as_array(log_filter(ref));
    ref_sq = lr.square().sum();
    return (lx - lr).square().sum();
}

} // namespace

Eigen::ArrayXd magnitudes(const CMatrix& x) {
    return Eigen::Map<const Eigen::ArrayXcd>(x.data(), x.size()).abs();
}

double nrmse(const Eigen::ArrayXd& x, const Eigen::ArrayXd& ref) {
    check_sizes(x.size(), ref.size(), "nrmse");
    const double denom = std::sqrt(ref.square().sum());
    if (denom == 0.0) throw DataError("nrmse: reference is all zero");
    return std::sqrt((x - ref).square().sum()) / denom;
}

double nrmse(const RealImage& x, const RealImage& ref) {
    require_same_grid(x.grid, ref.grid, "nrmse");
    return nrmse(as_array(x), as_array(ref));
}

double nrmse(const ImageSeries& x, const ImageSeries& ref) {
    require_same_grid(x.grid(), ref.grid(), "nrmse");
    check_sizes(x.data().size(), ref.data().size(), "nrmse");
    return nrmse(magnitudes(x.data()), magnitudes(ref.data()));
}

double psnr(const Eigen::ArrayXd& x, const Eigen::ArrayXd& ref) {
    check_sizes(x.size(), ref.size(), "psnr");
    const double peak = ref.size() > 0 ? ref.abs().maxCoeff() : 0.0;
    if (peak == 0.0) throw DataError("psnr: reference is all zero");
    const double rmse = std::sqrt((x - ref).square().mean());
    if (rmse == 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 20.0 * std::log10(peak / rmse));
}

double psnr(const RealImage& x, const RealImage& ref) {
    require_same_grid(x.grid, ref.grid, "psnr");
    return psnr(as_array(x), as_array(ref));
}

double psnr(const ImageSeries& x, const ImageSeries& ref) {
    require_same_grid(x.grid(), ref.grid(), "psnr");
    check_sizes(x.data().size(), ref.data().size(), "psnr");
    return psnr(magnitudes(x.data()), magnitudes(ref.data()));
}

double ssim(const RealImage& x, const RealImage& ref) {
    require_same_grid(x.grid, ref.grid, "ssim");
    constexpr int kWin = 11;
    const Grid& g = x.grid;
    if (g.nx < kWin || g.ny < kWin) throw DataError("ssim: image is smaller than the 11 x 11 window");
    const auto w = gaussian_window(kWin, 1.5);
    double range = as_array(ref).abs().maxCoeff();
    if (range == 0.0) range = 1.0;
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);

    double total = 0.0;
    long count = 0;
    for (int z = 0; z < g.nz; ++z) {
        for (int y0 = 0; y0 + kWin <= g.ny; ++y0) {
            for (int x0 = 0; x0 + kWin <= g.nx; ++x0) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                for (int j = 0; j < kWin; ++j) {
                    for (int i = 0; i < kWin; ++i) {
                        const double wt = w[static_cast<std::size_t>(i + kWin * j)];
                        const auto v = g.index(x0 + i, y0 + j, z);
                        const double a = x[v];
                        const double b = ref[v];
                        mx += wt * a;
                        my += wt * b;
                        sxx += wt * a * a;
                        syy += wt * b * b;
                        sxy += wt * a * b;
                    }
                }
                sxx -= mx * mx;
                syy -= my * my;
                sxy -= mx * my;
                total += ((2 * mx * my + c1) * (2 * sxy + c2)) / ((mx * mx + my * my + c1) * (sxx + syy + c2));
                ++count;
            }
        }
    }
    return total / static_cast<double>(count);
}

std::vector<double> log_kernel(int size, double sigma) {
    const int h = size / 2;
    std::vector<double> gauss(static_cast<std::size_t>(size * size));
    double gsum = 0.0;
    for (int j = 0; j < size; ++j) {
        for (int i = 0; i < size; ++i) {
            const double r2 = (i - h) * (i - h) + (j - h) * (j - h);
            gauss[static_cast<std::size_t>(i + size * j)] = std::exp(-r2 / (2.0 * sigma * sigma));
            gsum += gauss[static_cast<std::size_t>(i + size * j)];
        }
    }
    std::vector<double> k(gauss.size());
    double ksum = 0.0;
    const double s4 = std::pow(sigma, 4);
    for (int j = 0; j < size; ++j) {
        for (int i = 0; i < size; ++i) {
            const double r2 = (i - h) * (i - h) + (j - h) * (j - h);
            const auto idx = static_cast<std::size_t>(i + size * j);
            k[idx] = gauss[idx] / gsum * (r2 - 2.0 * sigma * sigma) / s4;
            ksum += k[idx];
        }
    }
    for (auto& v : k) v -= ksum / static_cast<double>(k.size());
    return k;
}

RealImage log_filter(const RealImage& img) {
    static const std::vector<double> kernel = log_kernel();
    constexpr int size = 15;
    constexpr int h = size / 2;
    const Grid& g = img.grid;
    RealImage out(g);
    for (int z = 0; z < g.nz; ++z) {
        for (int y = 0; y < g.ny; ++y) {
            for (int x = 0; x < g.nx; ++x) {
                double acc = 0.0;
                for (int j = 0; j < size; ++j) {
                    const int yy = reflect(y + j - h, g.ny);
                    for (int i = 0; i < size; ++i) {
                        const int xx = reflect(x + i - h, g.nx);
                        acc += kernel[static_cast<std::size_t>(i + size * j)] * img[g.index(xx, yy, z)];
                    }
                }
                out[g.index(x, y, z)] = acc;
            }
        }
    }
    return out;
}

double hfen(const RealImage& x, const RealImage& ref) {
    require_same_grid(x.grid, ref.grid, "hfen");
    double ref_sq = 0.0;
    const double err_sq = log_error_sq(x, ref, ref_sq);
    if (ref_sq == 0.0) throw DataError("hfen: reference has no high-frequency content");
    return std::sqrt(err_sq / ref_sq);
}

std::string MetricReport::to_json() const {
    nlohmann::json j;
    j["reference"] = reference;
    j["nrmse"] = nrmse;
    j["psnr"] = psnr;
    j["ssim"] = ssim;
    j["hfen"] = hfen;
    j["per_tsl"] = {{"nrmse", nrmse_per_tsl}, {"psnr", psnr_per_tsl}, {"ssim", ssim_per_tsl}, {"hfen", hfen_per_tsl}};
    return j.dump(2);
}

std::string MetricReport::to_csv() const {
    std::ostringstream os;
    os.precision(10);
    os << "tsl_index,nrmse,psnr,ssim,hfen\n";
    for (std::size_t t = 0; t < nrmse_per_tsl.size(); ++t) {
        os << t << ',' << nrmse_per_tsl[t] << ',' << psnr_per_tsl[t] << ',' << ssim_per_tsl[t] << ','
           << hfen_per_tsl[t] << '\n';
    }
    os << "all," << nrmse << ',' << psnr << ',' << ssim << ',' << hfen << '\n';
    return os.str();
}

MetricReport evaluate(const ImageSeries& x, const ImageSeries& ref, const std::string& reference_name) {
    require_same_grid(x.grid(), ref.grid(), "evaluate");
    if (x.n_tsl() != ref.n_tsl()) throw DataError("evaluate: echo counts differ");
    MetricReport rep;
    rep.reference = reference_name;
    double err_sq = 0.0;
    double ref_sq = 0.0;
    for (int t = 0; t < x.n_tsl(); ++t) {
        const RealImage a = echo(x, t);
        const RealImage b = echo(ref, t);
        rep.nrmse_per_tsl.push_back(nrmse(a, b));
        rep.psnr_per_tsl.push_back(psnr(a, b));
        rep.ssim_per_tsl.push_back(ssim(a, b));
        double r = 0.0;
        const double e = log_error_sq(a, b, r);
        if (r == 0.0) throw DataError("hfen: reference has no high-frequency content");
        rep.hfen_per_tsl.push_back(std::sqrt(e / r));
        err_sq += e;
        ref_sq += r;
    }
    rep.nrmse = nrmse(x, ref);
    rep.psnr = psnr(x, ref);
    double s = 0.0;
    for (double v : rep.ssim_per_tsl) s += v;
    rep.ssim = s / x.n_tsl();
    rep.hfen = std::sqrt(err_sq / ref_sq);
    return rep;
}

} // namespace smart
