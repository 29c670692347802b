#include "smart/phantom.hpp"

#include "smart/errors.hpp"
#include "smart/parallel.hpp"
#include "smart/parametric.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace smart {

namespace {

const double kMonoT1rho[5] = {77, 78, 79, 82, 89};
const double kShortT1rho[5] = {18, 19, 20, 21, 22};
constexpr double kLongFraction = 0.91;

int rank_from_gram(const Eigen::MatrixXcd& gram, double ratio) {
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(gram, Eigen::EigenvaluesOnly);
    const Eigen::VectorXd ev = es.eigenvalues().cwiseMax(0.0);
    const double top = ev.maxCoeff();
    if (top <= 0.0) return 0;
    // Compare singular values: sqrt(ev) >= ratio * sqrt(top).
    int rank = 0;
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (ev[i] >= ratio * ratio * top) ++rank;
    }
    return rank;
}

void add_roi_noise(CMatrix& x, const std::vector<Eigen::Index>& roi, double sigma, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, sigma / std::sqrt(2.0));
    for (Eigen::Index t = 0; t < x.cols(); ++t) {
        for (auto v : roi) {
            const double re = n(rng);
            const double im = n(rng);
            x(v, t) += Complex(re, im);
        }
    }
}

} // namespace

PhantomSpec PhantomSpec::standard(DecayModel model) {
    PhantomSpec spec;
    spec.model = model;
    const double cx = (spec.grid.nx - 1) / 2.0;
    const double cy = (spec.grid.ny - 1) / 2.0;
    for (int i = 0; i < 5; ++i) {
        const double angle = 2.0 * std::numbers::pi * i / 5.0 - std::numbers::pi / 2.0;
        Tube tube;
        tube.cx = cx + 60.0 * std::cos(angle);
        tube.cy = cy + 60.0 * std::sin(angle);
        tube.radius = 20.0;
        tube.params.m0 = 1.0;
        tube.params.t1rho_long = kMonoT1rho[i];
        if (model == DecayModel::bi) {
            tube.params.t1rho_short = kShortT1rho[i];
            tube.params.alpha = kLongFraction;
        } else {
            tube.params.t1rho_short = kShortT1rho[i];
            tube.params.alpha = 1.0;
        }
        spec.tubes.push_back(tube);
    }
    return spec;
}

void PhantomSpec::validate() const {
    if (grid.nx < 1 || grid.ny < 1 || grid.nz < 1) throw ConfigError("phantom: grid dimensions must be positive");
    if (tsl_ms.size() < 2) throw ConfigError("phantom: at least two TSLs are required");
    for (std::size_t k = 0; k < tsl_ms.size(); ++k) {
        if (!(tsl_ms[k] > 0.0) || (k > 0 && !(tsl_ms[k] > tsl_ms[k - 1]))) {
            throw ConfigError("phantom: TSLs must be positive and strictly increasing");
        }
    }
    for (std::size_t i = 0; i < tubes.size(); ++i) {
        const Tube& t = tubes[i];
        if (!(t.radius > 0.0)) throw ConfigError("phantom: tube radius must be positive");
        if (t.cx - t.radius < 0.0 || t.cy - t.radius < 0.0 || t.cx + t.radius > grid.nx - 1 ||
            t.cy + t.radius > grid.ny - 1) {
            throw ConfigError("phantom: tube " + std::to_string(i + 1) + " does not fit inside the grid");
        }
        if (!(t.params.m0 >= 0.0) || !(t.params.t1rho_long > 0.0)) {
            throw ConfigError("phantom: tube " + std::to_string(i + 1) + " needs M0 >= 0 and T1rho > 0");
        }
        if (model == DecayModel::bi &&
            (!(t.params.t1rho_short > 0.0) || !(t.params.t1rho_long > t.params.t1rho_short) ||
             !(t.params.alpha >= 0.0 && t.params.alpha <= 1.0))) {
            throw ConfigError("phantom: tube " + std::to_string(i + 1) +
                              " needs T_long > T_short > 0 and alpha in [0, 1]");
        }
        for (std::size_t j = 0; j < i; ++j) {
            const double d = std::hypot(t.cx - tubes[j].cx, t.cy - tubes[j].cy);
            if (d <= t.radius + tubes[j].radius) {
                throw ConfigError("phantom: tubes " + std::to_string(j + 1) + " and " + std::to_string(i + 1) +
                                  " overlap");
            }
        }
    }
}

Phantom generate_phantom(const PhantomSpec& spec) {
    spec.validate();
    const Grid& g = spec.grid;
    Phantom ph;
    CMatrix data = CMatrix::Zero(g.voxels(), static_cast<Eigen::Index>(spec.tsl_ms.size()));
    ph.t1rho = RealImage(g);
    ph.t1rho_short = RealImage(g);
    ph.alpha = RealImage(g);
    ph.m0 = RealImage(g);
    ph.tube_of.assign(static_cast<std::size_t>(g.voxels()), -1);
    ph.support = BinaryImage(g);

    std::vector<Eigen::VectorXd> curves;
    for (const Tube& t : spec.tubes) {
        if (spec.model == DecayModel::mono) {
            curves.push_back(mono_model({t.params.m0, t.params.t1rho_long}, spec.tsl_ms));
        } else {
            curves.push_back(bi_model(t.params, spec.tsl_ms));
        }
    }
    for (int z = 0; z < g.nz; ++z) {
        for (int y = 0; y < g.ny; ++y) {
            for (int x = 0; x < g.nx; ++x) {
                for (std::size_t i = 0; i < spec.tubes.size(); ++i) {
                    const Tube& t = spec.tubes[i];
                    const double dx = x - t.cx;
                    const double dy = y - t.cy;
                    if (dx * dx + dy * dy > t.radius * t.radius) continue;
                    const auto v = g.index(x, y, z);
                    data.row(v) = curves[i].transpose().cast<Complex>();
                    ph.tube_of[static_cast<std::size_t>(v)] = static_cast<int>(i);
                    ph.support.data[static_cast<std::size_t>(v)] = 1;
                    ph.t1rho[v] = t.params.t1rho_long;
                    ph.m0[v] = t.params.m0;
                    if (spec.model == DecayModel::bi) {
                        ph.t1rho_short[v] = t.params.t1rho_short;
                        ph.alpha[v] = t.params.alpha;
                    } else {
                        ph.alpha[v] = 1.0;
                    }
                    break;
                }
            }
        }
    }
    ph.images = ImageSeries(g, spec.tsl_ms, std::move(data));
    return ph;
}

int estimate_rank(const CMatrix& m, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("estimate_rank: ratio must lie in (0, 1)");
    if (m.size() == 0) return 0;
    const Eigen::JacobiSVD<CMatrix> svd(m);
    const Eigen::VectorXd s = svd.singularValues();
    if (s[0] <= 0.0) return 0;
    int rank = 0;
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s[i] >= ratio * s[0]) ++rank;
    }
    return rank;
}

void RankExperimentConfig::validate() const {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("rank experiment: ratio must lie in (0, 1)");
    if (runs < 1) throw ConfigError("rank experiment: runs must be >= 1");
    if (snr.empty()) throw ConfigError("rank experiment: the SNR list is empty");
    for (double s : snr) {
        if (!(s > 0.0)) throw ConfigError("rank experiment: SNR values must be positive");
    }
    if (!(undersampling >= 1.0)) throw ConfigError("rank experiment: undersampling must be >= 1");
}

TubeRanks tube_ranks(const CMatrix& x, const Phantom& phantom, double ratio) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("tube_ranks: ratio must lie in (0, 1)");
    int n_tubes = 0;
    for (int t : phantom.tube_of) n_tubes = std::max(n_tubes, t + 1);
    const HankelSpec spec = HankelSpec::for_echoes(static_cast<int>(x.cols()));
    std::vector<std::vector<Eigen::Index>> roi(static_cast<std::size_t>(n_tubes));
    for (std::size_t v = 0; v < phantom.tube_of.size(); ++v) {
        if (phantom.tube_of[v] >= 0) roi[static_cast<std::size_t>(phantom.tube_of[v])].push_back(static_cast<Eigen::Index>(v));
    }
    TubeRanks out;
    for (const auto& vox : roi) {
        Eigen::MatrixXcd block_gram = Eigen::MatrixXcd::Zero(spec.rows(), spec.rows());
        double rank_sum = 0.0;
        for (auto v : vox) {
            const CMatrix h = build_hankel(CVector(x.row(v).transpose()), spec);
            rank_sum += rank_from_gram(h * h.adjoint(), ratio);
            block_gram += h * h.adjoint();
        }
        out.mean_pixel_rank.push_back(vox.empty() ? 0.0 : rank_sum / static_cast<double>(vox.size()));
        out.block_rank.push_back(rank_from_gram(block_gram, ratio));
    }
    return out;
}

std::vector<RankRow> rank_experiment(const PhantomSpec& spec, const RankExperimentConfig& cfg) {
    cfg.validate();
    const Phantom ph = generate_phantom(spec);
    const CMatrix& clean = ph.images.data();
    const double mean_mag = clean.cwiseAbs().mean();
    std::vector<Eigen::Index> roi;
    for (std::size_t v = 0; v < ph.tube_of.size(); ++v) {
        if (ph.tube_of[v] >= 0) roi.push_back(static_cast<Eigen::Index>(v));
    }
    const std::size_t n_tubes = spec.tubes.size();
    const std::size_t n_snr = cfg.snr.size();
    const auto runs = static_cast<std::size_t>(cfg.runs);

    SamplingMask mask;
    if (cfg.undersampling > 1.0) mask = make_mask_1d(spec.grid, static_cast<int>(spec.tsl_ms.size()), cfg.undersampling, -1, cfg.seed);

    // results[(s * runs + r)] holds the per-tube ranks of one Monte-Carlo run.
    std::vector<TubeRanks> results(n_snr * runs);
    parallel_for(n_snr * runs, [&](std::size_t job) {
        const std::size_t s = job / runs;
        const std::size_t r = job % runs;
        std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                          static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(r)};
        std::mt19937_64 rng(seq);
        if (cfg.undersampling > 1.0) {
            KSpaceData y = forward(ph.images, CoilSensitivities::identity(), mask);
            y = add_noise(y, cfg.snr[s], rng());
            const ImageSeries zf = adjoint(y, CoilSensitivities::identity(), spec.tsl_ms);
            results[job] = tube_ranks(zf.data(), ph, cfg.ratio);
        } else {
            CMatrix noisy = clean;
            add_roi_noise(noisy, roi, mean_mag / cfg.snr[s], rng);
            results[job] = tube_ranks(noisy, ph, cfg.ratio);
        }
    });

    std::vector<RankRow> rows;
    for (std::size_t s = 0; s < n_snr; ++s) {
        for (std::size_t t = 0; t < n_tubes; ++t) {
            double sum = 0.0;
            double sum_sq = 0.0;
            double block = 0.0;
            for (std::size_t r = 0; r < runs; ++r) {
                const auto& res = results[s * runs + r];
                const double p = res.mean_pixel_rank[t];
                sum += p;
                sum_sq += p * p;
                block += res.block_rank[t];
            }
            const double n = static_cast<double>(runs);
            const double mean = sum / n;
            const double var = runs > 1 ? std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0)) : 0.0;
            rows.push_back({static_cast<int>(t) + 1, cfg.snr[s], mean, block / n, std::sqrt(var / n), cfg.runs, cfg.seed});
        }
    }
    return rows;
}

std::string rank_csv(const std::vector<RankRow>& rows) {
    std::ostringstream os;
    os.precision(10);
    os << "tube_id,snr,mean_pixel_rank,block_rank,stderr_pixel_rank,runs,seed\n";
    for (const auto& r : rows) {
        os << r.tube_id << ',' << r.snr << ',' << r.mean_pixel_rank << ',' << r.block_rank << ','
           << r.stderr_pixel_rank << ',' << r.runs << ',' << r.seed << '\n';
    }
    return os.str();
}

KSpaceData undersample_experiment(const Phantom& phantom, double r, std::uint64_t seed, const std::string& pattern) {
    const Grid& g = phantom.images.grid();
    const int n_tsl = phantom.images.n_tsl();
    SamplingMask mask;
    if (r <= 1.0) {
        mask = SamplingMask::full(g, n_tsl);
    } else if (pattern == "1d") {
        mask = make_mask_1d(g, n_tsl, r, -1, seed);
    } else if (pattern == "poisson") {
        mask = make_mask_poisson(g, n_tsl, r, -1.0, seed);
    } else {
        throw ConfigError("undersample_experiment: unknown mask pattern '" + pattern + "'");
    }
    return forward(phantom.images, CoilSensitivities::identity(), mask);
}

} // namespace smart
