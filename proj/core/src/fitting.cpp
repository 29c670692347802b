#include "smart/fitting.hpp"

#include "smart/errors.hpp"
#include "smart/parallel.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace smart {

namespace {

void check_tsl(const std::vector<double>& tsl_ms, Eigen::Index n) {
    if (static_cast<Eigen::Index>(tsl_ms.size()) != n) throw DataError("fit: signal length does not match the TSL list");
    if (tsl_ms.size() < 2) throw DataError("fit: at least two echoes are required");
}

double sum_squares(const Eigen::VectorXd& signal, const MonoExpParams& p, const std::vector<double>& tsl_ms) {
    return (mono_model(p, tsl_ms) - signal).squaredNorm();
}

MonoExpParams initial_guess(const Eigen::VectorXd& s, const std::vector<double>& tsl_ms) {
    const double first = s[0];
    const double last = s[s.size() - 1];
    double t0 = kT1rhoMax;
    if (first > 0.0 && last > 0.0 && last < first) {
        t0 = (tsl_ms.back() - tsl_ms.front()) / std::log(first / last);
    }
    t0 = std::clamp(t0, kT1rhoMin, kT1rhoMax);
    return {first, t0};
}

} // namespace

Eigen::VectorXd mono_model(const MonoExpParams& p, const std::vector<double>& tsl_ms) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(tsl_ms.size()));
    for (std::size_t k = 0; k < tsl_ms.size(); ++k) out[static_cast<Eigen::Index>(k)] = p.m0 * std::exp(-tsl_ms[k] / p.t1rho);
    return out;
}

Eigen::VectorXd bi_model(const BiExpParams& p, const std::vector<double>& tsl_ms) {
    Eigen::VectorXd out(static_cast<Eigen::Index>(tsl_ms.size()));
    for (std::size_t k = 0; k < tsl_ms.size(); ++k) {
        const double t = tsl_ms[k];
        out[static_cast<Eigen::Index>(k)] =
            p.m0 * ((1.0 - p.alpha) * std::exp(-t / p.t1rho_short) + p.alpha * std::exp(-t / p.t1rho_long));
    }
    return out;
}

Eigen::MatrixX2d mono_jacobian(const MonoExpParams& p, const std::vector<double>& tsl_ms) {
    Eigen::MatrixX2d j(static_cast<Eigen::Index>(tsl_ms.size()), 2);
    for (std::size_t k = 0; k < tsl_ms.size(); ++k) {
        const double t = tsl_ms[k];
        const double e = std::exp(-t / p.t1rho);
        const auto r = static_cast<Eigen::Index>(k);
        j(r, 0) = e;
        j(r, 1) = p.m0 * e * t / (p.t1rho * p.t1rho);
    }
    return j;
}

MonoFit fit_mono(const Eigen::VectorXd& signal, const std::vector<double>& tsl_ms, const LmOptions& opts) {
    check_tsl(tsl_ms, signal.size());
    MonoFit fit;
    if (!signal.allFinite() || signal.cwiseAbs().maxCoeff() == 0.0) {
        fit.params = {0.0, kT1rhoMin};
        fit.degenerate = true;
        fit.clamped = true;
        fit.residual = signal.allFinite() ? 0.0 : std::numeric_limits<double>::quiet_NaN();
        return fit;
    }

    MonoExpParams p = initial_guess(signal, tsl_ms);
    double cost = sum_squares(signal, p, tsl_ms);
    fit.residual_history.push_back(cost);
    const double floor = 1e-30 * signal.squaredNorm();
    double lambda = opts.lambda0;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        if (cost <= floor) {
            fit.converged = true;
            break;
        }
        const Eigen::MatrixX2d j = mono_jacobian(p, tsl_ms);
        const Eigen::VectorXd r = signal - mono_model(p, tsl_ms);
        const Eigen::Matrix2d jtj = j.transpose() * j;
        const Eigen::Vector2d g = j.transpose() * r;
        bool accepted = false;
        while (lambda < 1e16) {
            Eigen::Matrix2d a = jtj;
            a.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-300);
            const Eigen::Vector2d step = a.ldlt().solve(g);
            MonoExpParams trial{p.m0 + step[0], std::clamp(p.t1rho + step[1], kT1rhoMin, kT1rhoMax)};
            const double trial_cost = sum_squares(signal, trial, tsl_ms);
            if (std::isfinite(trial_cost) && trial_cost <= cost) {
                const double change = cost > 0.0 ? (cost - trial_cost) / cost : 0.0;
                p = trial;
                cost = trial_cost;
                fit.residual_history.push_back(cost);
                lambda = std::max(lambda / 10.0, 1e-12);
                accepted = true;
                if (change < opts.rel_tol) fit.converged = true;
                break;
            }
            lambda *= 10.0;
        }
        // No downhill step at any damping: a stationary point (or a bound).
        if (!accepted) fit.converged = true;
        if (fit.converged) {
            ++it;
            break;
        }
    }
    fit.params = p;
    fit.residual = cost;
    fit.iterations = it;
    fit.clamped = p.t1rho <= kT1rhoMin || p.t1rho >= kT1rhoMax;
    return fit;
}

MonoFit fit_mono(const CVector& signal, const std::vector<double>& tsl_ms, const LmOptions& opts) {
    return fit_mono(Eigen::VectorXd(signal.cwiseAbs()), tsl_ms, opts);
}

std::string FitQc::to_json() const {
    nlohmann::json j;
    j["fitted"] = fitted;
    j["non_converged"] = non_converged;
    j["degenerate"] = degenerate;
    j["clamped"] = clamped;
    return j.dump(2);
}

MapFit fit_map(const ImageSeries& x, const BinaryImage& support, const LmOptions& opts) {
    require_same_grid(x.grid(), support.grid, "fit_map");
    const Eigen::Index n = x.voxels();
    MapFit out{RealImage(x.grid()), RealImage(x.grid()), {}};
    std::vector<std::uint8_t> flags(static_cast<std::size_t>(n), 0);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t vi) {
        const auto v = static_cast<Eigen::Index>(vi);
        if (!support[v]) return;
        const MonoFit f = fit_mono(CVector(x.data().row(v).transpose()), x.tsl_ms(), opts);
        out.t1rho[v] = f.params.t1rho;
        out.m0[v] = f.params.m0;
        flags[vi] = static_cast<std::uint8_t>(1 | (f.converged ? 0 : 2) | (f.degenerate ? 4 : 0) | (f.clamped ? 8 : 0));
    });
    for (auto f : flags) {
        if (!(f & 1)) continue;
        ++out.qc.fitted;
        if (f & 2) ++out.qc.non_converged;
        if (f & 4) ++out.qc.degenerate;
        if (f & 8) ++out.qc.clamped;
    }
    return out;
}

} // namespace smart
