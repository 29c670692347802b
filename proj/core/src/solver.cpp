#include "smart/solver.hpp"

#include "smart/errors.hpp"
#include "smart/fitting.hpp"
#include "smart/parallel.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace smart {

namespace {

RealImage first_echo_magnitude(const CMatrix& x, const Grid& grid) {
    RealImage img(grid);
    for (Eigen::Index v = 0; v < grid.voxels(); ++v) img[v] = std::abs(x(v, 0));
    return img;
}

std::vector<Tensor3> zeros_like(const std::vector<Tensor3>& ts) {
    std::vector<Tensor3> out;
    out.reserve(ts.size());
    for (const auto& t : ts) out.push_back(Tensor3::Zero(t.dims()));
    return out;
}

bool same_members(const PatchGroup& a, const PatchGroup& b) {
    if (a.members.size() != b.members.size()) return false;
    for (std::size_t m = 0; m < a.members.size(); ++m) {
        if (a.members[m].corner != b.members[m].corner) return false;
    }
    return true;
}

// Wraps a subproblem so failures name the iteration and the step.
template <class F>
auto guarded(int iteration, const char* step, F&& f) {
    try {
        return f();
    } catch (const ConfigError& e) {
        throw ConfigError("iteration " + std::to_string(iteration) + ", " + step + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError("iteration " + std::to_string(iteration) + ", " + step + ": " + e.what());
    } catch (const Error& e) {
        throw NumericalError("iteration " + std::to_string(iteration) + ", " + step + ": " + e.what());
    }
}

} // namespace

ReconMode parse_mode(const std::string& name) {
    if (name == "smart") return ReconMode::smart;
    if (name == "spatial-only" || name == "spatial_only") return ReconMode::spatial_only;
    if (name == "parametric-only" || name == "parametric_only") return ReconMode::parametric_only;
    throw ConfigError("unknown reconstruction mode '" + name + "'");
}

Consensus parse_consensus(const std::string& name) {
    if (name == "average") return Consensus::average;
    if (name == "scatter") return Consensus::scatter;
    throw ConfigError("unknown consensus '" + name + "' (expected average or scatter)");
}

std::string to_string(Consensus c) { return c == Consensus::scatter ? "scatter" : "average"; }

std::string to_string(ReconMode mode) {
    switch (mode) {
    case ReconMode::smart: return "smart";
    case ReconMode::spatial_only: return "spatial-only";
    case ReconMode::parametric_only: return "parametric-only";
    }
    return "smart";
}

ReconConfig ReconConfig::defaults_for(const Grid& grid) {
    ReconConfig cfg;
    cfg.patch = PatchConfig::defaults_for(grid);
    if (grid.is3d()) cfg.lambda1 = {0.65, 0.435, 0.435};
    return cfg;
}

void ReconConfig::validate(const Grid& grid, int n_tsl) const {
    std::ostringstream os;
    if (admm_iters < 1) os << "admm_iters must be >= 1; ";
    if (cg_iters < 1) os << "cg_iters must be >= 1; ";
    if (!(cg_tol >= 0.0)) os << "cg_tol must be >= 0; ";
    for (double l : lambda1) {
        if (!(l >= 0.0)) os << "lambda1 entries must be >= 0; ";
    }
    for (double l : lambda2) {
        if (!(l >= 0.0)) os << "lambda2 entries must be >= 0; ";
    }
    if (!(mu1 >= 0.0) || !(mu2 >= 0.0)) os << "mu1 and mu2 must be >= 0; ";
    if (n_groups < 1) os << "n_groups must be >= 1; ";
    if (hankel_k < 0 || hankel_k > n_tsl) os << "hankel_k must lie in [0, n_tsl]; ";
    if (refit_period < 1) os << "refit_period must be >= 1; ";
    if (!(support_fraction >= 0.0 && support_fraction < 1.0)) os << "support_fraction must lie in [0, 1); ";
    if (!os.str().empty()) throw ConfigError("recon config: " + os.str());
    if (mode != ReconMode::parametric_only) patch.validate(grid);
}

CMatrix solve_p2(SolverState& state, const ReconConfig& cfg) {
    const int n_tsl = static_cast<int>(state.x.cols());
    auto tensors = extract_tensors(state.x, state.patches);
    if (state.alpha1.size() != tensors.size()) throw DataError("solve_p2: multipliers do not conform to the patch groups");
    parallel_for(tensors.size(), [&](std::size_t g) {
        if (cfg.mu1 > 0.0) {
            Tensor3 target = tensors[g];
            target.data() += state.alpha1[g].data() / cfg.mu1;
            tensors[g] = hosvd_denoise(target, cfg.lambda1, cfg.threshold_rule);
        } else {
            tensors[g] = hosvd_denoise(tensors[g], cfg.lambda1, cfg.threshold_rule);
        }
    });
    state.t = std::move(tensors);
    return aggregate_patches(state.t, state.patches, n_tsl);
}

CMatrix solve_p3(SolverState& state, const ReconConfig& cfg) {
    auto tensors = extract_parametric_tensors(state.x, state.groups, state.hankel);
    if (state.alpha2.size() != tensors.size()) throw DataError("solve_p3: multipliers do not conform to the tissue groups");
    parallel_for(tensors.size(), [&](std::size_t j) {
        if (tensors[j].size() == 0) return;
        if (cfg.mu2 > 0.0) {
            Tensor3 target = tensors[j];
            target.data() += state.alpha2[j].data() / cfg.mu2;
            tensors[j] = hosvd_denoise(target, cfg.lambda2, cfg.threshold_rule);
        } else {
            tensors[j] = hosvd_denoise(tensors[j], cfg.lambda2, cfg.threshold_rule);
        }
    });
    state.z = std::move(tensors);
    return hankel_average(state.z, state.groups, state.hankel, state.grid.voxels());
}

Eigen::ArrayXXd p1_weights(const SolverState& state, const ReconConfig& cfg) {
    const Eigen::Index nv = state.grid.voxels();
    const auto n_tsl = static_cast<Eigen::Index>(state.tsl_ms.size());
    const bool scatter = cfg.consensus == Consensus::scatter;
    Eigen::ArrayXXd w = Eigen::ArrayXXd::Zero(nv, n_tsl);
    if (cfg.uses_spatial()) {
        const auto cov = coverage_counts(state.patches);
        for (Eigen::Index v = 0; v < nv; ++v) {
            const int c = cov[static_cast<std::size_t>(v)];
            if (c > 0) w.row(v) += cfg.mu1 * (scatter ? c : 1);
        }
    }
    if (cfg.uses_parametric()) {
        const auto mult = antidiagonal_multiplicity(state.hankel);
        for (const auto& g : state.groups) {
            for (auto v : g) {
                for (Eigen::Index m = 0; m < n_tsl; ++m) {
                    w(v, m) += cfg.mu2 * (scatter ? mult[static_cast<std::size_t>(m)] : 1);
                }
            }
        }
    }
    return w;
}

namespace {

// mu1 T - alpha1 and mu2 Z - alpha2: the tensors P1 pulls the iterate towards.
std::vector<Tensor3> spatial_target(const SolverState& state, const ReconConfig& cfg) {
    std::vector<Tensor3> target(state.t.size());
    for (std::size_t g = 0; g < target.size(); ++g) target[g] = cfg.mu1 * state.t[g] - state.alpha1[g];
    return target;
}

std::vector<Tensor3> parametric_target(const SolverState& state, const ReconConfig& cfg) {
    std::vector<Tensor3> target(state.z.size());
    for (std::size_t j = 0; j < target.size(); ++j) target[j] = cfg.mu2 * state.z[j] - state.alpha2[j];
    return target;
}

} // namespace

CMatrix p1_rhs(const SolverState& state, const CMatrix& ehy, const ReconConfig& cfg) {
    CMatrix rhs = ehy;
    const int n_tsl = static_cast<int>(ehy.cols());
    const bool scatter = cfg.consensus == Consensus::scatter;
    if (cfg.uses_spatial()) {
        const auto target = spatial_target(state, cfg);
        rhs += scatter ? scatter_patches(target, state.patches, n_tsl) : aggregate_patches(target, state.patches, n_tsl);
    }
    if (cfg.uses_parametric()) {
        const auto target = parametric_target(state, cfg);
        rhs += scatter ? hankel_scatter(target, state.groups, state.hankel, state.grid.voxels())
                       : hankel_average(target, state.groups, state.hankel, state.grid.voxels());
    }
    return rhs;
}

CgResult solve_p1(const SolverState& state, const EncodingOps& enc, const CMatrix& ehy, const ReconConfig& cfg) {
    const Eigen::ArrayXXd w = p1_weights(state, cfg);
    const CMatrix rhs = p1_rhs(state, ehy, cfg);
    const LinearOperator op = [&](const CMatrix& x) {
        CMatrix out = enc.normal(x);
        out.array() += w.cast<Complex>() * x.array();
        return out;
    };
    return conjugate_gradient(op, rhs, state.x, CgOptions{cfg.cg_iters, cfg.cg_tol});
}

void update_multipliers(SolverState& state, const ReconConfig& cfg) {
    if (cfg.uses_spatial()) {
        const auto px = extract_tensors(state.x, state.patches);
        if (px.size() != state.t.size() || state.alpha1.size() != state.t.size()) {
            throw DataError("update_multipliers: alpha1 does not conform to T");
        }
        for (std::size_t g = 0; g < px.size(); ++g) {
            if (px[g].dims() != state.t[g].dims() || state.alpha1[g].dims() != state.t[g].dims()) {
                throw DataError("update_multipliers: alpha1 does not conform to T");
            }
            state.alpha1[g].data() += cfg.mu1 * (px[g].data() - state.t[g].data());
        }
    }
    if (cfg.uses_parametric()) {
        const auto hx = extract_parametric_tensors(state.x, state.groups, state.hankel);
        if (hx.size() != state.z.size() || state.alpha2.size() != state.z.size()) {
            throw DataError("update_multipliers: alpha2 does not conform to Z");
        }
        for (std::size_t j = 0; j < hx.size(); ++j) {
            if (hx[j].dims() != state.z[j].dims() || state.alpha2[j].dims() != state.z[j].dims()) {
                throw DataError("update_multipliers: alpha2 does not conform to Z");
            }
            state.alpha2[j].data() += cfg.mu2 * (hx[j].data() - state.z[j].data());
        }
    }
}

double augmented_lagrangian(const SolverState& state, const EncodingOps& enc, const CMatrix& y, const ReconConfig& cfg) {
    double value = 0.5 * (enc.forward(state.x) - y).squaredNorm();
    const int n_tsl = static_cast<int>(state.x.cols());
    if (cfg.consensus == Consensus::average) {
        // With averaged adjoints the coupling is mu/2 ||X - avg(T - alpha / mu)||^2 over covered voxels.
        const Eigen::ArrayXXd w = p1_weights(state, cfg);
        CMatrix pull = CMatrix::Zero(state.x.rows(), state.x.cols());
        if (cfg.uses_spatial()) pull += aggregate_patches(spatial_target(state, cfg), state.patches, n_tsl);
        if (cfg.uses_parametric()) {
            pull += hankel_average(parametric_target(state, cfg), state.groups, state.hankel, state.grid.voxels());
        }
        for (Eigen::Index t = 0; t < state.x.cols(); ++t) {
            for (Eigen::Index v = 0; v < state.x.rows(); ++v) {
                if (w(v, t) > 0.0) value += 0.5 * std::norm(w(v, t) * state.x(v, t) - pull(v, t)) / w(v, t);
            }
        }
        return value;
    }
    if (cfg.uses_spatial()) {
        const auto px = extract_tensors(state.x, state.patches);
        for (std::size_t g = 0; g < px.size(); ++g) {
            const CVector d = px[g].data() - state.t[g].data() + state.alpha1[g].data() / cfg.mu1;
            value += 0.5 * cfg.mu1 * d.squaredNorm() - state.alpha1[g].data().squaredNorm() / (2.0 * cfg.mu1);
        }
    }
    if (cfg.uses_parametric()) {
        const auto hx = extract_parametric_tensors(state.x, state.groups, state.hankel);
        for (std::size_t j = 0; j < hx.size(); ++j) {
            const CVector d = hx[j].data() - state.z[j].data() + state.alpha2[j].data() / cfg.mu2;
            value += 0.5 * cfg.mu2 * d.squaredNorm() - state.alpha2[j].data().squaredNorm() / (2.0 * cfg.mu2);
        }
    }
    return value;
}

void refresh_patches(SolverState& state, const ReconConfig& cfg) {
    PatchGroupIndex next = block_match(first_echo_magnitude(state.x, state.grid), cfg.patch);
    const int n_tsl = static_cast<int>(state.x.cols());
    std::vector<Tensor3> alpha(next.groups.size());
    const bool have_old = state.alpha1.size() == state.patches.groups.size() && !state.alpha1.empty();
    // Groups whose members changed inherit the image-domain average of the old multipliers.
    std::vector<Tensor3> resampled;
    if (have_old) resampled = extract_tensors(aggregate_patches(state.alpha1, state.patches, n_tsl), next);
    for (std::size_t g = 0; g < next.groups.size(); ++g) {
        if (have_old && g < state.patches.groups.size() && same_members(state.patches.groups[g], next.groups[g])) {
            alpha[g] = std::move(state.alpha1[g]);
        } else if (have_old) {
            alpha[g] = std::move(resampled[g]);
        } else {
            alpha[g] = Tensor3::Zero({next.patch_voxels(), static_cast<Eigen::Index>(next.groups[g].members.size()),
                                      static_cast<Eigen::Index>(n_tsl)});
        }
    }
    state.patches = std::move(next);
    state.alpha1 = std::move(alpha);
    state.t = zeros_like(state.alpha1);
}

void refresh_partition(SolverState& state, const ReconConfig& cfg) {
    const ImageSeries current(state.grid, state.tsl_ms, state.x);
    const BinaryImage support = support_from_first_echo(state.x, state.grid, cfg.support_fraction);
    if (support.count() == 0) throw NumericalError("refresh_partition: the iterate has no foreground");
    state.t1rho = fit_map(current, support).t1rho;
    TissuePartition part = cluster_tissues(state.t1rho, support, cfg.n_groups);
    auto groups = part.populated_groups();

    const bool have_old = !state.alpha2.empty() && state.alpha2.size() == state.groups.size();
    std::map<std::vector<Eigen::Index>, std::size_t> old_index;
    CMatrix old_avg;
    if (have_old) {
        for (std::size_t j = 0; j < state.groups.size(); ++j) old_index.emplace(state.groups[j], j);
        old_avg = hankel_average(state.alpha2, state.groups, state.hankel, state.grid.voxels());
    }
    std::vector<Tensor3> alpha(groups.size());
    for (std::size_t j = 0; j < groups.size(); ++j) {
        if (have_old) {
            auto it = old_index.find(groups[j]);
            if (it != old_index.end()) {
                alpha[j] = std::move(state.alpha2[it->second]);
            } else {
                alpha[j] = std::move(extract_parametric_tensors(old_avg, {groups[j]}, state.hankel).front());
            }
        } else {
            alpha[j] = Tensor3::Zero({static_cast<Eigen::Index>(groups[j].size()), state.hankel.rows(), state.hankel.k});
        }
    }
    state.partition = std::move(part);
    state.groups = std::move(groups);
    state.alpha2 = std::move(alpha);
    state.z = zeros_like(state.alpha2);
}

ImageSeries zero_filled(const KSpaceData& y, const CoilSensitivities& coils, const std::vector<double>& tsl_ms) {
    return adjoint(y, coils, tsl_ms);
}

ReconResult reconstruct(const KSpaceData& y, const CoilSensitivities& coils, const std::vector<double>& tsl_ms,
                        const ReconConfig& cfg, const IterationObserver& observer) {
    if (static_cast<int>(tsl_ms.size()) != y.n_tsl) throw DataError("reconstruct: TSL list does not match the k-space");
    if (y.n_coils != coils.n_coils()) throw DataError("reconstruct: coil count does not match the sensitivities");
    cfg.validate(y.grid, y.n_tsl);

    const EncodingOps enc{y.grid, coils, y.mask};
    SolverState state;
    state.grid = y.grid;
    state.tsl_ms = tsl_ms;
    state.hankel = cfg.hankel_k > 0 ? HankelSpec{y.n_tsl, cfg.hankel_k} : HankelSpec::for_echoes(y.n_tsl);
    state.hankel.validate();

    // Work on data scaled to a unit-peak zero-filled image so absolute
    // thresholds mean the same thing for every acquisition.
    const CMatrix raw_ehy = enc.adjoint(y.data);
    const double peak = raw_ehy.size() > 0 ? raw_ehy.cwiseAbs().maxCoeff() : 0.0;
    const double scale = peak > 0.0 ? peak : 1.0;
    const CMatrix ys = y.data / scale;
    const CMatrix ehy = raw_ehy / scale;
    state.x = ehy;
    const double ynorm = ys.norm();

    ReconResult result;
    for (int n = 1; n <= cfg.admm_iters; ++n) {
        const CMatrix previous = state.x;
        if (cfg.uses_spatial()) {
            guarded(n, "block matching", [&] { refresh_patches(state, cfg); return 0; });
            guarded(n, "P2", [&] { return solve_p2(state, cfg); });
        }
        if (cfg.uses_parametric()) {
            if ((n - 1) % cfg.refit_period == 0) {
                guarded(n, "tissue partition", [&] { refresh_partition(state, cfg); return 0; });
            }
            guarded(n, "P3", [&] { return solve_p3(state, cfg); });
        }
        const CgResult cg = guarded(n, "P1", [&] { return solve_p1(state, enc, ehy, cfg); });
        if (!cg.x.allFinite()) throw NumericalError("iteration " + std::to_string(n) + ", P1: non-finite iterate");
        state.x = cg.x;
        guarded(n, "multiplier update", [&] { update_multipliers(state, cfg); return 0; });

        IterationRecord rec;
        rec.iteration = n;
        rec.relative_change = std::numeric_limits<double>::quiet_NaN();
        if (n >= 2) {
            const double denom = previous.norm();
            rec.relative_change = denom > 0.0 ? (state.x - previous).norm() / denom : 0.0;
            state.relative_change.push_back(rec.relative_change);
        }
        rec.data_residual = ynorm > 0.0 ? (enc.forward(state.x) - ys).norm() / ynorm : 0.0;
        rec.cg_iterations = cg.iterations;
        rec.cg_breakdown = cg.breakdown;
        rec.patch_groups = static_cast<int>(state.patches.groups.size());
        rec.tissue_groups = static_cast<int>(state.groups.size());
        result.history.push_back(rec);
        if (observer) observer(rec);
    }

    result.x = ImageSeries(state.grid, tsl_ms, state.x * scale);
    const BinaryImage support = support_from_first_echo(result.x.data(), state.grid, cfg.support_fraction);
    result.t1rho = support.count() > 0 ? fit_map(result.x, support).t1rho : RealImage(state.grid);
    result.relative_change = state.relative_change;
    result.patches = std::move(state.patches);
    result.partition = std::move(state.partition);
    return result;
}

std::string history_csv(const std::vector<IterationRecord>& history) {
    std::ostringstream os;
    os.precision(10);
    os << "iteration,relative_change,data_residual,cg_iterations,cg_breakdown,patch_groups,tissue_groups\n";
    for (const auto& r : history) {
        os << r.iteration << ',';
        if (std::isfinite(r.relative_change)) os << r.relative_change;
        os << ',' << r.data_residual << ',' << r.cg_iterations << ',' << (r.cg_breakdown ? 1 : 0) << ','
           << r.patch_groups << ',' << r.tissue_groups << '\n';
    }
    return os.str();
}

} // namespace smart
