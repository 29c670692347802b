#include "smart/parametric.hpp"

#include "smart/errors.hpp"
#include "smart/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>

namespace smart {

namespace {

// Linear-interpolated percentile of sorted values, p in [0, 100].
double percentile(const std::vector<double>& sorted, double p) {
    if (sorted.size() == 1) return sorted.front();
    const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

void check_groups(const std::vector<Tensor3>& tensors, const std::vector<std::vector<Eigen::Index>>& groups,
                  const HankelSpec& spec) {
    if (tensors.size() != groups.size()) throw DataError("hankel: tensor count does not match the group count");
    for (std::size_t j = 0; j < tensors.size(); ++j) {
        const Dims3 want{static_cast<Eigen::Index>(groups[j].size()), spec.rows(), spec.k};
        if (tensors[j].dims() != want) {
            throw DataError("hankel: tensor of group " + std::to_string(j) + " has the wrong shape");
        }
    }
}

} // namespace

std::vector<Eigen::Index> TissuePartition::members(int group) const {
    std::vector<Eigen::Index> out;
    for (std::size_t v = 0; v < labels.size(); ++v) {
        if (labels[v] == group) out.push_back(static_cast<Eigen::Index>(v));
    }
    return out;
}

std::vector<std::vector<Eigen::Index>> TissuePartition::populated_groups() const {
    std::vector<std::vector<Eigen::Index>> all(static_cast<std::size_t>(n_groups));
    for (std::size_t v = 0; v < labels.size(); ++v) {
        if (labels[v] >= 0) all[static_cast<std::size_t>(labels[v])].push_back(static_cast<Eigen::Index>(v));
    }
    std::erase_if(all, [](const auto& g) { return g.empty(); });
    return all;
}

std::string TissuePartition::edges_json() const {
    nlohmann::json j;
    j["grid"] = {grid.nx, grid.ny, grid.nz};
    j["n_groups"] = n_groups;
    j["edges_ms"] = edges;
    j["background_label"] = 65535;
    return j.dump(2);
}

HankelSpec HankelSpec::for_echoes(int n_tsl) { return HankelSpec{n_tsl, (n_tsl + 1) / 2}; }

void HankelSpec::validate() const {
    if (n_tsl < 1 || k < 1 || k > n_tsl) throw ConfigError("hankel: k must lie in [1, n_tsl]");
}

TissuePartition cluster_tissues(const RealImage& map, const BinaryImage& support, int n_groups) {
    if (n_groups < 1) throw ConfigError("cluster_tissues: n_groups must be >= 1");
    require_same_grid(map.grid, support.grid, "cluster_tissues");
    std::vector<double> fg;
    for (Eigen::Index v = 0; v < map.grid.voxels(); ++v) {
        if (support[v]) fg.push_back(map[v]);
    }
    if (fg.empty()) throw DataError("cluster_tissues: support mask is empty");
    std::sort(fg.begin(), fg.end());

    TissuePartition part;
    part.grid = map.grid;
    part.labels.assign(static_cast<std::size_t>(map.grid.voxels()), kBackground);

    double lo = percentile(fg, 1.0);
    double hi = percentile(fg, 99.0);
    if (!(hi > lo)) {
        lo = fg.front();
        hi = fg.back();
    }
    if (!(hi > lo)) {
        // Every foreground value is identical: one populated group.
        part.n_groups = 1;
        part.edges = {lo, hi};
        for (Eigen::Index v = 0; v < map.grid.voxels(); ++v) {
            if (support[v]) part.labels[static_cast<std::size_t>(v)] = 0;
        }
        return part;
    }

    part.n_groups = n_groups;
    const double width = (hi - lo) / n_groups;
    part.edges.resize(static_cast<std::size_t>(n_groups) + 1);
    for (int g = 0; g <= n_groups; ++g) part.edges[static_cast<std::size_t>(g)] = lo + g * width;
    part.edges.back() = hi;
    for (Eigen::Index v = 0; v < map.grid.voxels(); ++v) {
        if (!support[v]) continue;
        const double value = map[v];
        int bin = static_cast<int>(std::floor((value - lo) / width));
        if (!std::isfinite(value)) bin = value > 0 ? n_groups - 1 : 0;
        part.labels[static_cast<std::size_t>(v)] = std::clamp(bin, 0, n_groups - 1);
    }
    return part;
}

BinaryImage support_from_first_echo(const CMatrix& x, const Grid& grid, double fraction) {
    BinaryImage out(grid);
    if (x.rows() != grid.voxels() || x.cols() < 1) throw DataError("support_from_first_echo: shape mismatch");
    const double peak = x.col(0).cwiseAbs().maxCoeff();
    if (peak <= 0.0) return out;
    for (Eigen::Index v = 0; v < grid.voxels(); ++v) {
        out.data[static_cast<std::size_t>(v)] = std::abs(x(v, 0)) > fraction * peak ? 1 : 0;
    }
    return out;
}

CMatrix build_hankel(const CVector& signal, const HankelSpec& spec) {
    spec.validate();
    if (signal.size() != spec.n_tsl) throw DataError("build_hankel: signal length does not match the spec");
    CMatrix h(spec.rows(), spec.k);
    for (int p = 0; p < spec.rows(); ++p) {
        for (int q = 0; q < spec.k; ++q) h(p, q) = signal[p + q];
    }
    return h;
}

std::vector<Tensor3> extract_parametric_tensors(const CMatrix& x, const std::vector<std::vector<Eigen::Index>>& groups,
                                                const HankelSpec& spec) {
    spec.validate();
    if (x.cols() != spec.n_tsl) throw DataError("extract_parametric_tensors: echo count does not match the spec");
    std::vector<Tensor3> out(groups.size());
    parallel_for(groups.size(), [&](std::size_t j) {
        const auto& vox = groups[j];
        const auto n = static_cast<Eigen::Index>(vox.size());
        Tensor3 t({n, spec.rows(), spec.k});
        for (int q = 0; q < spec.k; ++q) {
            for (int p = 0; p < spec.rows(); ++p) {
                for (Eigen::Index i = 0; i < n; ++i) t(i, p, q) = x(vox[static_cast<std::size_t>(i)], p + q);
            }
        }
        out[j] = std::move(t);
    });
    return out;
}

std::vector<Tensor3> extract_parametric_tensors(const ImageSeries& x, const TissuePartition& part,
                                                const HankelSpec& spec) {
    require_same_grid(x.grid(), part.grid, "extract_parametric_tensors");
    return extract_parametric_tensors(x.data(), part.populated_groups(), spec);
}

CMatrix hankel_scatter(const std::vector<Tensor3>& tensors, const std::vector<std::vector<Eigen::Index>>& groups,
                       const HankelSpec& spec, Eigen::Index n_voxels) {
    check_groups(tensors, groups, spec);
    CMatrix out = CMatrix::Zero(n_voxels, spec.n_tsl);
    for (std::size_t j = 0; j < tensors.size(); ++j) {
        const auto& vox = groups[j];
        for (int q = 0; q < spec.k; ++q) {
            for (int p = 0; p < spec.rows(); ++p) {
                for (std::size_t i = 0; i < vox.size(); ++i) {
                    out(vox[i], p + q) += tensors[j](static_cast<Eigen::Index>(i), p, q);
                }
            }
        }
    }
    return out;
}

std::vector<int> antidiagonal_multiplicity(const HankelSpec& spec) {
    spec.validate();
    std::vector<int> m(static_cast<std::size_t>(spec.n_tsl), 0);
    for (int p = 0; p < spec.rows(); ++p) {
        for (int q = 0; q < spec.k; ++q) ++m[static_cast<std::size_t>(p + q)];
    }
    return m;
}

CMatrix hankel_average(const std::vector<Tensor3>& tensors, const std::vector<std::vector<Eigen::Index>>& groups,
                       const HankelSpec& spec, Eigen::Index n_voxels) {
    CMatrix out = hankel_scatter(tensors, groups, spec, n_voxels);
    const auto mult = antidiagonal_multiplicity(spec);
    for (int m = 0; m < spec.n_tsl; ++m) out.col(m) /= static_cast<double>(mult[static_cast<std::size_t>(m)]);
    return out;
}

ImageSeries hankel_adjoint(const std::vector<Tensor3>& tensors, const TissuePartition& part, const HankelSpec& spec,
                           const std::vector<double>& tsl_ms) {
    if (static_cast<int>(tsl_ms.size()) != spec.n_tsl) throw DataError("hankel_adjoint: echo count mismatch");
    return ImageSeries(part.grid, tsl_ms, hankel_average(tensors, part.populated_groups(), spec, part.grid.voxels()));
}

Eigen::ArrayXXi multiplicity_counts(const HankelSpec& spec, const TissuePartition& part) {
    const auto mult = antidiagonal_multiplicity(spec);
    Eigen::ArrayXXi w = Eigen::ArrayXXi::Zero(part.grid.voxels(), spec.n_tsl);
    for (std::size_t v = 0; v < part.labels.size(); ++v) {
        if (part.labels[v] == kBackground) continue;
        for (int m = 0; m < spec.n_tsl; ++m) w(static_cast<Eigen::Index>(v), m) = mult[static_cast<std::size_t>(m)];
    }
    return w;
}

} // namespace smart
