#include "smart/patching.hpp"

#include "smart/errors.hpp"
#include "smart/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace smart {

void PatchConfig::validate(const Grid& grid) const {
    std::ostringstream os;
    const int min_dim = grid.is3d() ? std::min({grid.nx, grid.ny, grid.nz}) : std::min(grid.nx, grid.ny);
    if (b < 1 || b > min_dim) os << "patch size b=" << b << " must lie in [1, " << min_dim << "]; ";
    if (stride < 1) os << "stride must be >= 1; ";
    if (search_radius < 0) os << "search radius must be >= 0; ";
    if (!(lambda_m >= 0.0)) os << "lambda_m must be >= 0; ";
    if (np_max < 1) os << "np_max must be >= 1; ";
    if (!os.str().empty()) throw ConfigError("patch config: " + os.str());
}

PatchConfig PatchConfig::defaults_for(const Grid& grid) {
    PatchConfig cfg;
    if (grid.is3d()) {
        cfg.b = 5;
        cfg.search_radius = 8;
    }
    return cfg;
}

std::vector<Eigen::Index> PatchGroupIndex::patch_offsets() const {
    std::vector<Eigen::Index> off;
    off.reserve(static_cast<std::size_t>(patch_voxels()));
    for (int z = 0; z < extent[2]; ++z) {
        for (int y = 0; y < extent[1]; ++y) {
            for (int x = 0; x < extent[0]; ++x) off.push_back(grid.index(x, y, z));
        }
    }
    return off;
}

std::string PatchGroupIndex::to_json() const {
    using nlohmann::json;
    json j;
    j["grid"] = {grid.nx, grid.ny, grid.nz};
    j["patch_extent"] = {extent[0], extent[1], extent[2]};
    json groups_json = json::array();
    for (const auto& g : groups) {
        json members = json::array();
        for (const auto& m : g.members) members.push_back({{"corner", m.corner}, {"distance", m.distance}});
        groups_json.push_back({{"reference", g.reference}, {"members", std::move(members)}});
    }
    j["groups"] = std::move(groups_json);
    return j.dump();
}

std::vector<int> reference_positions(int n, int extent, int stride) {
    std::vector<int> pos;
    const int last = n - extent;
    for (int p = 0; p <= last; p += stride) pos.push_back(p);
    if (pos.empty() || pos.back() != last) pos.push_back(last);
    return pos;
}

double patch_distance(const RealImage& img, Eigen::Index ref_corner, Eigen::Index cand_corner,
                      const std::vector<Eigen::Index>& offsets) {
    double diff = 0.0;
    double norm = 0.0;
    for (auto o : offsets) {
        const double a = img[ref_corner + o];
        const double c = img[cand_corner + o];
        diff += (a - c) * (a - c);
        norm += c * c;
    }
    if (norm == 0.0) return diff == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    return diff / norm;
}

PatchGroupIndex block_match(const RealImage& img, const PatchConfig& cfg) {
    const Grid& grid = img.grid;
    if (grid.voxels() == 0) throw DataError("block_match: empty image");
    cfg.validate(grid);

    PatchGroupIndex idx;
    idx.grid = grid;
    idx.extent = {cfg.b, cfg.b, grid.is3d() ? cfg.b : 1};
    const auto offsets = idx.patch_offsets();

    // Squared patch norms for every corner.
    const int cx = grid.nx - idx.extent[0] + 1;
    const int cy = grid.ny - idx.extent[1] + 1;
    const int cz = grid.nz - idx.extent[2] + 1;
    std::vector<double> norms(static_cast<std::size_t>(grid.voxels()), 0.0);
    for (int z = 0; z < cz; ++z) {
        for (int y = 0; y < cy; ++y) {
            for (int x = 0; x < cx; ++x) {
                const auto c = grid.index(x, y, z);
                double s = 0.0;
                for (auto o : offsets) s += img[c + o] * img[c + o];
                norms[static_cast<std::size_t>(c)] = s;
            }
        }
    }

    const auto xs = reference_positions(grid.nx, idx.extent[0], cfg.stride);
    const auto ys = reference_positions(grid.ny, idx.extent[1], cfg.stride);
    const auto zs = grid.is3d() ? reference_positions(grid.nz, idx.extent[2], cfg.stride) : std::vector<int>{0};
    struct Ref {
        int x, y, z;
    };
    std::vector<Ref> refs;
    refs.reserve(xs.size() * ys.size() * zs.size());
    for (int z : zs) {
        for (int y : ys) {
            for (int x : xs) refs.push_back({x, y, z});
        }
    }
    idx.groups.resize(refs.size());

    const int r = cfg.search_radius;
    const int rz = grid.is3d() ? r : 0;
    parallel_for(refs.size(), [&](std::size_t gi) {
        const Ref ref = refs[gi];
        const auto ref_corner = grid.index(ref.x, ref.y, ref.z);
        const bool ref_zero = norms[static_cast<std::size_t>(ref_corner)] == 0.0;
        std::vector<PatchMember> cands;
        for (int z = std::max(0, ref.z - rz); z <= std::min(cz - 1, ref.z + rz); ++z) {
            for (int y = std::max(0, ref.y - r); y <= std::min(cy - 1, ref.y + r); ++y) {
                for (int x = std::max(0, ref.x - r); x <= std::min(cx - 1, ref.x + r); ++x) {
                    const auto c = grid.index(x, y, z);
                    if (c == ref_corner) continue;
                    const double cn = norms[static_cast<std::size_t>(c)];
                    if (cn == 0.0) {
                        if (ref_zero) cands.push_back({c, 0.0});
                        continue;
                    }
                    if (ref_zero) continue;
                    // Early exit once the running sum exceeds the threshold.
                    const double limit = cfg.lambda_m * cn;
                    double diff = 0.0;
                    bool rejected = false;
                    for (auto o : offsets) {
                        const double d = img[ref_corner + o] - img[c + o];
                        diff += d * d;
                        if (diff > limit) {
                            rejected = true;
                            break;
                        }
                    }
                    if (!rejected) cands.push_back({c, diff / cn});
                }
            }
        }
        const std::size_t keep = std::min<std::size_t>(cands.size(), static_cast<std::size_t>(cfg.np_max - 1));
        std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep), cands.end(),
                          [](const PatchMember& a, const PatchMember& b) {
                              return a.distance < b.distance || (a.distance == b.distance && a.corner < b.corner);
                          });
        PatchGroup& group = idx.groups[gi];
        group.reference = ref_corner;
        group.members.reserve(keep + 1);
        group.members.push_back({ref_corner, 0.0});
        group.members.insert(group.members.end(), cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(keep));
    });
    return idx;
}

namespace {

void check_conformance(const std::vector<Tensor3>& tensors, const PatchGroupIndex& idx, int n_tsl) {
    if (tensors.size() != idx.groups.size()) {
        throw DataError("patch tensors: tensor count does not match the group index");
    }
    for (std::size_t g = 0; g < tensors.size(); ++g) {
        const Dims3 want{idx.patch_voxels(), static_cast<Eigen::Index>(idx.groups[g].members.size()), n_tsl};
        if (tensors[g].dims() != want) {
            throw DataError("patch tensors: group " + std::to_string(g) + " has the wrong shape");
        }
    }
}

} // namespace

std::vector<Tensor3> extract_tensors(const CMatrix& x, const PatchGroupIndex& idx) {
    if (x.rows() != idx.grid.voxels()) throw DataError("extract_tensors: image does not match the patch grid");
    const auto offsets = idx.patch_offsets();
    const Eigen::Index nb = idx.patch_voxels();
    const Eigen::Index n_tsl = x.cols();
    std::vector<Tensor3> out(idx.groups.size());
    parallel_for(idx.groups.size(), [&](std::size_t g) {
        const auto& members = idx.groups[g].members;
        Tensor3 t({nb, static_cast<Eigen::Index>(members.size()), n_tsl});
        for (Eigen::Index k = 0; k < n_tsl; ++k) {
            for (std::size_t m = 0; m < members.size(); ++m) {
                const auto corner = members[m].corner;
                if (corner < 0 || corner + offsets.back() >= x.rows()) {
                    throw DataError("extract_tensors: patch corner out of bounds");
                }
                for (Eigen::Index o = 0; o < nb; ++o) {
                    t(o, static_cast<Eigen::Index>(m), k) = x(corner + offsets[static_cast<std::size_t>(o)], k);
                }
            }
        }
        out[g] = std::move(t);
    });
    return out;
}

std::vector<Tensor3> extract_tensors(const ImageSeries& x, const PatchGroupIndex& idx) {
    require_same_grid(x.grid(), idx.grid, "extract_tensors");
    return extract_tensors(x.data(), idx);
}

CMatrix scatter_patches(const std::vector<Tensor3>& tensors, const PatchGroupIndex& idx, int n_tsl) {
    check_conformance(tensors, idx, n_tsl);
    const auto offsets = idx.patch_offsets();
    const Eigen::Index nb = idx.patch_voxels();
    CMatrix out = CMatrix::Zero(idx.grid.voxels(), n_tsl);
    // Columns are independent, and within a column the accumulation order is fixed.
    parallel_for(static_cast<std::size_t>(n_tsl), [&](std::size_t kk) {
        const auto k = static_cast<Eigen::Index>(kk);
        for (std::size_t g = 0; g < tensors.size(); ++g) {
            const auto& members = idx.groups[g].members;
            for (std::size_t m = 0; m < members.size(); ++m) {
                const auto corner = members[m].corner;
                for (Eigen::Index o = 0; o < nb; ++o) {
                    out(corner + offsets[static_cast<std::size_t>(o)], k) +=
                        tensors[g](o, static_cast<Eigen::Index>(m), k);
                }
            }
        }
    });
    return out;
}

std::vector<int> coverage_counts(const PatchGroupIndex& idx) {
    const auto offsets = idx.patch_offsets();
    std::vector<int> counts(static_cast<std::size_t>(idx.grid.voxels()), 0);
    for (const auto& g : idx.groups) {
        for (const auto& m : g.members) {
            for (auto o : offsets) ++counts[static_cast<std::size_t>(m.corner + o)];
        }
    }
    return counts;
}

CMatrix aggregate_patches(const std::vector<Tensor3>& tensors, const PatchGroupIndex& idx, int n_tsl) {
    CMatrix sum = scatter_patches(tensors, idx, n_tsl);
    const auto counts = coverage_counts(idx);
    for (Eigen::Index v = 0; v < sum.rows(); ++v) {
        const int c = counts[static_cast<std::size_t>(v)];
        if (c > 0) sum.row(v) /= static_cast<double>(c);
    }
    return sum;
}

ImageSeries aggregate(const std::vector<Tensor3>& tensors, const PatchGroupIndex& idx,
                      const std::vector<double>& tsl_ms) {
    return ImageSeries(idx.grid, tsl_ms, aggregate_patches(tensors, idx, static_cast<int>(tsl_ms.size())));
}

} // namespace smart
