#include "smart/tensor.hpp"

#include "smart/errors.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <sstream>

namespace smart {

namespace {

void check_mode(int mode) {
    if (mode < 1 || mode > 3) {
        throw DataError("tensor mode must be 1, 2 or 3, got " + std::to_string(mode));
    }
}

Eigen::Index other_extent(const Dims3& d, int mode) {
    Eigen::Index n = 1;
    for (int a = 0; a < 3; ++a) {
        if (a != mode - 1) n *= d[static_cast<std::size_t>(a)];
    }
    return n;
}

struct ModeBasis {
    CMatrix u;
    double leading = 0.0;
};

// Left singular vectors of a mode unfolding, ordered by decreasing singular
// value. Short-and-wide unfoldings go through the Hermitian Gram matrix and
// yield a full square basis; tall ones use a thin SVD.
ModeBasis mode_basis(const CMatrix& a) {
    const Eigen::Index rows = a.rows();
    ModeBasis out;
    if (rows <= a.cols()) {
        CMatrix gram = CMatrix::Zero(rows, rows);
        gram.selfadjointView<Eigen::Lower>().rankUpdate(a);
        gram.triangularView<Eigen::StrictlyUpper>() = gram.adjoint();
        Eigen::SelfAdjointEigenSolver<CMatrix> eig(gram);
        if (eig.info() != Eigen::Success) {
            throw NumericalError("hosvd: Hermitian eigensolver did not converge");
        }
        out.u = eig.eigenvectors().rowwise().reverse();
        out.leading = std::sqrt(std::max(eig.eigenvalues()(rows - 1), 0.0));
    } else {
        Eigen::BDCSVD<CMatrix> svd(a, Eigen::ComputeThinU);
        if (svd.info() != Eigen::Success) {
            throw NumericalError("hosvd: SVD did not converge");
        }
        out.u = svd.matrixU();
        out.leading = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
    }
    return out;
}

} // namespace

Tensor3::Tensor3(Dims3 dims) : dims_(dims), data_(CVector::Zero(dims[0] * dims[1] * dims[2])) {
    for (auto d : dims_) {
        if (d <= 0) throw DataError("Tensor3: dimensions must be positive");
    }
}

Tensor3::Tensor3(Dims3 dims, CVector data) : dims_(dims), data_(std::move(data)) {
    for (auto d : dims_) {
        if (d <= 0) throw DataError("Tensor3: dimensions must be positive");
    }
    if (data_.size() != dims_[0] * dims_[1] * dims_[2]) {
        throw DataError("Tensor3: data length does not equal N1*N2*N3");
    }
}

Tensor3 Tensor3::Random(Dims3 dims) {
    return Tensor3(dims, CVector::Random(dims[0] * dims[1] * dims[2]));
}

Tensor3& Tensor3::operator+=(const Tensor3& other) {
    if (dims_ != other.dims_) throw DataError("Tensor3: dimension mismatch in +=");
    data_ += other.data_;
    return *this;
}

Tensor3& Tensor3::operator-=(const Tensor3& other) {
    if (dims_ != other.dims_) throw DataError("Tensor3: dimension mismatch in -=");
    data_ -= other.data_;
    return *this;
}

Tensor3& Tensor3::operator*=(Complex s) {
    data_ *= s;
    return *this;
}

Tensor3 operator+(Tensor3 a, const Tensor3& b) { return a += b; }
Tensor3 operator-(Tensor3 a, const Tensor3& b) { return a -= b; }
Tensor3 operator*(Complex s, Tensor3 a) { return a *= s; }

CMatrix unfold(const Tensor3& t, int mode) {
    check_mode(mode);
    const auto [n1, n2, n3] = t.dims();
    const Complex* p = t.data().data();
    switch (mode) {
    case 1:
        return Eigen::Map<const CMatrix>(p, n1, n2 * n3);
    case 2: {
        CMatrix out(n2, n1 * n3);
        for (Eigen::Index k = 0; k < n3; ++k) {
            Eigen::Map<const CMatrix> slice(p + n1 * n2 * k, n1, n2);
            out.middleCols(n1 * k, n1) = slice.transpose();
        }
        return out;
    }
    default:
        return Eigen::Map<const CMatrix>(p, n1 * n2, n3).transpose();
    }
}

Tensor3 fold(const CMatrix& m, int mode, const Dims3& dims) {
    check_mode(mode);
    const auto [n1, n2, n3] = dims;
    const Eigen::Index rows = dims[static_cast<std::size_t>(mode - 1)];
    if (m.rows() != rows || m.cols() != other_extent(dims, mode)) {
        std::ostringstream os;
        os << "fold: matrix is " << m.rows() << "x" << m.cols() << ", mode-" << mode << " unfolding of ("
           << n1 << "," << n2 << "," << n3 << ") needs " << rows << "x" << other_extent(dims, mode);
        throw DataError(os.str());
    }
    Tensor3 out(dims);
    Complex* p = out.data().data();
    switch (mode) {
    case 1:
        Eigen::Map<CMatrix>(p, n1, n2 * n3) = m;
        break;
    case 2:
        for (Eigen::Index k = 0; k < n3; ++k) {
            Eigen::Map<CMatrix>(p + n1 * n2 * k, n1, n2) = m.middleCols(n1 * k, n1).transpose();
        }
        break;
    default:
        Eigen::Map<CMatrix>(p, n1 * n2, n3) = m.transpose();
        break;
    }
    return out;
}

Tensor3 mode_product(const Tensor3& t, const CMatrix& u, int mode) {
    check_mode(mode);
    const auto [n1, n2, n3] = t.dims();
    const Eigen::Index n = t.dim(mode - 1);
    if (u.cols() != n) {
        std::ostringstream os;
        os << "mode_product: matrix has " << u.cols() << " columns, mode-" << mode << " extent is " << n;
        throw DataError(os.str());
    }
    const Eigen::Index j = u.rows();
    Dims3 out_dims = t.dims();
    out_dims[static_cast<std::size_t>(mode - 1)] = j;
    Tensor3 out(out_dims);
    const Complex* src = t.data().data();
    Complex* dst = out.data().data();
    switch (mode) {
    case 1:
        Eigen::Map<CMatrix>(dst, j, n2 * n3).noalias() = u * Eigen::Map<const CMatrix>(src, n1, n2 * n3);
        break;
    case 2:
        for (Eigen::Index k = 0; k < n3; ++k) {
            Eigen::Map<CMatrix>(dst + n1 * j * k, n1, j).noalias() =
                Eigen::Map<const CMatrix>(src + n1 * n2 * k, n1, n2) * u.transpose();
        }
        break;
    default:
        Eigen::Map<CMatrix>(dst, n1 * n2, j).noalias() = Eigen::Map<const CMatrix>(src, n1 * n2, n3) * u.transpose();
        break;
    }
    return out;
}

HosvdFactors hosvd(const Tensor3& t) {
    HosvdFactors f;
    for (int mode = 1; mode <= 3; ++mode) {
        ModeBasis b = mode_basis(unfold(t, mode));
        f.bases[static_cast<std::size_t>(mode - 1)] = std::move(b.u);
        f.leading_singular_values[static_cast<std::size_t>(mode - 1)] = b.leading;
    }
    Tensor3 core = mode_product(t, f.bases[0].adjoint(), 1);
    core = mode_product(core, f.bases[1].adjoint(), 2);
    f.core = mode_product(core, f.bases[2].adjoint(), 3);
    return f;
}

Tensor3 reconstruct(const HosvdFactors& f) {
    Tensor3 out = mode_product(f.core, f.bases[0], 1);
    out = mode_product(out, f.bases[1], 2);
    return mode_product(out, f.bases[2], 3);
}

Tensor3 hosvd_denoise(const Tensor3& t, const std::array<double, 3>& ratios, ThresholdRule rule) {
    for (double r : ratios) {
        if (!(r >= 0.0)) throw DataError("hosvd_denoise: threshold ratios must be nonnegative");
    }
    if (ratios[0] == 0.0 && ratios[1] == 0.0 && ratios[2] == 0.0) return t;
    if (t.data().isZero(0.0)) return t;

    HosvdFactors f = hosvd(t);
    if (rule != ThresholdRule::mode_singular_values) {
        double threshold = 0.0;
        for (std::size_t n = 0; n < 3; ++n) {
            const double scale = rule == ThresholdRule::core_entries ? f.leading_singular_values[n] : 1.0;
            threshold = std::max(threshold, ratios[n] * scale);
        }
        for (auto& g : f.core.data()) {
            if (std::abs(g) < threshold) g = Complex(0.0, 0.0);
        }
        return reconstruct(f);
    }

    // Slice norms are taken on the unthresholded core, so the modes do not interact.
    const Dims3 d = f.core.dims();
    std::array<std::vector<bool>, 3> keep;
    for (int n = 0; n < 3; ++n) {
        const CMatrix g = unfold(f.core, n + 1);
        const double threshold = ratios[static_cast<std::size_t>(n)] * f.leading_singular_values[static_cast<std::size_t>(n)];
        auto& k = keep[static_cast<std::size_t>(n)];
        k.resize(static_cast<std::size_t>(g.rows()));
        for (Eigen::Index i = 0; i < g.rows(); ++i) k[static_cast<std::size_t>(i)] = !(g.row(i).norm() < threshold);
    }
    for (Eigen::Index c = 0; c < d[2]; ++c) {
        for (Eigen::Index b = 0; b < d[1]; ++b) {
            for (Eigen::Index a = 0; a < d[0]; ++a) {
                if (!keep[0][static_cast<std::size_t>(a)] || !keep[1][static_cast<std::size_t>(b)] ||
                    !keep[2][static_cast<std::size_t>(c)]) {
                    f.core(a, b, c) = Complex(0.0, 0.0);
                }
            }
        }
    }
    return reconstruct(f);
}

ThresholdRule parse_threshold_rule(const std::string& name) {
    if (name == "core_entries") return ThresholdRule::core_entries;
    if (name == "mode_singular_values") return ThresholdRule::mode_singular_values;
    if (name == "absolute_entries") return ThresholdRule::absolute_entries;
    throw ConfigError("unknown threshold rule '" + name +
                      "' (expected core_entries, mode_singular_values or absolute_entries)");
}

std::string to_string(ThresholdRule rule) {
    switch (rule) {
    case ThresholdRule::core_entries: return "core_entries";
    case ThresholdRule::mode_singular_values: return "mode_singular_values";
    case ThresholdRule::absolute_entries: return "absolute_entries";
    }
    return "core_entries";
}

} // namespace smart
