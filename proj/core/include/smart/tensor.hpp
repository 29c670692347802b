#pragma once

#include "smart/grid.hpp"

#include <array>
#include <string>

namespace smart {

using Dims3 = std::array<Eigen::Index, 3>;

/// Dense complex third-order tensor. Entries are stored with the first index
/// fastest: linear(i, j, k) = i + N1 * (j + N2 * k).
class Tensor3 {
public:
    Tensor3() = default;
    explicit Tensor3(Dims3 dims);
    Tensor3(Dims3 dims, CVector data);

    static Tensor3 Zero(Dims3 dims) { return Tensor3(dims); }
    static Tensor3 Random(Dims3 dims);

    [[nodiscard]] const Dims3& dims() const { return dims_; }
    [[nodiscard]] Eigen::Index dim(int axis) const { return dims_[static_cast<std::size_t>(axis)]; }
    [[nodiscard]] Eigen::Index size() const { return data_.size(); }

    [[nodiscard]] const CVector& data() const { return data_; }
    CVector& data() { return data_; }

    Complex& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) {
        return data_[i + dims_[0] * (j + dims_[1] * k)];
    }
    const Complex& operator()(Eigen::Index i, Eigen::Index j, Eigen::Index k) const {
        return data_[i + dims_[0] * (j + dims_[1] * k)];
    }

    [[nodiscard]] double norm() const { return data_.norm(); }

    Tensor3& operator+=(const Tensor3& other);
    Tensor3& operator-=(const Tensor3& other);
    Tensor3& operator*=(Complex s);

private:
    Dims3 dims_{0, 0, 0};
    CVector data_;
};

Tensor3 operator+(Tensor3 a, const Tensor3& b);
Tensor3 operator-(Tensor3 a, const Tensor3& b);
Tensor3 operator*(Complex s, Tensor3 a);

/// Mode-n matricization (mode in 1..3). Columns follow the Kolda-Bader
/// convention: the remaining indices vary with the lowest-numbered one fastest,
/// so unfold(t, 2) has column index i + N1 * k.
CMatrix unfold(const Tensor3& t, int mode);

/// Inverse of unfold for the same mode; throws DataError on shape mismatch.
Tensor3 fold(const CMatrix& m, int mode, const Dims3& dims);

/// t x_mode u, i.e. unfold(result, mode) == u * unfold(t, mode).
Tensor3 mode_product(const Tensor3& t, const CMatrix& u, int mode);

/// Core tensor plus per-mode orthonormal bases. A basis is N_n x r_n where
/// r_n = min(N_n, prod of the other dims); when r_n < N_n the basis is the
/// economy factor and the missing columns would only multiply zero core
/// blocks.
struct HosvdFactors {
    Tensor3 core;
    std::array<CMatrix, 3> bases;
    /// Largest singular value of each mode unfolding.
    std::array<double, 3> leading_singular_values{0.0, 0.0, 0.0};
};

HosvdFactors hosvd(const Tensor3& t);

/// core x1 U1 x2 U2 x3 U3.
Tensor3 reconstruct(const HosvdFactors& factors);

/// What the hard threshold is applied to.
/// core_entries: every core entry whose magnitude is below a mode threshold.
/// mode_singular_values: whole core slices along mode n whose norm (the n-mode
/// singular value) is below that mode's threshold, i.e. a truncated HOSVD.
/// absolute_entries: core entries against max_n ratios[n] taken as absolute
/// magnitudes instead of fractions of the leading singular value.
enum class ThresholdRule { core_entries, mode_singular_values, absolute_entries };

ThresholdRule parse_threshold_rule(const std::string& name);
std::string to_string(ThresholdRule rule);

/// Hard-thresholding HOSVD denoiser. For the relative rules the threshold of
/// mode n is ratios[n] * (largest singular value of the mode-n unfolding);
/// strict inequality zeroes.
Tensor3 hosvd_denoise(const Tensor3& t, const std::array<double, 3>& ratios,
                      ThresholdRule rule = ThresholdRule::core_entries);

} // namespace smart
