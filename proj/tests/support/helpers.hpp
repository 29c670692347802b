#pragma once

#include <smart/grid.hpp>
#include <smart/tensor.hpp>

#include <filesystem>
#include <random>
#include <string>

namespace smart::test {

inline CMatrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    CMatrix m(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
        for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = Complex(n(rng), n(rng));
    }
    return m;
}

inline Tensor3 random_tensor(Dims3 dims, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Tensor3 t(dims);
    for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = Complex(n(rng), n(rng));
    return t;
}

inline double rel_diff(const CMatrix& a, const CMatrix& b) {
    const double scale = std::max(b.norm(), 1e-300);
    return (a - b).norm() / scale;
}

inline double rel_diff(const Tensor3& a, const Tensor3& b) { return rel_diff(CMatrix(a.data()), CMatrix(b.data())); }

/// Real part of the Frobenius inner product <a, b> = sum conj(a) b.
inline Complex inner(const CMatrix& a, const CMatrix& b) { return (a.array().conjugate() * b.array()).sum(); }

/// Fresh scratch directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("smart_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace smart::test
