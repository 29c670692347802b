#pragma once

#include "smart/grid.hpp"

#include <functional>
#include <vector>

namespace smart {

/// Hermitian positive-definite operator acting on N_voxel x N_TSL blocks.
using LinearOperator = std::function<CMatrix(const CMatrix&)>;

struct CgOptions {
    int max_iters = 15;
    double tol = 1e-7; // relative residual ||b - Ax|| / ||b||
};

struct CgResult {
    CMatrix x;
    int iterations = 0;
    bool converged = false;
    bool breakdown = false; // non-positive curvature met; x is the last iterate
    std::vector<double> residuals; // relative residual before each iteration and after the last
};

/// Conjugate gradients for A x = b with warm start x0. The inner product is
/// the real part of the Frobenius product, so complex blocks are handled as
/// vectors of their entries.
CgResult conjugate_gradient(const LinearOperator& a, const CMatrix& b, CMatrix x0, const CgOptions& opts);

} // namespace smart
