#include "helpers.hpp"

#include <smart/cg.hpp>

#include <Eigen/Dense>
#include <gtest/gtest.h>

using namespace smart;
using smart::test::random_matrix;
using smart::test::rel_diff;

namespace {

// Random Hermitian positive-definite matrix with a controlled spectrum.
CMatrix random_hpd(Eigen::Index n, double cond, std::mt19937_64& rng) {
    const Eigen::HouseholderQR<CMatrix> qr(random_matrix(n, n, rng));
    const CMatrix q = qr.householderQ();
    Eigen::VectorXd d(n);
    for (Eigen::Index i = 0; i < n; ++i) d[i] = 1.0 + (cond - 1.0) * double(i) / double(n - 1);
    return q * d.cast<Complex>().asDiagonal() * q.adjoint();
}

} // namespace

TEST(ConjugateGradient, MatchesDenseSolve) {
    std::mt19937_64 rng(1);
    const CMatrix a = random_hpd(32, 50.0, rng);
    const CMatrix b = random_matrix(32, 1, rng);
    const LinearOperator op = [&](const CMatrix& x) { return CMatrix(a * x); };
    const CgResult r = conjugate_gradient(op, b, CMatrix::Zero(32, 1), {200, 1e-13});
    const CMatrix direct = a.llt().solve(b);
    EXPECT_TRUE(r.converged);
    EXPECT_LT(rel_diff(r.x, direct), 1e-6);
}

TEST(ConjugateGradient, BlockRightHandSide) {
    std::mt19937_64 rng(2);
    const CMatrix a = random_hpd(16, 10.0, rng);
    const CMatrix b = random_matrix(16, 3, rng);
    const LinearOperator op = [&](const CMatrix& x) { return CMatrix(a * x); };
    const CgResult r = conjugate_gradient(op, b, CMatrix::Zero(16, 3), {200, 1e-13});
    EXPECT_LT(rel_diff(r.x, CMatrix(a.llt().solve(b))), 1e-8);
}

TEST(ConjugateGradient, ZeroRightHandSideReturnsZero) {
    const LinearOperator op = [](const CMatrix& x) { return x; };
    std::mt19937_64 rng(3);
    const CgResult r = conjugate_gradient(op, CMatrix::Zero(5, 2), random_matrix(5, 2, rng), {10, 1e-8});
    EXPECT_EQ(r.x.norm(), 0.0);
    EXPECT_TRUE(r.converged);
}

TEST(ConjugateGradient, WarmStartAtSolutionStopsImmediately) {
    std::mt19937_64 rng(4);
    const CMatrix a = random_hpd(10, 5.0, rng);
    const CMatrix b = random_matrix(10, 1, rng);
    const LinearOperator op = [&](const CMatrix& x) { return CMatrix(a * x); };
    const CgResult r = conjugate_gradient(op, b, a.llt().solve(b), {10, 1e-8});
    EXPECT_EQ(r.iterations, 0);
    EXPECT_TRUE(r.converged);
}

TEST(ConjugateGradient, ResidualsReported) {
    std::mt19937_64 rng(5);
    const CMatrix a = random_hpd(24, 20.0, rng);
    const CMatrix b = random_matrix(24, 1, rng);
    const LinearOperator op = [&](const CMatrix& x) { return CMatrix(a * x); };
    const CgResult r = conjugate_gradient(op, b, CMatrix::Zero(24, 1), {7, 0.0});
    EXPECT_EQ(r.iterations, 7);
    ASSERT_EQ(r.residuals.size(), 8u);
    EXPECT_NEAR(r.residuals.front(), 1.0, 1e-14);
    EXPECT_NEAR(r.residuals.back(), (b - a * r.x).norm() / b.norm(), 1e-10);
}

TEST(ConjugateGradient, IndefiniteOperatorFlagsBreakdown) {
    CMatrix a = CMatrix::Identity(4, 4);
    a(0, 0) = -1.0;
    const LinearOperator op = [&](const CMatrix& x) { return CMatrix(a * x); };
    CMatrix b = CMatrix::Zero(4, 1);
    b(0, 0) = 1.0;
    const CgResult r = conjugate_gradient(op, b, CMatrix::Zero(4, 1), {10, 1e-10});
    EXPECT_TRUE(r.breakdown);
    EXPECT_FALSE(r.converged);
    EXPECT_TRUE(r.x.allFinite());
}
