#include "smart/cg.hpp"

#include "smart/errors.hpp"

#include <cmath>

namespace smart {

namespace {

double inner(const CMatrix& a, const CMatrix& b) {
    return (a.array().conjugate() * b.array()).sum().real();
}

} // namespace

CgResult conjugate_gradient(const LinearOperator& a, const CMatrix& b, CMatrix x0, const CgOptions& opts) {
    if (x0.rows() != b.rows() || x0.cols() != b.cols()) throw DataError("conjugate_gradient: x0 and b differ in shape");
    CgResult res;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        res.x = CMatrix::Zero(b.rows(), b.cols());
        res.converged = true;
        res.residuals.push_back(0.0);
        return res;
    }
    CMatrix x = std::move(x0);
    CMatrix r = b - a(x);
    CMatrix p = r;
    double rr = inner(r, r);
    res.residuals.push_back(std::sqrt(rr) / bnorm);
    for (int it = 0; it < opts.max_iters; ++it) {
        if (res.residuals.back() <= opts.tol) {
            res.converged = true;
            break;
        }
        const CMatrix ap = a(p);
        const double pap = inner(p, ap);
        if (!(pap > 0.0) || !std::isfinite(pap)) {
            res.breakdown = true;
            break;
        }
        const double step = rr / pap;
        x += step * p;
        r -= step * ap;
        const double rr_next = inner(r, r);
        p = r + (rr_next / rr) * p;
        rr = rr_next;
        res.residuals.push_back(std::sqrt(rr) / bnorm);
        res.iterations = it + 1;
    }
    if (!res.breakdown && res.residuals.back() <= opts.tol) res.converged = true;
    res.x = std::move(x);
    return res;
}

} // namespace smart
