#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fiberspec/errors.hpp"
#include "fiberspec/sparse.hpp"

namespace fiberspec {

struct MinresOptions {
    double tol = 1e-10;  // relative residual ||Ax - b|| / ||b||
    int max_iter = 0;    // 0 -> 4 * dim
};

struct MinresResult {
    Vec x;
    int iterations = 0;
    double relative_residual = 0.0;
};

// Preconditioned MINRES for Hermitian systems (Paige & Saunders recurrence)
// with a positive diagonal (Jacobi) preconditioner.
inline MinresResult minres_solve(const SparseOperator& A, const Vec& b,
                                 const MinresOptions& opts = {}) {
    if (!A.hermitian()) throw std::invalid_argument("minres requires a Hermitian operator");
    if (A.dim() != b.size()) throw std::invalid_argument("rhs dimension mismatch");
    const Index dim = A.dim();
    const double bnorm = b.norm();
    MinresResult out;
    out.x = Vec::Zero(dim);
    if (bnorm == 0.0) return out;

    // Jacobi preconditioner from the real diagonal, floored away from zero.
    Eigen::VectorXd inv_diag(dim);
    double diag_scale = 0.0;
    for (Index i = 0; i < dim; ++i) diag_scale = std::max(diag_scale, std::abs(A.entry(i, i).real()));
    const double floor = std::max(1e-12, 1e-8 * diag_scale);
    for (Index i = 0; i < dim; ++i) {
        inv_diag[i] = 1.0 / std::max(A.entry(i, i).real(), floor);
    }
    auto precond = [&inv_diag](const Vec& r) { return (inv_diag.array() * r.array()).matrix(); };

    const int max_iter = opts.max_iter > 0 ? opts.max_iter : static_cast<int>(4 * dim);

    Vec r1 = b;
    Vec y = precond(r1);
    double beta1 = r1.dot(y).real();
    if (beta1 < 0.0) throw SolverError("preconditioner lost positivity", 1.0, 0);
    beta1 = std::sqrt(beta1);

    double oldb = 0.0, beta = beta1, dbar = 0.0, epsln = 0.0, phibar = beta1;
    double cs = -1.0, sn = 0.0;
    Vec r2 = r1;
    Vec w = Vec::Zero(dim), w2 = Vec::Zero(dim);

    for (int itn = 1; itn <= max_iter; ++itn) {
        const double s = 1.0 / beta;
        const Vec v = s * y;
        y = A.apply(v);
        if (itn >= 2) y -= (beta / oldb) * r1;
        const double alfa = v.dot(y).real();
        y -= (alfa / beta) * r2;
        r1 = r2;
        r2 = y;
        y = precond(r2);
        oldb = beta;
        beta = r2.dot(y).real();
        if (beta < 0.0) throw SolverError("operator appears indefinite in minres", 1.0, itn);
        beta = std::sqrt(beta);

        const double oldeps = epsln;
        const double delta = cs * dbar + sn * alfa;
        const double gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        double gamma = std::sqrt(gbar * gbar + beta * beta);
        gamma = std::max(gamma, std::numeric_limits<double>::epsilon());
        cs = gbar / gamma;
        sn = beta / gamma;
        const double phi = cs * phibar;
        phibar = sn * phibar;

        const Vec w1 = w2;
        w2 = w;
        w = (v - oldeps * w1 - delta * w2) / gamma;
        out.x += phi * w;
        out.iterations = itn;

        if (phibar <= opts.tol * beta1) {
            out.relative_residual = (A.apply(out.x) - b).norm() / bnorm;
            if (out.relative_residual <= opts.tol) return out;
        }
    }
    out.relative_residual = (A.apply(out.x) - b).norm() / bnorm;
    if (out.relative_residual <= opts.tol) return out;
    throw SolverError("minres did not reach tolerance " + std::to_string(opts.tol) +
                          " (residual " + std::to_string(out.relative_residual) + ")",
                      out.relative_residual, out.iterations);
}

}  // namespace fiberspec
