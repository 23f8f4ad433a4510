#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "fiberspec/errors.hpp"
#include "fiberspec/sparse.hpp"

namespace fiberspec {

struct EigenOptions {
    double tol = 1e-10;          // residual contract: ||Hx - Ex|| <= tol * max(1, |E|)
    int max_iter = 500;          // Krylov steps per eigenpair
    std::uint64_t seed = 42;
    Index dense_threshold = 2000;
    int n_wanted = 1;
};

struct EigenPair {
    double value;
    Vec vector;
};

struct EigenResult {
    std::vector<EigenPair> pairs;  // ascending by eigenvalue
    int iterations = 0;
    double residual = 0.0;  // max over pairs of ||Hx - Ex||
    std::string method;     // "dense" or "lanczos"
};

namespace detail {

// Uniform doubles in [-1, 1) built directly from the generator output;
// avoids std::uniform_real_distribution, which is not pinned across
// standard libraries.
inline double symmetric_unit(std::mt19937_64& rng) {
    return 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
}

inline Vec seeded_noise(Index dim, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Vec v(dim);
    for (Index i = 0; i < dim; ++i) {
        const double re = symmetric_unit(rng);
        const double im = symmetric_unit(rng);
        v[i] = cplx(re, im);
    }
    return v;
}

inline void orthogonalize_against(Vec& w, const std::vector<Vec>& basis) {
    for (int pass = 0; pass < 2; ++pass) {
        for (const Vec& q : basis) {
            w -= q.dot(w) * q;
        }
    }
}

inline double explicit_residual(const SparseOperator& H, double theta, const Vec& x) {
    return (H.apply(x) - theta * x).norm();
}

// One deflated Lanczos run with full reorthogonalization; returns the lowest
// eigenpair of H restricted to the orthogonal complement of `deflate`.
inline EigenPair lanczos_lowest(const SparseOperator& H, const std::vector<Vec>& deflate,
                                const Vec& start, const EigenOptions& opts, int& iterations) {
    const Index dim = H.dim();
    std::vector<Vec> V;
    V.reserve(64);

    Vec v0 = start;
    orthogonalize_against(v0, deflate);
    double nrm = v0.norm();
    if (nrm < 1e-14) {
        v0 = seeded_noise(dim, opts.seed + 17);
        orthogonalize_against(v0, deflate);
        nrm = v0.norm();
    }
    v0 /= nrm;
    V.push_back(v0);

    std::vector<double> alpha, beta;  // beta[j] couples v_j and v_{j+1}
    double best_theta = 0.0;
    double best_res = std::numeric_limits<double>::infinity();
    Eigen::VectorXd ritz_weights;

    const int steps = std::min<Index>(opts.max_iter, dim);
    for (int m = 0; m < steps; ++m) {
        Vec w = H.apply(V.back());
        if (m > 0) w -= beta.back() * V[static_cast<std::size_t>(m) - 1];
        const double a = V.back().dot(w).real();
        alpha.push_back(a);
        w -= a * V.back();
        orthogonalize_against(w, V);
        orthogonalize_against(w, deflate);
        const double b = w.norm();

        // The tridiagonal eigensolve costs O(m^3); check convergence on a
        // stride once the section grows.
        const int n = static_cast<int>(alpha.size());
        const bool check = n <= 20 || n % 5 == 0 || b < 1e-14 || m + 1 == steps;
        if (!check) {
            beta.push_back(b);
            V.push_back(w / b);
            continue;
        }
        Eigen::MatrixXd T = Eigen::MatrixXd::Zero(n, n);
        for (int i = 0; i < n; ++i) {
            T(i, i) = alpha[static_cast<std::size_t>(i)];
            if (i + 1 < n) {
                T(i, i + 1) = T(i + 1, i) = beta[static_cast<std::size_t>(i)];
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
        const double theta = es.eigenvalues()(0);
        const double res_estimate = b * std::abs(es.eigenvectors()(n - 1, 0));
        best_theta = theta;
        ritz_weights = es.eigenvectors().col(0);
        iterations = n;

        if (res_estimate <= 0.5 * opts.tol * std::max(1.0, std::abs(theta)) || b < 1e-14 ||
            m + 1 == steps) {
            Vec x = Vec::Zero(dim);
            for (int i = 0; i < n; ++i) {
                x += ritz_weights(i) * V[static_cast<std::size_t>(i)];
            }
            orthogonalize_against(x, deflate);
            x /= x.norm();
            best_res = explicit_residual(H, theta, x);
            if (best_res <= opts.tol * std::max(1.0, std::abs(theta))) {
                return {theta, std::move(x)};
            }
            if (b < 1e-14) {
                // Krylov space exhausted; the Ritz pair is exact up to
                // reorthogonalization roundoff.
                return {theta, std::move(x)};
            }
            if (m + 1 == steps) {
                throw SolverError("Lanczos did not reach tolerance " +
                                      std::to_string(opts.tol) + " after " +
                                      std::to_string(n) + " steps (best residual " +
                                      std::to_string(best_res) + ")",
                                  best_res, n);
            }
        }
        beta.push_back(b);
        V.push_back(w / b);
    }
    throw SolverError("Lanczos failed to converge", best_res, iterations);
}

}  // namespace detail

// Lowest eigenpairs of a Hermitian operator. Dense diagonalization below
// `dense_threshold` (the dense path doubles as the test oracle), Lanczos
// with full reorthogonalization and deflation above it. Deterministic for a
// fixed seed and start hint.
inline EigenResult lowest_eigenpairs(const SparseOperator& H, const EigenOptions& opts,
                                     const Vec* start_hint = nullptr) {
    if (!H.hermitian()) {
        throw std::invalid_argument("eigensolver requires a Hermitian operator");
    }
    const Index dim = H.dim();
    if (dim < 1) throw std::invalid_argument("empty operator");
    const int n_wanted = std::min<Index>(std::max(1, opts.n_wanted), dim);

    EigenResult result;
    if (dim <= opts.dense_threshold) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(H.dense());
        result.method = "dense";
        for (int j = 0; j < n_wanted; ++j) {
            EigenPair p{es.eigenvalues()(j), es.eigenvectors().col(j)};
            result.residual =
                std::max(result.residual, detail::explicit_residual(H, p.value, p.vector));
            result.pairs.push_back(std::move(p));
        }
        return result;
    }

    result.method = "lanczos";
    std::vector<Vec> found;
    for (int j = 0; j < n_wanted; ++j) {
        Vec start;
        if (j == 0 && start_hint != nullptr) {
            start = *start_hint;
        } else {
            start = detail::seeded_noise(dim, opts.seed + static_cast<std::uint64_t>(j));
        }
        int iters = 0;
        EigenPair p = detail::lanczos_lowest(H, found, start, opts, iters);
        result.iterations += iters;
        result.residual =
            std::max(result.residual, detail::explicit_residual(H, p.value, p.vector));
        found.push_back(p.vector);
        result.pairs.push_back(std::move(p));
    }
    std::sort(result.pairs.begin(), result.pairs.end(),
              [](const EigenPair& a, const EigenPair& b) { return a.value < b.value; });
    return result;
}

}  // namespace fiberspec
