#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace fiberspec {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Index = Eigen::Index;

// Row-compressed complex sparse matrix with explicit Hermiticity metadata.
// Instances are frozen after assembly and safe to share across readers.
class SparseOperator {
public:
    using Storage = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
    using Triplet = Eigen::Triplet<cplx>;

    SparseOperator() = default;

    SparseOperator(Storage m, bool hermitian) : mat_(std::move(m)), hermitian_(hermitian) {
        mat_.makeCompressed();
    }

    static SparseOperator from_triplets(Index dim, const std::vector<Triplet>& entries,
                                        bool hermitian) {
        Storage m(dim, dim);
        m.setFromTriplets(entries.begin(), entries.end());
        m.makeCompressed();
        return SparseOperator(std::move(m), hermitian);
    }

    static SparseOperator identity(Index dim) {
        Storage m(dim, dim);
        m.setIdentity();
        return SparseOperator(std::move(m), true);
    }

    // Real diagonal entries give a Hermitian operator by construction.
    static SparseOperator diagonal(const std::vector<double>& d) {
        std::vector<Triplet> entries;
        entries.reserve(d.size());
        for (Index i = 0; i < static_cast<Index>(d.size()); ++i) {
            if (d[static_cast<std::size_t>(i)] != 0.0) {
                entries.emplace_back(i, i, cplx(d[static_cast<std::size_t>(i)], 0.0));
            }
        }
        return from_triplets(static_cast<Index>(d.size()), entries, true);
    }

    Index dim() const { return mat_.rows(); }
    Index nonzeros() const { return mat_.nonZeros(); }
    bool hermitian() const { return hermitian_; }
    const Storage& matrix() const { return mat_; }

    // Assembly routines that produce a Hermitian result through a
    // non-Hermitian intermediate (e.g. symmetric sums of products) set the
    // flag explicitly; spot checks guard against misuse.
    void mark_hermitian(bool value) { hermitian_ = value; }

    Vec apply(const Vec& x) const { return mat_ * x; }

    SparseOperator adjoint() const {
        Storage m = mat_.adjoint();
        return SparseOperator(std::move(m), hermitian_);
    }

    cplx entry(Index row, Index col) const { return mat_.coeff(row, col); }

    cplx expectation(const Vec& psi) const { return psi.dot(mat_ * psi); }

    Eigen::MatrixXcd dense() const { return Eigen::MatrixXcd(mat_); }

    // Entrywise comparison against the conjugate transpose; exact by
    // construction for symmetric assemblies, so the default tolerance is 0.
    bool is_hermitian_entrywise(double tol = 0.0) const {
        Storage diff = Storage(mat_.adjoint()) - mat_;
        for (Index r = 0; r < diff.outerSize(); ++r) {
            for (Storage::InnerIterator it(diff, r); it; ++it) {
                if (std::abs(it.value()) > tol) return false;
            }
        }
        return true;
    }

    // Max |A_ij - conj(A_ji)| over `samples` stored entries, seeded draw.
    double hermitian_spot_residual(std::uint64_t seed = 42, int samples = 1000) const {
        if (mat_.nonZeros() == 0) return 0.0;
        std::mt19937_64 rng(seed);
        double worst = 0.0;
        for (int s = 0; s < samples; ++s) {
            const Index r = static_cast<Index>(rng() % static_cast<std::uint64_t>(mat_.rows()));
            const Index begin = mat_.outerIndexPtr()[r];
            const Index end = mat_.outerIndexPtr()[r + 1];
            if (begin == end) continue;
            const Index pick = begin + static_cast<Index>(
                                           rng() % static_cast<std::uint64_t>(end - begin));
            const Index c = mat_.innerIndexPtr()[pick];
            const cplx v = mat_.valuePtr()[pick];
            worst = std::max(worst, std::abs(v - std::conj(mat_.coeff(c, r))));
        }
        return worst;
    }

    friend SparseOperator operator+(const SparseOperator& a, const SparseOperator& b) {
        require_same_dim(a, b);
        Storage m = a.mat_ + b.mat_;
        return SparseOperator(std::move(m), a.hermitian_ && b.hermitian_);
    }

    friend SparseOperator operator-(const SparseOperator& a, const SparseOperator& b) {
        require_same_dim(a, b);
        Storage m = a.mat_ - b.mat_;
        return SparseOperator(std::move(m), a.hermitian_ && b.hermitian_);
    }

    // Products of Hermitian factors are not Hermitian in general; callers
    // re-mark symmetric combinations.
    friend SparseOperator operator*(const SparseOperator& a, const SparseOperator& b) {
        require_same_dim(a, b);
        Storage m = a.mat_ * b.mat_;
        return SparseOperator(std::move(m), false);
    }

    friend SparseOperator operator*(cplx s, const SparseOperator& a) {
        Storage m = s * a.mat_;
        return SparseOperator(std::move(m), a.hermitian_ && s.imag() == 0.0);
    }

    friend SparseOperator operator*(double s, const SparseOperator& a) {
        return cplx(s, 0.0) * a;
    }

    double max_abs_entry() const {
        double m = 0.0;
        for (Index i = 0; i < mat_.nonZeros(); ++i) {
            m = std::max(m, std::abs(mat_.valuePtr()[i]));
        }
        return m;
    }

private:
    static void require_same_dim(const SparseOperator& a, const SparseOperator& b) {
        if (a.dim() != b.dim()) {
            throw std::invalid_argument("operator dimension mismatch: " +
                                        std::to_string(a.dim()) + " vs " +
                                        std::to_string(b.dim()));
        }
    }

    Storage mat_;
    bool hermitian_ = false;
};

}  // namespace fiberspec
