#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fiberspec/errors.hpp"
#include "fiberspec/sparse.hpp"

namespace fiberspec {

// One occupation-number state over M mode channels. Occupations are 8-bit:
// truncations beyond 255 photons per channel are out of scope by design.
struct OccupationState {
    std::vector<std::uint8_t> occupations;

    int total() const {
        return std::accumulate(occupations.begin(), occupations.end(), 0);
    }
};

// Truncated symmetric Fock space over `num_channels` mode channels with
// total photon number <= n_max and optional per-channel cap c_max.
//
// Ordering is graded by total photon number, then lexicographically
// descending within each sector, so sectors occupy contiguous index ranges
// and states[0] is the vacuum. Immutable once built.
class FockBasis {
public:
    static constexpr std::uint64_t kDefaultMaxStates = 5'000'000;

    int num_channels() const { return num_channels_; }
    int n_max() const { return n_max_; }
    int c_max() const { return c_max_; }
    Index size() const { return static_cast<Index>(occ_.size() / num_channels_); }

    std::span<const std::uint8_t> state(Index i) const {
        return {occ_.data() + static_cast<std::size_t>(i) * num_channels_,
                static_cast<std::size_t>(num_channels_)};
    }

    int total(Index i) const {
        const auto s = state(i);
        return std::accumulate(s.begin(), s.end(), 0);
    }

    // First index of the sector with total photon number n.
    Index sector_begin(int n) const { return sector_offsets_[static_cast<std::size_t>(n)]; }
    Index sector_end(int n) const { return sector_offsets_[static_cast<std::size_t>(n) + 1]; }

    // Exact inverse of the states ordering. Returns -1 for unknown states.
    Index index_of(std::span<const std::uint8_t> occ) const {
        const int n = std::accumulate(occ.begin(), occ.end(), 0);
        if (n > n_max_) return -1;
        Index lo = sector_begin(n), hi = sector_end(n);
        // Within a sector states are sorted lexicographically descending.
        while (lo < hi) {
            const Index mid = lo + (hi - lo) / 2;
            if (lex_greater(state(mid), occ)) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        if (lo < sector_end(n) && std::ranges::equal(state(lo), occ)) return lo;
        return -1;
    }

    friend FockBasis enumerate_basis(int num_channels, int n_max, int c_max,
                                     std::uint64_t max_states);

private:
    static bool lex_greater(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
        return std::ranges::lexicographical_compare(b, a);
    }

    int num_channels_ = 0;
    int n_max_ = 0;
    int c_max_ = 0;
    std::vector<std::uint8_t> occ_;        // flat, num_channels_ per state
    std::vector<Index> sector_offsets_;    // size n_max_ + 2
};

inline FockBasis enumerate_basis(int num_channels, int n_max, int c_max = -1,
                                 std::uint64_t max_states = FockBasis::kDefaultMaxStates) {
    if (num_channels < 1) throw std::invalid_argument("num_channels must be >= 1");
    if (n_max < 0) throw std::invalid_argument("n_max must be >= 0");
    if (n_max > 255) throw std::invalid_argument("n_max must be <= 255 (8-bit occupations)");
    if (c_max < 0) c_max = n_max;
    c_max = std::min(c_max, n_max);

    // Count states per sector first: ways[n] = #states of m channels with
    // total n, each channel <= c_max. Saturates at max_states + 1.
    const std::uint64_t cap = max_states + 1;
    std::vector<std::uint64_t> ways(static_cast<std::size_t>(n_max) + 1, 0);
    ways[0] = 1;
    for (int ch = 0; ch < num_channels; ++ch) {
        std::vector<std::uint64_t> next(ways.size(), 0);
        for (int n = 0; n <= n_max; ++n) {
            if (ways[static_cast<std::size_t>(n)] == 0) continue;
            for (int v = 0; v <= c_max && n + v <= n_max; ++v) {
                auto& slot = next[static_cast<std::size_t>(n + v)];
                slot = std::min(cap, slot + ways[static_cast<std::size_t>(n)]);
            }
        }
        ways.swap(next);
    }
    const std::uint64_t total_states =
        std::min<std::uint64_t>(cap, std::accumulate(ways.begin(), ways.end(), std::uint64_t{0}));
    if (total_states > max_states) {
        throw CapacityError("basis would exceed " + std::to_string(max_states) + " states");
    }

    FockBasis basis;
    basis.num_channels_ = num_channels;
    basis.n_max_ = n_max;
    basis.c_max_ = c_max;
    basis.occ_.reserve(total_states * static_cast<std::uint64_t>(num_channels));
    basis.sector_offsets_.reserve(static_cast<std::size_t>(n_max) + 2);

    std::vector<std::uint8_t> occ(static_cast<std::size_t>(num_channels), 0);
    // Emit one sector at a time; within a sector allocate from the leftmost
    // channel downward, which yields descending lexicographic order.
    auto emit_sector = [&](int n) {
        auto rec = [&](auto&& self, int ch, int remaining) -> void {
            if (ch == num_channels - 1) {
                if (remaining <= c_max) {
                    occ[static_cast<std::size_t>(ch)] = static_cast<std::uint8_t>(remaining);
                    basis.occ_.insert(basis.occ_.end(), occ.begin(), occ.end());
                }
                return;
            }
            const int hi = std::min(remaining, c_max);
            const int channels_right = num_channels - 1 - ch;
            for (int v = hi; v >= 0; --v) {
                if (remaining - v > channels_right * c_max) break;
                occ[static_cast<std::size_t>(ch)] = static_cast<std::uint8_t>(v);
                self(self, ch + 1, remaining - v);
            }
            occ[static_cast<std::size_t>(ch)] = 0;
        };
        rec(rec, 0, n);
    };
    for (int n = 0; n <= n_max; ++n) {
        basis.sector_offsets_.push_back(
            static_cast<Index>(basis.occ_.size() / static_cast<std::size_t>(num_channels)));
        emit_sector(n);
    }
    basis.sector_offsets_.push_back(
        static_cast<Index>(basis.occ_.size() / static_cast<std::size_t>(num_channels)));
    return basis;
}

// Matrix of the per-channel annihilation operator:
// <s - e_mu| a_mu |s> = sqrt(s_mu). The creation operator is its adjoint.
inline SparseOperator annihilation_matrix(const FockBasis& basis, int channel) {
    if (channel < 0 || channel >= basis.num_channels()) {
        throw std::out_of_range("channel index " + std::to_string(channel) + " out of range");
    }
    std::vector<SparseOperator::Triplet> entries;
    std::vector<std::uint8_t> lowered(static_cast<std::size_t>(basis.num_channels()));
    for (Index i = 0; i < basis.size(); ++i) {
        const auto s = basis.state(i);
        const int n = s[static_cast<std::size_t>(channel)];
        if (n == 0) continue;
        std::copy(s.begin(), s.end(), lowered.begin());
        lowered[static_cast<std::size_t>(channel)] = static_cast<std::uint8_t>(n - 1);
        const Index row = basis.index_of(lowered);
        entries.emplace_back(row, i, cplx(std::sqrt(static_cast<double>(n)), 0.0));
    }
    return SparseOperator::from_triplets(basis.size(), entries, false);
}

inline SparseOperator creation_matrix(const FockBasis& basis, int channel) {
    return annihilation_matrix(basis, channel).adjoint();
}

// Diagonal second-quantized operator sum_mu weights[mu] * n_mu; covers the
// number operator, the field energy, and field momentum components.
inline SparseOperator diagonal_operator(const FockBasis& basis,
                                        const std::vector<double>& weights) {
    if (static_cast<int>(weights.size()) != basis.num_channels()) {
        throw std::invalid_argument("weights length must equal channel count");
    }
    std::vector<double> diag(static_cast<std::size_t>(basis.size()), 0.0);
    for (Index i = 0; i < basis.size(); ++i) {
        const auto s = basis.state(i);
        double acc = 0.0;
        for (int c = 0; c < basis.num_channels(); ++c) {
            acc += weights[static_cast<std::size_t>(c)] * s[static_cast<std::size_t>(c)];
        }
        diag[static_cast<std::size_t>(i)] = acc;
    }
    return SparseOperator::diagonal(diag);
}

inline SparseOperator number_operator(const FockBasis& basis) {
    return diagonal_operator(basis, std::vector<double>(
                                        static_cast<std::size_t>(basis.num_channels()), 1.0));
}

inline Eigen::Matrix2cd pauli_matrix(int i) {
    Eigen::Matrix2cd s;
    switch (i) {
        case 0: s << 0, 1, 1, 0; break;
        case 1: s << 0, cplx(0, -1), cplx(0, 1), 0; break;
        case 2: s << 1, 0, 0, -1; break;
        default: throw std::out_of_range("pauli index must be 0, 1, or 2");
    }
    return s;
}

// Kronecker product spin (x) op, spin factor first: index = 2-block layout
// (s * dim_fock + f). An identity spin factor embeds Fock operators into the
// doubled carrier.
inline SparseOperator tensor_with_spin(const SparseOperator& op, const Eigen::Matrix2cd& s) {
    const Index d = op.dim();
    std::vector<SparseOperator::Triplet> entries;
    entries.reserve(static_cast<std::size_t>(op.nonzeros()) * 4);
    const auto& m = op.matrix();
    for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
            const cplx w = s(a, b);
            if (w == cplx(0.0, 0.0)) continue;
            for (Index r = 0; r < m.outerSize(); ++r) {
                for (SparseOperator::Storage::InnerIterator it(m, r); it; ++it) {
                    entries.emplace_back(a * d + it.row(), b * d + it.col(), w * it.value());
                }
            }
        }
    }
    const bool herm = op.hermitian() && s.isApprox(s.adjoint(), 0.0);
    return SparseOperator::from_triplets(2 * d, entries, herm);
}

}  // namespace fiberspec
