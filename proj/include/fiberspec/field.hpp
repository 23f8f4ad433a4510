#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "fiberspec/fock.hpp"
#include "fiberspec/quadrature.hpp"
#include "fiberspec/util.hpp"

namespace fiberspec {

struct CouplingParams {
    double e = 0.0;          // coupling constant, any sign
    double lambda_uv = 1.0;  // ultraviolet cutoff, > 0
    double sigma_ir = 0.05;  // infrared cutoff, 0 < sigma < lambda
    bool spin = false;       // include the magnetic (Pauli) term

    void validate() const {
        if (!std::isfinite(e)) throw std::invalid_argument("coupling e must be finite");
        if (!(lambda_uv > 0.0)) throw std::invalid_argument("lambda_uv must be > 0");
        if (!(sigma_ir > 0.0) || !(sigma_ir < lambda_uv)) {
            throw std::invalid_argument("need 0 < sigma_ir < lambda_uv");
        }
    }
};

// Coupling profile 1/(2 pi)^{3/2} on |k| <= lambda, zero above.
inline double coupling_profile(double k_abs, double lambda_uv) {
    constexpr double norm = 0.06349363593424097;  // (2 pi)^{-3/2}
    return k_abs <= lambda_uv ? norm : 0.0;
}

struct Mode {
    Vec3 k;         // wavevector
    double k_abs;   // |k|
    double weight;  // quadrature volume element
    Vec3 eps1, eps2;
    double g;       // coupling_profile(|k|) / sqrt(2|k|) * sqrt(weight)
};

// The discretized transverse photon field. Each spatial mode carries two
// polarization channels; channel index = 2 * mode + polarization.
class ModeSet {
public:
    ModeSet() = default;
    ModeSet(std::vector<Mode> modes, CouplingParams params, FieldDiscretization disc)
        : modes_(std::move(modes)), params_(params), disc_(disc) {}

    const std::vector<Mode>& modes() const { return modes_; }
    int num_modes() const { return static_cast<int>(modes_.size()); }
    int num_channels() const { return 2 * num_modes(); }
    const CouplingParams& params() const { return params_; }
    const FieldDiscretization& discretization() const { return disc_; }

    int channel_mode(int channel) const { return channel / 2; }
    int channel_polarization(int channel) const { return channel % 2; }

    const Vec3& channel_eps(int channel) const {
        const Mode& m = modes_[static_cast<std::size_t>(channel / 2)];
        return channel % 2 == 0 ? m.eps1 : m.eps2;
    }

    // Stable fingerprint of the grid; goes into result provenance.
    std::uint64_t hash() const {
        std::uint64_t h = fnv1a64("modeset");
        auto mix = [&h](double v) {
            h = fnv1a64(std::as_bytes(std::span(&v, 1)), h);
        };
        for (const auto& m : modes_) {
            mix(m.k.x());
            mix(m.k.y());
            mix(m.k.z());
            mix(m.weight);
            mix(m.g);
        }
        mix(params_.e);
        mix(params_.lambda_uv);
        mix(params_.sigma_ir);
        mix(params_.spin ? 1.0 : 0.0);
        return h;
    }

private:
    std::vector<Mode> modes_;
    CouplingParams params_;
    FieldDiscretization disc_;
};

inline ModeSet build_mode_set(const FieldDiscretization& d, const CouplingParams& p) {
    p.validate();
    const auto dirs = direction_set(d);
    const auto cells = radial_cells(d.radial_scheme, d.radial_shells, p.sigma_ir, p.lambda_uv);
    std::vector<Mode> modes;
    modes.reserve(cells.size() * dirs.size());
    for (const auto& cell : cells) {
        for (const auto& dir : dirs) {
            Mode m;
            m.k = cell.node * dir.omega;
            m.k_abs = cell.node;
            m.weight = cell.volume * dir.weight;
            auto frame = polarization_frame(dir.omega);
            m.eps1 = frame.first;
            m.eps2 = frame.second;
            m.g = coupling_profile(m.k_abs, p.lambda_uv) / std::sqrt(2.0 * m.k_abs) *
                  std::sqrt(m.weight);
            modes.push_back(m);
        }
    }
    return ModeSet(std::move(modes), p, d);
}

// Grid audit dump: one row per spatial mode.
inline void dump_modes_csv(const ModeSet& ms, std::ostream& out) {
    out << "m,kx,ky,kz,k_abs,w,g,eps1_x,eps1_y,eps1_z,eps2_x,eps2_y,eps2_z\r\n";
    const auto& modes = ms.modes();
    for (std::size_t i = 0; i < modes.size(); ++i) {
        const Mode& m = modes[i];
        out << i;
        for (double v : {m.k.x(), m.k.y(), m.k.z(), m.k_abs, m.weight, m.g, m.eps1.x(),
                         m.eps1.y(), m.eps1.z(), m.eps2.x(), m.eps2.y(), m.eps2.z()}) {
            out << ',' << format_double(v);
        }
        out << "\r\n";
    }
}

// The assembled second-quantized field operators on the model carrier
// (spin (x) Fock when params.spin, plain Fock otherwise).
struct FieldOperators {
    std::array<SparseOperator, 3> A;    // vector potential components
    std::array<SparseOperator, 3> B;    // magnetic field components
    std::array<SparseOperator, 3> P_f;  // field momentum components
    SparseOperator H_f;                 // field energy
    SparseOperator N;                   // photon number
    SparseOperator id;                  // identity on the carrier

    FockBasis basis;  // channel layout: 2 * num_modes channels
    ModeSet modes;
    CouplingParams params;

    Index dim() const { return id.dim(); }
    Index fock_dim() const { return basis.size(); }
};

inline FieldOperators assemble_field_operators(const ModeSet& ms, FockBasis basis,
                                               const CouplingParams& p) {
    if (basis.num_channels() != ms.num_channels()) {
        throw std::invalid_argument("basis channel count must equal 2 * number of modes");
    }
    const Index dim = basis.size();
    const int num_channels = basis.num_channels();

    // Ladder-term sweep: for every state s and channel c with s_c >= 1 the
    // annihilation entry sits at (s - e_c, s) with amplitude sqrt(s_c); the
    // adjoint entry completes A (Hermitian) and B (i(a - a*) form).
    std::array<std::vector<SparseOperator::Triplet>, 3> a_entries;
    std::array<std::vector<SparseOperator::Triplet>, 3> b_entries;
    std::vector<std::uint8_t> lowered(static_cast<std::size_t>(num_channels));
    for (Index col = 0; col < dim; ++col) {
        const auto s = basis.state(col);
        for (int c = 0; c < num_channels; ++c) {
            const int n = s[static_cast<std::size_t>(c)];
            if (n == 0) continue;
            std::copy(s.begin(), s.end(), lowered.begin());
            lowered[static_cast<std::size_t>(c)] = static_cast<std::uint8_t>(n - 1);
            const Index row = basis.index_of(lowered);
            const Mode& m = ms.modes()[static_cast<std::size_t>(c / 2)];
            const Vec3& eps = c % 2 == 0 ? m.eps1 : m.eps2;
            const Vec3 kx_eps = m.k.cross(eps);
            const double amp = m.g * std::sqrt(static_cast<double>(n));
            for (int i = 0; i < 3; ++i) {
                if (eps[i] != 0.0) {
                    a_entries[static_cast<std::size_t>(i)].emplace_back(row, col,
                                                                        cplx(eps[i] * amp, 0));
                    a_entries[static_cast<std::size_t>(i)].emplace_back(col, row,
                                                                        cplx(eps[i] * amp, 0));
                }
                if (kx_eps[i] != 0.0) {
                    b_entries[static_cast<std::size_t>(i)].emplace_back(
                        row, col, cplx(0, kx_eps[i] * amp));
                    b_entries[static_cast<std::size_t>(i)].emplace_back(
                        col, row, cplx(0, -kx_eps[i] * amp));
                }
            }
        }
    }

    std::vector<double> hf_weights, n_weights;
    std::array<std::vector<double>, 3> pf_weights;
    for (int c = 0; c < num_channels; ++c) {
        const Mode& m = ms.modes()[static_cast<std::size_t>(c / 2)];
        hf_weights.push_back(m.k_abs);
        n_weights.push_back(1.0);
        for (int i = 0; i < 3; ++i) pf_weights[static_cast<std::size_t>(i)].push_back(m.k[i]);
    }

    FieldOperators ops;
    for (int i = 0; i < 3; ++i) {
        auto& slot = ops.A[static_cast<std::size_t>(i)];
        slot = SparseOperator::from_triplets(dim, a_entries[static_cast<std::size_t>(i)], true);
        auto& bslot = ops.B[static_cast<std::size_t>(i)];
        bslot =
            SparseOperator::from_triplets(dim, b_entries[static_cast<std::size_t>(i)], true);
        ops.P_f[static_cast<std::size_t>(i)] =
            diagonal_operator(basis, pf_weights[static_cast<std::size_t>(i)]);
    }
    ops.H_f = diagonal_operator(basis, hf_weights);
    ops.N = number_operator(basis);
    ops.id = SparseOperator::identity(dim);

    if (p.spin) {
        const Eigen::Matrix2cd id2 = Eigen::Matrix2cd::Identity();
        for (int i = 0; i < 3; ++i) {
            ops.A[static_cast<std::size_t>(i)] =
                tensor_with_spin(ops.A[static_cast<std::size_t>(i)], id2);
            ops.B[static_cast<std::size_t>(i)] =
                tensor_with_spin(ops.B[static_cast<std::size_t>(i)], id2);
            ops.P_f[static_cast<std::size_t>(i)] =
                tensor_with_spin(ops.P_f[static_cast<std::size_t>(i)], id2);
        }
        ops.H_f = tensor_with_spin(ops.H_f, id2);
        ops.N = tensor_with_spin(ops.N, id2);
        ops.id = SparseOperator::identity(2 * dim);
    }

    ops.basis = std::move(basis);
    ops.modes = ms;
    ops.params = p;
    return ops;
}

// H(xi) = sum_i v_i(xi)^2 [+ e sigma.B] + H_f with v(xi) = xi - P_f + e A.
struct FiberHamiltonian {
    Vec3 xi;
    SparseOperator H;
    std::array<SparseOperator, 3> v;
    CouplingParams params;
    std::uint64_t provenance = 0;
};

inline FiberHamiltonian assemble_fiber_hamiltonian(const FieldOperators& F, const Vec3& xi,
                                                   const CouplingParams& p) {
    FiberHamiltonian fh;
    fh.xi = xi;
    fh.params = p;
    fh.provenance = F.modes.hash();
    for (int i = 0; i < 3; ++i) {
        fh.v[static_cast<std::size_t>(i)] =
            xi[i] * F.id - F.P_f[static_cast<std::size_t>(i)] +
            p.e * F.A[static_cast<std::size_t>(i)];
        fh.v[static_cast<std::size_t>(i)].mark_hermitian(true);
    }
    SparseOperator H = fh.v[0] * fh.v[0] + fh.v[1] * fh.v[1] + fh.v[2] * fh.v[2] + F.H_f;
    if (p.spin) {
        const Index fock_dim = F.fock_dim();
        for (int i = 0; i < 3; ++i) {
            const SparseOperator sigma_i =
                tensor_with_spin(SparseOperator::identity(fock_dim), pauli_matrix(i));
            H = H + p.e * (sigma_i * F.B[static_cast<std::size_t>(i)]);
        }
    }
    H.mark_hermitian(true);
    // Symmetric assembly should make this exact; the spot check guards the
    // assembly path itself.
    const double spot = H.hermitian_spot_residual(42, 1000);
    if (spot > 1e-12 * std::max(1.0, H.max_abs_entry())) {
        throw std::logic_error("assembled Hamiltonian failed Hermiticity spot check");
    }
    fh.H = std::move(H);
    return fh;
}

}  // namespace fiberspec
