#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "fiberspec/field.hpp"
#include "fiberspec/lanczos.hpp"
#include "fiberspec/minres.hpp"
#include "fiberspec/util.hpp"

namespace fiberspec {

// Everything needed to rebuild a model instance from scratch; sweeps vary
// sigma_ir and the shell count between instances.
struct ModelSpec {
    CouplingParams coupling;
    FieldDiscretization grid;
    int n_max = 2;
    int c_max = -1;
    std::uint64_t max_states = FockBasis::kDefaultMaxStates;
};

// A fully assembled model instance: mode set, truncated Fock basis, field
// operators. Immutable; Hamiltonians at any xi are derived on demand.
class Model {
public:
    explicit Model(const ModelSpec& spec) : spec_(spec) {
        ModeSet ms = build_mode_set(spec.grid, spec.coupling);
        FockBasis basis =
            enumerate_basis(ms.num_channels(), spec.n_max, spec.c_max, spec.max_states);
        ops_ = assemble_field_operators(ms, std::move(basis), spec.coupling);
    }

    const ModelSpec& spec() const { return spec_; }
    const FieldOperators& ops() const { return ops_; }
    const ModeSet& modes() const { return ops_.modes; }
    const FockBasis& basis() const { return ops_.basis; }
    Index dim() const { return ops_.dim(); }
    bool spin() const { return spec_.coupling.spin; }

    FiberHamiltonian hamiltonian(const Vec3& xi) const {
        return assemble_fiber_hamiltonian(ops_, xi, spec_.coupling);
    }

    // Per-channel annihilation operator lifted to the model carrier.
    SparseOperator lifted_annihilation(int channel) const {
        SparseOperator a = annihilation_matrix(ops_.basis, channel);
        if (spin()) a = tensor_with_spin(a, Eigen::Matrix2cd::Identity());
        return a;
    }

    // Vacuum (tensor a fixed spin-up spinor on the doubled carrier).
    Vec vacuum_vector() const {
        Vec v = Vec::Zero(dim());
        v[0] = 1.0;
        return v;
    }

    // Norm of the components with total photon number >= min_total.
    double tail_weight(const Vec& psi, int min_total) const {
        if (min_total <= 0) return psi.norm();
        if (min_total > spec_.n_max) return 0.0;
        const Index fock_dim = ops_.fock_dim();
        const Index begin = ops_.basis.sector_begin(min_total);
        double acc = 0.0;
        const int blocks = spin() ? 2 : 1;
        for (int b = 0; b < blocks; ++b) {
            acc += psi.segment(b * fock_dim + begin, fock_dim - begin).squaredNorm();
        }
        return std::sqrt(acc);
    }

    // Lanczos start vector: vacuum spinor plus small seeded noise, so the
    // overlap with the ground state is generically nonzero while runs stay
    // reproducible.
    Vec start_vector(std::uint64_t seed) const {
        Vec v = vacuum_vector() + 1e-3 * detail::seeded_noise(dim(), seed);
        v /= v.norm();
        return v;
    }

private:
    ModelSpec spec_;
    FieldOperators ops_;
};

struct SolverDiagnostics {
    int iterations = 0;
    double residual = 0.0;
    std::string method;
};

// Ground-state solve output: the lowest eigenpair plus the near-degenerate
// cluster (all eigenvalues within gap_tol of the bottom) and its gap.
struct GroundStateRecord {
    Vec3 xi = Vec3::Zero();
    double energy = 0.0;
    Vec psi;
    std::vector<Vec> cluster;
    double gap = std::numeric_limits<double>::infinity();
    SolverDiagnostics solver;

    static double gap_tolerance(double energy) { return 1e-8 * std::max(1.0, std::abs(energy)); }
};

inline GroundStateRecord solve_ground(const Model& model, const FiberHamiltonian& fh,
                                      const EigenOptions& opts) {
    EigenOptions o = opts;
    // Degenerate clusters (the spin model carries an exact two-fold one at
    // e = 0) need headroom beyond the requested count to resolve the gap.
    o.n_wanted = std::min<Index>(model.dim(), std::max(opts.n_wanted, model.spin() ? 4 : 3));
    const Vec start = model.start_vector(opts.seed);
    const EigenResult res = lowest_eigenpairs(fh.H, o, &start);

    GroundStateRecord rec;
    rec.xi = fh.xi;
    rec.energy = res.pairs.front().value;
    rec.solver = {res.iterations, res.residual, res.method};

    const double gtol = GroundStateRecord::gap_tolerance(rec.energy);
    for (const auto& p : res.pairs) {
        if (p.value - rec.energy <= gtol) {
            rec.cluster.push_back(p.vector);
        } else {
            rec.gap = p.value - rec.energy;
            break;
        }
    }
    // Modified Gram-Schmidt; dense eigenvectors arrive orthonormal, Lanczos
    // deflation is orthogonal to solver tolerance only.
    for (std::size_t i = 0; i < rec.cluster.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            rec.cluster[i] -= rec.cluster[j].dot(rec.cluster[i]) * rec.cluster[j];
        }
        rec.cluster[i] /= rec.cluster[i].norm();
    }
    rec.psi = rec.cluster.front();
    return rec;
}

inline GroundStateRecord solve_ground(const Model& model, const Vec3& xi,
                                      const EigenOptions& opts) {
    return solve_ground(model, model.hamiltonian(xi), opts);
}

// Lowest eigenvalue only; the workhorse for finite-difference stencils and
// gap evaluations where the eigenvector is not needed afterwards.
inline double lowest_energy(const Model& model, const Vec3& xi, const EigenOptions& opts) {
    EigenOptions o = opts;
    o.n_wanted = 1;
    const Vec start = model.start_vector(opts.seed);
    return lowest_eigenpairs(model.hamiltonian(xi).H, o, &start).pairs.front().value;
}

struct DispersionRow {
    Vec3 xi = Vec3::Zero();
    bool ok = false;
    std::string error;
    double energy = 0.0;
    double t = 0.0;  // energy - |xi|^2
    double n_expect = 0.0;
    Vec3 v_expect = Vec3::Zero();
    double gap = 0.0;
    int iterations = 0;
    double residual = 0.0;
};

struct DispersionTable {
    std::vector<DispersionRow> rows;
    std::uint64_t grid_hash = 0;

    void to_csv(std::ostream& out) const {
        out << "xi_x,xi_y,xi_z,E,t,N_expect,gap,iters,residual\r\n";
        for (const auto& r : rows) {
            if (!r.ok) continue;
            out << format_double(r.xi.x()) << ',' << format_double(r.xi.y()) << ','
                << format_double(r.xi.z()) << ',' << format_double(r.energy) << ','
                << format_double(r.t) << ',' << format_double(r.n_expect) << ','
                << format_double(r.gap) << ',' << r.iterations << ','
                << format_double(r.residual) << "\r\n";
        }
    }
};

// One ground-state solve per momentum; rows are independent and are
// dispatched to the worker pool. Per-row solver failures are recorded in the
// row, not thrown.
inline DispersionTable dispersion(const Model& model, const std::vector<Vec3>& xi_list,
                                  const EigenOptions& opts, unsigned workers = 0) {
    if (xi_list.empty()) throw std::invalid_argument("dispersion needs at least one momentum");
    DispersionTable table;
    table.grid_hash = model.modes().hash();
    table.rows.resize(xi_list.size());
    parallel_for(
        xi_list.size(),
        [&](std::size_t i) {
            DispersionRow& row = table.rows[i];
            row.xi = xi_list[i];
            try {
                const FiberHamiltonian fh = model.hamiltonian(row.xi);
                const GroundStateRecord rec = solve_ground(model, fh, opts);
                row.ok = true;
                row.energy = rec.energy;
                row.t = rec.energy - row.xi.squaredNorm();
                row.n_expect = model.ops().N.expectation(rec.psi).real();
                for (int d = 0; d < 3; ++d) {
                    row.v_expect[d] =
                        fh.v[static_cast<std::size_t>(d)].expectation(rec.psi).real();
                }
                row.gap = rec.gap;
                row.iterations = rec.solver.iterations;
                row.residual = rec.solver.residual;
            } catch (const std::exception& ex) {
                row.ok = false;
                row.error = ex.what();
            }
        },
        workers);
    return table;
}

struct GradientEstimate {
    Vec3 gradient = Vec3::Zero();
    double step = 0.0;
    double error_estimate = 0.0;  // central differences: O(h^2)
};

inline GradientEstimate fd_gradient(const Model& model, const Vec3& xi, double h,
                                    const EigenOptions& opts) {
    if (!(h > 0.0)) throw std::invalid_argument("finite-difference step must be > 0");
    GradientEstimate est;
    est.step = h;
    for (int i = 0; i < 3; ++i) {
        Vec3 xp = xi, xm = xi;
        xp[i] += h;
        xm[i] -= h;
        est.gradient[i] = (lowest_energy(model, xp, opts) - lowest_energy(model, xm, opts)) /
                          (2.0 * h);
    }
    est.error_estimate = h * h * std::max(1.0, est.gradient.norm());
    return est;
}

// Step-halving refinement: the h^2 error term cancels, and the spread
// between the two stencils bounds the remaining error.
inline GradientEstimate richardson_gradient(const Model& model, const Vec3& xi, double h,
                                            const EigenOptions& opts) {
    const GradientEstimate full = fd_gradient(model, xi, h, opts);
    const GradientEstimate half = fd_gradient(model, xi, 0.5 * h, opts);
    GradientEstimate est;
    est.step = 0.5 * h;
    est.gradient = (4.0 * half.gradient - full.gradient) / 3.0;
    est.error_estimate = (half.gradient - full.gradient).norm() / 3.0;
    return est;
}

struct ShiftedSolve {
    Vec x;
    int iterations = 0;
    double relative_residual = 0.0;
    double shift_gap = 0.0;  // lowest eigenvalue of the shifted operator
};

// Assembles H(xi - k) + (|k| - E) Id on the model carrier.
inline SparseOperator shifted_operator(const Model& model, const Vec3& xi, const Vec3& k,
                                       double energy) {
    const FiberHamiltonian fh = model.hamiltonian(xi - k);
    SparseOperator S = fh.H + (k.norm() - energy) * model.ops().id;
    S.mark_hermitian(true);
    return S;
}

// Krylov solve of (H(xi - k) + |k| - E) x = eta. The shift must be positive
// definite; a nonpositive bottom eigenvalue means k points outside the cone
// where the gap bound holds (or |k| is too large) and is reported as such.
inline ShiftedSolve solve_shifted(const Model& model, const Vec3& xi, const Vec3& k,
                                  double energy, const Vec& eta, const EigenOptions& opts) {
    if (eta.size() != model.dim()) throw std::invalid_argument("eta dimension mismatch");
    const SparseOperator S = shifted_operator(model, xi, k, energy);
    EigenOptions eo = opts;
    eo.n_wanted = 1;
    const Vec start = model.start_vector(opts.seed);
    const double lowest = lowest_eigenpairs(S, eo, &start).pairs.front().value;
    if (lowest <= 0.0) {
        throw IndefiniteShiftError(
            "shifted operator not positive definite (lowest eigenvalue " +
                std::to_string(lowest) + ")",
            lowest);
    }
    MinresOptions mo;
    mo.tol = opts.tol;
    const MinresResult mr = minres_solve(S, eta, mo);
    return {mr.x, mr.iterations, mr.relative_residual, lowest};
}

}  // namespace fiberspec
