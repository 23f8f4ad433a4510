#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "fiberspec/spectral.hpp"

namespace fiberspec {

// Direction sets on the unit sphere tied to the dispersion gradient: S_eps
// is where the shifted operator keeps a gap of order eps |k|; K is the
// band where the soft-photon source term is bounded away from zero.
struct ConeSpec {
    Vec3 grad_E = Vec3::Zero();
    double epsilon = 0.5;

    void validate() const {
        if (!(epsilon > 0.0) || !(epsilon < 1.0)) {
            throw std::invalid_argument("cone epsilon must lie in (0, 1)");
        }
    }
};

struct ConeMembership {
    bool in_s_eps = false;
    bool in_k = false;
};

inline ConeMembership cone_membership(const Vec3& omega, const ConeSpec& spec) {
    spec.validate();
    if (std::abs(omega.norm() - 1.0) > 1e-10) {
        throw std::invalid_argument("cone membership requires a unit direction");
    }
    const double along = omega.dot(spec.grad_E);
    ConeMembership m;
    m.in_s_eps = along <= 1.0 - spec.epsilon;
    m.in_k = -0.5 * spec.grad_E.norm() <= along && along <= 0.0;
    return m;
}

struct Provenance {
    Vec3 xi = Vec3::Zero();
    double e = 0.0;
    std::uint64_t grid_hash = 0;
};

// Single named residual with a uniform pass contract: pass <=> value <= tolerance.
struct IdentityReport {
    std::string name;
    double value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    Provenance provenance;
    std::map<std::string, double> details;

    static IdentityReport make(std::string name, double value, double tolerance,
                               const Provenance& prov) {
        IdentityReport r;
        r.name = std::move(name);
        r.value = value;
        r.tolerance = tolerance;
        r.pass = value <= tolerance;
        r.provenance = prov;
        return r;
    }
};

inline Provenance provenance_of(const Model& model, const Vec3& xi) {
    return {xi, model.spec().coupling.e, model.modes().hash()};
}

// Largest |eigenvalue| of a small Hermitian matrix.
inline double hermitian_operator_norm(const Eigen::MatrixXcd& m) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Checks 2 P0 v_i P0 = (grad E)_i P0 on the ground cluster: the velocity
// expectation of the ground subspace equals the dispersion gradient.
inline IdentityReport feynman_hellmann_check(const Model& model, const FiberHamiltonian& fh,
                                             const GroundStateRecord& gs, const Vec3& grad_fd,
                                             double tolerance) {
    if (gs.cluster.empty()) throw std::invalid_argument("empty ground cluster");
    const int d = static_cast<int>(gs.cluster.size());
    double worst = 0.0;
    for (int i = 0; i < 3; ++i) {
        Eigen::MatrixXcd compressed(d, d);
        for (int b = 0; b < d; ++b) {
            const Vec vub = fh.v[static_cast<std::size_t>(i)].apply(
                gs.cluster[static_cast<std::size_t>(b)]);
            for (int a = 0; a < d; ++a) {
                compressed(a, b) = 2.0 * gs.cluster[static_cast<std::size_t>(a)].dot(vub);
            }
        }
        compressed -= grad_fd[i] * Eigen::MatrixXcd::Identity(d, d);
        worst = std::max(worst, hermitian_operator_norm(compressed));
    }
    IdentityReport r = IdentityReport::make("feynman_hellmann", worst / std::max(1.0, grad_fd.norm()),
                                            tolerance, provenance_of(model, gs.xi));
    r.details["cluster_size"] = d;
    r.details["grad_norm"] = grad_fd.norm();
    return r;
}

struct PullThroughOptions {
    EigenOptions eigen;
    bool check_definiteness = true;
};

// Residual of (H(xi - k_m) + |k_m| - E) a_mu psi = -e g_m (2 eps.v - i(k x eps).sigma) psi.
// Exact below the top two photon layers; `topweight` reports the norm that
// sits in those layers and dominates the residual at weak coupling.
inline IdentityReport pull_through_residual(const Model& model, const FiberHamiltonian& fh,
                                            const GroundStateRecord& gs, int channel,
                                            const PullThroughOptions& opts, double tolerance) {
    const ModeSet& ms = model.modes();
    if (channel < 0 || channel >= ms.num_channels()) {
        throw std::out_of_range("channel out of range");
    }
    const Mode& mode = ms.modes()[static_cast<std::size_t>(channel / 2)];
    const Vec3 eps = ms.channel_eps(channel);
    const double e = model.spec().coupling.e;
    const double g = mode.g;

    const SparseOperator shift = shifted_operator(model, gs.xi, mode.k, gs.energy);
    double shift_gap = std::numeric_limits<double>::quiet_NaN();
    if (opts.check_definiteness) {
        EigenOptions eo = opts.eigen;
        eo.n_wanted = 1;
        const Vec start = model.start_vector(eo.seed);
        shift_gap = lowest_eigenpairs(shift, eo, &start).pairs.front().value;
        if (shift_gap <= 0.0) {
            throw IndefiniteShiftError("channel " + std::to_string(channel) +
                                           " lies outside the positive-shift region",
                                       shift_gap);
        }
    }

    const Vec a_psi = model.lifted_annihilation(channel).apply(gs.psi);
    Vec source = Vec::Zero(model.dim());
    for (int i = 0; i < 3; ++i) {
        if (eps[i] != 0.0) {
            source += 2.0 * eps[i] * fh.v[static_cast<std::size_t>(i)].apply(gs.psi);
        }
    }
    if (model.spin()) {
        const Vec3 k_cross_eps = mode.k.cross(eps);
        for (int i = 0; i < 3; ++i) {
            if (k_cross_eps[i] == 0.0) continue;
            const SparseOperator sigma_i = tensor_with_spin(
                SparseOperator::identity(model.ops().fock_dim()), pauli_matrix(i));
            source -= cplx(0.0, k_cross_eps[i]) * sigma_i.apply(gs.psi);
        }
    }

    const double numerator = (shift.apply(a_psi) + e * g * source).norm();
    const double denominator = std::abs(e) * g * gs.psi.norm() + a_psi.norm();
    const double residual = denominator > 0.0 ? numerator / denominator : numerator;

    IdentityReport r = IdentityReport::make("pull_through_channel_" + std::to_string(channel),
                                            residual, tolerance, provenance_of(model, gs.xi));
    r.details["topweight"] = model.tail_weight(gs.psi, model.spec().n_max - 1);
    r.details["k_abs"] = mode.k_abs;
    r.details["shift_gap"] = shift_gap;
    r.details["a_psi_norm"] = a_psi.norm();
    return r;
}

struct ResolventPoint {
    double k_abs = 0.0;
    cplx q;              // <eta1, Q(k) eta2>
    double deviation = 0.0;  // |q - target|
    double gap_ratio = 0.0;  // (E(xi-k) + |k| - E(xi)) / |k|
};

struct ResolventSeries {
    std::vector<ResolventPoint> points;  // in the order sampled (|k| decreasing)
    cplx target;                         // (1 - omega.grad E)^{-1} <eta1, P0 eta2>
    double limit_gap_ratio = 0.0;        // 1 - omega.grad E
};

// Probes Q(k) = |k| (H(xi - k) + |k| - E)^{-1} along a fixed direction and
// a decreasing |k| ladder against its cluster-projected limit.
inline ResolventSeries resolvent_series(const Model& model, const GroundStateRecord& gs,
                                        const Vec3& grad, const Vec3& omega,
                                        const std::vector<double>& k_mags, const Vec& eta1,
                                        const Vec& eta2, const EigenOptions& opts) {
    if (std::abs(omega.norm() - 1.0) > 1e-10) {
        throw std::invalid_argument("probe direction must be a unit vector");
    }
    ResolventSeries series;
    series.limit_gap_ratio = 1.0 - omega.dot(grad);
    cplx proj(0.0, 0.0);
    for (const Vec& u : gs.cluster) proj += eta1.dot(u) * u.dot(eta2);
    series.target = proj / series.limit_gap_ratio;
    for (double k_abs : k_mags) {
        const Vec3 k = k_abs * omega;
        const ShiftedSolve sol = solve_shifted(model, gs.xi, k, gs.energy, eta2, opts);
        ResolventPoint p;
        p.k_abs = k_abs;
        p.q = k_abs * eta1.dot(sol.x);
        p.deviation = std::abs(p.q - series.target);
        p.gap_ratio = sol.shift_gap / k_abs;
        series.points.push_back(p);
    }
    return series;
}

// Report contract: value = worst monotonicity violation of the deviation
// sequence (<= 0 when the probe converges), with the gap-ratio floor
// eps - 0.1 recorded alongside.
inline IdentityReport resolvent_limit_check(const Model& model, const GroundStateRecord& gs,
                                            const ConeSpec& cone, const Vec3& omega,
                                            const std::vector<double>& k_mags,
                                            const EigenOptions& opts, double tolerance = 0.0) {
    if (!cone_membership(omega, cone).in_s_eps) {
        throw std::invalid_argument("probe direction lies outside S_eps");
    }
    if (k_mags.size() < 2 || !std::is_sorted(k_mags.rbegin(), k_mags.rend())) {
        throw std::invalid_argument("need at least two |k| values, strictly decreasing");
    }
    const ResolventSeries series = resolvent_series(model, gs, cone.grad_E, omega, k_mags,
                                                    gs.psi, gs.psi, opts);
    double violation = -std::numeric_limits<double>::infinity();
    double min_gap_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < series.points.size(); ++j) {
        min_gap_ratio = std::min(min_gap_ratio, series.points[j].gap_ratio);
        if (j > 0) {
            violation = std::max(violation,
                                 series.points[j].deviation - series.points[j - 1].deviation);
        }
    }
    IdentityReport r = IdentityReport::make("resolvent_limit", violation, tolerance,
                                            provenance_of(model, gs.xi));
    r.details["min_gap_ratio"] = min_gap_ratio;
    r.details["gap_ratio_floor"] = cone.epsilon - 0.1;
    r.details["limit_gap_ratio"] = series.limit_gap_ratio;
    r.details["final_deviation"] = series.points.back().deviation;
    if (min_gap_ratio < cone.epsilon - 0.1) r.pass = false;
    return r;
}

struct ModeAmplitudeRow {
    int channel = 0;
    double k_abs = 0.0;
    bool in_k = false;
    double eps_dot_grad = 0.0;
    double measured = 0.0;   // ||a_mu psi||
    double predicted = 0.0;  // |e| g |eps.grad E| / (|k| (1 - k_hat.grad E))
    double ratio = 0.0;      // measured / predicted, NaN when predicted = 0
};

struct ModeAmplitudeTable {
    std::vector<ModeAmplitudeRow> rows;
    Vec3 grad = Vec3::Zero();

    void to_csv(std::ostream& out) const {
        out << "channel,k_abs,in_K,eps_dot_grad,measured,predicted,ratio\r\n";
        for (const auto& r : rows) {
            out << r.channel << ',' << format_double(r.k_abs) << ',' << (r.in_k ? 1 : 0)
                << ',' << format_double(r.eps_dot_grad) << ',' << format_double(r.measured)
                << ',' << format_double(r.predicted) << ',' << format_double(r.ratio)
                << "\r\n";
        }
    }
};

// Per-channel soft-photon content of the ground state against its
// leading-order prediction from the resolvent limit.
inline ModeAmplitudeTable mode_amplitude_report(const Model& model, const GroundStateRecord& gs,
                                                const Vec3& grad) {
    const ModeSet& ms = model.modes();
    const double e = model.spec().coupling.e;
    ModeAmplitudeTable table;
    table.grad = grad;
    const ConeSpec cone{grad, 0.5};
    for (int c = 0; c < ms.num_channels(); ++c) {
        const Mode& mode = ms.modes()[static_cast<std::size_t>(c / 2)];
        const Vec3 eps = ms.channel_eps(c);
        ModeAmplitudeRow row;
        row.channel = c;
        row.k_abs = mode.k_abs;
        const Vec3 k_hat = mode.k / mode.k_abs;
        row.in_k = cone_membership(k_hat, cone).in_k;
        row.eps_dot_grad = eps.dot(grad);
        row.measured = model.lifted_annihilation(c).apply(gs.psi).norm();
        const double denom = mode.k_abs * (1.0 - k_hat.dot(grad));
        row.predicted = std::abs(e) * mode.g * std::abs(row.eps_dot_grad) / denom;
        row.ratio = row.predicted > 0.0 ? row.measured / row.predicted
                                        : std::numeric_limits<double>::quiet_NaN();
        table.rows.push_back(row);
    }
    return table;
}

struct IRSweepRow {
    double sigma = 0.0;
    bool ok = false;
    std::string error;
    double energy = 0.0;
    double n_expect = 0.0;
    double min_shell_k = 0.0;
    int n_max = 0;
    Index dim = 0;
};

struct IRSweepReport {
    std::vector<IRSweepRow> rows;
    bool fit_valid = false;
    double slope = 0.0;      // of <N> against log(1/sigma)
    double intercept = 0.0;
    double r_squared = 0.0;
    Provenance provenance;

    void to_csv(std::ostream& out) const {
        out << "sigma,E,N_expect,min_shell_k,n_max,dim\r\n";
        for (const auto& r : rows) {
            if (!r.ok) continue;
            out << format_double(r.sigma) << ',' << format_double(r.energy) << ','
                << format_double(r.n_expect) << ',' << format_double(r.min_shell_k) << ','
                << r.n_max << ',' << r.dim << "\r\n";
        }
    }
};

struct IRSweepOptions {
    EigenOptions eigen;
    double r_per_decade = 4.0;  // log-radial shells per decade of |k|
    unsigned workers = 0;
};

// Measures the soft-photon number as the infrared cutoff is lowered on
// successively refined log-radial grids, and fits <N> = s log(1/sigma) + c.
// A positive slope with a good fit is the discrete signature that the
// photon cloud is not square-summable in the limit.
inline IRSweepReport ir_sweep(const ModelSpec& base, const Vec3& xi,
                              const std::vector<double>& sigmas, const IRSweepOptions& opts) {
    if (base.grid.radial_scheme != RadialScheme::Logarithmic) {
        throw std::invalid_argument("ir_sweep requires the logarithmic radial scheme");
    }
    if (sigmas.empty() || !std::is_sorted(sigmas.rbegin(), sigmas.rend()) ||
        std::adjacent_find(sigmas.begin(), sigmas.end()) != sigmas.end()) {
        throw std::invalid_argument("sigma list must be strictly decreasing");
    }
    if (sigmas.back() <= 0.0) throw std::invalid_argument("sigma values must be positive");

    IRSweepReport report;
    report.rows.resize(sigmas.size());
    parallel_for(
        sigmas.size(),
        [&](std::size_t j) {
            IRSweepRow& row = report.rows[j];
            row.sigma = sigmas[j];
            row.n_max = base.n_max;
            try {
                ModelSpec spec = base;
                spec.coupling.sigma_ir = row.sigma;
                spec.grid.radial_shells = std::max(
                    1, static_cast<int>(std::lround(
                           opts.r_per_decade *
                           std::log10(spec.coupling.lambda_uv / row.sigma))));
                const Model model(spec);
                row.dim = model.dim();
                double min_k = std::numeric_limits<double>::infinity();
                for (const auto& m : model.modes().modes()) min_k = std::min(min_k, m.k_abs);
                row.min_shell_k = min_k;
                EigenOptions eo = opts.eigen;
                eo.n_wanted = 1;  // only E and psi feed the sweep
                const Vec start = model.start_vector(eo.seed);
                const auto res = lowest_eigenpairs(model.hamiltonian(xi).H, eo, &start);
                row.energy = res.pairs.front().value;
                row.n_expect = model.ops().N.expectation(res.pairs.front().vector).real();
                row.ok = true;
            } catch (const std::exception& ex) {
                row.ok = false;
                row.error = ex.what();
            }
        },
        opts.workers);

    std::vector<double> x, y;
    for (const auto& row : report.rows) {
        if (!row.ok) continue;
        x.push_back(std::log(1.0 / row.sigma));
        y.push_back(row.n_expect);
    }
    if (x.size() >= 4) {
        const double n = static_cast<double>(x.size());
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            sx += x[i];
            sy += y[i];
            sxx += x[i] * x[i];
            sxy += x[i] * y[i];
        }
        const double denom = n * sxx - sx * sx;
        report.slope = (n * sxy - sx * sy) / denom;
        report.intercept = (sy - report.slope * sx) / n;
        double ss_res = 0, ss_tot = 0;
        const double mean = sy / n;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double fit = report.slope * x[i] + report.intercept;
            ss_res += (y[i] - fit) * (y[i] - fit);
            ss_tot += (y[i] - mean) * (y[i] - mean);
        }
        report.r_squared = ss_tot > 1e-24 ? 1.0 - ss_res / ss_tot : 1.0;
        report.fit_valid = true;
    }
    return report;
}

// Worst midpoint-concavity violation of t(xi) = E(xi) - |xi|^2 over all
// collinear triples present in the table.
inline IdentityReport concavity_probe(const DispersionTable& table, double tolerance) {
    std::vector<const DispersionRow*> rows;
    for (const auto& r : table.rows) {
        if (r.ok) rows.push_back(&r);
    }
    double worst = -std::numeric_limits<double>::infinity();
    std::size_t triples = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t j = i + 1; j < rows.size(); ++j) {
            const Vec3 mid = 0.5 * (rows[i]->xi + rows[j]->xi);
            for (std::size_t m = 0; m < rows.size(); ++m) {
                if (m == i || m == j) continue;
                if ((rows[m]->xi - mid).norm() > 1e-12) continue;
                ++triples;
                worst = std::max(worst, 0.5 * (rows[i]->t + rows[j]->t) - rows[m]->t);
            }
        }
    }
    if (triples == 0) throw std::invalid_argument("no collinear triples in dispersion table");
    Provenance prov;
    prov.grid_hash = table.grid_hash;
    IdentityReport r = IdentityReport::make("concavity", worst, tolerance, prov);
    r.details["triples"] = static_cast<double>(triples);
    return r;
}

// <N> computed from the diagonal operator and from summed ladder norms;
// the two routes must agree to roundoff.
inline IdentityReport photon_number_consistency(const Model& model, const GroundStateRecord& gs,
                                                double tolerance = 1e-10) {
    const double diag = model.ops().N.expectation(gs.psi).real();
    double ladder = 0.0;
    for (int c = 0; c < model.modes().num_channels(); ++c) {
        ladder += model.lifted_annihilation(c).apply(gs.psi).squaredNorm();
    }
    const double rel = std::abs(diag - ladder) / std::max(1.0, std::abs(diag));
    IdentityReport r = IdentityReport::make("photon_number_consistency", rel, tolerance,
                                            provenance_of(model, gs.xi));
    r.details["diagonal"] = diag;
    r.details["ladder_sum"] = ladder;
    return r;
}

}  // namespace fiberspec
