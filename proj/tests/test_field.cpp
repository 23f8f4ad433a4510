#include <catch2/catch_amalgamated.hpp>

#include <numbers>
#include <random>
#include <sstream>

#include "fiberspec/field.hpp"
#include "fiberspec/fock.hpp"

using namespace fiberspec;
using Catch::Matchers::WithinAbs;

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

FieldDiscretization axes_grid(int shells, RadialScheme scheme = RadialScheme::Linear) {
    FieldDiscretization d;
    d.radial_scheme = scheme;
    d.radial_shells = shells;
    d.angular_scheme = AngularScheme::Axes6;
    d.antipodal_symmetric = true;
    return d;
}

}  // namespace

TEST_CASE("linear two-shell axes grid") {
    CouplingParams p;
    p.e = 0.0;
    p.lambda_uv = 1.0;
    p.sigma_ir = 0.1;
    const auto ms = build_mode_set(axes_grid(2), p);
    REQUIRE(ms.num_modes() == 12);
    REQUIRE(ms.num_channels() == 24);

    double volume_sum = 0.0;
    for (const auto& m : ms.modes()) {
        CHECK((std::abs(m.k_abs - 0.325) < 1e-14 || std::abs(m.k_abs - 0.775) < 1e-14));
        volume_sum += m.weight;
        // Independent amplitude oracle: cell volume times the direction
        // weight, folded through the stated coupling form.
        const double lo = m.k_abs < 0.5 ? 0.1 : 0.55;
        const double hi = m.k_abs < 0.5 ? 0.55 : 1.0;
        const double w_expected = (hi * hi * hi - lo * lo * lo) / 3.0 * (kFourPi / 6.0);
        CHECK_THAT(m.weight, WithinAbs(w_expected, 1e-14));
        const double g_expected =
            std::pow(2.0 * std::numbers::pi, -1.5) / std::sqrt(2.0 * m.k_abs) *
            std::sqrt(w_expected);
        CHECK_THAT(m.g, WithinAbs(g_expected, 1e-14));
        CHECK(m.g > 0.0);
    }
    CHECK_THAT(volume_sum, WithinAbs(kFourPi / 3.0 * (1.0 - 0.001), 1e-10));
}

TEST_CASE("invalid cutoffs are rejected") {
    CouplingParams p;
    p.lambda_uv = 0.5;
    p.sigma_ir = 0.6;
    CHECK_THROWS_AS(build_mode_set(axes_grid(1), p), std::invalid_argument);
    p.sigma_ir = 0.0;
    CHECK_THROWS_AS(build_mode_set(axes_grid(1), p), std::invalid_argument);
}

TEST_CASE("direction sets integrate to the full sphere") {
    for (auto scheme : {AngularScheme::Axes6, AngularScheme::Icosa12, AngularScheme::Product}) {
        FieldDiscretization d;
        d.angular_scheme = scheme;
        d.n_theta = 3;
        d.n_phi = 6;
        double sum = 0.0;
        for (const auto& dir : direction_set(d)) {
            sum += dir.weight;
            CHECK_THAT(dir.omega.norm(), WithinAbs(1.0, 1e-12));
        }
        CHECK_THAT(sum, WithinAbs(kFourPi, 1e-12));
    }
}

TEST_CASE("antipodal closure is enforced") {
    FieldDiscretization d;
    d.angular_scheme = AngularScheme::Product;
    d.n_theta = 2;
    d.n_phi = 3;  // odd azimuth count breaks omega -> -omega closure
    d.antipodal_symmetric = true;
    CHECK_THROWS_AS(direction_set(d), std::invalid_argument);
    d.antipodal_symmetric = false;
    CHECK(direction_set(d).size() == 6);
}

TEST_CASE("polarization frame pole conventions") {
    const Vec3 z(0, 0, 1), x(1, 0, 0), y(0, 1, 0);
    auto [e1, e2] = polarization_frame(z);
    CHECK((e1 - x).norm() == 0.0);
    CHECK((e2 - y).norm() == 0.0);
    auto [f1, f2] = polarization_frame(-z);
    CHECK((f1 - x).norm() == 0.0);
    CHECK((f2 + y).norm() == 0.0);
    // For k along x the frame is (-y, -z); right-handedness fixes the sign
    // of the second leg.
    auto [g1, g2] = polarization_frame(x);
    CHECK((g1 + y).norm() <= 1e-15);
    CHECK((g2 + z).norm() <= 1e-15);
    CHECK_THROWS_AS(polarization_frame(Vec3(0.5, 0, 0)), std::invalid_argument);
}

TEST_CASE("polarization frame property sweep") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 1000; ++trial) {
        Vec3 k;
        do {
            for (int i = 0; i < 3; ++i) {
                k[i] = 2.0 * (static_cast<double>(rng() >> 11) * 0x1.0p-53) - 1.0;
            }
        } while (k.norm() < 1e-3);
        k.normalize();
        auto [e1, e2] = polarization_frame(k);
        CHECK(std::abs(k.dot(e1)) <= 1e-12);
        CHECK(std::abs(k.dot(e2)) <= 1e-12);
        CHECK(std::abs(e1.dot(e2)) <= 1e-12);
        CHECK_THAT(e1.norm(), WithinAbs(1.0, 1e-12));
        CHECK_THAT(e2.norm(), WithinAbs(1.0, 1e-12));
        Eigen::Matrix3d frame;
        frame.col(0) = k;
        frame.col(1) = e1;
        frame.col(2) = e2;
        CHECK_THAT(frame.determinant(), WithinAbs(1.0, 1e-12));
    }
}

TEST_CASE("mode set invariants") {
    CouplingParams p;
    p.e = 0.3;
    p.lambda_uv = 1.0;
    p.sigma_ir = 0.05;
    FieldDiscretization d = axes_grid(3, RadialScheme::Logarithmic);
    d.angular_scheme = AngularScheme::Icosa12;
    const auto ms = build_mode_set(d, p);
    for (const auto& m : ms.modes()) {
        CHECK(m.k_abs >= p.sigma_ir);
        CHECK(m.k_abs <= p.lambda_uv);
        CHECK(std::abs(m.k.dot(m.eps1)) <= 1e-12 * m.k_abs);
        CHECK(std::abs(m.k.dot(m.eps2)) <= 1e-12 * m.k_abs);
        // Antipodal partner with identical weight
        bool found = false;
        for (const auto& other : ms.modes()) {
            if ((m.k + other.k).norm() < 1e-12 && std::abs(m.weight - other.weight) < 1e-14) {
                found = true;
                break;
            }
        }
        CHECK(found);
    }
}

TEST_CASE("mode dump audit format") {
    CouplingParams p;
    p.sigma_ir = 0.1;
    const auto ms = build_mode_set(axes_grid(1), p);
    std::ostringstream out;
    dump_modes_csv(ms, out);
    std::istringstream in(out.str());
    std::string header;
    std::getline(in, header);
    CHECK(header.starts_with("m,kx,ky,kz,k_abs,w,g,"));
    int rows = 0;
    for (std::string line; std::getline(in, line) && !line.empty();) ++rows;
    CHECK(rows == ms.num_modes());
}

TEST_CASE("field operator vacuum moments") {
    CouplingParams p;
    p.e = 0.4;
    p.lambda_uv = 1.0;
    p.sigma_ir = 0.1;
    const auto ms = build_mode_set(axes_grid(2), p);
    auto basis = enumerate_basis(ms.num_channels(), 2);
    const auto ops = assemble_field_operators(ms, std::move(basis), p);

    Vec vac = Vec::Zero(ops.dim());
    vac[0] = 1.0;

    // <vac, A_i A_j vac> against the direct channel sum.
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            double expected = 0.0;
            for (int c = 0; c < ms.num_channels(); ++c) {
                const Mode& m = ms.modes()[static_cast<std::size_t>(c / 2)];
                const Vec3 eps = ms.channel_eps(c);
                expected += m.g * m.g * eps[i] * eps[j];
            }
            const cplx got = vac.dot(ops.A[static_cast<std::size_t>(i)].apply(
                ops.A[static_cast<std::size_t>(j)].apply(vac)));
            CHECK_THAT(got.real(), WithinAbs(expected, 1e-13));
            CHECK_THAT(got.imag(), WithinAbs(0.0, 1e-13));
        }
    }

    for (int i = 0; i < 3; ++i) {
        CHECK(std::abs(ops.B[static_cast<std::size_t>(i)].expectation(vac)) <= 1e-14);
        CHECK(ops.B[static_cast<std::size_t>(i)].is_hermitian_entrywise());
        CHECK(ops.A[static_cast<std::size_t>(i)].is_hermitian_entrywise());
    }
    CHECK(ops.H_f.entry(0, 0) == cplx(0, 0));
    CHECK(ops.N.entry(0, 0) == cplx(0, 0));
}

TEST_CASE("channel count mismatch is rejected") {
    CouplingParams p;
    p.sigma_ir = 0.1;
    const auto ms = build_mode_set(axes_grid(1), p);
    auto wrong = enumerate_basis(ms.num_channels() + 1, 1);
    CHECK_THROWS_AS(assemble_field_operators(ms, std::move(wrong), p), std::invalid_argument);
}

TEST_CASE("free Hamiltonian is diagonal with the expected entries") {
    CouplingParams p;
    p.e = 0.0;
    p.sigma_ir = 0.1;
    const auto ms = build_mode_set(axes_grid(2), p);
    auto basis = enumerate_basis(ms.num_channels(), 2);
    const auto ops = assemble_field_operators(ms, std::move(basis), p);
    const Vec3 xi(0.2, -0.1, 0.05);
    const auto fh = assemble_fiber_hamiltonian(ops, xi, p);

    CHECK(fh.H.is_hermitian_entrywise());
    const auto& basis_ref = ops.basis;
    for (Index s = 0; s < basis_ref.size(); ++s) {
        Vec3 total_k = Vec3::Zero();
        double total_energy = 0.0;
        const auto occ = basis_ref.state(s);
        for (int c = 0; c < basis_ref.num_channels(); ++c) {
            const Mode& m = ms.modes()[static_cast<std::size_t>(c / 2)];
            total_k += static_cast<double>(occ[static_cast<std::size_t>(c)]) * m.k;
            total_energy += static_cast<double>(occ[static_cast<std::size_t>(c)]) * m.k_abs;
        }
        const double expected = (xi - total_k).squaredNorm() + total_energy;
        CHECK_THAT(fh.H.entry(s, s).real(), WithinAbs(expected, 1e-13));
        Vec unit = Vec::Zero(basis_ref.size());
        unit[s] = 1.0;
        CHECK((fh.H.apply(unit) - expected * unit).norm() <= 1e-13);
    }
}

TEST_CASE("vacuum expectation picks up the field fluctuation term") {
    CouplingParams p;
    p.e = 0.7;
    p.sigma_ir = 0.1;
    const auto ms = build_mode_set(axes_grid(2), p);
    auto basis = enumerate_basis(ms.num_channels(), 2);
    const auto ops = assemble_field_operators(ms, std::move(basis), p);
    const Vec3 xi(0.3, 0.0, 0.0);
    const auto fh = assemble_fiber_hamiltonian(ops, xi, p);

    double g_sq = 0.0;
    for (int c = 0; c < ms.num_channels(); ++c) {
        const Mode& m = ms.modes()[static_cast<std::size_t>(c / 2)];
        g_sq += m.g * m.g;
    }
    Vec vac = Vec::Zero(ops.dim());
    vac[0] = 1.0;
    CHECK_THAT(fh.H.expectation(vac).real(),
               WithinAbs(xi.squaredNorm() + p.e * p.e * g_sq, 1e-12));
}

TEST_CASE("velocity is affine in the momentum") {
    CouplingParams p;
    p.e = 0.5;
    p.sigma_ir = 0.1;
    const auto ms = build_mode_set(axes_grid(1), p);
    auto basis = enumerate_basis(ms.num_channels(), 2);
    const auto ops = assemble_field_operators(ms, std::move(basis), p);
    const Vec3 xi(0.3, 0.1, -0.2);
    const Vec3 k(0.05, 0.2, 0.0);
    const auto fh_a = assemble_fiber_hamiltonian(ops, xi, p);
    const auto fh_b = assemble_fiber_hamiltonian(ops, xi - k, p);
    for (int i = 0; i < 3; ++i) {
        const auto diff = fh_a.v[static_cast<std::size_t>(i)] -
                          fh_b.v[static_cast<std::size_t>(i)] -
                          k[i] * SparseOperator::identity(ops.dim());
        CHECK(diff.max_abs_entry() <= 1e-15);
    }
}

TEST_CASE("shifting the momentum matches the affine expansion") {
    // Independent route: H(xi + q) = H(xi) + 2 q.v(xi) + q^2.
    CouplingParams p;
    p.e = 0.6;
    p.sigma_ir = 0.1;
    p.spin = true;
    const auto ms = build_mode_set(axes_grid(1), p);
    auto basis = enumerate_basis(ms.num_channels(), 2);
    const auto ops = assemble_field_operators(ms, std::move(basis), p);
    const Vec3 xi(0.1, 0.2, 0.0);
    const Vec3 q(0.07, -0.03, 0.11);
    const auto direct = assemble_fiber_hamiltonian(ops, xi + q, p);
    const auto base = assemble_fiber_hamiltonian(ops, xi, p);
    SparseOperator affine = base.H + q.squaredNorm() * ops.id;
    for (int i = 0; i < 3; ++i) {
        affine = affine + (2.0 * q[i]) * base.v[static_cast<std::size_t>(i)];
    }
    CHECK((direct.H - affine).max_abs_entry() <= 1e-13);
}

namespace {

// Assembles the commutation defect
//   a_mu H(xi) - (H(xi - k_mu) + |k_mu|) a_mu - e g_mu (2 eps.v - i (k x eps).sigma)
// which must annihilate everything supported below the top two layers.
SparseOperator pull_through_defect(const FieldOperators& ops, const ModeSet& ms,
                                   const CouplingParams& p, const Vec3& xi, int channel) {
    const auto fh = assemble_fiber_hamiltonian(ops, xi, p);
    const Mode& m = ms.modes()[static_cast<std::size_t>(channel / 2)];
    const Vec3 eps = channel % 2 == 0 ? m.eps1 : m.eps2;
    const auto fh_shift = assemble_fiber_hamiltonian(ops, xi - m.k, p);

    SparseOperator a = annihilation_matrix(ops.basis, channel);
    if (p.spin) a = tensor_with_spin(a, Eigen::Matrix2cd::Identity());

    SparseOperator source = (2.0 * eps[0]) * fh.v[0] + (2.0 * eps[1]) * fh.v[1] +
                            (2.0 * eps[2]) * fh.v[2];
    if (p.spin) {
        const Vec3 kx = m.k.cross(eps);
        for (int i = 0; i < 3; ++i) {
            const auto sigma_i = tensor_with_spin(
                SparseOperator::identity(ops.fock_dim()), pauli_matrix(i));
            source = source - cplx(0.0, kx[i]) * sigma_i;
        }
    }
    return a * fh.H - (fh_shift.H + m.k_abs * ops.id) * a - (p.e * m.g) * source;
}

}  // namespace

TEST_CASE("ladder commutation identity holds below the top layers") {
    for (bool spin : {false, true}) {
        CouplingParams p;
        p.e = spin ? 0.7 : 1.0;
        p.sigma_ir = 0.1;
        p.spin = spin;
        const auto ms = build_mode_set(axes_grid(1), p);
        auto basis = enumerate_basis(ms.num_channels(), 3);
        const auto ops = assemble_field_operators(ms, std::move(basis), p);
        const Vec3 xi(0.25, 0.0, 0.0);

        const Index fock_dim = ops.fock_dim();
        const Index cut = ops.basis.sector_end(1);  // total <= n_max - 2
        for (int channel : {0, 1, 5, 8}) {
            const auto defect = pull_through_defect(ops, ms, p, xi, channel);
            double worst = 0.0;
            const int blocks = spin ? 2 : 1;
            for (int b = 0; b < blocks; ++b) {
                for (Index s = 0; s < cut; ++s) {
                    Vec unit = Vec::Zero(defect.dim());
                    unit[b * fock_dim + s] = 1.0;
                    worst = std::max(worst, defect.apply(unit).norm());
                }
            }
            CHECK(worst <= 1e-10);
        }
    }
}
