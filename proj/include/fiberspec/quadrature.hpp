#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fiberspec {

using Vec3 = Eigen::Vector3d;

enum class RadialScheme { Linear, Logarithmic };
enum class AngularScheme { Axes6, Icosa12, Product };

// Angular x radial quadrature layout for the photon momentum shell
// sigma <= |k| <= lambda_uv.
struct FieldDiscretization {
    RadialScheme radial_scheme = RadialScheme::Linear;
    int radial_shells = 1;
    AngularScheme angular_scheme = AngularScheme::Axes6;
    int n_theta = 4;  // Product scheme only
    int n_phi = 8;    // Product scheme only
    bool antipodal_symmetric = true;
};

struct Direction {
    Vec3 omega;     // unit vector
    double weight;  // solid-angle weight; all weights sum to 4*pi
};

struct RadialCell {
    double node;    // representative radius |k| for the cell
    double lower;   // cell boundaries
    double upper;
    double volume;  // integral of r^2 dr over the cell (exact)
};

namespace detail {

// Gauss-Legendre nodes/weights on (-1, 1) by Newton iteration on P_n.
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.assign(static_cast<std::size_t>(n), 0.0);
    weights.assign(static_cast<std::size_t>(n), 0.0);
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int j = 2; j <= n; ++j) {
                const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        nodes[static_cast<std::size_t>(i)] = x;
        weights[static_cast<std::size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

}  // namespace detail

// Direction sets all carry weights summing to exactly 4*pi.
inline std::vector<Direction> direction_set(const FieldDiscretization& d) {
    constexpr double four_pi = 4.0 * std::numbers::pi;
    std::vector<Direction> dirs;
    switch (d.angular_scheme) {
        case AngularScheme::Axes6: {
            const double w = four_pi / 6.0;
            for (int axis = 0; axis < 3; ++axis) {
                for (int sign : {+1, -1}) {
                    Vec3 omega = Vec3::Zero();
                    omega[axis] = sign;
                    dirs.push_back({omega, w});
                }
            }
            break;
        }
        case AngularScheme::Icosa12: {
            // Icosahedron vertices: cyclic permutations of (0, ±1, ±phi).
            const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
            const double norm = std::sqrt(1.0 + phi * phi);
            const double w = four_pi / 12.0;
            for (int perm = 0; perm < 3; ++perm) {
                for (int s1 : {+1, -1}) {
                    for (int s2 : {+1, -1}) {
                        Vec3 v;
                        v[perm] = 0.0;
                        v[(perm + 1) % 3] = s1 / norm;
                        v[(perm + 2) % 3] = s2 * phi / norm;
                        dirs.push_back({v, w});
                    }
                }
            }
            break;
        }
        case AngularScheme::Product: {
            if (d.n_theta < 1 || d.n_phi < 1) {
                throw std::invalid_argument("product scheme needs n_theta, n_phi >= 1");
            }
            std::vector<double> ct, wt;
            detail::gauss_legendre(d.n_theta, ct, wt);
            // Azimuths offset by half a step; antipodal closure then needs
            // n_phi even, which is checked below against the flag.
            for (int i = 0; i < d.n_theta; ++i) {
                const double cos_t = ct[static_cast<std::size_t>(i)];
                const double sin_t = std::sqrt(std::max(0.0, 1.0 - cos_t * cos_t));
                for (int j = 0; j < d.n_phi; ++j) {
                    const double az = 2.0 * std::numbers::pi * (j + 0.5) / d.n_phi;
                    Vec3 omega(sin_t * std::cos(az), sin_t * std::sin(az), cos_t);
                    dirs.push_back({omega, wt[static_cast<std::size_t>(i)] * 2.0 *
                                               std::numbers::pi / d.n_phi});
                }
            }
            break;
        }
    }
    if (d.antipodal_symmetric) {
        for (const auto& dir : dirs) {
            bool found = false;
            for (const auto& other : dirs) {
                if ((dir.omega + other.omega).norm() < 1e-10) {
                    found = true;
                    break;
                }
            }
            if (!found) {
                throw std::invalid_argument(
                    "direction set is not closed under omega -> -omega");
            }
        }
    }
    return dirs;
}

// Radial cells covering [sigma, lambda]. Nodes sit at cell midpoints
// (arithmetic for the linear scheme, geometric for the logarithmic one);
// volumes are the exact integral of r^2 dr so the cell volumes telescope to
// (lambda^3 - sigma^3) / 3.
inline std::vector<RadialCell> radial_cells(RadialScheme scheme, int shells, double sigma,
                                            double lambda) {
    if (shells < 1) throw std::invalid_argument("radial shell count must be >= 1");
    if (!(sigma > 0.0) || !(sigma < lambda)) {
        throw std::invalid_argument("need 0 < sigma < lambda");
    }
    std::vector<double> bounds(static_cast<std::size_t>(shells) + 1);
    bounds.front() = sigma;
    bounds.back() = lambda;
    for (int j = 1; j < shells; ++j) {
        bounds[static_cast<std::size_t>(j)] =
            scheme == RadialScheme::Linear
                ? sigma + (lambda - sigma) * j / shells
                : sigma * std::pow(lambda / sigma, static_cast<double>(j) / shells);
    }
    std::vector<RadialCell> cells;
    cells.reserve(static_cast<std::size_t>(shells));
    for (int j = 0; j < shells; ++j) {
        const double lo = bounds[static_cast<std::size_t>(j)];
        const double hi = bounds[static_cast<std::size_t>(j) + 1];
        const double node =
            scheme == RadialScheme::Linear ? 0.5 * (lo + hi) : std::sqrt(lo * hi);
        cells.push_back({node, lo, hi, (hi * hi * hi - lo * lo * lo) / 3.0});
    }
    return cells;
}

// Transverse polarization pair completing k_hat to a right-handed
// orthonormal frame. Pole convention: eps1 = (k_hat x z) / |k_hat x z|,
// eps2 = k_hat x eps1; near the poles the frame degenerates to
// (x, y) at +z and (x, -y) at -z.
inline std::pair<Vec3, Vec3> polarization_frame(const Vec3& k_hat) {
    if (std::abs(k_hat.norm() - 1.0) > 1e-12) {
        throw std::invalid_argument("polarization_frame requires a unit direction");
    }
    const Vec3 z(0.0, 0.0, 1.0);
    const Vec3 cross = k_hat.cross(z);
    const double cn = cross.norm();
    if (cn < 1e-8) {
        const Vec3 x(1.0, 0.0, 0.0);
        const Vec3 y(0.0, 1.0, 0.0);
        return k_hat.z() > 0.0 ? std::make_pair(x, y) : std::make_pair(x, -y);
    }
    const Vec3 eps1 = cross / cn;
    const Vec3 eps2 = k_hat.cross(eps1);
    return {eps1, eps2};
}

}  // namespace fiberspec
