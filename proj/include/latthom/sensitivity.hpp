#pragma once

#include <cmath>
#include <stdexcept>

#include "latthom/corrector.hpp"
#include "latthom/green.hpp"
#include "latthom/lattice.hpp"

namespace latthom {

struct SensitivityReport {
    double finite_difference = 0.0;
    double closed_form = 0.0;
    double abs_error = 0.0;
    double rel_error = 0.0;
};

namespace detail {

inline SensitivityReport make_sensitivity_report(double fd, double cf) {
    SensitivityReport rep;
    rep.finite_difference = fd;
    rep.closed_form = cf;
    rep.abs_error = std::abs(fd - cf);
    const double s = std::max(std::abs(fd), std::abs(cf));
    rep.rel_error = s > 0.0 ? rep.abs_error / s : 0.0;
    return rep;
}

inline EdgeField perturb_edge(const EdgeField& a, index_t z, int i, double delta) {
    EdgeField b = a;
    b.at(z, i) += delta;
    if (!(b.at(z, i) > 0.0))
        throw std::invalid_argument("perturb_edge: conductivity must stay positive");
    return b;
}

}  // namespace detail

/// Derivative of phi_T at a probe site with respect to a single edge
/// conductivity, two ways:
///   d phi_T(x) / d a([z,z+e_i]) = -(xi_i + grad_i phi_T(z)) grad_{z_i} G_T(z, x)
/// against a central finite difference in the edge value.  The closed form is
/// evaluated at the unperturbed (midpoint) environment.
inline SensitivityReport verify_phi_sensitivity(const EdgeField& a, double T,
                                                const Direction& xi, index_t z, int i,
                                                index_t x, double h = 1e-4,
                                                double tol = 1e-10) {
    CorrectorSolution plus =
        solve_modified_corrector(detail::perturb_edge(a, z, i, +h), T, xi, tol);
    CorrectorSolution minus =
        solve_modified_corrector(detail::perturb_edge(a, z, i, -h), T, xi, tol);
    const double fd = (plus.phi[x] - minus.phi[x]) / (2.0 * h);

    CorrectorSolution mid = solve_modified_corrector(a, T, xi, tol);
    GreenFunction G = green_function(a, T, x, tol);  // G_T(., x) = G_T(x, .)
    const TorusLattice& lat = *a.lattice;
    const double grad_phi = mid.phi[lat.forward(z, i)] - mid.phi[z];
    const double grad_G = G.values[lat.forward(z, i)] - G.values[z];
    const double cf = -(xi[i] + grad_phi) * grad_G;
    return detail::make_sensitivity_report(fd, cf);
}

/// Same check for psi_T = T (phi_2T - phi_T), whose derivative carries an
/// extra convolution term from the right-hand side phi_2T / 2:
///   d psi_T(x) / d a([z,z+e_i]) =
///     - grad_i psi_T(z) grad_{z_i} G_T(z, x)
///     - (xi_i + grad_i phi_2T(z)) / 2 * sum_w G_T(x, w) grad_{z_i} G_2T(z, w).
inline SensitivityReport verify_psi_sensitivity(const EdgeField& a, double T,
                                                const Direction& xi, index_t z, int i,
                                                index_t x, double h = 1e-4,
                                                double tol = 1e-10) {
    const TorusLattice& lat = *a.lattice;

    auto psi_at = [&](const EdgeField& env) {
        auto [psi, at_T, at_2T] = build_psi(env, T, xi, tol);
        return psi.psi[x];
    };
    const double fd = (psi_at(detail::perturb_edge(a, z, i, +h)) -
                       psi_at(detail::perturb_edge(a, z, i, -h))) /
                      (2.0 * h);

    auto [psi, at_T, at_2T] = build_psi(a, T, xi, tol);
    GreenFunction G_T = green_function(a, T, x, tol);
    GreenFunction G2_z = green_function(a, 2.0 * T, z, tol);
    GreenFunction G2_zf = green_function(a, 2.0 * T, lat.forward(z, i), tol);

    const double grad_psi = psi.psi[lat.forward(z, i)] - psi.psi[z];
    const double grad_GT = G_T.values[lat.forward(z, i)] - G_T.values[z];

    // sum_w G_T(x,w) grad_{z_i} G_2T(z,w), using G_2T(z,w) = G_2T(w,z)
    double conv = 0.0;
    for (index_t w = 0; w < lat.num_sites(); ++w)
        conv += G_T.values[w] * (G2_zf.values[w] - G2_z.values[w]);

    const double grad_phi2 = at_2T.phi[lat.forward(z, i)] - at_2T.phi[z];
    const double cf = -grad_psi * grad_GT - 0.5 * (xi[i] + grad_phi2) * conv;
    return detail::make_sensitivity_report(fd, cf);
}

}  // namespace latthom
