#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "latthom/corrector.hpp"
#include "latthom/environment.hpp"
#include "latthom/lattice.hpp"
#include "latthom/solver.hpp"

namespace latthom {

struct EstimateRecord {
    std::string kind;  // "A_T" | "A_TL" | "A_Lhash"
    double value = 0.0;
    double T = 0.0;  // infinity() for the periodic estimator
    int L = 0;       // 0 when no mask is involved
    Direction xi;
    std::uint64_t seed = 0;
    int d = 0;
    int n = 0;
};

struct IdentityReport {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    double abs_discrepancy = 0.0;
    double rel_discrepancy = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

inline IdentityReport make_identity_report(std::string name, double lhs, double rhs,
                                           double tolerance, double scale = 0.0) {
    IdentityReport r;
    r.name = std::move(name);
    r.lhs = lhs;
    r.rhs = rhs;
    r.abs_discrepancy = std::abs(lhs - rhs);
    const double s = std::max({std::abs(lhs), std::abs(rhs), scale});
    r.rel_discrepancy = s > 0.0 ? r.abs_discrepancy / s : 0.0;
    r.tolerance = tolerance;
    r.pass = r.rel_discrepancy <= tolerance;
    return r;
}

/// Pointwise energy density e(x) = sum_i a([x,x+e_i]) (xi_i + grad_i phi(x))^2.
inline NodeField energy_density(const EdgeField& a, const Direction& xi,
                                const NodeField& phi) {
    const TorusLattice& lat = *a.lattice;
    const int d = lat.dim();
    NodeField e(a.lattice);
    for (index_t x = 0; x < lat.num_sites(); ++x) {
        double s = 0.0;
        for (int i = 0; i < d; ++i) {
            const double g = xi[i] + (phi[lat.forward(x, i)] - phi[x]);
            s += a.at(x, i) * g * g;
        }
        e[x] = s;
    }
    return e;
}

/// Mask-weighted average of the energy density (mask must have unit mass).
inline double masked_energy_average(const EdgeField& a, const Direction& xi,
                                    const NodeField& phi, const NodeField& mask) {
    NodeField e = energy_density(a, xi, phi);
    return dot(e, mask);
}

/// xi . A_T xi = spatial average of the energy density of phi_T.
inline EstimateRecord estimate_AT(const EdgeField& a, double T, const Direction& xi,
                                  double tol = 1e-10) {
    CorrectorSolution sol = solve_modified_corrector(a, T, xi, tol);
    EstimateRecord rec;
    rec.kind = "A_T";
    rec.value = spatial_mean(energy_density(a, xi, sol.phi));
    rec.T = T;
    rec.xi = xi;
    rec.d = a.lattice->dim();
    rec.n = a.lattice->side();
    return rec;
}

/// xi . A_{T,L} xi = eta_L-weighted average of the energy density of phi_T.
/// An explicit mask overrides the default cos^2 profile (e.g. the flat mask).
inline EstimateRecord estimate_ATL(const EdgeField& a, double T, int L,
                                   const Direction& xi, double tol = 1e-10,
                                   const NodeField* mask_override = nullptr) {
    CorrectorSolution sol = solve_modified_corrector(a, T, xi, tol);
    NodeField mask = mask_override ? *mask_override : mask_eta(a.lattice, L);
    EstimateRecord rec;
    rec.kind = "A_TL";
    rec.value = masked_energy_average(a, xi, sol.phi, mask);
    rec.T = T;
    rec.L = L;
    rec.xi = xi;
    rec.d = a.lattice->dim();
    rec.n = a.lattice->side();
    return rec;
}

/// xi . A_{L,#} xi from the periodic corrector on a torus of side 2L.
inline EstimateRecord estimate_AL_periodic(const EdgeField& a, const Direction& xi,
                                           double tol = 1e-10) {
    CorrectorSolution sol = solve_periodic_corrector(a, xi, tol);
    EstimateRecord rec;
    rec.kind = "A_Lhash";
    rec.value = spatial_mean(energy_density(a, xi, sol.phi));
    rec.T = std::numeric_limits<double>::infinity();
    rec.L = a.lattice->side() / 2;
    rec.xi = xi;
    rec.d = a.lattice->dim();
    rec.n = a.lattice->side();
    return rec;
}

/// Zero-order diagnostic T^-1 <phi_T^2> excluded from the A_T definition.
inline double zero_order_term(const CorrectorSolution& sol) {
    double s = 0.0;
    for (double v : sol.phi.values) s += v * v;
    return (1.0 / sol.T) * s / double(sol.phi.values.size());
}

/// Exact dyadic identity:
/// xi.(A_2T - A_T)xi = -T^-2 (<psi_T phi_T> + <psi_T phi_2T>/2),
/// with <.> the spatial torus average.  Both sides computed independently.
inline IdentityReport dyadic_difference(const EdgeField& a, double T, const Direction& xi,
                                        double tol = 1e-10, double identity_tol = 1e-7) {
    auto [psi, at_T, at_2T] = build_psi(a, T, xi, tol);
    const double A_T = spatial_mean(energy_density(a, xi, at_T.phi));
    const double A_2T = spatial_mean(energy_density(a, xi, at_2T.phi));
    const double lhs = A_2T - A_T;

    const index_t n = a.lattice->num_sites();
    double pp = 0.0, pp2 = 0.0;
    for (index_t x = 0; x < n; ++x) {
        pp += psi.psi[x] * at_T.phi[x];
        pp2 += psi.psi[x] * at_2T.phi[x];
    }
    pp /= double(n);
    pp2 /= double(n);
    const double rhs = -(pp + 0.5 * pp2) / (T * T);
    // both sides are O(A_T); compare against that scale
    return make_identity_report("dyadic_difference", lhs, rhs, identity_tol, std::abs(A_T));
}

/// Exact energy identity for psi_T:
/// (2T)^-1 <psi^2> + <grad psi . A grad psi> = <phi_T psi>/2.
inline IdentityReport energy_identity_check(const EdgeField& a, double T,
                                            const Direction& xi, double tol = 1e-10,
                                            double identity_tol = 1e-7) {
    auto [psi, at_T, at_2T] = build_psi(a, T, xi, tol);
    const TorusLattice& lat = *a.lattice;
    const index_t n = lat.num_sites();
    const int d = lat.dim();

    double psi2 = 0.0, dirichlet = 0.0, cross = 0.0;
    for (index_t x = 0; x < n; ++x) {
        psi2 += psi.psi[x] * psi.psi[x];
        cross += at_T.phi[x] * psi.psi[x];
        for (int i = 0; i < d; ++i) {
            const double g = psi.psi[lat.forward(x, i)] - psi.psi[x];
            dirichlet += a.at(x, i) * g * g;
        }
    }
    psi2 /= double(n);
    dirichlet /= double(n);
    cross /= double(n);

    const double lhs = psi2 / (2.0 * T) + dirichlet;
    const double rhs = 0.5 * cross;
    return make_identity_report("energy_identity", lhs, rhs, identity_tol);
}

/// Exact weak form: T^-1 <phi_T chi> + <(xi + grad phi_T) . A grad chi> = 0
/// for any periodic chi.
inline IdentityReport variational_identity_check(const EdgeField& a, double T,
                                                 const Direction& xi, const NodeField& chi,
                                                 double tol = 1e-10,
                                                 double identity_tol = 1e-8) {
    CorrectorSolution sol = solve_modified_corrector(a, T, xi, tol);
    const TorusLattice& lat = *a.lattice;
    const index_t n = lat.num_sites();
    const int d = lat.dim();

    double zero_order = 0.0, form = 0.0;
    double phi2 = 0.0, chi2 = 0.0, ephi = 0.0, echi = 0.0;
    for (index_t x = 0; x < n; ++x) {
        zero_order += sol.phi[x] * chi[x];
        phi2 += sol.phi[x] * sol.phi[x];
        chi2 += chi[x] * chi[x];
        for (int i = 0; i < d; ++i) {
            const double gphi = xi[i] + (sol.phi[lat.forward(x, i)] - sol.phi[x]);
            const double gchi = chi[lat.forward(x, i)] - chi[x];
            form += a.at(x, i) * gphi * gchi;
            ephi += a.at(x, i) * gphi * gphi;
            echi += a.at(x, i) * gchi * gchi;
        }
    }
    zero_order /= double(n) * T;
    form /= double(n);

    // Cauchy-Schwarz majorant of the two terms sets the natural scale of the
    // identity (the terms themselves may cancel or vanish individually)
    const double scale = std::sqrt(phi2 / double(n)) * std::sqrt(chi2 / double(n)) / T +
                         std::sqrt(ephi / double(n)) * std::sqrt(echi / double(n));
    return make_identity_report("variational_identity", zero_order + form, 0.0,
                                identity_tol, scale);
}

/// Residuals of the two equations psi_T satisfies exactly:
///   T^-1 psi - div*(A grad psi) = phi_2T / 2
///   (2T)^-1 psi - div*(A grad psi) = phi_T / 2
/// reported as L2 residual norms relative to the right-hand-side norm.
inline std::pair<IdentityReport, IdentityReport> psi_residual_checks(
    const EdgeField& a, double T, const Direction& xi, double tol = 1e-10,
    double identity_tol = 1e-7) {
    auto [psi, at_T, at_2T] = build_psi(a, T, xi, tol);
    const index_t n = a.lattice->num_sites();

    auto residual = [&](double mass, const NodeField& rhs_phi) {
        OperatorSpec spec{a, mass};
        NodeField Ap = apply_operator(spec, psi.psi);
        double r2 = 0.0, b2 = 0.0;
        for (index_t x = 0; x < n; ++x) {
            const double b = 0.5 * rhs_phi[x];
            const double e = Ap[x] - b;
            r2 += e * e;
            b2 += b * b;
        }
        return b2 > 0.0 ? std::sqrt(r2 / b2) : std::sqrt(r2);
    };

    auto first = make_identity_report("psi_residual_T", residual(1.0 / T, at_2T.phi), 0.0,
                                      identity_tol, 1.0);
    auto second = make_identity_report("psi_residual_2T", residual(0.5 / T, at_T.phi), 0.0,
                                       identity_tol, 1.0);
    return {first, second};
}

/// Finite-volume spectral cross-check.  With b = div*(A xi) and the dense
/// spectrum (w_k, lambda_k) of L = -div*(A grad):
///   (i)   A_hom^torus = <xi.A xi> - sum_{lambda>0} w/lambda  == A_{L,#}
///   (ii)  A_T^spec    = <xi.A xi> - sum w (2/T+lambda)/(1/T+lambda)^2  == A_T
///   (iii) A_T - A_hom^torus = T^-2 sum_{lambda>0} w/(lambda (1/T+lambda)^2)
struct SpectralCrossCheck {
    IdentityReport homogenized;
    IdentityReport at_T;
    IdentityReport systematic_error;
};

inline SpectralCrossCheck spectral_cross_check(const EdgeField& a, double T,
                                               const Direction& xi, double tol = 1e-10,
                                               double identity_tol = 1e-8) {
    const TorusLattice& lat = *a.lattice;
    check_direction(xi, lat.dim());
    NodeField b = corrector_rhs(a, xi);
    OperatorSpec spec0{a, 0.0};
    SpectralData sd = dense_spectrum(spec0, b);

    double mean_aa = 0.0;  // <xi . A xi> = spatial average of sum_i a_i xi_i^2
    for (index_t x = 0; x < lat.num_sites(); ++x)
        for (int i = 0; i < lat.dim(); ++i) mean_aa += a.at(x, i) * xi[i] * xi[i];
    mean_aa /= double(lat.num_sites());

    // zero modes carry zero weight since mean(b) = 0; cut them off well below
    // the spectral gap of the discrete Laplacian
    const double lambda_floor = 1e-9;
    double sum_inv = 0.0, sum_T = 0.0, sum_sys = 0.0;
    for (std::size_t k = 0; k < sd.eigenvalues.size(); ++k) {
        const double lam = sd.eigenvalues[k];
        const double w = sd.weights[k];
        if (lam > lambda_floor) {
            sum_inv += w / lam;
            sum_sys += w / (lam * (1.0 / T + lam) * (1.0 / T + lam));
        }
        sum_T += w * (2.0 / T + lam) / ((1.0 / T + lam) * (1.0 / T + lam));
    }

    const double ahom_spec = mean_aa - sum_inv;
    const double at_spec = mean_aa - sum_T;
    const double sys_spec = sum_sys / (T * T);

    const double ahom_iter = estimate_AL_periodic(a, xi, tol).value;
    const double at_iter = estimate_AT(a, T, xi, tol).value;

    SpectralCrossCheck out;
    out.homogenized =
        make_identity_report("spectral_A_hom", ahom_iter, ahom_spec, identity_tol);
    out.at_T = make_identity_report("spectral_A_T", at_iter, at_spec, identity_tol);
    out.systematic_error = make_identity_report("spectral_systematic", at_iter - ahom_iter,
                                                sys_spec, identity_tol, std::abs(at_iter));
    return out;
}

}  // namespace latthom
