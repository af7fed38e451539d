#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <tuple>
#include <vector>

#include "latthom/environment.hpp"
#include "latthom/lattice.hpp"
#include "latthom/solver.hpp"

namespace latthom {

/// Unit direction in R^d.
using Direction = std::vector<double>;

inline Direction axis_direction(int d, int axis) {
    Direction xi(d, 0.0);
    xi[axis] = 1.0;
    return xi;
}

inline void check_direction(const Direction& xi, int d) {
    if (static_cast<int>(xi.size()) != d)
        throw std::invalid_argument("direction: dimension mismatch");
    double s = 0.0;
    for (double v : xi) s += v * v;
    if (std::abs(s - 1.0) > 1e-10)
        throw std::invalid_argument("direction: |xi| must be 1");
}

struct CorrectorSolution {
    NodeField phi;
    double T = 0.0;  // infinity() means mass 0 (periodic corrector)
    Direction xi;
    SolveReport report;
};

/// Right-hand side div*(A xi) of the corrector equations:
/// b(x) = sum_i xi_i (a([x,x+e_i]) - a([x-e_i,x])).  Always zero-mean.
inline NodeField corrector_rhs(const EdgeField& a, const Direction& xi) {
    const TorusLattice& lat = *a.lattice;
    const int d = lat.dim();
    NodeField b(a.lattice);
    for (index_t x = 0; x < lat.num_sites(); ++x) {
        double s = 0.0;
        for (int i = 0; i < d; ++i)
            s += xi[i] * (a.at(x, i) - a.at(lat.backward(x, i), i));
        b[x] = s;
    }
    return b;
}

/// Solves T^-1 phi_T - div*(A (xi + grad phi_T)) = 0 on the torus.
/// Summing the equation over the torus forces mean(phi_T) = 0.
inline CorrectorSolution solve_modified_corrector(const EdgeField& a, double T,
                                                  const Direction& xi,
                                                  double tol = 1e-10) {
    check_direction(xi, a.lattice->dim());
    if (!(T > 0.0)) throw std::invalid_argument("solve_modified_corrector: T > 0 required");
    OperatorSpec spec{a, 1.0 / T};
    auto [phi, report] = cg_solve(spec, corrector_rhs(a, xi), tol);
    return {std::move(phi), T, xi, report};
}

/// Solves -div*(A (xi + grad phi)) = 0 on the torus (mass 0), in the
/// zero-spatial-mean gauge.
inline CorrectorSolution solve_periodic_corrector(const EdgeField& a, const Direction& xi,
                                                  double tol = 1e-10) {
    check_direction(xi, a.lattice->dim());
    OperatorSpec spec{a, 0.0};
    auto [phi, report] = cg_solve(spec, corrector_rhs(a, xi), tol);
    return {std::move(phi), std::numeric_limits<double>::infinity(), xi, report};
}

/// psi_T := T (phi_2T - phi_T), the dyadic-in-T derivative of the modified
/// corrector.  Solves T^-1 psi - div*(A grad psi) = phi_2T / 2 and
/// (2T)^-1 psi - div*(A grad psi) = phi_T / 2.
struct PsiField {
    NodeField psi;
    double T = 0.0;
};

inline std::tuple<PsiField, CorrectorSolution, CorrectorSolution> build_psi(
    const EdgeField& a, double T, const Direction& xi, double tol = 1e-10) {
    CorrectorSolution at_T = solve_modified_corrector(a, T, xi, tol);
    CorrectorSolution at_2T = solve_modified_corrector(a, 2.0 * T, xi, tol);
    PsiField psi{NodeField(a.lattice), T};
    for (index_t x = 0; x < a.lattice->num_sites(); ++x)
        psi.psi[x] = T * (at_2T.phi[x] - at_T.phi[x]);
    return {std::move(psi), std::move(at_T), std::move(at_2T)};
}

}  // namespace latthom
