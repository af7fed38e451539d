#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "latthom/errors.hpp"
#include "latthom/lattice.hpp"

namespace latthom {

/// Eigendecomposition of L = -div*(A grad) under the spatial-average inner
/// product (u,v) = n^-d sum u v, with source weights w_k = <b, v_k>^2.
struct SpectralData {
    std::vector<double> eigenvalues;            // ascending, lambda_0 = 0
    std::vector<std::vector<double>> eigenvectors;  // avg-orthonormal
    std::vector<double> weights;                // per eigenpair, for the source b
};

namespace detail {

inline NodeField jacobi_diagonal(const OperatorSpec& spec) {
    const TorusLattice& lat = spec.lattice();
    const int d = lat.dim();
    NodeField diag(spec.conductivity.lattice);
    for (index_t x = 0; x < lat.num_sites(); ++x) {
        double s = spec.mass;
        for (int i = 0; i < d; ++i)
            s += spec.conductivity.at(x, i) + spec.conductivity.at(lat.backward(x, i), i);
        diag[x] = s;
    }
    return diag;
}

}  // namespace detail

/// Preconditioned conjugate gradients for u -> mass*u - div*(A grad u), with
/// a Jacobi preconditioner.  Matrix-free; all reductions run in a fixed
/// sequential order, so results are bitwise reproducible.
///
/// When mass = 0 the operator is singular on constants: the right-hand side
/// must have (numerically) zero mean and the zero-mean representative is
/// returned.
inline std::pair<NodeField, SolveReport> cg_solve(const OperatorSpec& spec,
                                                  const NodeField& rhs, double tol,
                                                  long max_iterations = 50000) {
    const TorusLattice& lat = spec.lattice();
    const index_t n = lat.num_sites();

    if (spec.mass == 0.0) {
        const double mean = spatial_mean(rhs) * double(n);  // total mass of rhs
        const double scale = norm_inf(rhs);
        if (scale > 0.0 && std::abs(mean / double(n)) > 1e-12 * scale)
            throw IncompatibleRhs("cg_solve: mass = 0 requires a zero-mean rhs");
    }

    const double bnorm = norm2(rhs);
    SolveReport report;
    NodeField x(rhs.lattice);
    if (bnorm == 0.0) {
        report.converged = true;
        return {x, report};
    }

    NodeField diag = detail::jacobi_diagonal(spec);
    NodeField r = rhs;  // x0 = 0
    NodeField z(rhs.lattice), p(rhs.lattice);
    for (index_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
    p = z;
    double rz = dot(r, z);

    long it = 0;
    while (it < max_iterations) {
        NodeField Ap = apply_operator(spec, p);
        const double pAp = dot(p, Ap);
        const double alpha = rz / pAp;
        for (index_t i = 0; i < n; ++i) x[i] += alpha * p[i];
        for (index_t i = 0; i < n; ++i) r[i] -= alpha * Ap[i];
        ++it;

        const double rnorm = norm2(r);
        if (rnorm <= tol * bnorm) {
            // recursion residual can drift; confirm with the true residual
            NodeField Ax = apply_operator(spec, x);
            for (index_t i = 0; i < n; ++i) r[i] = rhs[i] - Ax[i];
            const double true_rnorm = norm2(r);
            if (true_rnorm <= tol * bnorm) {
                report.iterations = it;
                report.final_relative_residual = true_rnorm / bnorm;
                report.converged = true;
                if (spec.mass == 0.0) {
                    const double m = spatial_mean(x);
                    for (auto& v : x.values) v -= m;
                }
                return {x, report};
            }
            // restart from the true residual
            for (index_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
            p = z;
            rz = dot(r, z);
            continue;
        }

        for (index_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (index_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }

    report.iterations = it;
    report.final_relative_residual = norm2(r) / bnorm;
    report.converged = false;
    throw NonConvergence("cg_solve: no convergence within max_iterations", report);
}

/// Dense eigendecomposition of L = -div*(A grad) (mass = 0) for tiny tori,
/// with weights for the supplied source b.  Guarded at n^d <= 4096.
inline SpectralData dense_spectrum(const OperatorSpec& spec, const NodeField& b) {
    if (spec.mass != 0.0)
        throw std::invalid_argument("dense_spectrum: expects mass = 0");
    const TorusLattice& lat = spec.lattice();
    const index_t n = lat.num_sites();
    if (n > 4096) throw SizeExceeded("dense_spectrum: n^d > 4096");

    Eigen::MatrixXd M(n, n);
    NodeField e(spec.conductivity.lattice);
    for (index_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        NodeField col = apply_operator(spec, e);
        for (index_t i = 0; i < n; ++i) M(i, j) = col[i];
        e[j] = 0.0;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(M);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("dense_spectrum: eigensolver failed");

    SpectralData out;
    const double scale = std::sqrt(double(n));  // counting-orthonormal -> avg-orthonormal
    out.eigenvalues.resize(n);
    out.eigenvectors.resize(n);
    out.weights.resize(n);
    for (index_t k = 0; k < n; ++k) {
        out.eigenvalues[k] = std::max(0.0, eig.eigenvalues()(k));
        auto& v = out.eigenvectors[k];
        v.resize(n);
        for (index_t i = 0; i < n; ++i) v[i] = eig.eigenvectors()(i, k) * scale;
        double c = 0.0;
        for (index_t i = 0; i < n; ++i) c += b[i] * v[i];
        c /= double(n);
        out.weights[k] = c * c;
    }
    return out;
}

}  // namespace latthom
