#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "latthom/environment.hpp"
#include "latthom/errors.hpp"
#include "latthom/estimators.hpp"
#include "latthom/lattice.hpp"

namespace latthom {

/// Exhaustively enumerable environment: a tiny torus with a two-point law,
/// listing all 2^num_edges configurations with their probabilities.
struct EnumerableEnvironment {
    LatticePtr lattice;
    ConductivityLaw law;  // must be two_point

    EnumerableEnvironment(LatticePtr lat, const ConductivityLaw& l)
        : lattice(std::move(lat)), law(l) {
        if (law.kind != ConductivityLaw::Kind::TwoPoint)
            throw std::invalid_argument("EnumerableEnvironment: two_point law required");
        if (lattice->num_edges() > 20)
            throw SizeExceeded("EnumerableEnvironment: more than 20 edges");
    }

    index_t num_edges() const { return lattice->num_edges(); }
    std::uint64_t num_configs() const { return std::uint64_t(1) << num_edges(); }

    /// Configuration `mask`: bit e set means edge e takes alpha (prob p).
    EdgeField config(std::uint64_t mask) const {
        EdgeField a(lattice);
        for (index_t e = 0; e < num_edges(); ++e)
            a.values[e] = (mask >> e) & 1 ? law.alpha : law.beta;
        return a;
    }

    double probability(std::uint64_t mask) const {
        double pr = 1.0;
        for (index_t e = 0; e < num_edges(); ++e)
            pr *= (mask >> e) & 1 ? law.p : 1.0 - law.p;
        return pr;
    }
};

using FieldFunctional = std::function<double(const EdgeField&)>;

/// <statistic> by full enumeration.
inline double exact_expectation(const EnumerableEnvironment& env,
                                const FieldFunctional& statistic) {
    double s = 0.0;
    for (std::uint64_t m = 0; m < env.num_configs(); ++m)
        s += env.probability(m) * statistic(env.config(m));
    return s;
}

/// cov(X, Y) by full enumeration.
inline double exact_covariance(const EnumerableEnvironment& env, const FieldFunctional& X,
                               const FieldFunctional& Y) {
    double ex = 0.0, ey = 0.0, exy = 0.0;
    for (std::uint64_t m = 0; m < env.num_configs(); ++m) {
        const double pr = env.probability(m);
        const double x = X(env.config(m));
        const double y = Y(env.config(m));
        ex += pr * x;
        ey += pr * y;
        exy += pr * x * y;
    }
    return exy - ex * ey;
}

namespace detail {

/// <sup_{a_e} |dX/da_e|^2> for one edge: the sup over a_e in [alpha, beta] is
/// approximated by the max |central finite difference| over a grid of
/// grid_size values; the expectation runs over the full enumeration.
inline double sup_derivative_moment(const EnumerableEnvironment& env,
                                    const FieldFunctional& X, index_t edge,
                                    int grid_size) {
    const double alpha = env.law.alpha, beta = env.law.beta;
    const double h = 1e-4 * std::max(1.0, beta);
    double s = 0.0;
    for (std::uint64_t m = 0; m < env.num_configs(); ++m) {
        EdgeField a = env.config(m);
        double sup = 0.0;
        for (int g = 0; g < grid_size; ++g) {
            const double v = grid_size == 1
                                 ? 0.5 * (alpha + beta)
                                 : alpha + (beta - alpha) * double(g) / double(grid_size - 1);
            a.values[edge] = v + h;
            const double xp = X(a);
            a.values[edge] = v - h;
            const double xm = X(a);
            sup = std::max(sup, std::abs((xp - xm) / (2.0 * h)));
        }
        s += env.probability(m) * sup * sup;
    }
    return s;
}

}  // namespace detail

/// Covariance bound
///   cov(X,Y) <= var[a_1] sum_e <sup|dX/da_e|^2>^(1/2) <sup|dY/da_e|^2>^(1/2),
/// with the left side by exact enumeration and the suprema on a value grid.
inline IdentityReport verify_covariance_bound(const EnumerableEnvironment& env,
                                              const FieldFunctional& X,
                                              const FieldFunctional& Y, int grid_size = 5) {
    if (grid_size < 5)
        throw std::invalid_argument("verify_covariance_bound: grid_size >= 5 required");
    const double lhs = exact_covariance(env, X, Y);
    auto [mean, variance] = law_moments(env.law);
    (void)mean;

    double rhs = 0.0;
    for (index_t e = 0; e < env.num_edges(); ++e) {
        const double sx = detail::sup_derivative_moment(env, X, e, grid_size);
        const double sy = detail::sup_derivative_moment(env, Y, e, grid_size);
        rhs += std::sqrt(sx) * std::sqrt(sy);
    }
    rhs *= variance;

    IdentityReport r;
    r.name = "covariance_bound";
    r.lhs = lhs;
    r.rhs = rhs;
    r.abs_discrepancy = std::max(0.0, lhs - rhs);
    const double s = std::max(std::abs(lhs), std::abs(rhs));
    r.rel_discrepancy = s > 0.0 ? r.abs_discrepancy / s : 0.0;
    r.tolerance = 1e-6;
    r.pass = lhs <= rhs * (1.0 + 1e-6);
    return r;
}

}  // namespace latthom
