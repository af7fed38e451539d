#pragma once

#include <cmath>
#include <complex>
#include <limits>
#include <vector>

#include <fftw3.h>

#include "latthom/environment.hpp"
#include "latthom/errors.hpp"
#include "latthom/fit.hpp"
#include "latthom/lattice.hpp"
#include "latthom/solver.hpp"

namespace latthom {

/// mu_d(T): the d = 2 logarithmic factor.
inline double mu_d(int d, double T) { return d == 2 ? std::log(T) : 1.0; }

/// Discrete Green function G_T(., y): solves (1/T) G - div*(A grad G) = delta_y.
struct GreenFunction {
    index_t pole = 0;
    double T = 0.0;
    NodeField values;
    SolveReport report;
};

inline GreenFunction green_function(const EdgeField& a, double T, index_t y,
                                    double tol = 1e-10) {
    if (!(T > 0.0)) throw std::invalid_argument("green_function: T > 0 required");
    NodeField rhs(a.lattice);
    rhs[y] = 1.0;
    OperatorSpec spec{a, 1.0 / T};
    auto [g, report] = cg_solve(spec, rhs, tol);
    return {y, T, std::move(g), report};
}

/// Reference decay envelope for G_T at distance r.
///   d > 2:  (1+r)^(2-d) min{1, (r/sqrt(T))^-k}
///   d = 2:  ln(sqrt(T)/(1+r)) for r <= sqrt(T)/2, (r/sqrt(T))^-k for r > sqrt(T);
///           the crossover band (sqrt(T)/2, sqrt(T)] is excluded (NaN).
inline double green_envelope(int d, double T, double r, double k = 3.0) {
    const double sT = std::sqrt(T);
    if (d > 2) {
        const double far = r > 0.0 ? std::min(1.0, std::pow(r / sT, -k)) : 1.0;
        return std::pow(1.0 + r, 2.0 - double(d)) * far;
    }
    if (r <= 0.5 * sT) return std::log(sT / (1.0 + r));
    if (r > sT) return std::pow(r / sT, -k);
    return std::numeric_limits<double>::quiet_NaN();
}

namespace detail {

/// Envelope used inside the ratio statistics: identical scaling, but with
/// max(r, 1) in place of (1 + r) so the small-r constant does not masquerade
/// as a trend in short desk-scale annulus ladders.
inline double ratio_envelope(int d, double T, double r, double k) {
    if (d > 2) {
        const double rr = std::max(r, 1.0);
        const double far = std::min(1.0, std::pow(rr / std::sqrt(T), -k));
        return std::pow(rr, 2.0 - double(d)) * far;
    }
    return green_envelope(d, T, r, k);
}

}  // namespace detail

struct DecayProfileRow {
    double r_lo = 0.0;
    double r_hi = 0.0;
    double sup_g = 0.0;
    double l2_g = 0.0;       // (R^-d integral of G^2 over the annulus)^(1/2)
    double l2_grad = 0.0;    // integral of |grad G|^2 over the annulus
    double envelope = 0.0;   // envelope at the annulus inner radius
    double sup_ratio = 0.0;  // sup over sites of G / envelope(|x-y|)
    double l2_ratio = 0.0;
    double grad_ratio = 0.0;  // l2_grad relative to its reference scaling
};

struct DecayProfile {
    std::vector<DecayProfileRow> rows;
};

/// Per-dyadic-annulus decay statistics of G against the reference envelope.
/// Requires n >= 8 sqrt(T) so wrap-around pollution stays negligible.
inline DecayProfile decay_profile(const EdgeField& a, const GreenFunction& G,
                                  double k = 3.0) {
    const TorusLattice& lat = *G.values.lattice;
    const int d = lat.dim();
    const int n = lat.side();
    if (double(n) < 8.0 * std::sqrt(G.T))
        throw SizingError("decay_profile: torus too small (need n >= 8 sqrt(T))");

    DecayProfile profile;
    const index_t y = G.pole;
    for (double R = 1.0; 2.0 * R <= double(n) / 2.0; R *= 2.0) {
        DecayProfileRow row;
        row.r_lo = R;
        row.r_hi = 2.0 * R;
        double g2 = 0.0, grad2 = 0.0;
        double sup_ratio = 0.0;
        bool any_env = false;
        long count = 0;
        for (index_t x = 0; x < lat.num_sites(); ++x) {
            const double r = lat.torus_distance(x, y);
            if (!(r > R && r <= 2.0 * R)) continue;
            ++count;
            const double g = G.values[x];
            row.sup_g = std::max(row.sup_g, g);
            g2 += g * g;
            for (int i = 0; i < d; ++i) {
                const double dg = G.values[lat.forward(x, i)] - G.values[x];
                grad2 += dg * dg;
            }
            const double env = detail::ratio_envelope(d, G.T, r, k);
            if (std::isfinite(env) && env > 0.0) {
                any_env = true;
                sup_ratio = std::max(sup_ratio, g / env);
            }
        }
        if (count == 0) continue;
        row.l2_g = std::sqrt(g2 / std::pow(R, d));
        row.l2_grad = grad2;
        row.envelope = green_envelope(d, G.T, R, k);
        row.sup_ratio = any_env ? sup_ratio : std::numeric_limits<double>::quiet_NaN();
        const double env_mid = detail::ratio_envelope(d, G.T, std::sqrt(2.0) * R, k);
        row.l2_ratio = (std::isfinite(env_mid) && env_mid > 0.0)
                           ? row.l2_g / env_mid
                           : std::numeric_limits<double>::quiet_NaN();
        // gradient annulus reference: R^(2-d) for d > 2, min{1, sqrt(T)/R}^2 for d = 2
        const double grad_ref = d > 2 ? std::pow(R, 2.0 - double(d))
                                      : std::pow(std::min(1.0, std::sqrt(G.T) / R), 2.0);
        row.grad_ratio = grad2 / grad_ref;
        profile.rows.push_back(row);
    }
    return profile;
}

/// Annulus L2 norms of |grad G| against the convolution-lemma assumptions.
/// Same rows as decay_profile but only the gradient columns are meaningful.
inline DecayProfile gradient_annuli_norms(const EdgeField& a, const GreenFunction& G) {
    return decay_profile(a, G, 3.0);
}

/// Near-origin gradient mass: integral of |grad G|^2 over {|z - y| <= R}.
inline double near_origin_gradient_mass(const GreenFunction& G, double R = 2.0) {
    const TorusLattice& lat = *G.values.lattice;
    const int d = lat.dim();
    double s = 0.0;
    for (index_t x = 0; x < lat.num_sites(); ++x) {
        if (lat.torus_distance(x, G.pole) > R) continue;
        for (int i = 0; i < d; ++i) {
            const double dg = G.values[lat.forward(x, i)] - G.values[x];
            s += dg * dg;
        }
    }
    return s;
}

/// Harnack ratio sup_{R<|x|<=2R} g / (R^-d integral_{R/2<|x|<=4R} g^2)^(1/2).
/// Verifies the precondition (g >= 0 and -div*.A grad g <= 0) on the
/// enlarged annulus before evaluating.
inline double harnack_ratio(const EdgeField& a, const NodeField& g, index_t center,
                            double R) {
    const TorusLattice& lat = *g.lattice;
    const int d = lat.dim();
    if (!(4.0 * R < double(lat.side()) / 2.0))
        throw SizingError("harnack_ratio: need 4R < n/2");

    // subsolution slack: roundoff allowance on the stencil evaluation
    double beta_max = 0.0;
    for (double v : a.values) beta_max = std::max(beta_max, v);
    const double slack = 1e-9 * 2.0 * d * beta_max * std::max(1.0, norm_inf(g));

    double sup_inner = 0.0;
    double l2_outer = 0.0;
    for (index_t x = 0; x < lat.num_sites(); ++x) {
        const double r = lat.torus_distance(x, center);
        if (!(r > 0.5 * R && r <= 4.0 * R)) continue;
        if (g[x] < 0.0)
            throw SubsolutionViolation("harnack_ratio: negative value in annulus", x);
        double lap = 0.0;  // (-div*.A grad g)(x), must be <= 0
        for (int i = 0; i < d; ++i) {
            lap += a.at(x, i) * (g[x] - g[lat.forward(x, i)]) +
                   a.at(lat.backward(x, i), i) * (g[x] - g[lat.backward(x, i)]);
        }
        if (lap > slack)
            throw SubsolutionViolation("harnack_ratio: not a subsolution in annulus", x);
        l2_outer += g[x] * g[x];
        if (r > R && r <= 2.0 * R) sup_inner = std::max(sup_inner, g[x]);
    }
    return sup_inner / std::sqrt(l2_outer / std::pow(R, d));
}

// ---- Convolution estimate on reference envelopes ----

namespace detail {

/// Reference envelope h_T(z) = max(|z|,1)^(1-d) min{1, sqrt(T)/|z|},
/// saturating the annulus assumptions of the convolution estimate.  The
/// max(.,1) normalization (instead of 1+|z|) keeps the pure power law on
/// |z| >= 1, whose self-convolution reaches its scaling constant at radii
/// accessible on a desk-scale ladder.
inline double conv_h(int d, double T, double r) {
    const double cutoff = r > 0.0 ? std::min(1.0, std::sqrt(T) / r) : 1.0;
    return std::pow(std::max(r, 1.0), 1.0 - double(d)) * cutoff;
}

/// Positive version of the Green envelope for the convolution sum; the d = 2
/// near field is floored at the crossover value 1.
inline double conv_g(int d, double T, double r) {
    const double sT = std::sqrt(T);
    if (d > 2) {
        const double far = r > 0.0 ? std::min(1.0, std::pow(r / sT, -3.0)) : 1.0;
        return std::pow(std::max(r, 1.0), 2.0 - double(d)) * far;
    }
    if (r <= sT) return std::max(std::log(sT / std::max(r, 1.0)), 1.0);
    return std::pow(r / sT, -3.0);
}

inline int next_5smooth(int m) {
    for (;; ++m) {
        int v = m;
        for (int p : {2, 3, 5})
            while (v % p == 0) v /= p;
        if (v == 1) return m;
    }
}

}  // namespace detail

struct ConvolutionScaling {
    std::vector<double> T_values;
    std::vector<double> sums;
    ScalingFit fit;  // ln(sum) vs ln(T)
};

/// Evaluates S(T) = sum_z g_T(z) sum_w h_T(w) h_T(z-w) over the lattice ball
/// of radius `radius_factor * sqrt(T)` via FFT, for each T in the ladder, and
/// fits the log-log slope against T.
inline ConvolutionScaling convolution_scaling(int d, const std::vector<double>& T_values,
                                              double radius_factor = 8.0) {
    if (radius_factor < 4.0)
        throw SizingError("convolution_scaling: truncation radius too small");
    ConvolutionScaling out;
    out.T_values = T_values;

    for (double T : T_values) {
        const int R = static_cast<int>(std::ceil(radius_factor * std::sqrt(T)));
        // box side: 3R+2 guarantees the circular convolution is alias-free
        // on the ball |z| <= R
        const int M = detail::next_5smooth(3 * R + 2);
        std::size_t real_size = 1;
        for (int i = 0; i < d; ++i) real_size *= static_cast<std::size_t>(M);
        if (real_size > (std::size_t(1) << 28))
            throw SizeExceeded("convolution_scaling: padded box exceeds the memory guard");
        const std::size_t complex_size = real_size / M * (M / 2 + 1);

        double* h = fftw_alloc_real(real_size);
        fftw_complex* H = fftw_alloc_complex(complex_size);
        if (!h || !H) throw std::bad_alloc();

        std::vector<int> dims(d, M);
        fftw_plan fwd = fftw_plan_dft_r2c(d, dims.data(), h, H, FFTW_ESTIMATE);
        fftw_plan bwd = fftw_plan_dft_c2r(d, dims.data(), H, h, FFTW_ESTIMATE);

        // fill h on the box with minimal-image radius, truncated at R
        std::vector<int> c(d, 0);
        for (std::size_t idx = 0; idx < real_size; ++idx) {
            double r2 = 0.0;
            for (int i = 0; i < d; ++i) {
                int ci = c[i];
                if (2 * ci >= M) ci -= M;
                r2 += double(ci) * double(ci);
            }
            const double r = std::sqrt(r2);
            h[idx] = r <= double(R) ? detail::conv_h(d, T, r) : 0.0;
            for (int i = d - 1; i >= 0; --i) {
                if (++c[i] < M) break;
                c[i] = 0;
            }
        }

        fftw_execute(fwd);
        for (std::size_t i = 0; i < complex_size; ++i) {
            const double re = H[i][0], im = H[i][1];
            H[i][0] = re * re - im * im;
            H[i][1] = 2.0 * re * im;
        }
        fftw_execute(bwd);

        const double norm = double(real_size);
        double S = 0.0;
        std::fill(c.begin(), c.end(), 0);
        for (std::size_t idx = 0; idx < real_size; ++idx) {
            double r2 = 0.0;
            for (int i = 0; i < d; ++i) {
                int ci = c[i];
                if (2 * ci >= M) ci -= M;
                r2 += double(ci) * double(ci);
            }
            const double r = std::sqrt(r2);
            if (r <= double(R)) S += detail::conv_g(d, T, r) * h[idx] / norm;
            for (int i = d - 1; i >= 0; --i) {
                if (++c[i] < M) break;
                c[i] = 0;
            }
        }

        fftw_destroy_plan(fwd);
        fftw_destroy_plan(bwd);
        fftw_free(h);
        fftw_free(H);
        out.sums.push_back(S);
    }

    out.fit = fit_loglog(out.T_values, out.sums);
    return out;
}

}  // namespace latthom
