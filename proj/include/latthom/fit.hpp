#pragma once

#include <cmath>
#include <vector>

#include "latthom/errors.hpp"

namespace latthom {

/// Ordinary least squares fit of ln y against ln x.
struct ScalingFit {
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> std_errors;  // per-point standard error of y (may be empty)
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // rms residual in log space
    bool log_correction = false;
    double log_correction_coeff = 0.0;
    bool flagged = false;  // some standard error exceeded 20% of its point value
};

/// Fits ln y = intercept + slope * ln x, optionally with an extra ln(ln x)
/// regressor (the d = 2 logarithmic correction).
inline ScalingFit fit_loglog(const std::vector<double>& x, const std::vector<double>& y,
                             const std::vector<double>& std_errors = {},
                             bool log_correction = false) {
    if (x.size() != y.size()) throw DegenerateData("fit_loglog: size mismatch");
    const std::size_t m = x.size();
    const std::size_t k = log_correction ? 3 : 2;
    if (m < k) throw DegenerateData("fit_loglog: not enough points");
    for (std::size_t i = 0; i < m; ++i)
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw DegenerateData("fit_loglog: nonpositive data point");

    // normal equations for [1, ln x, (ln ln x)]
    std::vector<std::vector<double>> reg(m, std::vector<double>(k));
    std::vector<double> rhs(m);
    for (std::size_t i = 0; i < m; ++i) {
        reg[i][0] = 1.0;
        reg[i][1] = std::log(x[i]);
        if (log_correction) {
            if (!(x[i] > std::exp(1.0)))
                throw DegenerateData("fit_loglog: ln ln x regressor needs x > e");
            reg[i][2] = std::log(std::log(x[i]));
        }
        rhs[i] = std::log(y[i]);
    }
    double ata[3][3] = {};
    double atb[3] = {};
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t r = 0; r < k; ++r) {
            atb[r] += reg[i][r] * rhs[i];
            for (std::size_t c = 0; c < k; ++c) ata[r][c] += reg[i][r] * reg[i][c];
        }
    }
    // small Gaussian elimination
    double sol[3] = {};
    {
        double A[3][4];
        for (std::size_t r = 0; r < k; ++r) {
            for (std::size_t c = 0; c < k; ++c) A[r][c] = ata[r][c];
            A[r][k] = atb[r];
        }
        for (std::size_t p = 0; p < k; ++p) {
            std::size_t piv = p;
            for (std::size_t r = p + 1; r < k; ++r)
                if (std::abs(A[r][p]) > std::abs(A[piv][p])) piv = r;
            for (std::size_t c = 0; c <= k; ++c) std::swap(A[p][c], A[piv][c]);
            if (A[p][p] == 0.0) throw DegenerateData("fit_loglog: singular design matrix");
            for (std::size_t r = 0; r < k; ++r) {
                if (r == p) continue;
                const double f = A[r][p] / A[p][p];
                for (std::size_t c = p; c <= k; ++c) A[r][c] -= f * A[p][c];
            }
        }
        for (std::size_t r = 0; r < k; ++r) sol[r] = A[r][k] / A[r][r];
    }

    ScalingFit fit;
    fit.x = x;
    fit.y = y;
    fit.std_errors = std_errors;
    fit.intercept = sol[0];
    fit.slope = sol[1];
    fit.log_correction = log_correction;
    fit.log_correction_coeff = log_correction ? sol[2] : 0.0;

    double ss = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        double pred = sol[0] + sol[1] * reg[i][1];
        if (log_correction) pred += sol[2] * reg[i][2];
        const double e = rhs[i] - pred;
        ss += e * e;
    }
    fit.residual = std::sqrt(ss / double(m));

    if (!std_errors.empty()) {
        for (std::size_t i = 0; i < std_errors.size(); ++i)
            if (std_errors[i] > 0.2 * std::abs(y[i])) fit.flagged = true;
    }
    return fit;
}

}  // namespace latthom
