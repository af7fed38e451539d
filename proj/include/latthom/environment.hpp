#pragma once

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

#include "latthom/lattice.hpp"
#include "latthom/rng.hpp"

namespace latthom {

/// I.i.d. conductivity law on [alpha, beta], 0 < alpha <= beta.
struct ConductivityLaw {
    enum class Kind { TwoPoint, Uniform, LogUniform };

    Kind kind = Kind::TwoPoint;
    double alpha = 1.0;
    double beta = 1.0;
    double p = 0.5;  // P(a = alpha), two-point law only

    static ConductivityLaw two_point(double alpha, double beta, double p) {
        ConductivityLaw law{Kind::TwoPoint, alpha, beta, p};
        law.validate();
        return law;
    }
    static ConductivityLaw uniform(double alpha, double beta) {
        ConductivityLaw law{Kind::Uniform, alpha, beta, 0.0};
        law.validate();
        return law;
    }
    static ConductivityLaw log_uniform(double alpha, double beta) {
        ConductivityLaw law{Kind::LogUniform, alpha, beta, 0.0};
        law.validate();
        return law;
    }

    void validate() const {
        if (!(alpha > 0.0) || !(beta >= alpha))
            throw std::invalid_argument("ConductivityLaw: need 0 < alpha <= beta");
        if (kind == Kind::TwoPoint && !(p >= 0.0 && p <= 1.0))
            throw std::invalid_argument("ConductivityLaw: need p in [0,1]");
    }

    double sample(double u01) const {
        switch (kind) {
            case Kind::TwoPoint:
                return u01 < p ? alpha : beta;
            case Kind::Uniform:
                return alpha + (beta - alpha) * u01;
            case Kind::LogUniform:
                return std::exp(std::log(alpha) + (std::log(beta) - std::log(alpha)) * u01);
        }
        return alpha;
    }

    /// CLI syntax: twopoint:a,b,p | uniform:a,b | loguniform:a,b
    static ConductivityLaw parse(const std::string& text) {
        const auto colon = text.find(':');
        if (colon == std::string::npos)
            throw std::invalid_argument("law: expected name:params, got '" + text + "'");
        const std::string name = text.substr(0, colon);
        std::vector<double> params;
        std::stringstream ss(text.substr(colon + 1));
        std::string tok;
        while (std::getline(ss, tok, ',')) params.push_back(std::stod(tok));
        if (name == "twopoint" && params.size() == 3)
            return two_point(params[0], params[1], params[2]);
        if (name == "uniform" && params.size() == 2) return uniform(params[0], params[1]);
        if (name == "loguniform" && params.size() == 2)
            return log_uniform(params[0], params[1]);
        throw std::invalid_argument("law: cannot parse '" + text + "'");
    }

    std::string to_string() const {
        std::ostringstream os;
        os.precision(17);
        switch (kind) {
            case Kind::TwoPoint:
                os << "twopoint:" << alpha << "," << beta << "," << p;
                break;
            case Kind::Uniform:
                os << "uniform:" << alpha << "," << beta;
                break;
            case Kind::LogUniform:
                os << "loguniform:" << alpha << "," << beta;
                break;
        }
        return os.str();
    }
};

/// Closed-form (mean, variance) of the law.
inline std::pair<double, double> law_moments(const ConductivityLaw& law) {
    switch (law.kind) {
        case ConductivityLaw::Kind::TwoPoint: {
            const double mean = law.p * law.alpha + (1.0 - law.p) * law.beta;
            const double var =
                law.p * (1.0 - law.p) * (law.beta - law.alpha) * (law.beta - law.alpha);
            return {mean, var};
        }
        case ConductivityLaw::Kind::Uniform: {
            const double mean = 0.5 * (law.alpha + law.beta);
            const double var = (law.beta - law.alpha) * (law.beta - law.alpha) / 12.0;
            return {mean, var};
        }
        case ConductivityLaw::Kind::LogUniform: {
            if (law.alpha == law.beta) return {law.alpha, 0.0};
            const double lr = std::log(law.beta / law.alpha);
            const double mean = (law.beta - law.alpha) / lr;
            const double m2 = (law.beta * law.beta - law.alpha * law.alpha) / (2.0 * lr);
            return {mean, m2 - mean * mean};
        }
    }
    return {law.alpha, 0.0};
}

/// One independent draw per canonical edge; deterministic given the key.
inline EdgeField sample_environment(const ConductivityLaw& law, LatticePtr lattice,
                                    const StreamKey& key) {
    EdgeField a(std::move(lattice));
    CounterRng rng(key);
    for (auto& v : a.values) v = law.sample(rng.next_u01());
    return a;
}

}  // namespace latthom
