// latthom: approximate homogenized coefficients of discrete elliptic
// equations with random conductivities on lattice tori, and verify the
// associated identities, decay estimates, and error-scaling laws.

#include <cstdio>
#include <fstream>
#include <map>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "latthom/corrector.hpp"
#include "latthom/environment.hpp"
#include "latthom/errors.hpp"
#include "latthom/estimators.hpp"
#include "latthom/experiments.hpp"
#include "latthom/field_io.hpp"
#include "latthom/green.hpp"
#include "latthom/probability.hpp"
#include "latthom/sensitivity.hpp"

namespace {

using namespace latthom;

Direction parse_xi(const std::string& text, int d) {
    Direction xi;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) xi.push_back(std::stod(tok));
    if (xi.empty()) xi = axis_direction(d, 0);
    double s = 0.0;
    for (double v : xi) s += v * v;
    if (s > 0.0)
        for (double& v : xi) v /= std::sqrt(s);
    check_direction(xi, d);
    return xi;
}

void print_report(const IdentityReport& r) {
    std::printf("%-24s lhs=% .10e rhs=% .10e rel=%.3e tol=%.1e %s\n", r.name.c_str(),
                r.lhs, r.rhs, r.rel_discrepancy, r.tolerance, r.pass ? "ok" : "FAIL");
}

struct CommonOpts {
    int dim = 2;
    int side = 16;
    std::string law = "twopoint:0.25,4,0.5";
    double T = 16.0;
    std::uint64_t seed = 1;
    double tol = 1e-10;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--dim", o.dim, "lattice dimension");
    cmd->add_option("--side", o.side, "torus side length");
    cmd->add_option("--law", o.law, "conductivity law (twopoint:a,b,p | uniform:a,b | loguniform:a,b)");
    cmd->add_option("--T", o.T, "regularization time");
    cmd->add_option("--seed", o.seed, "base seed");
    cmd->add_option("--tol", o.tol, "solver tolerance");
}

EdgeField sample(const CommonOpts& o, std::uint64_t replica, const char* purpose) {
    return sample_environment(ConductivityLaw::parse(o.law), make_lattice(o.dim, o.side),
                              StreamKey(o.seed, replica, purpose));
}

// ---- verify suites (exit nonzero on any failed check) ----

int verify_identities(const CommonOpts& o, int samples) {
    bool ok = true;
    for (int s = 0; s < samples; ++s) {
        EdgeField a = sample(o, std::uint64_t(s), "verify-identities");
        const Direction xi = axis_direction(o.dim, 0);
        std::vector<IdentityReport> reports;

        // gradient/divergence adjointness on random fields
        {
            CounterRng rng(StreamKey(o.seed, std::uint64_t(s), "verify-adjoint"));
            NodeField u(a.lattice);
            VectorFieldAtSites F(a.lattice);
            for (auto& v : u.values) v = rng.next_u01() - 0.5;
            for (auto& v : F.values) v = rng.next_u01() - 0.5;
            VectorFieldAtSites gu = gradient(u);
            NodeField dF = divergence(F);
            double lhs = 0.0;
            for (std::size_t i = 0; i < gu.values.size(); ++i) lhs += gu.values[i] * F.values[i];
            reports.push_back(make_identity_report("adjointness", lhs, dot(u, dF), 1e-12));
        }

        // Green function: mass identity and symmetry
        {
            GreenFunction G0 = green_function(a, o.T, 0, o.tol);
            double mass = 0.0;
            for (double v : G0.values.values) mass += v;
            reports.push_back(make_identity_report("green_mass", mass / o.T, 1.0, 1e-9));
            const index_t x = a.lattice->num_sites() / 2 + 1;
            GreenFunction Gx = green_function(a, o.T, x, o.tol);
            reports.push_back(
                make_identity_report("green_symmetry", G0.values[x], Gx.values[0], 1e-9));
        }

        reports.push_back(dyadic_difference(a, o.T, xi, o.tol));
        reports.push_back(energy_identity_check(a, o.T, xi, o.tol));
        {
            NodeField chi(a.lattice);
            CounterRng rng(StreamKey(o.seed, std::uint64_t(s), "verify-chi"));
            for (auto& v : chi.values) v = rng.next_u01() - 0.5;
            reports.push_back(variational_identity_check(a, o.T, xi, chi, o.tol));
        }
        auto [r1, r2] = psi_residual_checks(a, o.T, xi, o.tol);
        reports.push_back(r1);
        reports.push_back(r2);

        std::printf("sample %d (d=%d n=%d T=%g)\n", s, o.dim, o.side, o.T);
        for (const auto& r : reports) {
            print_report(r);
            ok = ok && r.pass;
        }
    }
    return ok ? 0 : 1;
}

int verify_covariance(const CommonOpts& o) {
    ConductivityLaw law = ConductivityLaw::parse(o.law);
    EnumerableEnvironment env(make_lattice(2, 2), law);
    const Direction xi = axis_direction(2, 0);
    const double T = o.T;
    const double tol = o.tol;

    FieldFunctional phi0 = [&](const EdgeField& a) {
        return solve_modified_corrector(a, T, xi, tol).phi[0];
    };
    FieldFunctional psi0 = [&](const EdgeField& a) {
        auto [psi, at_T, at_2T] = build_psi(a, T, xi, tol);
        return psi.psi[0];
    };

    bool ok = true;
    struct Case {
        const char* name;
        FieldFunctional* X;
        FieldFunctional* Y;
    } cases[] = {{"var(phi_T(0))", &phi0, &phi0}, {"cov(phi_T(0),psi_T(0))", &phi0, &psi0}};
    for (auto& c : cases) {
        IdentityReport coarse = verify_covariance_bound(env, *c.X, *c.Y, 5);
        IdentityReport fine = verify_covariance_bound(env, *c.X, *c.Y, 9);
        std::printf("%s grid=5 ", c.name);
        print_report(coarse);
        std::printf("%s grid=9 ", c.name);
        print_report(fine);
        if (coarse.pass != fine.pass) {
            std::printf("%s: grid refinement flipped the verdict\n", c.name);
            ok = false;
        }
        ok = ok && coarse.pass && fine.pass;
    }
    return ok ? 0 : 1;
}

// Boundedness claims become testable as a zero log-log slope of the
// sample-averaged ratio against R, fitted over the near field R <= sqrt(T)
// where the reference envelope carries the claimed scaling.
int verify_green(const CommonOpts& o, int samples) {
    bool ok = true;
    std::map<double, std::vector<double>> ratios;  // r_lo -> per-sample sup ratio
    for (int s = 0; s < samples; ++s) {
        EdgeField a = sample(o, std::uint64_t(s), "verify-green");
        GreenFunction G = green_function(a, o.T, 0, o.tol);
        for (double v : G.values.values)
            if (!(v > 0.0)) {
                std::printf("sample %d: nonpositive Green value\n", s);
                ok = false;
                break;
            }
        // strict near field: beyond sqrt(T)/2 the zero-order mass already
        // dominates the profile and the flat min{1,.} factor is not sharp
        for (const auto& row : decay_profile(a, G).rows) {
            if (row.r_hi <= 0.5 * std::sqrt(o.T) && std::isfinite(row.sup_ratio) &&
                row.sup_ratio > 0.0)
                ratios[row.r_lo].push_back(row.sup_ratio);
        }
    }
    std::vector<double> R, mean_ratio;
    for (const auto& [r, v] : ratios) {
        double m = 0.0;
        for (double x : v) m += x;
        R.push_back(r);
        mean_ratio.push_back(m / double(v.size()));
    }
    if (R.size() < 2) throw SizingError("verify green: need more near-field annuli (raise T)");
    ScalingFit fit = fit_loglog(R, mean_ratio);
    std::printf("decay ratio slope vs R over %d samples: %+.3f\n", samples, fit.slope);
    return ok && std::abs(fit.slope) <= 0.2 ? 0 : 1;
}

int verify_harnack(const CommonOpts& o, int samples) {
    std::vector<double> R;
    for (double r = 2.0; 4.0 * r < double(o.side) / 2.0; r *= 2.0) R.push_back(r);
    if (R.size() < 2) throw SizingError("verify harnack: torus too small for an R ladder");
    std::vector<double> mean_ratio(R.size(), 0.0);
    for (int s = 0; s < samples; ++s) {
        EdgeField a = sample(o, std::uint64_t(s), "verify-harnack");
        GreenFunction G = green_function(a, o.T, 0, o.tol);
        for (std::size_t k = 0; k < R.size(); ++k)
            mean_ratio[k] += harnack_ratio(a, G.values, 0, R[k]) / double(samples);
    }
    ScalingFit fit = fit_loglog(R, mean_ratio);
    std::printf("harnack ratio slope vs R over %d samples: %+.3f\n", samples, fit.slope);
    return std::abs(fit.slope) <= 0.2 ? 0 : 1;
}

int verify_convolution(double radius_factor) {
    bool ok = true;
    struct Case {
        int d;
        std::vector<double> T;
        double target;
    } cases[] = {{2, {64, 128, 256, 512, 1024}, 1.0}, {3, {64, 128, 256, 512}, 0.5}};
    for (const auto& c : cases) {
        ConvolutionScaling res = convolution_scaling(c.d, c.T, radius_factor);
        std::printf("d=%d convolution slope %.3f (target %.2f +- 0.15)\n", c.d,
                    res.fit.slope, c.target);
        if (std::abs(res.fit.slope - c.target) > 0.15) ok = false;
    }
    return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"homogenized-coefficient estimation on random lattice tori"};
    app.require_subcommand(1);

    // corrector
    CommonOpts co;
    std::string co_xi = "";
    std::string co_out;
    bool co_periodic = false;
    auto* corrector_cmd = app.add_subcommand("corrector", "solve a corrector problem");
    add_common(corrector_cmd, co);
    corrector_cmd->add_option("--xi", co_xi, "direction, comma-separated");
    corrector_cmd->add_flag("--periodic", co_periodic, "solve the periodic (mass 0) problem");
    corrector_cmd->add_option("--out", co_out, "output field file");

    // estimate
    CommonOpts eo;
    std::string eo_kind = "at";
    std::string eo_xi = "";
    int eo_L = 0;
    auto* estimate_cmd = app.add_subcommand("estimate", "compute a coefficient estimate");
    add_common(estimate_cmd, eo);
    estimate_cmd->add_option("--kind", eo_kind, "at | atl | alhash");
    estimate_cmd->add_option("--xi", eo_xi, "direction, comma-separated");
    estimate_cmd->add_option("--L", eo_L, "mask half-width (atl)");

    // green
    CommonOpts go;
    index_t go_pole = 0;
    std::string go_profile;
    auto* green_cmd = app.add_subcommand("green", "compute a Green function and its decay profile");
    add_common(green_cmd, go);
    green_cmd->add_option("--pole", go_pole, "pole site index");
    green_cmd->add_option("--profile-out", go_profile, "decay profile CSV path");

    // study
    std::string study_kind;
    std::string study_config;
    std::string study_prefix = "study";
    auto* study_cmd = app.add_subcommand("study", "run a Monte Carlo scaling campaign");
    study_cmd->add_option("kind", study_kind, "systematic | random | corrector | full")
        ->required();
    study_cmd->add_option("--config", study_config, "manifest JSON path")->required();
    study_cmd->add_option("--out-prefix", study_prefix, "output path prefix");

    // verify
    CommonOpts vo;
    std::string verify_kind;
    int verify_samples = 5;
    double verify_radius = 8.0;
    auto* verify_cmd = app.add_subcommand("verify", "run a verification suite");
    verify_cmd->add_option("kind", verify_kind,
                           "identities | covariance | green | harnack | convolution")
        ->required();
    add_common(verify_cmd, vo);
    verify_cmd->add_option("--samples", verify_samples, "number of random samples");
    verify_cmd->add_option("--radius-factor", verify_radius,
                           "truncation radius in units of sqrt(T) (convolution)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (corrector_cmd->parsed()) {
            EdgeField a = sample(co, 0, "corrector");
            Direction xi = parse_xi(co_xi, co.dim);
            CorrectorSolution sol = co_periodic
                                        ? solve_periodic_corrector(a, xi, co.tol)
                                        : solve_modified_corrector(a, co.T, xi, co.tol);
            std::printf("iterations=%ld residual=%.3e\n", sol.report.iterations,
                        sol.report.final_relative_residual);
            if (!co_out.empty()) write_field(co_out, sol.phi);
            return 0;
        }

        if (estimate_cmd->parsed()) {
            EdgeField a = sample(eo, 0, "estimate");
            Direction xi = parse_xi(eo_xi, eo.dim);
            EstimateRecord rec;
            if (eo_kind == "at") {
                rec = estimate_AT(a, eo.T, xi, eo.tol);
            } else if (eo_kind == "atl") {
                if (eo_L <= 0) throw std::invalid_argument("estimate atl: --L required");
                rec = estimate_ATL(a, eo.T, eo_L, xi, eo.tol);
            } else if (eo_kind == "alhash") {
                rec = estimate_AL_periodic(a, xi, eo.tol);
            } else {
                throw std::invalid_argument("estimate: unknown kind '" + eo_kind + "'");
            }
            rec.seed = eo.seed;
            nlohmann::json j{{"kind", rec.kind}, {"value", rec.value}, {"T", rec.T},
                             {"L", rec.L},       {"xi", rec.xi},       {"seed", rec.seed},
                             {"d", rec.d},       {"n", rec.n}};
            std::cout << j.dump() << "\n";
            return 0;
        }

        if (green_cmd->parsed()) {
            EdgeField a = sample(go, 0, "green");
            GreenFunction G = green_function(a, go.T, go_pole, go.tol);
            double mass = 0.0;
            for (double v : G.values.values) mass += v;
            std::printf("mass_identity=%.12f iterations=%ld\n", mass / go.T,
                        G.report.iterations);
            if (!go_profile.empty()) {
                DecayProfile prof = decay_profile(a, G);
                std::ofstream os(go_profile);
                if (!os) throw std::runtime_error("cannot open: " + go_profile);
                os << "R_lo,R_hi,sup_G,l2_G,l2_gradG,envelope,ratio\n";
                char buf[256];
                for (const auto& r : prof.rows) {
                    std::snprintf(buf, sizeof buf,
                                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.r_lo,
                                  r.r_hi, r.sup_g, r.l2_g, r.l2_grad, r.envelope,
                                  r.sup_ratio);
                    os << buf;
                }
            }
            return 0;
        }

        if (study_cmd->parsed()) {
            std::ifstream is(study_config);
            if (!is) throw std::invalid_argument("cannot open config: " + study_config);
            nlohmann::json j = nlohmann::json::parse(is);
            StudyManifest manifest = j.get<StudyManifest>();
            manifest.kind = study_kind;
            StudyResult result = run_study(manifest);
            emit_report(result, study_prefix + ".csv", study_prefix + ".manifest.json",
                        study_prefix + ".fit.json");
            std::printf("slope=%.6f intercept=%.6f residual=%.3e flagged=%d\n",
                        result.fit.slope, result.fit.intercept, result.fit.residual,
                        result.fit.flagged ? 1 : 0);
            return 0;
        }

        if (verify_cmd->parsed()) {
            if (verify_kind == "identities") return verify_identities(vo, verify_samples);
            if (verify_kind == "covariance") return verify_covariance(vo);
            if (verify_kind == "green") return verify_green(vo, verify_samples);
            if (verify_kind == "harnack") return verify_harnack(vo, verify_samples);
            if (verify_kind == "convolution") return verify_convolution(verify_radius);
            throw std::invalid_argument("verify: unknown kind '" + verify_kind + "'");
        }
    } catch (const NonConvergence& e) {
        std::fprintf(stderr, "solver failure: %s (iterations=%ld residual=%.3e)\n",
                     e.what(), e.report.iterations, e.report.final_relative_residual);
        return 3;
    } catch (const IncompatibleRhs& e) {
        std::fprintf(stderr, "solver failure: %s\n", e.what());
        return 3;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "usage error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
