#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "latthom/corrector.hpp"
#include "latthom/environment.hpp"
#include "latthom/errors.hpp"
#include "latthom/estimators.hpp"
#include "latthom/fit.hpp"
#include "latthom/lattice.hpp"
#include "latthom/rng.hpp"

namespace latthom {

inline constexpr const char* kVersion = "latthom 1.0.0";

/// Torus side for a study point: n = max(8 ceil(sqrt(T)), 4L), rounded up to
/// the next multiple of 8.
inline int torus_side_policy(double T, int L) {
    const int by_T = T > 0.0 ? 8 * static_cast<int>(std::ceil(std::sqrt(T))) : 0;
    const int by_L = 4 * L;
    int n = std::max(std::max(by_T, by_L), 8);
    if (n % 8 != 0) n += 8 - n % 8;
    return n;
}

/// Full description of a Monte Carlo campaign; a manifest plus the binary
/// determines every output byte.
struct StudyManifest {
    std::string kind;  // "systematic" | "random" | "corrector" | "full"
    int d = 2;
    ConductivityLaw law = ConductivityLaw::two_point(0.25, 4.0, 0.5);
    std::vector<double> T_values;  // systematic / corrector ladders
    std::vector<int> L_values;     // random / full ladders (T = L^2)
    int replicas = 30;
    std::uint64_t base_seed = 1;
    double solver_tol = 1e-7;
    int n_override = 0;  // 0 = sizing policy
    double reference = std::numeric_limits<double>::quiet_NaN();  // a_hom for "full"
    double max_relative_std_error = 0.2;
    std::string version = kVersion;

    int side_for(double T, int L) const {
        return n_override > 0 ? n_override : torus_side_policy(T, L);
    }
};

inline void to_json(nlohmann::json& j, const StudyManifest& m) {
    j = nlohmann::json{{"kind", m.kind},
                       {"d", m.d},
                       {"law", m.law.to_string()},
                       {"T_values", m.T_values},
                       {"L_values", m.L_values},
                       {"replicas", m.replicas},
                       {"base_seed", m.base_seed},
                       {"solver_tol", m.solver_tol},
                       {"n_override", m.n_override},
                       {"max_relative_std_error", m.max_relative_std_error},
                       {"version", m.version}};
    if (std::isfinite(m.reference)) j["reference"] = m.reference;
}

inline void from_json(const nlohmann::json& j, StudyManifest& m) {
    m.kind = j.at("kind").get<std::string>();
    m.d = j.at("d").get<int>();
    m.law = ConductivityLaw::parse(j.at("law").get<std::string>());
    if (j.contains("T_values")) m.T_values = j.at("T_values").get<std::vector<double>>();
    if (j.contains("L_values")) m.L_values = j.at("L_values").get<std::vector<int>>();
    if (j.contains("replicas")) m.replicas = j.at("replicas").get<int>();
    if (j.contains("base_seed")) m.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("solver_tol")) m.solver_tol = j.at("solver_tol").get<double>();
    if (j.contains("n_override")) m.n_override = j.at("n_override").get<int>();
    if (j.contains("reference")) m.reference = j.at("reference").get<double>();
    if (j.contains("max_relative_std_error"))
        m.max_relative_std_error = j.at("max_relative_std_error").get<double>();
    if (j.contains("version")) m.version = j.at("version").get<std::string>();
}

struct StudyPoint {
    double x = 0.0;      // T or L
    double value = 0.0;  // mean / std / rms, per study kind
    double std_error = 0.0;
    int replicas = 0;
};

struct StudyResult {
    StudyManifest manifest;
    std::vector<StudyPoint> points;
    ScalingFit fit;
};

namespace detail {

inline int worker_count() {
    if (const char* env = std::getenv("LATTHOM_THREADS")) {
        const int v = std::atoi(env);
        if (v >= 1) return v;
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Runs fn(r) for r in [0, count) on the worker pool.  Each call writes only
/// its own slot, so results are independent of scheduling; callers reduce in
/// replica-index order afterwards.
inline void parallel_replicas(int count, const std::function<void(int)>& fn) {
    const int workers = std::min(worker_count(), count);
    if (workers <= 1) {
        for (int r = 0; r < count; ++r) fn(r);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                const int r = next.fetch_add(1);
                if (r >= count) return;
                fn(r);
            }
        });
    }
    for (auto& t : pool) t.join();
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;        // sample standard deviation (ddof 1)
    double mean_se = 0.0;    // standard error of the mean
    double std_se = 0.0;     // approximate standard error of the std
};

inline MeanStd mean_std(const std::vector<double>& v) {
    MeanStd out;
    const std::size_t n = v.size();
    if (n == 0) return out;
    for (double x : v) out.mean += x;
    out.mean /= double(n);
    if (n < 2) return out;
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / double(n - 1));
    out.mean_se = out.std / std::sqrt(double(n));
    out.std_se = out.std / std::sqrt(2.0 * double(n - 1));
    return out;
}

inline void check_point_noise(const StudyManifest& m, const StudyPoint& pt) {
    if (!(pt.value > 0.0))
        throw DegenerateData("study: nonpositive ladder-point value (constant law?)");
    if (pt.std_error > m.max_relative_std_error * pt.value)
        throw DegenerateData("study: standard error above " +
                             std::to_string(m.max_relative_std_error) +
                             " of the point value; more replicas needed");
}

inline StreamKey point_key(const StudyManifest& m, const std::string& tag, int replica) {
    return StreamKey(m.base_seed, replica, m.kind + ":" + tag);
}

}  // namespace detail

/// One-replica exact-identity suite, run before every study; any failure
/// aborts the campaign (the identities hold in exact arithmetic, so a
/// violation means the solves cannot be trusted).
inline void preflight_identity_suite(const StudyManifest& m) {
    const int n = std::min(16, m.side_for(m.T_values.empty() ? 16.0 : m.T_values.front(),
                                           m.L_values.empty() ? 0 : m.L_values.front()));
    LatticePtr lat = make_lattice(m.d, n);
    EdgeField a = sample_environment(m.law, lat, detail::point_key(m, "preflight", 0));
    const Direction xi = axis_direction(m.d, 0);
    const double T = 8.0;
    const double tol = 1e-10;

    std::vector<IdentityReport> reports;
    reports.push_back(dyadic_difference(a, T, xi, tol));
    reports.push_back(energy_identity_check(a, T, xi, tol));
    NodeField chi(lat);
    CounterRng rng(detail::point_key(m, "preflight-chi", 0));
    for (auto& v : chi.values) v = rng.next_u01() - 0.5;
    reports.push_back(variational_identity_check(a, T, xi, chi, tol));
    for (const auto& r : reports) {
        if (!r.pass)
            throw DegenerateData("preflight identity failure: " + r.name +
                                 " discrepancy " + std::to_string(r.rel_discrepancy));
    }
}

/// Systematic error via same-sample dyadic differences |A_2T - A_T|.
inline StudyResult run_systematic_error_study(const StudyManifest& m) {
    if (m.T_values.size() < 2) throw DegenerateData("systematic study: ladder too short");
    preflight_identity_suite(m);
    const Direction xi = axis_direction(m.d, 0);
    const int n = m.side_for(2.0 * m.T_values.back(), 0);
    LatticePtr lat = make_lattice(m.d, n);

    StudyResult out;
    out.manifest = m;
    for (double T : m.T_values) {
        std::ostringstream tag;
        tag << "T=" << T;
        std::vector<double> diffs(m.replicas);
        detail::parallel_replicas(m.replicas, [&](int r) {
            EdgeField a = sample_environment(m.law, lat, detail::point_key(m, tag.str(), r));
            const double at = estimate_AT(a, T, xi, m.solver_tol).value;
            const double at2 = estimate_AT(a, 2.0 * T, xi, m.solver_tol).value;
            diffs[r] = std::abs(at2 - at);
        });
        const auto stats = detail::mean_std(diffs);
        StudyPoint pt{T, stats.mean, stats.mean_se, m.replicas};
        detail::check_point_noise(m, pt);
        out.points.push_back(pt);
    }
    std::vector<double> xs, ys, ses;
    for (const auto& p : out.points) {
        xs.push_back(p.x);
        ys.push_back(p.value);
        ses.push_back(p.std_error);
    }
    out.fit = fit_loglog(xs, ys, ses);
    return out;
}

/// Random error: per-replica fluctuation of the masked estimator A_{T,L}
/// with T = L^2; the reported value is the sample standard deviation.
inline StudyResult run_random_error_study(const StudyManifest& m) {
    if (m.L_values.size() < 2) throw DegenerateData("random study: ladder too short");
    preflight_identity_suite(m);
    const Direction xi = axis_direction(m.d, 0);

    StudyResult out;
    out.manifest = m;
    for (int L : m.L_values) {
        const double T = double(L) * double(L);
        const int n = m.side_for(T, L);
        LatticePtr lat = make_lattice(m.d, n);
        std::ostringstream tag;
        tag << "L=" << L;
        std::vector<double> values(m.replicas);
        detail::parallel_replicas(m.replicas, [&](int r) {
            EdgeField a = sample_environment(m.law, lat, detail::point_key(m, tag.str(), r));
            values[r] = estimate_ATL(a, T, L, xi, m.solver_tol).value;
        });
        const auto stats = detail::mean_std(values);
        StudyPoint pt{double(L), stats.std, stats.std_se, m.replicas};
        detail::check_point_noise(m, pt);
        out.points.push_back(pt);
    }
    std::vector<double> xs, ys, ses;
    for (const auto& p : out.points) {
        xs.push_back(p.x);
        ys.push_back(p.value);
        ses.push_back(p.std_error);
    }
    out.fit = fit_loglog(xs, ys, ses);
    return out;
}

/// Convergence of the modified corrector towards its long-time proxy
/// phi_{T_ref}, T_ref = 16 max(ladder):
///   value(T) = T^-1 <(phi_T - phi_ref)^2> + <|grad phi_T - grad phi_ref|^2>
/// (gradient term only for d = 2), averaged over replicas on a shared torus.
inline StudyResult run_corrector_convergence_study(const StudyManifest& m) {
    if (m.T_values.size() < 2) throw DegenerateData("corrector study: ladder too short");
    preflight_identity_suite(m);
    const Direction xi = axis_direction(m.d, 0);
    // 16x rather than a tighter multiple: the gradient distance to the proxy
    // loses a factor (1 - (T/T_ref)^s)^2 at the top rung, which visibly
    // steepens short ladders when T_ref is within two octaves of max T
    const double T_ref = 16.0 * m.T_values.back();
    const int n = m.side_for(T_ref, 0);
    LatticePtr lat = make_lattice(m.d, n);
    const bool gradient_only = m.d == 2;

    const std::size_t ladder = m.T_values.size();
    std::vector<std::vector<double>> values(ladder, std::vector<double>(m.replicas));
    detail::parallel_replicas(m.replicas, [&](int r) {
        EdgeField a = sample_environment(m.law, lat, detail::point_key(m, "env", r));
        CorrectorSolution ref = solve_modified_corrector(a, T_ref, xi, m.solver_tol);
        const TorusLattice& l = *lat;
        for (std::size_t k = 0; k < ladder; ++k) {
            const double T = m.T_values[k];
            CorrectorSolution sol = solve_modified_corrector(a, T, xi, m.solver_tol);
            double diff2 = 0.0, grad2 = 0.0;
            for (index_t x = 0; x < l.num_sites(); ++x) {
                const double dv = sol.phi[x] - ref.phi[x];
                diff2 += dv * dv;
                for (int i = 0; i < m.d; ++i) {
                    const double g = (sol.phi[l.forward(x, i)] - sol.phi[x]) -
                                     (ref.phi[l.forward(x, i)] - ref.phi[x]);
                    grad2 += g * g;
                }
            }
            diff2 /= double(l.num_sites());
            grad2 /= double(l.num_sites());
            values[k][r] = gradient_only ? grad2 : diff2 / T + grad2;
        }
    });

    StudyResult out;
    out.manifest = m;
    for (std::size_t k = 0; k < ladder; ++k) {
        const auto stats = detail::mean_std(values[k]);
        StudyPoint pt{m.T_values[k], stats.mean, stats.mean_se, m.replicas};
        detail::check_point_noise(m, pt);
        out.points.push_back(pt);
    }
    std::vector<double> xs, ys, ses;
    for (const auto& p : out.points) {
        xs.push_back(p.x);
        ys.push_back(p.value);
        ses.push_back(p.std_error);
    }
    out.fit = fit_loglog(xs, ys, ses);
    return out;
}

/// Total error: rms of (A_{T,L} - a_hom) across replicas, T = L^2.  The
/// reference a_hom comes from the manifest, or from the d = 2 self-dual
/// closed form sqrt(alpha beta) when the law permits it.
inline StudyResult run_full_error_study(const StudyManifest& m) {
    if (m.L_values.size() < 2) throw DegenerateData("full study: ladder too short");
    double ref = m.reference;
    if (!std::isfinite(ref)) {
        const bool self_dual = m.d == 2 &&
                               m.law.kind == ConductivityLaw::Kind::TwoPoint &&
                               m.law.p == 0.5;
        if (!self_dual)
            throw MissingReference(
                "full study: no reference value in the manifest and the law is not the "
                "d=2 self-dual case");
        ref = std::sqrt(m.law.alpha * m.law.beta);
    }
    preflight_identity_suite(m);
    const Direction xi = axis_direction(m.d, 0);

    StudyResult out;
    out.manifest = m;
    for (int L : m.L_values) {
        const double T = double(L) * double(L);
        const int n = m.side_for(T, L);
        LatticePtr lat = make_lattice(m.d, n);
        std::ostringstream tag;
        tag << "L=" << L;
        std::vector<double> sq(m.replicas);
        detail::parallel_replicas(m.replicas, [&](int r) {
            EdgeField a = sample_environment(m.law, lat, detail::point_key(m, tag.str(), r));
            const double v = estimate_ATL(a, T, L, xi, m.solver_tol).value - ref;
            sq[r] = v * v;
        });
        double ms = 0.0;
        for (double v : sq) ms += v;
        ms /= double(m.replicas);
        const auto stats = detail::mean_std(sq);
        const double rms = std::sqrt(ms);
        // delta method: se(rms) = se(mean square) / (2 rms)
        const double se = rms > 0.0 ? stats.mean_se / (2.0 * rms) : 0.0;
        StudyPoint pt{double(L), rms, se, m.replicas};
        detail::check_point_noise(m, pt);
        out.points.push_back(pt);
    }
    std::vector<double> xs, ys, ses;
    for (const auto& p : out.points) {
        xs.push_back(p.x);
        ys.push_back(p.value);
        ses.push_back(p.std_error);
    }
    out.fit = fit_loglog(xs, ys, ses);
    return out;
}

inline StudyResult run_study(const StudyManifest& m) {
    if (m.kind == "systematic") return run_systematic_error_study(m);
    if (m.kind == "random") return run_random_error_study(m);
    if (m.kind == "corrector") return run_corrector_convergence_study(m);
    if (m.kind == "full") return run_full_error_study(m);
    throw std::invalid_argument("run_study: unknown kind '" + m.kind + "'");
}

// ---- Reports ----

namespace detail {

inline std::string format_g17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace detail

inline std::string points_csv(const std::vector<StudyPoint>& points) {
    std::ostringstream os;
    os << "x,value,std_error,replicas,ln_x,ln_y\n";
    for (const auto& p : points) {
        os << detail::format_g17(p.x) << ',' << detail::format_g17(p.value) << ','
           << detail::format_g17(p.std_error) << ',' << p.replicas << ','
           << detail::format_g17(std::log(p.x)) << ','
           << detail::format_g17(std::log(p.value)) << '\n';
    }
    return os.str();
}

inline std::vector<StudyPoint> parse_points_csv(const std::string& csv) {
    std::vector<StudyPoint> points;
    std::istringstream is(csv);
    std::string line;
    std::getline(is, line);  // header
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        StudyPoint p;
        std::istringstream ls(line);
        std::string tok;
        std::getline(ls, tok, ',');
        p.x = std::stod(tok);
        std::getline(ls, tok, ',');
        p.value = std::stod(tok);
        std::getline(ls, tok, ',');
        p.std_error = std::stod(tok);
        std::getline(ls, tok, ',');
        p.replicas = std::stoi(tok);
        points.push_back(p);
    }
    return points;
}

inline nlohmann::json fit_summary_json(const ScalingFit& fit) {
    return nlohmann::json{{"slope", fit.slope},
                          {"intercept", fit.intercept},
                          {"residual", fit.residual},
                          {"log_correction", fit.log_correction},
                          {"log_correction_coeff", fit.log_correction_coeff},
                          {"flagged", fit.flagged}};
}

/// Writes the plot-ready CSV, the manifest, and the fit summary.
inline void emit_report(const StudyResult& result, const std::string& csv_path,
                        const std::string& manifest_path, const std::string& fit_path) {
    {
        std::ofstream os(csv_path, std::ios::binary);
        if (!os) throw std::runtime_error("cannot open for writing: " + csv_path);
        os << points_csv(result.points);
    }
    {
        std::ofstream os(manifest_path);
        if (!os) throw std::runtime_error("cannot open for writing: " + manifest_path);
        os << nlohmann::json(result.manifest).dump(2) << '\n';
    }
    {
        std::ofstream os(fit_path);
        if (!os) throw std::runtime_error("cannot open for writing: " + fit_path);
        os << fit_summary_json(result.fit).dump(2) << '\n';
    }
}

}  // namespace latthom
