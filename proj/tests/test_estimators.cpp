#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "latthom/environment.hpp"
#include "latthom/estimators.hpp"

using namespace latthom;

namespace {

const ConductivityLaw kLaw = ConductivityLaw::two_point(0.25, 4.0, 0.5);

EdgeField random_conductivity(LatticePtr lat, std::uint64_t seed) {
    return sample_environment(kLaw, std::move(lat), StreamKey(seed, 0, "estimator-test"));
}

}  // namespace

TEST_CASE("constant coefficients are reproduced exactly by every estimator") {
    LatticePtr lat = make_lattice(2, 16);
    EdgeField a(lat, 2.5);
    const Direction xi = axis_direction(2, 0);
    REQUIRE(estimate_AT(a, 8.0, xi).value == Catch::Approx(2.5).margin(1e-12));
    REQUIRE(estimate_ATL(a, 8.0, 4, xi).value == Catch::Approx(2.5).margin(1e-12));
    REQUIRE(estimate_AL_periodic(a, xi).value == Catch::Approx(2.5).margin(1e-12));
}

TEST_CASE("energy density: ellipticity floor and variational minimality") {
    LatticePtr lat = make_lattice(2, 16);
    EdgeField a = random_conductivity(lat, 1);
    const Direction xi = axis_direction(2, 0);
    CorrectorSolution sol = solve_modified_corrector(a, 16.0, xi);
    NodeField e = energy_density(a, xi, sol.phi);
    for (index_t x = 0; x < lat->num_sites(); ++x) {
        double grad2 = 0.0;
        for (int i = 0; i < 2; ++i) {
            const double g = xi[i] + (sol.phi[lat->forward(x, i)] - sol.phi[x]);
            grad2 += g * g;
        }
        REQUIRE(e[x] >= 0.25 * grad2 - 1e-12);
    }

    // phi_T lowers the energy below the zero-competitor value <xi . A xi>
    double mean_aa = 0.0;
    for (index_t x = 0; x < lat->num_sites(); ++x) mean_aa += a.at(x, 0);
    mean_aa /= double(lat->num_sites());
    REQUIRE(spatial_mean(e) <= mean_aa + 1e-12);
}

TEST_CASE("estimator values stay within the law bounds and decrease in T") {
    LatticePtr lat = make_lattice(2, 16);
    const Direction xi = axis_direction(2, 0);
    for (std::uint64_t seed : {2, 3, 4}) {
        EdgeField a = random_conductivity(lat, seed);
        double prev = 1e300;
        for (double T : {4.0, 8.0, 16.0, 32.0}) {
            const double v = estimate_AT(a, T, xi).value;
            REQUIRE(v >= 0.25);
            REQUIRE(v <= 4.0);
            REQUIRE(v <= prev + 1e-10);
            prev = v;
        }
        REQUIRE(estimate_ATL(a, 16.0, 4, xi).value >= 0.25);
        REQUIRE(estimate_ATL(a, 16.0, 4, xi).value <= 4.0);
        REQUIRE(estimate_AL_periodic(a, xi).value >= 0.25);
        REQUIRE(estimate_AL_periodic(a, xi).value <= 4.0);
    }
}

TEST_CASE("flat mask override reduces the masked estimator to the plain average") {
    LatticePtr lat = make_lattice(2, 12);
    EdgeField a = random_conductivity(lat, 5);
    const Direction xi = axis_direction(2, 0);
    NodeField flat = flat_mask(lat);
    const double masked = estimate_ATL(a, 8.0, 6, xi, 1e-10, &flat).value;
    const double plain = estimate_AT(a, 8.0, xi).value;
    REQUIRE(masked == Catch::Approx(plain).margin(1e-13));
}

TEST_CASE("exact torus identities hold sample by sample") {
    const Direction xi2 = axis_direction(2, 0);
    LatticePtr lat2 = make_lattice(2, 16);
    EdgeField a2 = random_conductivity(lat2, 6);

    IdentityReport dyadic = dyadic_difference(a2, 8.0, xi2);
    CHECK(dyadic.pass);
    REQUIRE(dyadic.lhs <= 1e-10);  // A_T is non-increasing in T

    IdentityReport energy = energy_identity_check(a2, 8.0, xi2);
    CHECK(energy.pass);

    auto [res_T, res_2T] = psi_residual_checks(a2, 8.0, xi2);
    CHECK(res_T.pass);
    CHECK(res_2T.pass);

    // variational identity: chi = 1 reduces to mean(phi) = 0, random chi and d=3
    NodeField ones(lat2, 1.0);
    CHECK(variational_identity_check(a2, 8.0, xi2, ones).pass);

    LatticePtr lat3 = make_lattice(3, 8);
    EdgeField a3 = random_conductivity(lat3, 7);
    NodeField chi(lat3);
    CounterRng rng(StreamKey(7, 0, "chi"));
    for (auto& v : chi.values) v = rng.next_u01() - 0.5;
    CHECK(variational_identity_check(a3, 8.0, axis_direction(3, 0), chi).pass);

    // constant coefficients: both sides of the dyadic identity vanish
    EdgeField c(lat2, 1.5);
    IdentityReport trivial = dyadic_difference(c, 8.0, xi2);
    REQUIRE(std::abs(trivial.lhs) <= 1e-12);
    REQUIRE(std::abs(trivial.rhs) <= 1e-12);
    REQUIRE(trivial.pass);
}

TEST_CASE("spectral cross-check ties the iterative and dense paths together") {
    LatticePtr lat = make_lattice(2, 6);
    const Direction xi = axis_direction(2, 0);
    for (std::uint64_t seed : {8, 9}) {
        EdgeField a = random_conductivity(lat, seed);
        SpectralCrossCheck c = spectral_cross_check(a, 8.0, xi);
        CHECK(c.homogenized.pass);
        CHECK(c.at_T.pass);
        CHECK(c.systematic_error.pass);
        // the systematic error is a sum of nonnegative spectral terms
        REQUIRE(c.systematic_error.lhs >= -1e-10);
    }

    EdgeField c(lat, 2.0);
    SpectralCrossCheck trivial = spectral_cross_check(c, 8.0, xi);
    REQUIRE(trivial.homogenized.lhs == Catch::Approx(2.0).margin(1e-10));
    REQUIRE(trivial.at_T.lhs == Catch::Approx(2.0).margin(1e-10));
}

TEST_CASE("polarization recovers a consistent bilinear form") {
    LatticePtr lat = make_lattice(2, 12);
    EdgeField a = random_conductivity(lat, 10);
    const double T = 8.0;
    const double s = 1.0 / std::sqrt(2.0);

    auto cross_energy = [&](const CorrectorSolution& u, const Direction& xu,
                            const CorrectorSolution& v, const Direction& xv) {
        double total = 0.0;
        for (index_t x = 0; x < lat->num_sites(); ++x)
            for (int i = 0; i < 2; ++i) {
                const double gu = xu[i] + (u.phi[lat->forward(x, i)] - u.phi[x]);
                const double gv = xv[i] + (v.phi[lat->forward(x, i)] - v.phi[x]);
                total += a.at(x, i) * gu * gv;
            }
        return total / double(lat->num_sites());
    };

    const Direction e1 = axis_direction(2, 0), e2 = axis_direction(2, 1);
    CorrectorSolution p1 = solve_modified_corrector(a, T, e1, 1e-12);
    CorrectorSolution p2 = solve_modified_corrector(a, T, e2, 1e-12);
    CorrectorSolution pm = solve_modified_corrector(a, T, {s, s}, 1e-12);

    const double q1 = estimate_AT(a, T, e1, 1e-12).value;
    const double q2 = estimate_AT(a, T, e2, 1e-12).value;
    const double qm = estimate_AT(a, T, {s, s}, 1e-12).value;
    const double b12 = cross_energy(p1, e1, p2, e2);
    // q((e1+e2)/sqrt2) = (q(e1) + q(e2))/2 + B(e1, e2), and B is symmetric by
    // construction of the cross energy
    REQUIRE(qm == Catch::Approx(0.5 * (q1 + q2) + b12).margin(1e-7));
    REQUIRE(b12 == Catch::Approx(cross_energy(p2, e2, p1, e1)).margin(1e-12));
}

TEST_CASE("zero-order diagnostic is nonnegative and excluded from the estimate") {
    LatticePtr lat = make_lattice(2, 12);
    EdgeField a = random_conductivity(lat, 11);
    const Direction xi = axis_direction(2, 0);
    CorrectorSolution sol = solve_modified_corrector(a, 8.0, xi);
    const double z = zero_order_term(sol);
    REQUIRE(z >= 0.0);
    REQUIRE(estimate_AT(a, 8.0, xi).value ==
            Catch::Approx(spatial_mean(energy_density(a, xi, sol.phi))).margin(1e-12));
}
