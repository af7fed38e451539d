#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "latthom/environment.hpp"
#include "latthom/sensitivity.hpp"

using namespace latthom;

namespace {

const ConductivityLaw kLaw = ConductivityLaw::two_point(0.25, 4.0, 0.5);

EdgeField random_conductivity(LatticePtr lat, std::uint64_t seed) {
    return sample_environment(kLaw, std::move(lat), StreamKey(seed, 0, "sens-test"));
}

}  // namespace

TEST_CASE("corrector sensitivity: constant-coefficient reduction") {
    // phi_T = 0, so the closed form degenerates to -xi_i grad_i G_T(z, x)
    LatticePtr lat = make_lattice(2, 16);
    EdgeField a(lat, 1.0);
    const Direction xi = axis_direction(2, 0);
    const index_t z = lat->site_index({3, 3});
    const index_t x = lat->site_index({5, 4});
    SensitivityReport rep = verify_phi_sensitivity(a, 8.0, xi, z, 0, x);
    REQUIRE(rep.rel_error <= 1e-3);

    GreenFunction G = green_function(a, 8.0, x, 1e-10);
    const double reduced = -(G.values[lat->forward(z, 0)] - G.values[z]);
    REQUIRE(rep.closed_form == Catch::Approx(reduced).margin(1e-12));
}

TEST_CASE("corrector sensitivity on random environments") {
    LatticePtr lat = make_lattice(2, 16);
    for (std::uint64_t seed : {1, 2, 3}) {
        EdgeField a = random_conductivity(lat, seed);
        const Direction xi = axis_direction(2, 0);
        const index_t z = lat->site_index({7, 2});
        const index_t x = lat->site_index({9, 5});
        SensitivityReport rep = verify_phi_sensitivity(a, 8.0, xi, z, 1, x);
        INFO("seed " << seed << ": fd " << rep.finite_difference << " cf "
                     << rep.closed_form);
        REQUIRE(rep.rel_error <= 1e-3);
    }
}

TEST_CASE("psi sensitivity carries the convolution term") {
    LatticePtr lat = make_lattice(2, 16);
    EdgeField a = random_conductivity(lat, 4);
    const Direction xi = axis_direction(2, 0);
    const index_t z = lat->site_index({4, 12});
    const index_t x = lat->site_index({6, 10});
    SensitivityReport rep = verify_psi_sensitivity(a, 8.0, xi, z, 0, x);
    INFO("fd " << rep.finite_difference << " cf " << rep.closed_form);
    REQUIRE(rep.rel_error <= 1e-3);
}

TEST_CASE("far edges have negligible influence") {
    LatticePtr lat = make_lattice(2, 16);
    EdgeField a = random_conductivity(lat, 5);
    const Direction xi = axis_direction(2, 0);
    const double T = 1.0;  // sqrt(T) = 1 << n/4
    const index_t x = lat->site_index({0, 0});

    const index_t near = lat->site_index({1, 0});
    const index_t far = lat->site_index({8, 8});  // distance n/2 * sqrt(2)
    SensitivityReport near_rep = verify_phi_sensitivity(a, T, xi, near, 0, x);
    SensitivityReport far_rep = verify_phi_sensitivity(a, T, xi, far, 0, x);
    REQUIRE(std::abs(far_rep.closed_form) <= 1e-3 * std::abs(near_rep.closed_form));
}

TEST_CASE("perturbations must keep the conductivity positive") {
    LatticePtr lat = make_lattice(2, 8);
    EdgeField a(lat, 1e-5);
    REQUIRE_THROWS_AS(verify_phi_sensitivity(a, 4.0, axis_direction(2, 0), 0, 0, 1, 1e-4),
                      std::invalid_argument);
}
