#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "latthom/lattice.hpp"
#include "latthom/rng.hpp"

using namespace latthom;

namespace {

NodeField random_node_field(LatticePtr lat, std::uint64_t seed, const char* tag) {
    NodeField u(std::move(lat));
    CounterRng rng(StreamKey(seed, 0, tag));
    for (auto& v : u.values) v = rng.next_u01() - 0.5;
    return u;
}

VectorFieldAtSites random_vector_field(LatticePtr lat, std::uint64_t seed, const char* tag) {
    VectorFieldAtSites F(std::move(lat));
    CounterRng rng(StreamKey(seed, 0, tag));
    for (auto& v : F.values) v = rng.next_u01() - 0.5;
    return F;
}

}  // namespace

TEST_CASE("torus indexing round-trips and wraps") {
    TorusLattice lat(3, 4);
    REQUIRE(lat.num_sites() == 64);
    REQUIRE(lat.num_edges() == 192);
    for (index_t x = 0; x < lat.num_sites(); ++x)
        REQUIRE(lat.site_index(lat.site_coords(x)) == x);
    // wrap: forward in direction i from coordinate n-1 lands on coordinate 0
    const index_t corner = lat.site_index({3, 3, 3});
    for (int i = 0; i < 3; ++i) {
        auto c = lat.site_coords(lat.forward(corner, i));
        REQUIRE(c[i] == 0);
        REQUIRE(lat.backward(lat.forward(corner, i), i) == corner);
    }
    REQUIRE_THROWS_AS(TorusLattice(0, 4), SizingError);
    REQUIRE_THROWS_AS(TorusLattice(2, 1), SizingError);
}

TEST_CASE("torus distance uses the minimal image") {
    TorusLattice lat(2, 8);
    const index_t a = lat.site_index({0, 0});
    REQUIRE(lat.torus_distance(a, lat.site_index({7, 0})) == 1.0);
    REQUIRE(lat.torus_distance(a, lat.site_index({4, 0})) == 4.0);
    REQUIRE(lat.torus_distance(a, lat.site_index({7, 7})) == Catch::Approx(std::sqrt(2.0)));
    auto mi = lat.minimal_image(lat.site_index({7, 4}));
    REQUIRE(mi[0] == -1);
    REQUIRE(mi[1] == -4);
}

TEST_CASE("gradient of a constant vanishes; delta gives signed unit differences") {
    LatticePtr lat = make_lattice(2, 4);
    NodeField c(lat, 3.25);
    for (double v : gradient(c).values) REQUIRE(v == 0.0);

    NodeField delta(lat);
    delta[lat->site_index({0, 0})] = 1.0;
    VectorFieldAtSites g = gradient(delta);
    REQUIRE(g.at(lat->site_index({0, 0}), 0) == -1.0);
    REQUIRE(g.at(lat->site_index({3, 0}), 0) == 1.0);
    REQUIRE(g.at(lat->site_index({1, 0}), 0) == 0.0);
    REQUIRE(g.at(lat->site_index({2, 2}), 0) == 0.0);
}

TEST_CASE("divergence: constants vanish and the total always telescopes to zero") {
    LatticePtr lat = make_lattice(3, 3);
    VectorFieldAtSites constant(lat, -1.5);
    for (double v : divergence(constant).values) REQUIRE(v == 0.0);

    VectorFieldAtSites F = random_vector_field(lat, 11, "div-total");
    NodeField dF = divergence(F);
    double total = 0.0;
    for (double v : dF.values) total += v;
    REQUIRE(std::abs(total) < 1e-12);
}

TEST_CASE("gradient and divergence are exact adjoints (double-loop oracle)") {
    for (int d : {2, 3}) {
        LatticePtr lat = make_lattice(d, 3);
        NodeField u = random_node_field(lat, 7, "adjoint-u");
        VectorFieldAtSites F = random_vector_field(lat, 7, "adjoint-F");

        // left side by explicit loops over the definition, independent of the
        // library's neighbor tables
        double lhs = 0.0;
        for (index_t x = 0; x < lat->num_sites(); ++x) {
            auto c = lat->site_coords(x);
            for (int i = 0; i < d; ++i) {
                auto cf = c;
                cf[i] = (cf[i] + 1) % lat->side();
                lhs += (u[lat->site_index(cf)] - u[x]) * F.at(x, i);
            }
        }
        const double rhs = dot(u, divergence(F));
        REQUIRE(std::abs(lhs - rhs) <= 1e-12 * std::max(std::abs(lhs), 1.0));
    }
}

TEST_CASE("apply_operator: five-point stencil, constants, and symmetry") {
    LatticePtr lat = make_lattice(2, 5);
    OperatorSpec spec{EdgeField(lat, 1.0), 0.0};

    NodeField delta(lat);
    const index_t o = lat->site_index({0, 0});
    delta[o] = 1.0;
    NodeField Ld = apply_operator(spec, delta);
    REQUIRE(Ld[o] == 4.0);
    for (int i = 0; i < 2; ++i) {
        REQUIRE(Ld[lat->forward(o, i)] == -1.0);
        REQUIRE(Ld[lat->backward(o, i)] == -1.0);
    }
    REQUIRE(Ld[lat->site_index({2, 2})] == 0.0);

    OperatorSpec spec_mass{EdgeField(lat, 1.0), 0.25};
    NodeField ones(lat, 1.0);
    for (double v : apply_operator(spec_mass, ones).values) REQUIRE(v == 0.25);

    // symmetry against a dense-matrix oracle on a 3^2 torus
    LatticePtr tiny = make_lattice(2, 3);
    EdgeField a(tiny);
    CounterRng rng(StreamKey(3, 0, "op-sym"));
    for (auto& v : a.values) v = 0.5 + rng.next_u01();
    OperatorSpec rspec{a, 0.125};
    const index_t n = tiny->num_sites();
    std::vector<std::vector<double>> M(n, std::vector<double>(n));
    for (index_t j = 0; j < n; ++j) {
        NodeField e(tiny);
        e[j] = 1.0;
        NodeField col = apply_operator(rspec, e);
        for (index_t i = 0; i < n; ++i) M[i][j] = col[i];
    }
    for (index_t i = 0; i < n; ++i)
        for (index_t j = 0; j < n; ++j)
            REQUIRE(std::abs(M[i][j] - M[j][i]) <= 1e-12);

    // Dirichlet form: <u, Op u> - mass <u,u> = sum_e a(e)(grad u)^2 >= alpha |grad u|^2
    NodeField u = random_node_field(tiny, 5, "dirichlet");
    NodeField Lu = apply_operator(rspec, u);
    const double form = dot(u, Lu) - rspec.mass * dot(u, u);
    VectorFieldAtSites gu = gradient(u);
    double expected = 0.0, grad2 = 0.0;
    for (index_t x = 0; x < n; ++x)
        for (int i = 0; i < 2; ++i) {
            expected += a.at(x, i) * gu.at(x, i) * gu.at(x, i);
            grad2 += gu.at(x, i) * gu.at(x, i);
        }
    REQUIRE(form == Catch::Approx(expected).epsilon(1e-12));
    REQUIRE(form >= 0.5 * grad2);  // alpha = 0.5 from the sampling above
}

TEST_CASE("mask_eta: unit mass, support, reflection symmetry, sizing guard") {
    LatticePtr lat = make_lattice(2, 16);
    for (int L : {2, 4, 8}) {
        NodeField eta = mask_eta(lat, L);
        double total = 0.0;
        for (double v : eta.values) {
            REQUIRE(v >= 0.0);
            total += v;
        }
        REQUIRE(std::abs(total - 1.0) <= 1e-14);
        for (index_t x = 0; x < lat->num_sites(); ++x) {
            auto mi = lat->minimal_image(x);
            const bool inside = mi[0] >= -L && mi[0] < L && mi[1] >= -L && mi[1] < L;
            if (!inside) REQUIRE(eta[x] == 0.0);
            // even profile
            const index_t reflected = lat->site_index({-mi[0], -mi[1]});
            REQUIRE(eta[x] == Catch::Approx(eta[reflected]).margin(1e-15));
        }
    }
    REQUIRE_THROWS_AS(mask_eta(lat, 9), SizingError);
    REQUIRE_THROWS_AS(mask_eta(lat, 0), SizingError);

    NodeField flat = flat_mask(lat);
    for (double v : flat.values) REQUIRE(v == 1.0 / 256.0);
}

TEST_CASE("annulus_sites: neighbors, full cover, dyadic partition") {
    LatticePtr lat = make_lattice(2, 8);
    const index_t center = lat->site_index({0, 0});

    auto ring = annulus_sites(*lat, center, 0.0, 1.0);
    REQUIRE(ring.size() == 4);

    auto all = annulus_sites(*lat, center, 0.0, 8.0 * std::sqrt(2.0) / 2.0);
    REQUIRE(all.size() == std::size_t(lat->num_sites() - 1));

    // disjoint dyadic annuli partition the punctured torus
    std::size_t total = annulus_sites(*lat, center, 0.0, 1.0).size();
    for (double R = 1.0; R < 8.0; R *= 2.0)
        total += annulus_sites(*lat, center, R, 2.0 * R).size();
    REQUIRE(total == std::size_t(lat->num_sites() - 1));
}
