#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "latthom/environment.hpp"
#include "latthom/lattice.hpp"
#include "latthom/rng.hpp"

using namespace latthom;

TEST_CASE("counter rng: range, determinism, stream separation") {
    CounterRng a(StreamKey(42, 0, "x"));
    CounterRng b(StreamKey(42, 0, "x"));
    CounterRng c(StreamKey(42, 1, "x"));
    CounterRng d(StreamKey(42, 0, "y"));
    bool replica_differs = false, purpose_differs = false;
    for (int i = 0; i < 1000; ++i) {
        const double u = a.next_u01();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        REQUIRE(u == b.next_u01());
        replica_differs = replica_differs || u != c.next_u01();
        purpose_differs = purpose_differs || u != d.next_u01();
    }
    REQUIRE(replica_differs);
    REQUIRE(purpose_differs);
}

TEST_CASE("law validation and parsing") {
    REQUIRE_THROWS_AS(ConductivityLaw::two_point(0.0, 1.0, 0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(ConductivityLaw::uniform(2.0, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(ConductivityLaw::two_point(1.0, 2.0, 1.5), std::invalid_argument);
    REQUIRE_THROWS_AS(ConductivityLaw::parse("twopoint"), std::invalid_argument);
    REQUIRE_THROWS_AS(ConductivityLaw::parse("gamma:1,2"), std::invalid_argument);

    for (const char* text : {"twopoint:0.25,4,0.5", "uniform:1,2", "loguniform:0.1,10"}) {
        ConductivityLaw law = ConductivityLaw::parse(text);
        ConductivityLaw round = ConductivityLaw::parse(law.to_string());
        REQUIRE(round.kind == law.kind);
        REQUIRE(round.alpha == law.alpha);
        REQUIRE(round.beta == law.beta);
        REQUIRE(round.p == law.p);
    }
}

TEST_CASE("law_moments closed forms") {
    auto [m1, v1] = law_moments(ConductivityLaw::two_point(1.0, 2.0, 0.5));
    REQUIRE(m1 == 1.5);
    REQUIRE(v1 == 0.25);

    auto [m2, v2] = law_moments(ConductivityLaw::uniform(1.0, 4.0));
    REQUIRE(m2 == 2.5);
    REQUIRE(v2 == Catch::Approx(9.0 / 12.0));

    auto [m3, v3] = law_moments(ConductivityLaw::two_point(3.0, 7.0, 1.0));
    REQUIRE(m3 == 3.0);
    REQUIRE(v3 == 0.0);

    // log-uniform against brute-force quadrature
    ConductivityLaw lu = ConductivityLaw::log_uniform(0.5, 8.0);
    const int N = 2000000;
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < N; ++i) {
        const double x = lu.sample((i + 0.5) / double(N));
        s += x;
        s2 += x * x;
    }
    s /= N;
    s2 /= N;
    auto [m4, v4] = law_moments(lu);
    REQUIRE(m4 == Catch::Approx(s).epsilon(1e-6));
    REQUIRE(v4 == Catch::Approx(s2 - s * s).epsilon(1e-5));
}

TEST_CASE("sample_environment: determinism, range, degenerate law") {
    LatticePtr lat = make_lattice(2, 16);
    ConductivityLaw law = ConductivityLaw::parse("twopoint:0.25,4,0.5");
    EdgeField a = sample_environment(law, lat, StreamKey(9, 3, "env"));
    EdgeField b = sample_environment(law, lat, StreamKey(9, 3, "env"));
    REQUIRE(a.values == b.values);

    for (auto kind : {ConductivityLaw::parse("twopoint:0.25,4,0.5"),
                      ConductivityLaw::parse("uniform:0.25,4"),
                      ConductivityLaw::parse("loguniform:0.25,4")}) {
        EdgeField f = sample_environment(kind, lat, StreamKey(9, 0, "range"));
        for (double v : f.values) {
            REQUIRE(v >= 0.25);
            REQUIRE(v <= 4.0);
        }
    }

    EdgeField point = sample_environment(ConductivityLaw::two_point(2.0, 5.0, 1.0), lat,
                                         StreamKey(9, 0, "point"));
    for (double v : point.values) REQUIRE(v == 2.0);
}

TEST_CASE("sampled mean agrees with the law mean (CLT bound)") {
    LatticePtr lat = make_lattice(2, 64);
    ConductivityLaw law = ConductivityLaw::two_point(1.0, 2.0, 0.5);
    EdgeField a = sample_environment(law, lat, StreamKey(2024, 0, "clt"));
    double mean = 0.0;
    for (double v : a.values) mean += v;
    mean /= double(a.values.size());
    const double se = std::sqrt(0.25 / double(a.values.size()));
    REQUIRE(std::abs(mean - 1.5) <= 4.0 * se);
}

TEST_CASE("adjacent edges are independent (chi-square on 2x2 tables)") {
    LatticePtr lat = make_lattice(2, 64);
    ConductivityLaw law = ConductivityLaw::two_point(1.0, 2.0, 0.5);
    EdgeField a = sample_environment(law, lat, StreamKey(31337, 0, "chi2"));

    // pair the two canonical edges at each site and tabulate (low/high, low/high)
    double c[2][2] = {};
    for (index_t x = 0; x < lat->num_sites(); ++x) {
        const int i = a.at(x, 0) == 1.0 ? 0 : 1;
        const int j = a.at(x, 1) == 1.0 ? 0 : 1;
        c[i][j] += 1.0;
    }
    const double N = double(lat->num_sites());
    const double r0 = c[0][0] + c[0][1], r1 = c[1][0] + c[1][1];
    const double q0 = c[0][0] + c[1][0], q1 = c[0][1] + c[1][1];
    double chi2 = 0.0;
    const double rows[2] = {r0, r1}, cols[2] = {q0, q1};
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const double e = rows[i] * cols[j] / N;
            chi2 += (c[i][j] - e) * (c[i][j] - e) / e;
        }
    // 1 degree of freedom, significance 1e-4
    REQUIRE(chi2 < 15.137);
}
