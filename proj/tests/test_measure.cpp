#include "mmdflow/measure.hpp"
#include "mmdflow/numerics.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace mmdflow;

namespace {
Measure1D dirac_flow_mixture() {
    // 1/2 uniform on [-1,0] plus an atom of mass 1/2 at 0
    return Measure1D({{0.0, 0.5}}, {{-1.0, 0.0, 0.5}});
}
} // namespace

TEST_CASE("construction rejects invalid measures") {
    CHECK_THROWS_AS(Measure1D({{0.0, 0.5}}, {}), InvariantError);          // mass != 1
    CHECK_THROWS_AS(Measure1D({{0.0, -1.0}, {1.0, 2.0}}, {}), InvariantError); // w <= 0
    CHECK_THROWS_AS(Measure1D({}, {{1.0, 1.0, 1.0}}), InvariantError);     // a == b
    CHECK_THROWS_AS(Measure1D({{std::nan(""), 1.0}}, {}), InvariantError); // non-finite
    CHECK_THROWS_AS(Measure1D({}, {}), InvariantError);                    // empty
}

TEST_CASE("coincident atoms merge at construction") {
    const Measure1D mu({{0.5, 0.25}, {0.5, 0.25}, {-1.0, 0.5}}, {});
    REQUIRE(mu.atoms().size() == 2);
    CHECK(mu.atoms()[0].x == -1.0);
    CHECK(mu.atoms()[1].w == Catch::Approx(0.5));
}

TEST_CASE("cdf of a Dirac jumps at the atom") {
    const Measure1D d0 = Measure1D::dirac(0.0);
    CHECK(cdf_eval(d0, 0.0) == 1.0);
    CHECK(cdf_eval(d0, -0.001) == 0.0);
    CHECK(cdf_left(d0, 0.0) == 0.0);
}

TEST_CASE("cdf of the symmetric uniform is 1/2 at the center") {
    const Measure1D u = Measure1D::uniform(-1.0, 1.0);
    CHECK(cdf_eval(u, 0.0) == Catch::Approx(0.5));
    CHECK(cdf_eval(u, -2.0) == 0.0);
    CHECK(cdf_eval(u, 2.0) == 1.0);
}

TEST_CASE("cdf of the uniform-plus-atom mixture") {
    const Measure1D mu = dirac_flow_mixture();
    CHECK(cdf_eval(mu, -0.5) == Catch::Approx(0.25));
    CHECK(cdf_eval(mu, 0.0) == Catch::Approx(1.0));
    CHECK(cdf_left(mu, 0.0) == Catch::Approx(0.5));
}

TEST_CASE("quantile of a Dirac is constant") {
    const QuantileFn q = quantile(Measure1D::dirac(2.5));
    CHECK(q(0.1) == 2.5);
    CHECK(q(0.99) == 2.5);
    REQUIRE(q.segments().size() == 1);
    CHECK(q.segments()[0].flat());
}

TEST_CASE("quantile of the symmetric uniform is 2s - 1") {
    const QuantileFn q = quantile(Measure1D::uniform(-1.0, 1.0));
    for (double s : {0.1, 0.25, 0.5, 0.9})
        CHECK(q(s) == Catch::Approx(2.0 * s - 1.0).margin(1e-15));
}

TEST_CASE("quantile of a two-atom measure is the left-continuous step") {
    const Measure1D mu({{0.0, 0.5}, {1.0, 0.5}}, {});
    const QuantileFn q = quantile(mu);
    CHECK(q(0.25) == 0.0);
    CHECK(q(0.5) == 0.0);  // value on (0, 1/2]
    CHECK(q(0.5001) == 1.0);
    CHECK(q(0.9) == 1.0);
    CHECK(q.value_right(0.5) == 1.0);
}

TEST_CASE("pushforward of a constant quantile is a Dirac") {
    const Measure1D mu = pushforward_from_quantile(QuantileFn::constant(-3.0));
    REQUIRE(mu.atoms().size() == 1);
    CHECK(mu.atoms()[0].x == -3.0);
    CHECK(mu.atoms()[0].w == 1.0);
    CHECK(mu.uniforms().empty());
}

TEST_CASE("pushforward of the affine quantile is the uniform") {
    const Measure1D mu = pushforward_from_quantile(QuantileFn::affine(-1.0, 1.0));
    REQUIRE(mu.uniforms().size() == 1);
    CHECK(mu.uniforms()[0].a == -1.0);
    CHECK(mu.uniforms()[0].b == 1.0);
    CHECK(mu.uniforms()[0].w == 1.0);
}

TEST_CASE("pushforward of the half-ramp quantile is the flow mixture") {
    const QuantileFn g({{0.0, 0.5, -1.0, 0.0}, {0.5, 1.0, 0.0, 0.0}});
    const Measure1D mu = pushforward_from_quantile(g);
    CHECK(approx_equal(mu, dirac_flow_mixture(), 1e-15));
    REQUIRE(mu.atoms().size() == 1);
    CHECK(mu.atoms()[0].w == Catch::Approx(0.5));
}

TEST_CASE("quantile/pushforward round trip is the identity") {
    std::mt19937_64 rng(2024);
    for (int rep = 0; rep < 1000; ++rep) {
        const Measure1D mu = oracles::random_mixed_measure(rng);
        const QuantileFn q = quantile(mu);
        // monotone across the whole domain
        const auto& segs = q.segments();
        for (std::size_t i = 0; i < segs.size(); ++i) {
            CHECK(segs[i].v_lo <= segs[i].v_hi);
            if (i > 0) CHECK(segs[i - 1].v_hi <= segs[i].v_lo);
        }
        const Measure1D back = pushforward_from_quantile(q);
        CHECK(w1(mu, back) <= 1e-12);
        CHECK(std::abs(back.total_mass() - 1.0) <= 1e-12);
    }
}

TEST_CASE("w2 between Diracs is the distance") {
    CHECK(w2(Measure1D::dirac(-1.0), Measure1D::dirac(0.0)) == Catch::Approx(1.0));
    const Measure1D mu = dirac_flow_mixture();
    CHECK(w2(mu, mu) == 0.0);
}

TEST_CASE("w2 of uniform vs Dirac matches the quadrature oracle") {
    // W2^2 = int_0^1 (2s-1)^2 ds, frozen through an independent quadrature
    const double oracle =
        quad_adaptive([](double s) { return (2.0 * s - 1.0) * (2.0 * s - 1.0); }, 0.0,
                      1.0, 1e-13);
    REQUIRE(oracle == Catch::Approx(1.0 / 3.0).margin(1e-12));
    const double got = w2(Measure1D::uniform(-1.0, 1.0), Measure1D::dirac(0.0));
    CHECK(got == Catch::Approx(std::sqrt(oracle)).margin(1e-12));
    CHECK(got == Catch::Approx(0.5773502691896258).margin(1e-12));
}

TEST_CASE("w2 equals the sorted-matching cost on empirical pairs") {
    std::mt19937_64 rng(99);
    std::uniform_int_distribution<int> size(1, 64);
    for (int rep = 0; rep < 200; ++rep) {
        const int n = size(rng);
        const auto xs = oracles::random_points(rng, n, -2.0, 2.0);
        const auto ys = oracles::random_points(rng, n, -2.0, 2.0);
        const double got = w2(Measure1D::empirical(xs), Measure1D::empirical(ys));
        const double want = oracles::sorted_matching_w2(xs, ys);
        CHECK(got == Catch::Approx(want).epsilon(1e-12).margin(1e-14));
    }
}

TEST_CASE("w2 satisfies the triangle inequality on random triples") {
    std::mt19937_64 rng(31337);
    for (int rep = 0; rep < 200; ++rep) {
        const Measure1D a = oracles::random_mixed_measure(rng);
        const Measure1D b = oracles::random_mixed_measure(rng);
        const Measure1D c = oracles::random_mixed_measure(rng);
        CHECK(w2(a, c) <= w2(a, b) + w2(b, c) + 1e-10);
    }
}

TEST_CASE("w2 is symmetric and positive between distinct measures") {
    std::mt19937_64 rng(555);
    for (int rep = 0; rep < 100; ++rep) {
        const Measure1D a = oracles::random_mixed_measure(rng);
        const Measure1D b = oracles::random_mixed_measure(rng);
        CHECK(w2(a, b) == Catch::Approx(w2(b, a)).margin(1e-14));
        if (w1(a, b) > 1e-9) CHECK(w2(a, b) > 0.0);
    }
}

TEST_CASE("sample_quantile_grid at midpoints") {
    const QuantileGrid c = sample_quantile_grid(QuantileFn::constant(0.0), 4);
    CHECK(c.values == std::vector<double>{0.0, 0.0, 0.0, 0.0});

    const QuantileGrid r = sample_quantile_grid(QuantileFn::affine(-1.0, 1.0), 2);
    CHECK(r.values[0] == Catch::Approx(-0.5));
    CHECK(r.values[1] == Catch::Approx(0.5));

    const Measure1D two({{0.0, 0.5}, {1.0, 0.5}}, {});
    const QuantileGrid s = sample_quantile_grid(quantile(two), 4);
    CHECK(s.values == std::vector<double>{0.0, 0.0, 1.0, 1.0});

    CHECK_THROWS_AS(sample_quantile_grid(QuantileFn::constant(0.0), 1), InvariantError);
}

TEST_CASE("sampled grids of random measures are nondecreasing") {
    std::mt19937_64 rng(8);
    for (int rep = 0; rep < 100; ++rep) {
        const Measure1D mu = oracles::random_mixed_measure(rng);
        CHECK(sample_quantile_grid(quantile(mu), 37).is_monotone());
    }
}

TEST_CASE("expected_distance matches dense quadrature on mixed measures") {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 20; ++rep) {
        const Measure1D mu = oracles::random_mixed_measure(rng);
        std::uniform_real_distribution<double> u(-2.0, 2.0);
        const double v = u(rng);
        // independent oracle: E|v - Y| = sum over atoms + dense sums on pieces
        double want = 0.0;
        for (const Atom& a : mu.atoms()) want += a.w * std::abs(v - a.x);
        for (const UniformPiece& p : mu.uniforms()) {
            auto f = [&](double y) { return std::abs(v - y); };
            want += p.w * oracles::riemann_midpoint(f, p.a, p.b, 200000) / (p.b - p.a);
        }
        CHECK(expected_distance(mu, v) == Catch::Approx(want).margin(1e-7));
    }
}
