#include "mmdflow/energy.hpp"
#include "mmdflow/numerics.hpp"
#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace mmdflow;

namespace {

/// Independent quadrature oracle for E_K(mu) on a mixed measure with the
/// distance kernel: dense 2D Riemann sums over every component pair.
double interaction_oracle_distance(const Measure1D& mu, int n = 4000) {
    struct Comp {
        bool atom;
        double x, a, b, w;
    };
    std::vector<Comp> cs;
    for (const Atom& a : mu.atoms()) cs.push_back({true, a.x, 0, 0, a.w});
    for (const UniformPiece& u : mu.uniforms()) cs.push_back({false, 0, u.a, u.b, u.w});
    double acc = 0.0;
    for (const Comp& p : cs) {
        for (const Comp& q : cs) {
            double m;
            if (p.atom && q.atom) {
                m = std::abs(p.x - q.x);
            } else if (p.atom) {
                auto f = [&](double y) { return std::abs(p.x - y); };
                m = oracles::riemann_midpoint(f, q.a, q.b, n) / (q.b - q.a);
            } else if (q.atom) {
                auto f = [&](double x) { return std::abs(q.x - x); };
                m = oracles::riemann_midpoint(f, p.a, p.b, n) / (p.b - p.a);
            } else {
                auto f = [&](double x, double y) { return std::abs(x - y); };
                m = oracles::riemann_midpoint_2d(f, p.a, p.b, q.a, q.b, 700) /
                    ((p.b - p.a) * (q.b - q.a));
            }
            acc += -0.5 * p.w * q.w * m;
        }
    }
    return acc;
}

} // namespace

TEST_CASE("kernel_eval basics") {
    CHECK(kernel_eval(Kernel::distance(), 1.0, 3.0) == -2.0);
    CHECK(kernel_eval(Kernel::smooth(), 0.0, 0.0) == 1.0);
    CHECK(kernel_eval(Kernel::smooth(), 0.0, 1.0) == Catch::Approx(0.5));
    CHECK(kernel_eval(Kernel::smooth(), 0.0, 2.5) == 0.0);
    // symmetry
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 100; ++i) {
        const double x = u(rng), y = u(rng);
        for (Kernel k : {Kernel::distance(), Kernel::smooth()})
            CHECK(kernel_eval(k, x, y) == Catch::Approx(kernel_eval(k, y, x)).margin(0.0));
    }
}

TEST_CASE("smooth kernel is C1 at the support edge") {
    const double h = 1e-7;
    const double d_in = (kernel_eval(Kernel::smooth(), 0.0, 2.0 - h) -
                         kernel_eval(Kernel::smooth(), 0.0, 2.0 - 2.0 * h)) /
                        h;
    CHECK(kernel_eval(Kernel::smooth(), 0.0, 2.0) == 0.0);
    CHECK(std::abs(d_in) <= 1e-6); // slope tends to zero at the edge
    CHECK(kernel_d1(Kernel::smooth(), 2.0, 0.0) == 0.0);
    CHECK_THROWS_AS(kernel_d1(Kernel::distance(), 1.0, 0.0), InvariantError);
}

TEST_CASE("interaction energy examples (distance kernel)") {
    CHECK(interaction_energy(Measure1D::dirac(0.7), Kernel::distance()) == 0.0);

    const Measure1D two({{0.0, 0.5}, {1.0, 0.5}}, {});
    CHECK(interaction_energy(two, Kernel::distance()) == Catch::Approx(-0.25));

    // E_K(uniform[-1,1]) = -1/3, frozen from the dense 2D quadrature oracle
    const Measure1D u = Measure1D::uniform(-1.0, 1.0);
    const double oracle = interaction_oracle_distance(u);
    REQUIRE(oracle == Catch::Approx(-1.0 / 3.0).margin(1e-5));
    CHECK(interaction_energy(u, Kernel::distance()) ==
          Catch::Approx(-1.0 / 3.0).margin(1e-14));
}

TEST_CASE("interaction energy matches the quadrature oracle on mixed measures") {
    std::mt19937_64 rng(77);
    for (int rep = 0; rep < 10; ++rep) {
        const Measure1D mu = oracles::random_mixed_measure(rng);
        CHECK(interaction_energy(mu, Kernel::distance()) ==
              Catch::Approx(interaction_oracle_distance(mu)).margin(2e-5));
    }
}

TEST_CASE("potential energy examples (distance kernel)") {
    CHECK(potential_energy(Measure1D::dirac(-1.0), Measure1D::dirac(0.0),
                           Kernel::distance()) == Catch::Approx(1.0));

    // int |y| over uniform[-1,1] = 1/2 by the quadrature oracle
    auto f = [](double y) { return std::abs(y); };
    const double oracle = 0.5 * oracles::riemann_midpoint(f, -1.0, 1.0, 200000);
    REQUIRE(oracle == Catch::Approx(0.5).margin(1e-9));
    CHECK(potential_energy(Measure1D::dirac(0.0), Measure1D::uniform(-1.0, 1.0),
                           Kernel::distance()) == Catch::Approx(0.5).margin(1e-14));

    const Measure1D two({{0.0, 0.5}, {1.0, 0.5}}, {});
    CHECK(potential_energy(two, Measure1D::dirac(0.0), Kernel::distance()) ==
          Catch::Approx(0.5));
}

TEST_CASE("potential energy is bilinear in the masses") {
    std::mt19937_64 rng(11);
    const Measure1D a = oracles::random_mixed_measure(rng);
    const Measure1D b = oracles::random_mixed_measure(rng);
    const Measure1D nu = oracles::random_mixed_measure(rng);
    // mix of a and b with weights 0.3 / 0.7
    std::vector<Atom> atoms;
    std::vector<UniformPiece> unifs;
    for (Atom at : a.atoms()) atoms.push_back({at.x, 0.3 * at.w});
    for (UniformPiece u : a.uniforms()) unifs.push_back({u.a, u.b, 0.3 * u.w});
    for (Atom at : b.atoms()) atoms.push_back({at.x, 0.7 * at.w});
    for (UniformPiece u : b.uniforms()) unifs.push_back({u.a, u.b, 0.7 * u.w});
    const Measure1D mix(std::move(atoms), std::move(unifs));
    const double lhs = potential_energy(mix, nu, Kernel::distance());
    const double rhs = 0.3 * potential_energy(a, nu, Kernel::distance()) +
                       0.7 * potential_energy(b, nu, Kernel::distance());
    CHECK(lhs == Catch::Approx(rhs).margin(1e-12));
}

TEST_CASE("mmd_sq examples") {
    const Measure1D u = Measure1D::uniform(-1.0, 1.0);
    CHECK(mmd_sq(u, u, Kernel::distance()) == Catch::Approx(0.0).margin(1e-15));
    CHECK(mmd_sq(u, u, Kernel::smooth()) == Catch::Approx(0.0).margin(1e-9));
    CHECK(mmd_sq(Measure1D::dirac(-1.0), Measure1D::dirac(0.0), Kernel::distance()) ==
          Catch::Approx(1.0));
    // -1/3 + 1/2 + 0, each term cross-checked by quadrature oracles above
    CHECK(mmd_sq(u, Measure1D::dirac(0.0), Kernel::distance()) ==
          Catch::Approx(1.0 / 6.0).margin(1e-14));
}

TEST_CASE("mmd_sq with the distance kernel is positive on distinct measures") {
    std::mt19937_64 rng(4242);
    for (int rep = 0; rep < 200; ++rep) {
        const Measure1D a = oracles::random_mixed_measure(rng);
        const Measure1D b = oracles::random_mixed_measure(rng);
        const double d2 = mmd_sq(a, b, Kernel::distance());
        CHECK(d2 >= -1e-12);
        if (w1(a, b) > 1e-9) CHECK(d2 > 0.0);
        CHECK(mmd_sq(a, a, Kernel::distance()) == Catch::Approx(0.0).margin(1e-12));
    }
}

TEST_CASE("smooth-kernel energies agree with dense Riemann sums") {
    std::mt19937_64 rng(31);
    for (int rep = 0; rep < 5; ++rep) {
        const Measure1D mu = oracles::random_mixed_measure(rng);
        struct Comp {
            bool atom;
            double x, a, b, w;
        };
        std::vector<Comp> cs;
        for (const Atom& a : mu.atoms()) cs.push_back({true, a.x, 0, 0, a.w});
        for (const UniformPiece& u : mu.uniforms())
            cs.push_back({false, 0, u.a, u.b, u.w});
        double want = 0.0;
        for (const Comp& p : cs) {
            for (const Comp& q : cs) {
                double m;
                auto ker = [](double x, double y) {
                    return kernel_eval(Kernel::smooth(), x, y);
                };
                if (p.atom && q.atom) {
                    m = ker(p.x, q.x);
                } else if (p.atom) {
                    auto f = [&](double y) { return ker(p.x, y); };
                    m = oracles::riemann_midpoint(f, q.a, q.b, 20000) / (q.b - q.a);
                } else if (q.atom) {
                    auto f = [&](double x) { return ker(q.x, x); };
                    m = oracles::riemann_midpoint(f, p.a, p.b, 20000) / (p.b - p.a);
                } else {
                    auto f = [&](double x, double y) { return ker(x, y); };
                    m = oracles::riemann_midpoint_2d(f, p.a, p.b, q.a, q.b, 500) /
                        ((p.b - p.a) * (q.b - q.a));
                }
                want += 0.5 * p.w * q.w * m;
            }
        }
        CHECK(interaction_energy(mu, Kernel::smooth()) ==
              Catch::Approx(want).margin(1e-5));
    }
}

TEST_CASE("f_nu examples") {
    const Measure1D d0 = Measure1D::dirac(0.0);
    CHECK(f_nu(QuantileFn::constant(0.7), Measure1D::dirac(0.7)) ==
          Catch::Approx(0.0).margin(1e-15));
    CHECK(f_nu(QuantileFn::constant(-1.0), d0) == Catch::Approx(1.0).margin(1e-14));

    // grid path on the affine quantile: 1/6 within the measured grid error
    const QuantileGrid g = sample_quantile_grid(QuantileFn::affine(-1.0, 1.0), 1000);
    CHECK(f_nu(g, d0) == Catch::Approx(1.0 / 6.0).margin(1e-5));
}

TEST_CASE("f_nu exact path equals mmd_sq on random empirical pairs") {
    std::mt19937_64 rng(1001);
    for (int rep = 0; rep < 500; ++rep) {
        std::uniform_int_distribution<int> size(1, 50);
        const Measure1D mu = oracles::random_empirical(rng, size(rng));
        const Measure1D nu = oracles::random_empirical(rng, size(rng));
        const double a = f_nu(quantile(mu), nu);
        const double b = mmd_sq(mu, nu, Kernel::distance());
        CHECK(a == Catch::Approx(b).epsilon(1e-10).margin(1e-13));
    }
}

TEST_CASE("f_nu exact path equals mmd_sq on random mixed pairs") {
    std::mt19937_64 rng(1002);
    for (int rep = 0; rep < 200; ++rep) {
        const Measure1D mu = oracles::random_mixed_measure(rng);
        const Measure1D nu = oracles::random_mixed_measure(rng);
        const double a = f_nu(quantile(mu), nu);
        const double b = mmd_sq(mu, nu, Kernel::distance());
        CHECK(a == Catch::Approx(b).epsilon(1e-10).margin(1e-13));
    }
}

TEST_CASE("f_nu grid path converges to the exact path") {
    std::mt19937_64 rng(1003);
    std::uniform_int_distribution<int> size(1, 50);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        const Measure1D mu = oracles::random_empirical(rng, size(rng));
        const Measure1D nu = oracles::random_empirical(rng, size(rng));
        const QuantileGrid g = sample_quantile_grid(quantile(mu), 10000);
        const double a = f_nu(g, nu);
        const double b = mmd_sq(mu, nu, Kernel::distance());
        worst = std::max(worst, std::abs(a - b));
    }
    // midpoint-rule error is bounded by (total quantile jump mass)/n; supports
    // live in [-1,1] so this is <= 4e-4, typically far smaller
    CHECK(worst <= 4e-4);
}

TEST_CASE("f_nu is midpoint convex on grids, monotone or not") {
    std::mt19937_64 rng(1004);
    for (int rep = 0; rep < 1000; ++rep) {
        const Measure1D nu = oracles::random_mixed_measure(rng);
        const QuantileGrid f = oracles::random_grid(rng, 50);
        const QuantileGrid g = oracles::random_grid(rng, 50);
        QuantileGrid mid;
        mid.values.resize(f.values.size());
        for (std::size_t i = 0; i < f.values.size(); ++i)
            mid.values[i] = 0.5 * (f.values[i] + g.values[i]);
        FnuEvaluator ev(nu);
        CHECK(ev.value_grid(mid) <=
              0.5 * ev.value_grid(f) + 0.5 * ev.value_grid(g) + 1e-12);
    }
}

TEST_CASE("subgradient reproduces the three Dirac-target cases") {
    const Measure1D d0 = Measure1D::dirac(0.0);
    const int n = 4;
    QuantileGrid f;
    f.values.assign(n, -1.0);
    QuantileGrid h = f_nu_subgrad_minnorm(f, d0);
    for (int i = 0; i < n; ++i)
        CHECK(h.values[i] == Catch::Approx(-2.0 * QuantileGrid::midpoint(i, n)));

    f.values.assign(n, 1.0);
    h = f_nu_subgrad_minnorm(f, d0);
    for (int i = 0; i < n; ++i)
        CHECK(h.values[i] == Catch::Approx(2.0 - 2.0 * QuantileGrid::midpoint(i, n)));

    f.values.assign(n, 0.0);
    h = f_nu_subgrad_minnorm(f, d0);
    for (int i = 0; i < n; ++i) CHECK(h.values[i] == 0.0);
}

TEST_CASE("subgradient satisfies the first-order convexity inequality") {
    std::mt19937_64 rng(1005);
    for (int rep = 0; rep < 300; ++rep) {
        const Measure1D nu = oracles::random_mixed_measure(rng);
        const QuantileGrid f = oracles::random_monotone_grid(rng, 40);
        const QuantileGrid g = oracles::random_monotone_grid(rng, 40);
        const QuantileGrid h = f_nu_subgrad_minnorm(f, nu);
        FnuEvaluator ev(nu);
        double inner = 0.0;
        for (std::size_t i = 0; i < f.values.size(); ++i)
            inner += h.values[i] * (g.values[i] - f.values[i]);
        inner /= static_cast<double>(f.values.size());
        CHECK(ev.value_grid(g) >= ev.value_grid(f) + inner - 1e-10);
    }
}

TEST_CASE("subgradient matches finite differences where the target CDF is continuous") {
    std::mt19937_64 rng(1006);
    for (int rep = 0; rep < 50; ++rep) {
        // purely continuous target, so R_nu is continuous everywhere
        std::vector<UniformPiece> pieces = {{-1.0, 0.2, 0.6}, {-0.3, 1.1, 0.4}};
        const Measure1D nu({}, std::move(pieces));
        const QuantileGrid f = oracles::random_monotone_grid(rng, 25);
        const QuantileGrid h = f_nu_subgrad_minnorm(f, nu);
        FnuEvaluator ev(nu);
        const double step = 1e-6;
        for (std::size_t i = 0; i < f.values.size(); ++i) {
            QuantileGrid up = f, down = f;
            up.values[i] += step;
            down.values[i] -= step;
            const double fd = (ev.value_grid(up) - ev.value_grid(down)) / (2.0 * step) *
                              static_cast<double>(f.values.size());
            CHECK(h.values[i] == Catch::Approx(fd).margin(1e-6));
        }
    }
}

TEST_CASE("stationarity: the subgradient vanishes at the target quantile") {
    std::mt19937_64 rng(1007);
    for (int rep = 0; rep < 50; ++rep) {
        // atom-only targets: exactly zero (flat quantile levels are reproduced
        // bit-for-bit, so the clamp interval contains s_i exactly)
        std::uniform_int_distribution<int> size(1, 10);
        const Measure1D atoms = oracles::random_empirical(rng, size(rng));
        for (double v :
             f_nu_subgrad_minnorm(sample_quantile_grid(quantile(atoms), 64), atoms).values)
            CHECK(v == 0.0);
        // mixed targets: zero up to one rounding ulp of R(Q(s)) on the
        // absolutely continuous parts
        const Measure1D nu = oracles::random_mixed_measure(rng);
        for (double v :
             f_nu_subgrad_minnorm(sample_quantile_grid(quantile(nu), 64), nu).values)
            CHECK(std::abs(v) <= 1e-14);
    }
}
