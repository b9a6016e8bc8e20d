#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mikado/dynamics.hpp"
#include "mikado/norms.hpp"
#include "test_util.hpp"

using namespace mikado;
using namespace testutil;

static const double pi = 3.14159265358979323846;

static SpectralField solenoidal(const TorusGrid& g, int band, unsigned seed, double size) {
    auto u = leray_project(random_field(g, Rank::vector, band, seed));
    u *= size / l2(u);
    return u;
}

static SpectralField shear(int d, int G, int m, double A) {
    SpectralField u(TorusGrid(d, G), Rank::vector);
    Mode mm{0, 0, 0};
    mm[d - 1] = m;
    put_mode(u, 0, mm, cplx(0, -A / 2));
    return u;
}

TEST_CASE("heat semigroup") {
    TorusGrid g(2, 32);
    auto u = solenoidal(g, 8, 1, 1.0);
    CHECK(max_abs_diff(heat_semigroup(u, 0, 1), u) == 0.0);

    SpectralField one(g, Rank::vector);
    put_mode(one, 1, {1, 0, 0}, 0.5);
    auto e = heat_semigroup(one, 0.01, 1);
    CHECK(std::abs(get_mode(e, 1, {1, 0, 0}).real() - 0.5 * std::exp(-4 * pi * pi * 0.01)) < 1e-16);
    auto f = heat_semigroup(one, 0.01, 0.5);
    CHECK(std::abs(get_mode(f, 1, {1, 0, 0}).real() - 0.5 * std::exp(-2 * pi * 0.01)) < 1e-16);

    for (double alpha : {0.5, 1.0, 1.5}) {
        auto a = heat_semigroup(heat_semigroup(u, 0.1, alpha), 0.2, alpha);
        auto b = heat_semigroup(u, 0.3, alpha);
        CHECK(max_abs_diff(a, b) <= 1e-13 * std::max(1e-300, l2(b)) + 1e-300);
        CHECK(l2(a - b) <= 1e-13 * l2(u));
    }
    CHECK_THROWS_AS(heat_semigroup(u, -1, 1), Error);
}

TEST_CASE("zero stays zero and the linear flow is the semigroup") {
    TorusGrid g(2, 32);
    EvolutionConfig c;
    c.h = 1e-3;
    c.T = 1e-2;
    auto tr = evolve(SpectralField(g, Rank::vector), c);
    CHECK(l2(tr.u.back()) == 0.0);
    CHECK(tr.energy_defect == 0.0);

    auto u = solenoidal(g, 10, 2, 1.0);
    c.nonlinear = false;
    auto lin = evolve(u, c);
    CHECK(l2(lin.u.back() - heat_semigroup(u, c.T, c.alpha)) <= 1e-12 * l2(u));
    CHECK(lin.steps == 10);
}

TEST_CASE("preconditions") {
    TorusGrid g(2, 16);
    auto bad = random_field(g, Rank::vector, 4, 3);
    CHECK_THROWS_AS(evolve(bad, EvolutionConfig{}), Error);
    auto u = solenoidal(g, 4, 3, 1.0);
    u[0][0] = 0.3;
    CHECK_THROWS_AS(evolve(u, EvolutionConfig{}), Error);
    EvolutionConfig c;
    c.K = 20;
    CHECK_THROWS_AS(evolve(solenoidal(g, 4, 3, 1.0), c), Error);
}

TEST_CASE("integrating-factor RK2 converges at second order") {
    TorusGrid g(2, 32);
    auto u = solenoidal(g, 6, 4, 2.0);
    auto run = [&](double h) {
        EvolutionConfig c;
        c.h = h;
        c.T = 0.02;
        c.keep_states = false;
        SpectralField last;
        evolve(u, c, [&](int, double, const SpectralField& v) { last = v; });
        return last;
    };
    // h = 2e-3 is still pre-asymptotic for band 6
    auto a = run(5e-4), b = run(2.5e-4), cc = run(1.25e-4), dd = run(6.25e-5);
    double e1 = l2(a - b), e2 = l2(b - cc), e3 = l2(cc - dd);
    MESSAGE("successive differences " << e1 << " " << e2 << " " << e3);
    CHECK(std::log2(e1 / e2) >= 1.9);
    CHECK(std::log2(e2 / e3) >= 1.9);

    // Euler is first order
    auto euler = [&](double h) {
        EvolutionConfig c;
        c.h = h;
        c.T = 0.02;
        c.integrator = Integrator::if_euler;
        return evolve(u, c).u.back();
    };
    auto p = euler(1e-3), q = euler(5e-4), r = euler(2.5e-4);
    double o = std::log2(l2(p - q) / l2(q - r));
    CHECK(o > 0.9);
    CHECK(o < 1.2);
}

TEST_CASE("divergence and energy balance along a trajectory") {
    for (int d : {2, 3}) {
        TorusGrid g(d, d == 2 ? 32 : 16);
        auto u = solenoidal(g, d == 2 ? 8 : 3, 5, 1.5);
        EvolutionConfig c;
        c.h = 1.25e-4;
        c.T = 5e-3;
        c.alpha = 0.75;
        auto tr = evolve(u, c);
        CHECK(tr.max_divergence <= 1e-10);
        CHECK(tr.energy_defect <= 5e-4);
        for (std::size_t i = 1; i < tr.l2.size(); ++i) CHECK(tr.l2[i] <= tr.l2[i - 1] * (1 + 1e-12));
        // the defect is the time-discretization error: second order in h
        c.h /= 2;
        double half = evolve(u, c).energy_defect;
        CHECK(tr.energy_defect / half >= 3.5);
    }
}

TEST_CASE("nonlinear term is energy neutral and divergence free") {
    TorusGrid g(2, 32);
    auto u = solenoidal(g, 10, 6, 1.0);
    auto N = nonlinear_term(u, default_cutoff(g), 2);
    CHECK(std::abs(spectral_inner(N, u)) <= 1e-13 * l2(N) * l2(u));
    CHECK(l2(divergence(N)) <= 1e-13 * l2(gradient(N)));
    CHECK(l2(nonlinear_term(shear(2, 32, 3, 1.0), 15, 2)) <= 1e-15);
}

TEST_CASE("shear flow: heat decay and the closed-form gap") {
    for (double alpha : {0.5, 1.0}) {
        const int m = 2;
        const double A = 0.7;
        auto u = shear(2, 16, m, A);
        EvolutionConfig c;
        c.alpha = alpha;
        c.h = 1e-3;
        c.T = 5e-3;
        const double s = 2;
        auto gc = nonuniqueness_gap(u, c, s);
        const double lam = std::pow(2 * pi * m, 2 * alpha);
        const double base = sobolev_norm(u, -s, false);
        CHECK(std::abs(base - A / std::sqrt(2.0) * std::pow(1.0 + m * m, -s / 2)) < 1e-15);
        for (std::size_t i = 0; i < gc.t.size(); ++i) {
            double want = (1 - std::exp(-gc.t[i] * lam)) * base;
            CHECK(std::abs(gc.gap[i] - want) <= 1e-13 * base);
        }
        CHECK(std::abs(gc.forcing - lam * base) <= 1e-12 * lam * base);
    }
}

TEST_CASE("drift rate approaches the forcing for a short step") {
    TorusGrid g(2, 32);
    auto u = solenoidal(g, 6, 7, 1.0);
    EvolutionConfig c;
    c.h = 1e-7;
    c.T = 1e-7;
    c.integrator = Integrator::if_euler;
    auto gc = nonuniqueness_gap(u, c, 3);
    CHECK(std::abs(gc.drift_rate - gc.forcing) <= 1e-4 * gc.forcing);
}

TEST_CASE("blow-up guard") {
    TorusGrid g(2, 16);
    auto u = solenoidal(g, 4, 8, 1.0);
    EvolutionConfig c;
    c.h = 1e-3;
    c.T = 1e-2;
    c.blowup_factor = 0.5;
    try {
        evolve(u, c);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::resource);
    }
    auto big = solenoidal(g, 6, 9, 1e4);
    EvolutionConfig w;
    w.h = 0.05;
    w.T = 5;
    w.alpha = 0.25;
    w.integrator = Integrator::if_euler;
    CHECK_THROWS_AS(evolve(big, w), Error);
}

TEST_CASE("flux forms: shear, cancellation, identity") {
    auto sh = shear(2, 32, 3, 1.0);
    for (long N : {2L, 4L, 8L}) {
        auto r = flux_forms(sh, N, 1.0);
        CHECK(std::abs(r.transport) <= 1e-15);
        CHECK(std::abs(r.cancellation) <= 1e-15);
    }
    for (int d : {2, 3})
        for (unsigned seed = 1; seed <= 3; ++seed) {
            TorusGrid g(d, d == 2 ? 32 : 16);
            auto u = solenoidal(g, d == 2 ? 7 : 3, 20 + seed, 1.0);
            for (const auto& r : flux_table(u, 1.0)) {
                CHECK(std::abs(r.cancellation) <= 1e-10 * std::max(r.scale, 1e-300) + 1e-300);
                CHECK(r.identity_gap() <= 1e-8 * r.scale + 1e-300);
                CHECK(std::abs(r.transport) <= r.scale * (1 + 1e-12));
                CHECK(r.dissipation >= 0);
            }
        }
}

TEST_CASE("commutator: kernel convolution equals the spectral form") {
    TorusGrid g(2, 16);
    auto u = solenoidal(g, 3, 31, 1.0);
    for (long N : {2L, 4L}) {
        auto a = commutator_stress(u, N);
        auto b = commutator_kernel_form(u, N);
        CHECK(max_abs_diff(a, b) <= 1e-12 * l2(a));
    }
    TorusGrid g3(3, 8);
    auto v = solenoidal(g3, 2, 32, 1.0);
    auto a = commutator_stress(v, 2);
    CHECK(max_abs_diff(a, commutator_kernel_form(v, 2)) <= 1e-12 * l2(a));
}

TEST_CASE("b_N sequences") {
    TorusGrid g(2, 32);
    SpectralField zero(g, Rank::vector);
    auto z = bN_sequences(zero, 1.0, 0);
    for (double v : z.b) CHECK(v == 0.0);
    CHECK_FALSE(z.B_decreasing);

    // band 8 only: b_N = (8/N)^{2 alpha} 8^{1 - 2 alpha} ||P_8 u||_inf for N >= 8
    SpectralField u(g, Rank::vector);
    put_mode(u, 0, {0, 7, 0}, cplx(0, -0.5));
    const double blk = lp_norm(project_band(8, u), kInf);
    const double alpha = 0.75;
    auto s = bN_sequences(u, alpha, 0);
    CHECK(s.which_case == 1);
    REQUIRE(s.N == std::vector<long>{2, 4, 8});
    CHECK(s.b[0] == 0.0);
    CHECK(s.b[1] == 0.0);
    CHECK(std::abs(s.b[2] - std::pow(8.0, 1 - 2 * alpha) * blk) <= 1e-15);

    auto v = solenoidal(g, 12, 40, 1.0);
    auto c1 = bN_sequences(v, 1.0, 0);
    CHECK(c1.B_decreasing);
    auto c2 = bN_sequences(v, 1.5, 0);
    CHECK(c2.which_case == 2);
    CHECK(c2.q == 2.0);
    CHECK(c2.B_decreasing);
    // B_{N0} = sum_{N >= N0} b_N + b_top / 3
    double tail = c2.b.back() / 3;
    for (std::size_t i = 0; i < c2.N.size(); ++i) {
        double acc = tail;
        for (std::size_t j = i; j < c2.N.size(); ++j) acc += c2.b[j];
        CHECK(std::abs(c2.B[i] - acc) <= 1e-14 * acc);
    }
    CHECK_THROWS_AS(bN_sequences(v, 1.5, 0.5), Error);
}
