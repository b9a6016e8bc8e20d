#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mikado/frequency.hpp"

using namespace mikado;

using i128 = __int128;

// minimal b >= 45 lambda^e whose interval (11/9 bc, 9/5 bc) holds a power of two; c = 2 in the plane
static std::pair<long long, long long> brute_force_plan(long lambda, int e) {
    long long le = 1;
    for (int i = 0; i < e; ++i) le *= lambda;
    for (long long b = 45 * le;; ++b) {
        for (long long s = 1; s < (1LL << 60); s *= 2) {
            i128 bc = i128(b) * 2;
            if (11 * bc < 9 * i128(s) && 5 * i128(s) < 9 * bc) return {b, s};
        }
    }
}

TEST_CASE("planar plan at lambda 2, e 4") {
    auto cat = build_catalog(2);
    auto plan = select_sigma(2, 4, cat);
    CHECK(plan.b == 720);
    CHECK(plan.sigma == 2048);
    CHECK(plan.c_lambda_sq == 4);
    REQUIRE(plan.sigma_k.size() == 4);
    CHECK(plan.sigma_k[0] == 1440);
    CHECK(plan.sigma_k[1] == 1440);
    CHECK(plan.sigma_k[2] == 1019);
    CHECK(plan.sigma_k[3] == 1019);
    CHECK(plan.sigma > 800);
    CHECK(plan.valid());
}

TEST_CASE("plans agree with the brute-force search") {
    auto cat = build_catalog(2);
    for (long lambda : {2L, 4L, 16L})
        for (int e : {4, 1}) {
            auto plan = select_sigma(lambda, e, cat);
            auto [b, s] = brute_force_plan(lambda, e);
            CHECK(plan.b == b);
            CHECK(plan.sigma == s);
            CHECK(plan.valid());
        }
}

TEST_CASE("annulus containment checked independently in long double") {
    for (int d : {2, 3}) {
        auto cat = build_catalog(d);
        for (long lambda : {2L, 4L, 16L})
            for (int e : {1, 4}) {
                auto plan = select_sigma(lambda, e, cat);
                long double sg = plan.sigma.convert_to<long double>();
                for (int i = 0; i < cat.size(); ++i) {
                    long double kp = 0;
                    for (int a = 0; a < d; ++a) kp += (long double)cat.kperp[i][a] * cat.kperp[i][a];
                    long double r = plan.sigma_k[i].convert_to<long double>() * std::sqrt(kp);
                    CHECK(r - 2 * lambda > sg / 2);
                    CHECK(r + 2 * lambda < 0.9L * sg);
                }
                CHECK(plan.containment);
                BigInt le = 1;
                for (int k = 0; k < e; ++k) le *= lambda;
                CHECK(plan.sigma > 50 * le);
            }
    }
}

TEST_CASE("sigma is monotone in lambda") {
    auto cat = build_catalog(2);
    for (int e : {1, 2, 4}) {
        BigInt prev = 0;
        for (long lambda = 2; lambda <= 64; lambda *= 2) {
            auto plan = select_sigma(lambda, e, cat);
            CHECK(plan.sigma >= prev);
            prev = plan.sigma;
        }
    }
    CHECK_THROWS_AS(select_sigma(3, 4, cat), Error);
}

TEST_CASE("theta to e and powers of four") {
    CHECK(e_from_theta(0.3) == 8);
    CHECK(e_from_theta(0.5) == 4);
    CHECK(e_from_theta(0.25) == 8);
    CHECK(e_from_theta(0.9) == 4);
    CHECK(e_from_theta(0.2) == 10);
    CHECK_THROWS_AS(e_from_theta(1.0), Error);
    CHECK(is_power_of_four(4096));
    CHECK_FALSE(is_power_of_four(2048));
    CHECK_FALSE(is_power_of_four(12));
}

TEST_CASE("strict audit at d 2, p 3/2, lambda 4^6") {
    auto a = audit_parameters(4096, 1.5, 0.5, 2, 1.0);
    CHECK(std::abs(a.eps - 1.0 / 24) < 1e-15);
    CHECK(std::abs(a.beta - 0.25) < 1e-15);
    CHECK(std::abs(a.mu - 8.0) < 1e-12);
    CHECK(std::abs(a.gamma - 64.0) < 1e-12);
    CHECK(a.e == 4);
    CHECK(a.rows.size() >= 5);
    for (const auto& r : a.rows) CHECK_MESSAGE(r.pass, r.id);
    CHECK(a.all_pass());
    CHECK_THROWS_AS(audit_parameters(2048, 1.5, 0.5, 2, 1.0), Error);
}

TEST_CASE("the L^p gain of mu equals lambda^-eps exactly") {
    for (int d : {2, 3})
        for (double p : {1.2, 1.5, 1.9})
            for (long lambda : {16L, 256L, 4096L}) {
                auto a = audit_parameters(lambda, p, 0.5, d, 1.0);
                double lhs = std::pow(a.mu, (d - 1) * (0.5 - 1.0 / p));
                double rhs = std::pow(double(lambda), -a.eps);
                CHECK(std::abs(lhs - rhs) <= 1e-13 * rhs);
            }
}
