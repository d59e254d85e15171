#include "doctest.h"

#include "bopo/kernel.hpp"
#include "bopo/numerics.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

using namespace bopo;

namespace {
double rel_err(double got, double want) {
    return std::abs(got - want) / std::abs(want);
}
} // namespace

TEST_CASE("screened kernel reproduces frozen high-precision values") {
    const KernelParams a1{1.0, 1.0};
    const KernelParams a05{0.5, 1.0};
    const KernelParams a2{2.0, 1.0};

    CHECK(rel_err(eval_K(1.0, a1), 0.6321205588285576784) < 1e-14);
    CHECK(eval_K(0.0, a1) == 1.0);
    CHECK(eval_K(0.0, a2) == 0.5);
    CHECK(rel_err(eval_Y(5.0, a05), 9.0799859524969703071e-6) < 1e-14);
    CHECK(rel_err(eval_C(2.0), 0.5) < 1e-15);

    CHECK(rel_err(eval_gradK_radial(1.0, a1), -0.26424111765711535681) < 1e-14);
    CHECK(rel_err(eval_gradK_radial(2.0, a05), -0.22710545138908227463) < 1e-14);
    CHECK(rel_err(eval_lapK(1.0, a1), -0.3678794411714423216) < 1e-14);
    CHECK(rel_err(eval_lapK(3.0, a2), -0.018594180012369152411) < 1e-14);
    CHECK(rel_err(eval_grad_lapK_radial(1.0, a1), 0.73575888234288464319) < 1e-14);
    CHECK(rel_err(eval_grad_lapK_radial(2.0, a05), 0.091578194443670901469) < 1e-14);
}

TEST_CASE("K splits as Coulomb minus Yukawa over sixteen decades") {
    // Checked in the additive arrangement C = K + Y: subtracting C - Y in
    // doubles at r << a loses eight digits to cancellation while the sum of
    // the two nonnegative terms is perfectly conditioned everywhere.
    for (double a : {1.0, 0.5, 2.0}) {
        const KernelParams p{a, 1.0};
        for (double r : logspace(1e-8 * a, 1e8 * a, 333)) {
            const double sum = eval_K(r, p) + eval_Y(r, p);
            CHECK(rel_err(eval_C(r), sum) < 1e-14);
        }
    }
}

TEST_CASE("K is positive, bounded by 1/a, and strictly decreasing") {
    for (double a : {1.0, 0.5, 2.0}) {
        const KernelParams p{a, 1.0};
        const auto radii = logspace(1e-8 * a, 1e8 * a, 400);
        double prev = eval_K(0.0, p);
        CHECK(prev == 1.0 / a);
        for (double r : radii) {
            const double k = eval_K(r, p);
            CHECK(k > 0.0);
            CHECK(k <= 1.0 / a);
            CHECK(k < prev);
            prev = k;
        }
    }
}

TEST_CASE("shrinking the screening length recovers the Coulomb potential") {
    for (double r : {0.05, 0.37, 1.0, 6.0}) {
        double prev = 0.0;
        for (double a : {1.0, 0.5, 0.1, 0.01}) {
            const double k = eval_K(r, KernelParams{a, 1.0});
            CHECK(k >= prev); // ties once e^{-r/a} underflows
            prev = k;
        }
        CHECK(prev <= eval_C(r));
        CHECK(eval_C(r) - prev < eval_C(r) * 0.05 + 2.0); // a=0.01 is close
    }
}

TEST_CASE("radial derivative: sign, bounds, small-radius series") {
    const KernelParams p{1.0, 1.0};
    for (double r : logspace(1e-10, 1e4, 200)) {
        const double d = eval_gradK_radial(r, p);
        CHECK(d <= 0.0);
        CHECK(d >= -1.0 / (r * r));
    }
    // series: dK = -1/(2a^2) + r/(3a^3) - ... near the origin
    CHECK(rel_err(eval_gradK_radial(1e-8, p), -0.5) < 1e-7);
    CHECK(eval_gradK_radial(1e-8, p) > -0.5);
    // both evaluation branches agree where they meet
    const double lo = eval_gradK_radial(0.4999999, p);
    const double hi = eval_gradK_radial(0.5000001, p);
    CHECK(rel_err(lo, hi) < 1e-6);
}

TEST_CASE("finite differences of K reproduce the closed-form derivatives") {
    const KernelParams p{1.3, 1.0};
    auto K = [&](double r) { return eval_K(r, p); };

    for (double r0 : {0.2, 0.9, 3.7}) {
        const double h1 = 1e-4, h2 = 5e-5;
        auto fd1 = [&](double h) { return (K(r0 + h) - K(r0 - h)) / (2 * h); };
        auto fd2 = [&](double h) {
            return (K(r0 + h) - 2 * K(r0) + K(r0 - h)) / (h * h);
        };
        const double d = eval_gradK_radial(r0, p);
        const double lap = fd2(h1) + 2 * fd1(h1) / r0;
        CHECK(std::abs(fd1(h1) - d) < 1e-7);
        CHECK(std::abs(lap - eval_lapK(r0, p)) < 1e-5);
        // O(h^2): quartering the error when h halves
        const double e1 = std::abs(fd1(h1) - d);
        const double e2 = std::abs(fd1(h2) - d);
        CHECK(e2 < 0.4 * e1);
    }
}

TEST_CASE("Coulomb-Yukawa self-convolution reproduces K") {
    const std::vector<double> radii{0.1, 0.5, 1.0, 2.0, 3.0, 5.0, 10.0};
    const auto c1 = verify_CY_convolution(KernelParams{1.0, 1.0}, radii);
    CHECK(c1.max_rel_error < 1e-8);

    const std::vector<double> radii2{0.1, 3.0};
    const auto c2 = verify_CY_convolution(KernelParams{2.0, 1.0}, radii2);
    CHECK(c2.max_rel_error < 1e-8);
}

TEST_CASE("sampled kernel rows are internally consistent") {
    const KernelParams p{0.7, 2.0};
    const auto s = sample_kernel(2.4, p);
    CHECK(s.r == 2.4);
    CHECK(s.K == eval_K(2.4, p));
    CHECK(s.C == eval_C(2.4));
    CHECK(s.Y == eval_Y(2.4, p));
    CHECK(s.dK == eval_gradK_radial(2.4, p));
    CHECK(s.lapK == eval_lapK(2.4, p));
    CHECK(rel_err(s.K, s.C - s.Y) < 1e-14);
}

TEST_CASE("poles and bad parameters are rejected") {
    const KernelParams p{1.0, 1.0};
    CHECK_THROWS_AS(eval_C(0.0), std::domain_error);
    CHECK_THROWS_AS(eval_Y(0.0, p), std::domain_error);
    CHECK_THROWS_AS(eval_gradK_radial(0.0, p), std::domain_error);
    CHECK_THROWS_AS(eval_lapK(0.0, p), std::domain_error);
    CHECK_THROWS_AS(eval_grad_lapK_radial(0.0, p), std::domain_error);
    CHECK_THROWS_AS(eval_K(-1.0, p), std::domain_error);

    CHECK_THROWS_AS((KernelParams{-1.0, 1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((KernelParams{0.0, 1.0}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((KernelParams{1.0, 0.0}.validate()), std::invalid_argument);
    CHECK_NOTHROW((KernelParams{1.0, -2.0}.validate()));
}
