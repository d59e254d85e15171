#include "doctest.h"

#include "bopo/numerics.hpp"

#include <cmath>
#include <numbers>
#include <vector>

using namespace bopo;

namespace {
double rel_err(double got, double want) {
    return std::abs(got - want) / std::abs(want);
}
} // namespace

TEST_CASE("Fornberg weights differentiate polynomials exactly") {
    const std::vector<double> x{-1.3, -0.4, 0.0, 0.35, 0.9, 1.7};
    auto p = [](double t) { return ((2 * t - 1) * t + 3) * t * t - t + 0.25; };
    auto dp = [](double t) { return ((8 * t - 3) * t + 6) * t - 1; };
    auto d2p = [](double t) { return (24 * t - 6) * t + 6; };

    const double z = 0.2;
    std::vector<double> w(x.size());
    for (int m = 0; m <= 2; ++m) {
        fornberg_weights(z, x, m, w);
        double acc = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j)
            acc += w[j] * p(x[j]);
        const double want = (m == 0) ? p(z) : (m == 1) ? dp(z) : d2p(z);
        CHECK(rel_err(acc, want) < 1e-12);
    }

    // classic uniform 3-point second difference
    const double h = 0.01;
    const std::vector<double> xu{-h, 0.0, h};
    std::vector<double> wu(3);
    fornberg_weights(0.0, xu, 2, wu);
    CHECK(rel_err(wu[0], 1.0 / (h * h)) < 1e-12);
    CHECK(rel_err(wu[1], -2.0 / (h * h)) < 1e-12);
    CHECK(rel_err(wu[2], 1.0 / (h * h)) < 1e-12);
}

TEST_CASE("monotone cubic interpolation preserves shape") {
    const std::vector<double> x{0, 1, 2, 3, 4, 5};
    const std::vector<double> y{0.0, 0.1, 0.5, 0.9, 1.0, 1.0};
    const Pchip f(x, y);

    double prev = -1e300;
    for (int i = 0; i <= 500; ++i) {
        const double t = 5.0 * i / 500.0;
        const double v = f(t);
        CHECK(v >= -1e-12);
        CHECK(v <= 1.0 + 1e-12);
        CHECK(v >= prev - 1e-12);
        prev = v;
    }

    // peak data may not overshoot the peak
    const Pchip g({0.0, 1.0, 2.0}, {0.0, 1.0, 0.0});
    for (int i = 0; i <= 200; ++i)
        CHECK(g(2.0 * i / 200.0) <= 1.0 + 1e-12);

    // clamped extension
    CHECK(f(-3.0) == y.front());
    CHECK(f(99.0) == y.back());
    CHECK(f.derivative(-3.0) == 0.0);
}

TEST_CASE("monotone cubic interpolation is exact on lines") {
    const std::vector<double> x{-1.0, 0.3, 0.9, 2.2, 4.0};
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        y[i] = 2.0 * x[i] + 1.0;
    const Pchip f(x, y);
    for (double t : {-0.7, 0.0, 0.5, 1.7, 3.9}) {
        CHECK(rel_err(f(t), 2.0 * t + 1.0) < 1e-13);
        CHECK(rel_err(f.derivative(t), 2.0) < 1e-10);
    }
}

TEST_CASE("interpolant derivative matches finite differences of itself") {
    const std::vector<double> x{0.0, 0.4, 1.1, 1.9, 3.0, 4.5};
    const std::vector<double> y{0.0, 0.6, 0.9, 1.4, 2.5, 2.6};
    const Pchip f(x, y);
    const double h = 1e-6;
    for (double t : {0.2, 0.7, 1.5, 2.4, 3.9}) {
        const double fd = (f(t + h) - f(t - h)) / (2 * h);
        CHECK(std::abs(fd - f.derivative(t)) < 1e-6);
    }
}

TEST_CASE("adaptive quadrature on finite and half-infinite ranges") {
    CHECK(rel_err(quad_adaptive([](double t) { return t * t * t; }, 0, 1),
                  0.25) < 1e-13);
    CHECK(rel_err(quad_adaptive([](double t) { return std::sin(t); }, 0,
                                std::numbers::pi),
                  2.0) < 1e-13);
    CHECK(rel_err(quad_to_inf([](double t) { return std::exp(-t); }, 0.0),
                  1.0) < 1e-12);
    CHECK(rel_err(
              quad_to_inf([](double t) { return t * t * std::exp(-t * t); },
                          0.0),
              std::sqrt(std::numbers::pi) / 4.0) < 1e-12);
}

TEST_CASE("cumulative integration is fourth order on graded grids") {
    auto build = [](int n) {
        std::vector<double> x(n);
        for (int i = 0; i < n; ++i) {
            const double s = static_cast<double>(i) / (n - 1);
            x[i] = 5.0 * s * s; // quadratically graded toward 0
        }
        return x;
    };
    auto max_err = [&](int n) {
        const auto x = build(n);
        std::vector<double> y(n), out(n);
        for (int i = 0; i < n; ++i)
            y[i] = std::cos(x[i]);
        cumulative_integral(x, y, out);
        double e = 0.0;
        for (int i = 0; i < n; ++i)
            e = std::max(e, std::abs(out[i] - std::sin(x[i])));
        return e;
    };
    const double e1 = max_err(80);
    const double e2 = max_err(160);
    CHECK(e1 < 1e-5);
    CHECK(e2 < e1 / 10.0);
}

TEST_CASE("exponential panel moments match frozen quadrature values") {
    std::array<double, 4> m{};

    exp_panel_moments(0.1, 3.0, m); // series branch
    CHECK(rel_err(m[0], -std::expm1(-0.3) / 3.0) < 1e-14);
    CHECK(rel_err(m[0], 0.086393926439427377978) < 1e-14);

    exp_panel_moments(2.0, 0.07, m); // series branch, long panel
    CHECK(rel_err(m[3], 3.5771192329899266621) < 1e-14);

    exp_panel_moments(0.5, 40.0, m); // recursion branch
    CHECK(rel_err(m[1], 0.00062499997294735870549) < 1e-13);

    // branch seam: both branches vs adaptive quadrature near rate*len = 1
    for (double len : {0.999, 1.001}) {
        exp_panel_moments(len, 1.0, m);
        for (int k = 0; k < 4; ++k) {
            const double want = quad_adaptive(
                [&](double s) { return std::pow(s, k) * std::exp(-s); }, 0.0,
                len, 1e-14);
            CHECK(rel_err(m[k], want) < 1e-13);
        }
    }
}

TEST_CASE("exponentially weighted sweeps are exact for cubic integrands") {
    std::vector<double> x;
    for (int i = 0; i < 12; ++i)
        x.push_back(0.15 * std::pow(static_cast<double>(i), 1.3) + 0.1 * i);
    auto g = [](double s) { return ((s - 1.2) * s + 0.7) * s + 2.0; };
    std::vector<double> gv(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        gv[i] = g(x[i]);

    const double rate = 2.4;
    std::vector<double> pre(x.size()), suf(x.size());
    exp_weighted_prefix(x, gv, rate, pre);
    exp_weighted_suffix(x, gv, rate, suf);

    for (std::size_t i : {std::size_t{1}, std::size_t{6}, x.size() - 1}) {
        const double want = quad_adaptive(
            [&](double s) { return g(s) * std::exp(-rate * (x[i] - s)); },
            x[0], x[i], 1e-13);
        CHECK(rel_err(pre[i], want) < 1e-12);
    }
    for (std::size_t i : {std::size_t{0}, std::size_t{5}, x.size() - 2}) {
        const double want = quad_adaptive(
            [&](double s) { return g(s) * std::exp(-rate * (s - x[i])); },
            x[i], x.back(), 1e-13);
        CHECK(rel_err(suf[i], want) < 1e-12);
    }
    CHECK(pre[0] == 0.0);
    CHECK(suf.back() == 0.0);
}

TEST_CASE("exponentially weighted sweeps converge at fourth order") {
    auto run = [](int n) {
        const auto x = logspace(0.05, 6.0, n);
        std::vector<double> gv(x.size());
        for (std::size_t i = 0; i < x.size(); ++i)
            gv[i] = std::exp(-x[i]) * std::sin(2.0 * x[i]) + 1.5;
        std::vector<double> pre(x.size());
        exp_weighted_prefix(x, gv, 1.7, pre);
        const double want = quad_adaptive(
            [&](double s) {
                return (std::exp(-s) * std::sin(2.0 * s) + 1.5) *
                       std::exp(-1.7 * (x.back() - s));
            },
            x.front(), x.back(), 1e-13);
        return std::abs(pre.back() - want);
    };
    const double e1 = run(100);
    const double e2 = run(200);
    CHECK(e1 < 1e-5);
    CHECK(e2 < e1 / 10.0);
}

TEST_CASE("sweeps stay finite and positive under strong decay rates") {
    const auto x = logspace(1e-4, 50.0, 300);
    std::vector<double> gv(x.size(), 1.0);
    std::vector<double> pre(x.size()), suf(x.size());
    exp_weighted_prefix(x, gv, 40.0, pre);
    exp_weighted_suffix(x, gv, 40.0, suf);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(std::isfinite(pre[i]));
        CHECK(std::isfinite(suf[i]));
        CHECK(pre[i] >= 0.0);
        CHECK(suf[i] >= 0.0);
        CHECK(pre[i] <= 1.0 / 40.0 + 1e-12); // saturates at 1/rate
        CHECK(suf[i] <= 1.0 / 40.0 + 1e-12);
    }
}

TEST_CASE("log-spaced grids hit both endpoints with uniform ratio") {
    const auto x = logspace(0.01, 100.0, 41);
    CHECK(x.front() == 0.01);
    CHECK(x.back() == 100.0);
    const double ratio = x[1] / x[0];
    for (std::size_t i = 1; i + 1 < x.size(); ++i)
        CHECK(rel_err(x[i + 1] / x[i], ratio) < 1e-12);
}

TEST_CASE("byte hashing is stable and sensitive") {
    CHECK(fnv1a(nullptr, 0) == 14695981039346656037ULL);
    const char a = 'a';
    CHECK(fnv1a(&a, 1) == 0xaf63dc4c8601ec8cULL);

    const std::vector<double> v1{1.0, 2.0, 3.0};
    std::vector<double> v2 = v1;
    CHECK(fnv1a(std::span<const double>(v1)) ==
          fnv1a(std::span<const double>(v2)));
    v2[1] = std::nextafter(v2[1], 3.0);
    CHECK(fnv1a(std::span<const double>(v1)) !=
          fnv1a(std::span<const double>(v2)));
}
