#include "bopo/numerics.hpp"

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <memory>
#include <stdexcept>

namespace bopo {

void fornberg_weights(double z, std::span<const double> x, int m,
                      std::span<double> w) {
    const int n = static_cast<int>(x.size());
    if (n < m + 1)
        throw std::invalid_argument("fornberg_weights: too few nodes");
    std::vector<double> c(static_cast<std::size_t>(n) * (m + 1), 0.0);
    auto C = [&](int i, int k) -> double& { return c[i * (m + 1) + k]; };

    double c1 = 1.0;
    double c4 = x[0] - z;
    C(0, 0) = 1.0;
    for (int i = 1; i < n; ++i) {
        const int mn = std::min(i, m);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = x[i] - z;
        for (int j = 0; j < i; ++j) {
            const double c3 = x[i] - x[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    C(i, k) = c1 * (k * C(i - 1, k - 1) - c5 * C(i - 1, k)) / c2;
                C(i, 0) = -c1 * c5 * C(i - 1, 0) / c2;
            }
            for (int k = mn; k >= 1; --k)
                C(j, k) = (c4 * C(j, k) - k * C(j, k - 1)) / c3;
            C(j, 0) = c4 * C(j, 0) / c3;
        }
        c1 = c2;
    }
    for (int j = 0; j < n; ++j)
        w[j] = C(j, m);
}

Pchip::Pchip(std::vector<double> x, std::vector<double> y)
    : x_(std::move(x)), y_(std::move(y)) {
    const std::size_t n = x_.size();
    if (n < 2 || y_.size() != n)
        throw std::invalid_argument("Pchip: need at least two matching nodes");
    d_.resize(n);
    std::vector<double> h(n - 1), delta(n - 1);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        h[i] = x_[i + 1] - x_[i];
        if (!(h[i] > 0.0))
            throw std::invalid_argument("Pchip: nodes must increase");
        delta[i] = (y_[i + 1] - y_[i]) / h[i];
    }
    if (n == 2) {
        d_[0] = d_[1] = delta[0];
        return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (delta[i - 1] * delta[i] <= 0.0) {
            d_[i] = 0.0;
        } else {
            const double w1 = 2.0 * h[i] + h[i - 1];
            const double w2 = h[i] + 2.0 * h[i - 1];
            d_[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    auto edge = [](double h0, double h1, double d0, double d1) {
        double d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
        if (d * d0 <= 0.0)
            d = 0.0;
        else if (d0 * d1 < 0.0 && std::abs(d) > 3.0 * std::abs(d0))
            d = 3.0 * d0;
        return d;
    };
    d_[0] = edge(h[0], h[1], delta[0], delta[1]);
    d_[n - 1] = edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
}

int Pchip::interval(double xq) const {
    auto it = std::upper_bound(x_.begin(), x_.end(), xq);
    int i = static_cast<int>(it - x_.begin()) - 1;
    return std::clamp(i, 0, static_cast<int>(x_.size()) - 2);
}

double Pchip::operator()(double xq) const {
    if (xq <= x_.front())
        return y_.front();
    if (xq >= x_.back())
        return y_.back();
    const int i = interval(xq);
    const double h = x_[i + 1] - x_[i];
    const double t = (xq - x_[i]) / h;
    const double t2 = t * t, t3 = t2 * t;
    const double h00 = 2 * t3 - 3 * t2 + 1;
    const double h10 = t3 - 2 * t2 + t;
    const double h01 = -2 * t3 + 3 * t2;
    const double h11 = t3 - t2;
    return h00 * y_[i] + h * h10 * d_[i] + h01 * y_[i + 1] + h * h11 * d_[i + 1];
}

double Pchip::derivative(double xq) const {
    if (xq <= x_.front() || xq >= x_.back())
        return 0.0;
    const int i = interval(xq);
    const double h = x_[i + 1] - x_[i];
    const double t = (xq - x_[i]) / h;
    const double t2 = t * t;
    const double g00 = (6 * t2 - 6 * t) / h;
    const double g10 = 3 * t2 - 4 * t + 1;
    const double g01 = (-6 * t2 + 6 * t) / h;
    const double g11 = 3 * t2 - 2 * t;
    return g00 * y_[i] + g10 * d_[i] + g01 * y_[i + 1] + g11 * d_[i + 1];
}

namespace {

struct GslInit {
    GslInit() { gsl_set_error_handler_off(); }
};
const GslInit gsl_init_once;

double gsl_trampoline(double x, void* params) {
    return (*static_cast<const std::function<double(double)>*>(params))(x);
}

struct Workspace {
    gsl_integration_workspace* w;
    explicit Workspace(std::size_t n) : w(gsl_integration_workspace_alloc(n)) {}
    ~Workspace() { gsl_integration_workspace_free(w); }
};

} // namespace

double quad_adaptive(const std::function<double(double)>& f, double lo,
                     double hi, double rel_tol) {
    Workspace ws(4000);
    gsl_function gf{&gsl_trampoline,
                    const_cast<std::function<double(double)>*>(&f)};
    double result = 0.0, abserr = 0.0;
    const int status =
        gsl_integration_qag(&gf, lo, hi, 1e-300, rel_tol, 4000,
                            GSL_INTEG_GAUSS15, ws.w, &result, &abserr);
    if (status != 0 && status != GSL_EROUND)
        throw std::runtime_error("quad_adaptive: integration failed");
    return result;
}

double quad_to_inf(const std::function<double(double)>& f, double lo,
                   double rel_tol) {
    Workspace ws(4000);
    gsl_function gf{&gsl_trampoline,
                    const_cast<std::function<double(double)>*>(&f)};
    double result = 0.0, abserr = 0.0;
    const int status = gsl_integration_qagiu(&gf, lo, 1e-300, rel_tol, 4000,
                                             ws.w, &result, &abserr);
    if (status != 0 && status != GSL_EROUND)
        throw std::runtime_error("quad_to_inf: integration failed");
    return result;
}

namespace {

// Monomial coefficients (about sigma = 0) of the cubic through
// (sigma[j], v[j]), via Newton divided differences.
std::array<double, 4> cubic_coeffs(const std::array<double, 4>& sigma,
                                   const std::array<double, 4>& v) {
    std::array<double, 4> dd = v;
    for (int level = 1; level < 4; ++level)
        for (int j = 3; j >= level; --j)
            dd[j] = (dd[j] - dd[j - 1]) / (sigma[j] - sigma[j - level]);
    // expand dd0 + dd1 (s-s0) + dd2 (s-s0)(s-s1) + dd3 (s-s0)(s-s1)(s-s2)
    std::array<double, 4> c{dd[0], 0.0, 0.0, 0.0};
    std::array<double, 4> basis{1.0, 0.0, 0.0, 0.0}; // running product
    for (int level = 1; level < 4; ++level) {
        for (int k = level; k >= 1; --k)
            basis[k] = basis[k - 1] - sigma[level - 1] * basis[k];
        basis[0] *= -sigma[level - 1];
        for (int k = 0; k <= level; ++k)
            c[k] += dd[level] * basis[k];
    }
    return c;
}

// 2-point Gauss-Legendre nodes on [0, 1].
constexpr double kGauss2Lo = 0.21132486540518711775;
constexpr double kGauss2Hi = 0.78867513459481288225;

} // namespace

void cumulative_integral(std::span<const double> x, std::span<const double> y,
                         std::span<double> out) {
    const int n = static_cast<int>(x.size());
    if (n < 4)
        throw std::invalid_argument("cumulative_integral: need >= 4 nodes");
    out[0] = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
        const int js = std::clamp(i - 1, 0, n - 4);
        const double h = x[i + 1] - x[i];
        const double q1 = x[i] + h * kGauss2Lo;
        const double q2 = x[i] + h * kGauss2Hi;
        // Lagrange evaluation of the 4-point stencil at both Gauss points;
        // exact integration of the local cubic.
        double p1 = 0.0, p2 = 0.0;
        for (int j = 0; j < 4; ++j) {
            double l1 = 1.0, l2 = 1.0;
            for (int k = 0; k < 4; ++k) {
                if (k == j)
                    continue;
                const double dx = x[js + j] - x[js + k];
                l1 *= (q1 - x[js + k]) / dx;
                l2 *= (q2 - x[js + k]) / dx;
            }
            p1 += l1 * y[js + j];
            p2 += l2 * y[js + j];
        }
        out[i + 1] = out[i] + 0.5 * h * (p1 + p2);
    }
}

void exp_panel_moments(double len, double rate, std::span<double, 4> basis) {
    const double mu = rate * len;
    if (mu < 1.0) {
        // series: int_0^len s^k e^{-rate s} ds
        //       = len^{k+1} sum_m (-mu)^m / (m! (k+m+1))
        double lp = len;
        for (int k = 0; k < 4; ++k) {
            double term = 1.0 / (k + 1);
            double sum = term;
            double mpow = 1.0, mfact = 1.0;
            for (int m = 1; m < 40; ++m) {
                mpow *= -mu;
                mfact *= m;
                term = mpow / (mfact * (k + m + 1));
                sum += term;
                if (std::abs(term) < 1e-18 * std::abs(sum))
                    break;
            }
            basis[k] = lp * sum;
            lp *= len;
        }
        return;
    }
    const double emu = std::exp(-mu);
    basis[0] = -std::expm1(-mu) / rate;
    double lp = len;
    for (int k = 1; k < 4; ++k) {
        basis[k] = (k * basis[k - 1] - lp * emu) / rate;
        lp *= len;
    }
}

namespace {

// Panel integral int_{xa}^{xb} g(s) exp(-rate |s - anchor|) ds where anchor
// is xa (suffix sweep) or xb (prefix sweep) and the 4-node stencil cubic
// stands in for g. sigma runs from the anchor into the panel.
double exp_panel(std::span<const double> x, std::span<const double> g, int i,
                 int n, double rate, bool anchor_right) {
    const int js = std::clamp(i - 1, 0, n - 4);
    const double anchor = anchor_right ? x[i + 1] : x[i];
    std::array<double, 4> sigma, v;
    for (int j = 0; j < 4; ++j) {
        sigma[j] = anchor_right ? anchor - x[js + j] : x[js + j] - anchor;
        v[j] = g[js + j];
    }
    const auto c = cubic_coeffs(sigma, v);
    std::array<double, 4> mom;
    exp_panel_moments(x[i + 1] - x[i], rate, mom);
    return c[0] * mom[0] + c[1] * mom[1] + c[2] * mom[2] + c[3] * mom[3];
}

} // namespace

void exp_weighted_prefix(std::span<const double> x, std::span<const double> g,
                         double rate, std::span<double> prefix) {
    const int n = static_cast<int>(x.size());
    if (n < 4)
        throw std::invalid_argument("exp_weighted_prefix: need >= 4 nodes");
    prefix[0] = 0.0;
    for (int i = 0; i + 1 < n; ++i) {
        const double decay = std::exp(-rate * (x[i + 1] - x[i]));
        prefix[i + 1] = decay * prefix[i] + exp_panel(x, g, i, n, rate, true);
    }
}

void exp_weighted_suffix(std::span<const double> x, std::span<const double> g,
                         double rate, std::span<double> suffix) {
    const int n = static_cast<int>(x.size());
    if (n < 4)
        throw std::invalid_argument("exp_weighted_suffix: need >= 4 nodes");
    suffix[n - 1] = 0.0;
    for (int i = n - 2; i >= 0; --i) {
        const double decay = std::exp(-rate * (x[i + 1] - x[i]));
        suffix[i] = decay * suffix[i + 1] + exp_panel(x, g, i, n, rate, false);
    }
}

std::vector<double> logspace(double lo, double hi, int n) {
    if (!(lo > 0.0) || !(hi > lo) || n < 2)
        throw std::invalid_argument("logspace: need 0 < lo < hi, n >= 2");
    std::vector<double> out(n);
    const double step = std::log(hi / lo) / (n - 1);
    for (int i = 0; i < n; ++i)
        out[i] = lo * std::exp(step * i);
    out.back() = hi;
    return out;
}

std::uint64_t fnv1a(const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    std::uint64_t h = 14695981039346656037ULL;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= bytes[i];
        h *= 1099511628211ULL;
    }
    return h;
}

std::uint64_t fnv1a(std::span<const double> values) {
    return fnv1a(values.data(), values.size_bytes());
}

} // namespace bopo
