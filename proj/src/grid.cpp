#include "bopo/grid.hpp"

#include "bopo/numerics.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>

namespace bopo {

namespace {

constexpr double kFourPi = 4.0 * std::numbers::pi;

// Composite Simpson weights for npts uniform nodes with spacing h.
// Odd panel counts get a 3/8 block on the last three panels.
std::vector<double> simpson_uniform_weights(int npts, double h) {
    if (npts < 3)
        throw std::invalid_argument("simpson weights need >= 3 nodes");
    std::vector<double> w(npts, 0.0);
    int end = npts - 1; // last node of the 1/3-rule range
    if ((npts - 1) % 2 == 1) {
        end = npts - 4;
        if (end < 0)
            throw std::invalid_argument("simpson weights: bad node count");
        w[npts - 4] += 3.0 * h / 8.0;
        w[npts - 3] += 9.0 * h / 8.0;
        w[npts - 2] += 9.0 * h / 8.0;
        w[npts - 1] += 3.0 * h / 8.0;
    }
    if (end >= 2) {
        w[0] += h / 3.0;
        w[end] += h / 3.0;
        for (int i = 1; i < end; i += 2)
            w[i] += 4.0 * h / 3.0;
        for (int i = 2; i < end; i += 2)
            w[i] += 2.0 * h / 3.0;
    } else if (end == 1) {
        w[0] += h / 2.0;
        w[1] += h / 2.0;
    }
    return w;
}

} // namespace

namespace detail {

// FFTW plan creation is the one non-reentrant part of the library.
std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

} // namespace detail

void RadialGrid::validate() const {
    if (r.size() < 8 || r.size() != w.size())
        throw std::invalid_argument("radial grid: too few nodes");
    if (!(r.front() > 0.0))
        throw std::invalid_argument("radial grid: nodes must be positive");
    for (std::size_t i = 0; i + 1 < r.size(); ++i)
        if (!(r[i] < r[i + 1]))
            throw std::invalid_argument("radial grid: nodes must increase");
    for (double wi : w)
        if (!(wi > 0.0))
            throw std::invalid_argument("radial grid: weights must be positive");
    if (!(r.back() <= r_max * (1.0 + 1e-14)))
        throw std::invalid_argument("radial grid: nodes exceed r_max");
}

RadialGrid make_radial_grid(double r_max, int n, double r_knee) {
    if (!(r_max > 0.0) || n < 16)
        throw std::invalid_argument("radial grid: need r_max > 0 and n >= 16");
    const double r_min = r_max * 1e-5;
    if (!(r_knee > r_min) || !(r_knee < r_max))
        throw std::invalid_argument("radial grid: knee outside (r_min, r_max)");

    int n_geo = n / 2;
    if (n_geo % 2 == 0)
        ++n_geo; // odd node count -> even panel count on the log piece
    const int n_uni = n - n_geo + 1; // shares the junction node

    RadialGrid g;
    g.r_max = r_max;
    g.r_min = r_min;
    g.junction = n_geo - 1;
    g.r.reserve(n);
    g.w.assign(n, 0.0);

    const double xi_lo = std::log(r_min), xi_hi = std::log(r_knee);
    const double h_xi = (xi_hi - xi_lo) / (n_geo - 1);
    const auto w_xi = simpson_uniform_weights(n_geo, h_xi);
    for (int i = 0; i < n_geo; ++i) {
        const double ri = std::exp(xi_lo + h_xi * i);
        g.r.push_back(ri);
        g.w[i] = w_xi[i] * kFourPi * ri * ri * ri; // dr = r dxi
    }
    g.r[n_geo - 1] = r_knee;

    const double h_r = (r_max - r_knee) / (n_uni - 1);
    const auto w_r = simpson_uniform_weights(n_uni, h_r);
    for (int i = 0; i < n_uni; ++i) {
        const double ri = (i == n_uni - 1) ? r_max : r_knee + h_r * i;
        if (i > 0)
            g.r.push_back(ri);
        g.w[n_geo - 1 + i] += w_r[i] * kFourPi * ri * ri;
    }

    // the ball [0, r_min]: treat the integrand as constant there
    g.w[0] += kFourPi / 3.0 * r_min * r_min * r_min;

    g.validate();
    return g;
}

RadialGrid default_radial_grid(const KernelParams& kp, int n) {
    kp.validate();
    return make_radial_grid(40.0 * kp.a, n, 4.0 * kp.a);
}

void BoxGrid::validate() const {
    if (n < 8 || n % 2 != 0)
        throw std::invalid_argument("box grid: per-axis count must be even, >= 8");
    if (!(L > 0.0))
        throw std::invalid_argument("box grid: half-width must be positive");
}

void RadialField::check_finite() const {
    if (!grid || v.size() != grid->r.size())
        throw std::invalid_argument("radial field: size mismatch");
    for (double x : v)
        if (!std::isfinite(x))
            throw std::invalid_argument("radial field: nonfinite sample");
}

void BoxField::check_finite() const {
    if (v.size() != grid.size())
        throw std::invalid_argument("box field: size mismatch");
    for (double x : v)
        if (!std::isfinite(x))
            throw std::invalid_argument("box field: nonfinite sample");
}

double integrate(const RadialGrid& g, std::span<const double> f) {
    if (f.size() != g.w.size())
        throw std::invalid_argument("integrate: size mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i)
        acc += g.w[i] * f[i];
    return acc;
}

double lp_norm(const RadialField& f, double p) {
    if (!(p >= 1.0))
        throw std::invalid_argument("lp_norm: p must be >= 1");
    if (std::isinf(p)) {
        double m = 0.0;
        for (double x : f.v)
            m = std::max(m, std::abs(x));
        return m;
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < f.v.size(); ++i)
        acc += f.grid->w[i] * std::pow(std::abs(f.v[i]), p);
    return std::pow(acc, 1.0 / p);
}

double lp_norm(const BoxField& f, double p) {
    if (!(p >= 1.0))
        throw std::invalid_argument("lp_norm: p must be >= 1");
    if (std::isinf(p)) {
        double m = 0.0;
        for (double x : f.v)
            m = std::max(m, std::abs(x));
        return m;
    }
    double acc = 0.0;
    for (double x : f.v)
        acc += std::pow(std::abs(x), p);
    const double h = f.grid.h();
    return std::pow(acc * h * h * h, 1.0 / p);
}

std::vector<DerivStencil> derivative_stencils(const RadialGrid& g) {
    const int n = g.n();
    if (n < 5)
        throw std::invalid_argument("derivative stencils need >= 5 nodes");
    std::vector<DerivStencil> out(n);
    for (int i = 0; i < n; ++i) {
        const int start = std::clamp(i - 2, 0, n - 5);
        std::array<double, 5> w{};
        fornberg_weights(g.r[i], std::span(g.r).subspan(start, 5), 1, w);
        out[i] = DerivStencil{start, w};
    }
    return out;
}

std::vector<double> radial_derivative(const RadialGrid& g,
                                      std::span<const double> f) {
    if (f.size() != g.r.size())
        throw std::invalid_argument("radial_derivative: size mismatch");
    const auto st = derivative_stencils(g);
    std::vector<double> df(f.size());
    for (std::size_t i = 0; i < f.size(); ++i) {
        double acc = 0.0;
        for (int j = 0; j < 5; ++j)
            acc += st[i].w[j] * f[st[i].start + j];
        df[i] = acc;
    }
    return df;
}

double dirichlet_seminorm(const RadialField& f) {
    const auto df = radial_derivative(*f.grid, f.v);
    double acc = 0.0;
    for (std::size_t i = 0; i < df.size(); ++i)
        acc += f.grid->w[i] * df[i] * df[i];
    return std::sqrt(acc);
}

double dirichlet_seminorm(const BoxField& f) {
    f.grid.validate();
    const int n = f.grid.n;
    const int nc = n / 2 + 1;
    std::vector<double> in = f.v;
    std::vector<fftw_complex> out(static_cast<std::size_t>(n) * n * nc);
    {
        std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
        fftw_plan plan = fftw_plan_dft_r2c_3d(n, n, n, in.data(), out.data(),
                                              FFTW_ESTIMATE);
        fftw_execute(plan);
        fftw_destroy_plan(plan);
    }
    const double dk = std::numbers::pi / f.grid.L; // 2 pi / (2 L)
    auto kval = [&](int m) {
        return dk * (m <= n / 2 ? m : m - n);
    };
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double kx = kval(i);
        for (int j = 0; j < n; ++j) {
            const double ky = kval(j);
            for (int k = 0; k < nc; ++k) {
                const double kz = dk * k;
                const auto& c = out[(static_cast<std::size_t>(i) * n + j) * nc + k];
                const double mag2 = c[0] * c[0] + c[1] * c[1];
                const double mult = (k == 0 || k == n / 2) ? 1.0 : 2.0;
                acc += mult * (kx * kx + ky * ky + kz * kz) * mag2;
            }
        }
    }
    const double h = f.grid.h();
    const double N = static_cast<double>(f.grid.size());
    return std::sqrt(acc * h * h * h / N);
}

RadialField fibering_rescale(const RadialField& u, double t) {
    if (!(t > 0.0))
        throw std::domain_error("fibering_rescale: t must be positive");
    if (t == 1.0)
        return u;
    const auto& g = *u.grid;
    const Pchip interp(g.r, u.v);
    RadialField out{u.grid, std::vector<double>(u.v.size())};
    const double t2 = t * t;
    for (int i = 0; i < g.n(); ++i) {
        const double rq = t * g.r[i];
        out.v[i] = (rq > g.r_max) ? 0.0 : t2 * interp(rq);
    }
    return out;
}

namespace {

// One separable pass: resample along the chosen axis at t * coordinate,
// zero beyond the grid. Monotone cubic per line keeps u >= 0 intact.
void rescale_axis(const BoxGrid& g, std::vector<double>& v, int axis,
                  double t) {
    const int n = g.n;
    std::vector<double> coords(n), line(n), res(n);
    for (int i = 0; i < n; ++i)
        coords[i] = g.coord(i);
    std::array<std::size_t, 3> stride{g.idx(1, 0, 0), g.idx(0, 1, 0),
                                      g.idx(0, 0, 1)};
    const std::size_t s = stride[axis];
    std::array<int, 2> other;
    int oi = 0;
    for (int a = 0; a < 3; ++a)
        if (a != axis)
            other[oi++] = a;
    for (int p = 0; p < n; ++p) {
        for (int q = 0; q < n; ++q) {
            std::size_t base = p * stride[other[0]] + q * stride[other[1]];
            for (int i = 0; i < n; ++i)
                line[i] = v[base + i * s];
            const Pchip interp(coords, line);
            for (int i = 0; i < n; ++i) {
                const double xq = t * coords[i];
                res[i] = (xq < coords.front() || xq > coords.back())
                             ? 0.0
                             : interp(xq);
            }
            for (int i = 0; i < n; ++i)
                v[base + i * s] = res[i];
        }
    }
}

} // namespace

BoxField fibering_rescale(const BoxField& u, double t) {
    if (!(t > 0.0))
        throw std::domain_error("fibering_rescale: t must be positive");
    BoxField out = u;
    if (t == 1.0)
        return out;
    for (int axis = 0; axis < 3; ++axis)
        rescale_axis(out.grid, out.v, axis, t);
    const double t2 = t * t;
    for (double& x : out.v)
        x *= t2;
    return out;
}

double tail_mass_fraction(const RadialField& u) {
    const auto& g = *u.grid;
    double tail = 0.0, total = 0.0;
    for (int i = 0; i < g.n(); ++i) {
        const double m = g.w[i] * std::pow(std::abs(u.v[i]), 6);
        total += m;
        if (g.r[i] >= 0.9 * g.r_max)
            tail += m;
    }
    return total > 0.0 ? tail / total : 0.0;
}

double tail_mass_fraction(const BoxField& u) {
    const int n = u.grid.n;
    double tail = 0.0, total = 0.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double m =
                    std::pow(std::abs(u.v[u.grid.idx(i, j, k)]), 6);
                total += m;
                const double rim = std::max(
                    {std::abs(u.grid.coord(i)), std::abs(u.grid.coord(j)),
                     std::abs(u.grid.coord(k))});
                if (rim >= 0.9 * u.grid.L)
                    tail += m;
            }
    return total > 0.0 ? tail / total : 0.0;
}

} // namespace bopo
