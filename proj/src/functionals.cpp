#include "bopo/functionals.hpp"

#include "bopo/potential.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <functional>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace bopo {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTLo = 1e-6;
constexpr double kTHi = 1e6;

void require_finite(double x, const char* where, const char* term) {
    if (!std::isfinite(x))
        throw std::runtime_error(std::string(where) + ": non-finite " + term +
                                 " term");
}

RadialField squared(const RadialField& u) {
    RadialField u2;
    u2.grid = u.grid;
    u2.v.resize(u.v.size());
    std::transform(u.v.begin(), u.v.end(), u2.v.begin(),
                   [](double x) { return x * x; });
    return u2;
}

BoxField squared(const BoxField& u) {
    BoxField u2;
    u2.grid = u.grid;
    u2.v.resize(u.v.size());
    std::transform(u.v.begin(), u.v.end(), u2.v.begin(),
                   [](double x) { return x * x; });
    return u2;
}

bool is_zero(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

// |u|^{p-2} u, well defined at u = 0 for every p > 3.
double focusing_term(double u, double p) {
    return u == 0.0 ? 0.0 : std::pow(std::fabs(u), p - 2.0) * u;
}

// Per-cell stiffness coefficients of the piecewise-linear Dirichlet form:
// int_{r_i}^{r_{i+1}} 4 pi r^2 dr / (r_{i+1} - r_i)^2, the exact moment, so
// the metric is an honest H^1 form and not another quadrature approximation.
std::vector<double> stiffness_cells(const RadialGrid& g) {
    std::vector<double> cells(static_cast<std::size_t>(g.n()) - 1);
    for (int i = 0; i + 1 < g.n(); ++i) {
        const double d = g.r[i + 1] - g.r[i];
        cells[static_cast<std::size_t>(i)] =
            (4.0 * kPi / 3.0) *
            (g.r[i + 1] * g.r[i + 1] * g.r[i + 1] -
             g.r[i] * g.r[i] * g.r[i]) /
            (d * d);
    }
    return cells;
}

// The pair integrals V and E never see the coupling, but the kernel table
// machinery insists on q != 0. Hand it a unit coupling when ours vanished;
// the q^2 prefactors downstream still zero the terms out.
KernelParams pair_kernel(const KernelParams& k, double scale = 1.0) {
    KernelParams out = k;
    out.a *= scale;
    if (out.q == 0.0)
        out.q = 1.0;
    return out;
}

// The scaling laws of t -> t^2 u(t x) reduce the fibering map and its
// t-derivative to scalar shapes in the precomputed integrals of u; the only
// t-dependence with substance is the interaction W(t) = V_{a t}(u^2, u^2)
// and its companion layer integral E(t) = iint e^{-|x-y|/(a t)} u^2 u^2,
// which enters through W'(t) = -E(t)/(a t^2).
struct FiberingScalars {
    double d2 = 0.0, m2 = 0.0, lpp = 0.0;
    double p = 0.0, eps = 0.0, q2 = 0.0, a = 0.0;

    double shape(double t, double w) const {
        return 0.5 * t * t * t * d2 + 0.5 * eps * t * m2 +
               0.25 * q2 * t * t * t * w -
               std::pow(t, 2.0 * p - 3.0) / p * lpp;
    }
    double slope(double t, double w, double e) const {
        return 1.5 * t * t * d2 + 0.5 * eps * m2 +
               0.25 * q2 * (3.0 * t * t * w - t / a * e) -
               (2.0 * p - 3.0) / p * std::pow(t, 2.0 * p - 4.0) * lpp;
    }
};

struct Curve1D {
    std::function<double(double)> cheap; // drives bracketing and golden
    std::function<double(double)> exact; // reported value
    std::function<double(double)> slope; // drives the Newton polish
};

FiberingResult maximize_curve(const Curve1D& c) {
    // Geometric bracket expansion from t = 1 until the middle point
    // dominates both neighbours.
    double tm = 1.0, gm = c.cheap(tm);
    double tl = 0.5, th = 2.0;
    double gl = c.cheap(tl), gh = c.cheap(th);
    while (!(gm >= gl && gm >= gh)) {
        if (gh > gm) {
            tl = tm;
            gl = gm;
            tm = th;
            gm = gh;
            th = tm * 2.0;
            if (th > kTHi)
                throw std::runtime_error(
                    "fibering_maximize: no interior maximum in [1e-6, 1e6]");
            gh = c.cheap(th);
        } else {
            th = tm;
            gh = gm;
            tm = tl;
            gm = gl;
            tl = tm / 2.0;
            if (tl < kTLo)
                throw std::runtime_error(
                    "fibering_maximize: no interior maximum in [1e-6, 1e6]");
            gl = c.cheap(tl);
        }
    }
    FiberingResult res;
    res.bracket_lo = tl;
    res.bracket_hi = th;

    // Golden-section shrink on the cheap curve.
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    double x1 = th - invphi * (th - tl);
    double x2 = tl + invphi * (th - tl);
    double f1 = c.cheap(x1), f2 = c.cheap(x2);
    for (int it = 0; it < 200 && (th - tl) > 1e-7 * (th + tl); ++it) {
        if (f1 < f2) {
            tl = x1;
            x1 = x2;
            f1 = f2;
            x2 = tl + invphi * (th - tl);
            f2 = c.cheap(x2);
        } else {
            th = x2;
            x2 = x1;
            f2 = f1;
            x1 = th - invphi * (th - tl);
            f1 = c.cheap(x1);
        }
    }

    // Newton polish on the fresh-integral derivative.
    double t = 0.5 * (tl + th);
    const double g_ref = std::max(std::fabs(c.exact(t)), 1e-300);
    double gp = c.slope(t);
    for (int it = 0; it < 50 && std::fabs(gp) > 1e-10 * g_ref; ++it) {
        const double h = 1e-4 * t;
        const double gpp = (c.slope(t + h) - c.slope(t - h)) / (2.0 * h);
        double step = (std::isfinite(gpp) && gpp < 0.0)
                          ? -gp / gpp
                          : (gp > 0.0 ? 0.05 * t : -0.05 * t);
        step = std::clamp(step, -0.25 * t, 0.25 * t);
        t = std::clamp(t + step, kTLo, kTHi);
        gp = c.slope(t);
    }
    if (!(std::fabs(gp) <= 1e-10 * g_ref))
        throw std::runtime_error(
            "fibering_maximize: stationarity polish did not converge");

    const double h = 1e-4 * t;
    res.t_star = t;
    res.value = c.exact(t);
    res.second_derivative = (c.slope(t + h) - c.slope(t - h)) / (2.0 * h);
    return res;
}

// ---- box spectral machinery ------------------------------------------
//
// One forward transform of the zero-padded source, then any number of
// symbol pairings <G * f, f> h^3 = (h^3 / N) sum_k sym(k) |f_hat|^2 by
// Parseval; same padding and truncation radius as solve_potential_box.

struct BoxSpectral {
    int m = 0;
    double h = 0.0, T = 0.0;
    std::vector<std::complex<double>> hat;
};

BoxSpectral box_spectral(const BoxField& f) {
    f.grid.validate();
    const int n = f.grid.n;
    const int m = 2 * n;
    const std::size_t nm = static_cast<std::size_t>(m);
    BoxSpectral sp;
    sp.m = m;
    sp.h = f.grid.h();
    sp.T = 2.5 * f.grid.L;
    std::vector<double> real_buf(nm * nm * nm, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            std::memcpy(&real_buf[(static_cast<std::size_t>(i) * nm + j) * nm],
                        &f.v[f.grid.idx(i, j, 0)], sizeof(double) * n);
    sp.hat.resize(nm * nm * static_cast<std::size_t>(m / 2 + 1));
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
        plan = fftw_plan_dft_r2c_3d(
            m, m, m, real_buf.data(),
            reinterpret_cast<fftw_complex*>(sp.hat.data()), FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    fftw_destroy_plan(plan);
    return sp;
}

double spectral_pairing(const BoxSpectral& sp, double a, bool exp_layer) {
    const int m = sp.m;
    const int kc = m / 2 + 1;
    const double dk = 2.0 * kPi / (m * sp.h);
    auto kval = [&](int i) { return dk * (i <= m / 2 ? i : i - m); };
    long double acc = 0.0L;
    for (int i = 0; i < m; ++i) {
        const double kx = kval(i);
        for (int j = 0; j < m; ++j) {
            const double ky = kval(j);
            const std::size_t row =
                (static_cast<std::size_t>(i) * m + j) * kc;
            for (int k = 0; k < kc; ++k) {
                const double kz = dk * k;
                const double kmag =
                    std::sqrt(kx * kx + ky * ky + kz * kz);
                const double sym =
                    exp_layer ? detail::truncated_exp_symbol(kmag, sp.T, a)
                              : detail::truncated_K_symbol(kmag, sp.T, a);
                const double mult = (k == 0 || k == m / 2) ? 1.0 : 2.0;
                acc += mult * sym * std::norm(sp.hat[row + k]);
            }
        }
    }
    const double N = static_cast<double>(m) * m * m;
    return static_cast<double>(acc) * sp.h * sp.h * sp.h / N;
}

// Cross Dirichlet form int grad u . grad v on the box, spectral, matching
// the convention of dirichlet_seminorm(BoxField).
double box_cross_dirichlet(const BoxField& u, const BoxField& v) {
    const int n = u.grid.n;
    const int nc = n / 2 + 1;
    const std::size_t sz = static_cast<std::size_t>(n) * n * nc;
    std::vector<double> bu = u.v, bv = v.v;
    std::vector<std::complex<double>> hu(sz), hv(sz);
    {
        std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
        fftw_plan pu = fftw_plan_dft_r2c_3d(
            n, n, n, bu.data(), reinterpret_cast<fftw_complex*>(hu.data()),
            FFTW_ESTIMATE);
        fftw_plan pv = fftw_plan_dft_r2c_3d(
            n, n, n, bv.data(), reinterpret_cast<fftw_complex*>(hv.data()),
            FFTW_ESTIMATE);
        fftw_execute(pu);
        fftw_execute(pv);
        fftw_destroy_plan(pu);
        fftw_destroy_plan(pv);
    }
    const double dk = kPi / u.grid.L;
    auto kval = [&](int i) { return dk * (i <= n / 2 ? i : i - n); };
    long double acc = 0.0L;
    for (int i = 0; i < n; ++i) {
        const double kx = kval(i);
        for (int j = 0; j < n; ++j) {
            const double ky = kval(j);
            const std::size_t row =
                (static_cast<std::size_t>(i) * n + j) * nc;
            for (int k = 0; k < nc; ++k) {
                const double kz = dk * k;
                const double k2 = kx * kx + ky * ky + kz * kz;
                const double mult = (k == 0 || k == n / 2) ? 1.0 : 2.0;
                const std::complex<double> cu = hu[row + k];
                const std::complex<double> cv = hv[row + k];
                acc += mult * k2 *
                       (cu.real() * cv.real() + cu.imag() * cv.imag());
            }
        }
    }
    const double h = u.grid.h();
    const double N = static_cast<double>(u.grid.size());
    return static_cast<double>(acc) * h * h * h / N;
}

EnergyBreakdown combine_terms(const ProblemParams& pp, double d2, double m2,
                              double lpp, double V, double E,
                              const char* where) {
    const double q2 = pp.kernel.q * pp.kernel.q;
    const double a = pp.kernel.a;
    EnergyBreakdown out;
    out.dirichlet = 0.5 * d2;
    out.mass = 0.5 * m2;
    out.bp = 0.25 * V;
    out.lp = lpp / pp.p;
    out.exp_layer = E;
    require_finite(out.dirichlet, where, "dirichlet");
    require_finite(out.mass, where, "mass");
    require_finite(out.bp, where, "interaction");
    require_finite(out.lp, where, "lp");
    require_finite(out.exp_layer, where, "exponential-layer");
    out.I = out.dirichlet + q2 * out.bp - out.lp;
    out.I_eps = out.I + pp.epsilon * out.mass;
    out.P_eps = 0.5 * d2 + 1.5 * pp.epsilon * m2 - 3.0 / pp.p * lpp +
                0.25 * q2 * (5.0 * V + E / a);
    out.J_eps = 1.5 * d2 + 0.5 * pp.epsilon * m2 -
                (2.0 * pp.p - 3.0) / pp.p * lpp +
                0.25 * q2 * (3.0 * V - E / a);
    return out;
}

} // namespace

void ProblemParams::validate() const {
    // Unlike the kernel table, the energy tolerates a vanishing coupling:
    // q = 0 just switches the nonlocal terms off.
    if (!(kernel.a > 0.0) || !std::isfinite(kernel.a))
        throw std::invalid_argument("kernel parameter a must be positive");
    if (!std::isfinite(kernel.q))
        throw std::invalid_argument("coupling q must be finite");
    if (!(p > 3.0 && p < 6.0))
        throw std::invalid_argument("p must lie in (3,6)");
    if (!(epsilon >= 0.0) || !std::isfinite(epsilon))
        throw std::invalid_argument("epsilon must be a nonnegative number");
}

EnergyBreakdown evaluate(const RadialField& u, const ProblemParams& pp) {
    pp.validate();
    u.check_finite();
    const RadialGrid& g = *u.grid;
    const double d = dirichlet_seminorm(u);
    double m2 = 0.0, lpp = 0.0;
    for (int i = 0; i < g.n(); ++i) {
        m2 += g.w[i] * u.v[i] * u.v[i];
        lpp += g.w[i] * std::pow(std::fabs(u.v[i]), pp.p);
    }
    const RadialField u2 = squared(u);
    const double V = V_fast(u2, u2, pair_kernel(pp.kernel)).value;
    const double E = exp_energy_fast(u2, u2, pp.kernel.a);
    return combine_terms(pp, d * d, m2, lpp, V, E, "evaluate");
}

EnergyBreakdown evaluate(const BoxField& u, const ProblemParams& pp) {
    pp.validate();
    u.check_finite();
    const double d = dirichlet_seminorm(u);
    const double h3 = std::pow(u.grid.h(), 3);
    double m2 = 0.0, lpp = 0.0;
    for (double x : u.v) {
        m2 += x * x;
        lpp += std::pow(std::fabs(x), pp.p);
    }
    m2 *= h3;
    lpp *= h3;
    const BoxSpectral sp = box_spectral(squared(u));
    const double V = spectral_pairing(sp, pp.kernel.a, false);
    const double E = spectral_pairing(sp, pp.kernel.a, true);
    return combine_terms(pp, d * d, m2, lpp, V, E, "evaluate");
}

double first_variation(const RadialField& u, const RadialField& v,
                       const ProblemParams& pp) {
    pp.validate();
    if (u.grid.get() != v.grid.get())
        throw std::invalid_argument(
            "first_variation: fields live on different grids");
    u.check_finite();
    v.check_finite();
    const RadialGrid& g = *u.grid;
    const auto du = radial_derivative(g, u.v);
    const auto dv = radial_derivative(g, v.v);
    const RadialField u2 = squared(u);
    const auto phi = pp.kernel.q != 0.0
                         ? detail::radial_K_convolve(g, u2.v, pp.kernel)
                         : std::vector<double>(g.n(), 0.0);
    const double q2 = pp.kernel.q * pp.kernel.q;
    double acc = 0.0;
    for (int i = 0; i < g.n(); ++i)
        acc += g.w[i] *
               (du[i] * dv[i] +
                (pp.epsilon + q2 * phi[i]) * u.v[i] * v.v[i] -
                focusing_term(u.v[i], pp.p) * v.v[i]);
    require_finite(acc, "first_variation", "total");
    return acc;
}

double first_variation(const BoxField& u, const BoxField& v,
                       const ProblemParams& pp) {
    pp.validate();
    if (u.grid.n != v.grid.n || u.grid.L != v.grid.L)
        throw std::invalid_argument(
            "first_variation: fields live on different grids");
    u.check_finite();
    v.check_finite();
    const BoxField u2 = squared(u);
    std::vector<double> phi(u.v.size(), 0.0);
    if (pp.kernel.q != 0.0)
        phi = solve_potential_box(u2, pp.kernel).phi.v;
    const double q2 = pp.kernel.q * pp.kernel.q;
    const double h3 = std::pow(u.grid.h(), 3);
    double acc = box_cross_dirichlet(u, v);
    double local = 0.0;
    for (std::size_t i = 0; i < u.v.size(); ++i)
        local += (pp.epsilon + q2 * phi[i]) * u.v[i] * v.v[i] -
                 focusing_term(u.v[i], pp.p) * v.v[i];
    acc += local * h3;
    require_finite(acc, "first_variation", "total");
    return acc;
}

RadialField gradient(const RadialField& u, const ProblemParams& pp,
                     GradientMetric metric) {
    pp.validate();
    u.check_finite();
    const RadialGrid& g = *u.grid;
    const int n = g.n();
    const auto stencils = derivative_stencils(g);
    const auto du = radial_derivative(g, u.v);
    const RadialField u2 = squared(u);
    const auto phi = pp.kernel.q != 0.0
                         ? detail::radial_K_convolve(g, u2.v, pp.kernel)
                         : std::vector<double>(g.n(), 0.0);
    const double q2 = pp.kernel.q * pp.kernel.q;

    // rhs_j = dI_eps(u)[delta_j]: the local terms weighted by w, plus the
    // transpose-stencil image of the Dirichlet part, S^T W S u.
    std::vector<double> rhs(n, 0.0);
    for (int i = 0; i < n; ++i)
        rhs[i] = g.w[i] * ((pp.epsilon + q2 * phi[i]) * u.v[i] -
                           focusing_term(u.v[i], pp.p));
    for (int i = 0; i < n; ++i) {
        const double wd = g.w[i] * du[i];
        for (int k = 0; k < 5; ++k)
            rhs[stencils[i].start + k] += stencils[i].w[k] * wd;
    }

    RadialField out;
    out.grid = u.grid;
    out.v.assign(n, 0.0);
    if (metric == GradientMetric::l2) {
        for (int i = 0; i < n; ++i)
            out.v[i] = rhs[i] / g.w[i];
        return out;
    }

    // Sobolev metric: A x = rhs with A the compact stiffness-plus-mass form
    // described next to sobolev_inner in the header. The high-order stencil
    // form S^T W S is unusable as a metric: it annihilates the Nyquist mode,
    // so descent directions could carry free sawtooth components. A is a
    // tridiagonal M-matrix; rescale symmetrically by the diagonal before
    // factorizing since the weights span many orders of magnitude.
    const auto cells = stiffness_cells(g);
    std::vector<double> diag(n, 0.0);
    for (int i = 0; i + 1 < n; ++i) {
        diag[i] += cells[static_cast<std::size_t>(i)];
        diag[i + 1] += cells[static_cast<std::size_t>(i)];
    }
    for (int i = 0; i < n; ++i)
        diag[i] += g.w[i];
    std::vector<double> scal(n);
    for (int i = 0; i < n; ++i)
        scal[i] = 1.0 / std::sqrt(diag[i]);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n) * 3);
    for (int i = 0; i < n; ++i)
        trips.emplace_back(i, i, scal[i] * diag[i] * scal[i]);
    for (int i = 0; i + 1 < n; ++i) {
        const double off =
            -cells[static_cast<std::size_t>(i)] * scal[i] * scal[i + 1];
        trips.emplace_back(i, i + 1, off);
        trips.emplace_back(i + 1, i, off);
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trips.begin(), trips.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error(
            "gradient: sobolev metric factorization failed");
    Eigen::VectorXd srhs(n);
    for (int i = 0; i < n; ++i)
        srhs[i] = scal[i] * rhs[i];
    Eigen::VectorXd x = ldlt.solve(srhs);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("gradient: sobolev metric solve failed");
    for (int i = 0; i < n; ++i)
        out.v[i] = scal[i] * x[i];
    return out;
}

BoxField gradient(const BoxField& u, const ProblemParams& pp,
                  GradientMetric metric) {
    pp.validate();
    u.check_finite();
    const int n = u.grid.n;
    const int nc = n / 2 + 1;
    const std::size_t sz = static_cast<std::size_t>(n) * n * nc;
    const BoxField u2 = squared(u);
    std::vector<double> phi(u.v.size(), 0.0);
    if (pp.kernel.q != 0.0)
        phi = solve_potential_box(u2, pp.kernel).phi.v;
    const double q2 = pp.kernel.q * pp.kernel.q;

    // Pointwise part of the L2 representative.
    std::vector<double> local(u.v.size());
    for (std::size_t i = 0; i < u.v.size(); ++i)
        local[i] = (pp.epsilon + q2 * phi[i]) * u.v[i] -
                   focusing_term(u.v[i], pp.p);

    // Spectral -Laplacian of u; for the sobolev metric divide the whole
    // representative by (1 + k^2) in frequency space.
    std::vector<double> bu = u.v, bl = local;
    std::vector<std::complex<double>> hu(sz), hl(sz);
    fftw_plan pu, pl, pb;
    std::vector<std::complex<double>> hg(sz);
    std::vector<double> back(u.v.size());
    {
        std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
        pu = fftw_plan_dft_r2c_3d(n, n, n, bu.data(),
                                  reinterpret_cast<fftw_complex*>(hu.data()),
                                  FFTW_ESTIMATE);
        pl = fftw_plan_dft_r2c_3d(n, n, n, bl.data(),
                                  reinterpret_cast<fftw_complex*>(hl.data()),
                                  FFTW_ESTIMATE);
        pb = fftw_plan_dft_c2r_3d(n, n, n,
                                  reinterpret_cast<fftw_complex*>(hg.data()),
                                  back.data(), FFTW_ESTIMATE);
    }
    fftw_execute(pu);
    fftw_execute(pl);
    const double dk = kPi / u.grid.L;
    auto kval = [&](int i) { return dk * (i <= n / 2 ? i : i - n); };
    const double N = static_cast<double>(u.grid.size());
    for (int i = 0; i < n; ++i) {
        const double kx = kval(i);
        for (int j = 0; j < n; ++j) {
            const double ky = kval(j);
            const std::size_t row =
                (static_cast<std::size_t>(i) * n + j) * nc;
            for (int k = 0; k < nc; ++k) {
                const double kz = dk * k;
                const double k2 = kx * kx + ky * ky + kz * kz;
                std::complex<double> rep = k2 * hu[row + k] + hl[row + k];
                if (metric == GradientMetric::sobolev)
                    rep /= 1.0 + k2;
                hg[row + k] = rep / N;
            }
        }
    }
    fftw_execute(pb);
    fftw_destroy_plan(pu);
    fftw_destroy_plan(pl);
    fftw_destroy_plan(pb);
    BoxField out;
    out.grid = u.grid;
    out.v = std::move(back);
    return out;
}

double sobolev_inner(const RadialField& a, const RadialField& b) {
    if (a.grid.get() != b.grid.get())
        throw std::invalid_argument(
            "sobolev_inner: fields live on different grids");
    const RadialGrid& g = *a.grid;
    const auto cells = stiffness_cells(g);
    double acc = 0.0;
    for (int i = 0; i + 1 < g.n(); ++i)
        acc += cells[static_cast<std::size_t>(i)] *
               (a.v[i + 1] - a.v[i]) * (b.v[i + 1] - b.v[i]);
    for (int i = 0; i < g.n(); ++i)
        acc += g.w[i] * a.v[i] * b.v[i];
    return acc;
}

FiberingCurve::FiberingCurve(const RadialField& u, const ProblemParams& pp)
    : pp_(pp) {
    pp.validate();
    u.check_finite();
    const RadialGrid& g = *u.grid;
    const double d = dirichlet_seminorm(u);
    d2_ = d * d;
    for (int i = 0; i < g.n(); ++i) {
        m2_ += g.w[i] * u.v[i] * u.v[i];
        lpp_ += g.w[i] * std::pow(std::fabs(u.v[i]), pp.p);
    }
    u2_ = squared(u);

    // W on 32 nodes per decade across the whole admissible t-range; the
    // clamp keeps the log table sane if the far tail underflows.
    const int nodes = 12 * 32 + 1;
    const auto taus = logspace(kTLo, kTHi, nodes);
    std::vector<double> lx(taus.size()), ly(taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i) {
        const KernelParams kt = pair_kernel(pp.kernel, taus[i]);
        const double w = std::max(V_fast(u2_, u2_, kt).value, 1e-300);
        lx[i] = std::log(taus[i]);
        ly[i] = std::log(w);
    }
    logw_ = Pchip(std::move(lx), std::move(ly));
}

double FiberingCurve::t_min() const { return kTLo; }
double FiberingCurve::t_max() const { return kTHi; }

double FiberingCurve::value(double t) const {
    const FiberingScalars s{d2_, m2_, lpp_, pp_.p, pp_.epsilon,
                            pp_.kernel.q * pp_.kernel.q, pp_.kernel.a};
    return s.shape(t, std::exp(logw_(std::log(t))));
}

double FiberingCurve::value_direct(double t) const {
    const FiberingScalars s{d2_, m2_, lpp_, pp_.p, pp_.epsilon,
                            pp_.kernel.q * pp_.kernel.q, pp_.kernel.a};
    const KernelParams kt = pair_kernel(pp_.kernel, t);
    return s.shape(t, V_fast(u2_, u2_, kt).value);
}

double FiberingCurve::derivative_direct(double t) const {
    const FiberingScalars s{d2_, m2_, lpp_, pp_.p, pp_.epsilon,
                            pp_.kernel.q * pp_.kernel.q, pp_.kernel.a};
    const KernelParams kt = pair_kernel(pp_.kernel, t);
    const double w = V_fast(u2_, u2_, kt).value;
    const double e = exp_energy_fast(u2_, u2_, pp_.kernel.a * t);
    return s.slope(t, w, e);
}

FiberingResult fibering_maximize(const RadialField& u,
                                 const ProblemParams& pp) {
    pp.validate();
    if (!(pp.epsilon > 0.0))
        throw std::invalid_argument(
            "fibering_maximize: epsilon must be positive");
    if (is_zero(u.v))
        throw std::invalid_argument(
            "fibering_maximize: state is identically zero");
    const FiberingCurve curve(u, pp);
    Curve1D c;
    c.cheap = [&](double t) { return curve.value(t); };
    c.exact = [&](double t) { return curve.value_direct(t); };
    c.slope = [&](double t) { return curve.derivative_direct(t); };
    return maximize_curve(c);
}

FiberingResult fibering_maximize(const BoxField& u, const ProblemParams& pp) {
    pp.validate();
    if (!(pp.epsilon > 0.0))
        throw std::invalid_argument(
            "fibering_maximize: epsilon must be positive");
    if (is_zero(u.v))
        throw std::invalid_argument(
            "fibering_maximize: state is identically zero");
    const double d = dirichlet_seminorm(u);
    const double h3 = std::pow(u.grid.h(), 3);
    FiberingScalars s;
    s.d2 = d * d;
    for (double x : u.v) {
        s.m2 += x * x;
        s.lpp += std::pow(std::fabs(x), pp.p);
    }
    s.m2 *= h3;
    s.lpp *= h3;
    s.p = pp.p;
    s.eps = pp.epsilon;
    s.q2 = pp.kernel.q * pp.kernel.q;
    s.a = pp.kernel.a;
    // The padded transform of u^2 does not depend on t, so each curve
    // evaluation is one symbol sweep; no interpolation table is needed.
    const BoxSpectral sp = box_spectral(squared(u));
    auto value = [&](double t) {
        return s.shape(t, spectral_pairing(sp, pp.kernel.a * t, false));
    };
    Curve1D c;
    c.cheap = value;
    c.exact = value;
    c.slope = [&](double t) {
        return s.slope(t, spectral_pairing(sp, pp.kernel.a * t, false),
                       spectral_pairing(sp, pp.kernel.a * t, true));
    };
    return maximize_curve(c);
}

ScalarInequalityReport check_scalar_inequalities(int nt, int nb) {
    if (nt < 2 || nb < 2)
        throw std::invalid_argument(
            "check_scalar_inequalities: need at least a 2x2 grid");
    const auto ts = logspace(1e-3, 1e3, nt);
    ScalarInequalityReport rep;
    rep.worst_slack = std::numeric_limits<double>::infinity();
    for (int ib = 0; ib < nb; ++ib) {
        const double b = 50.0 * ib / (nb - 1);
        const double eb = std::exp(-b);
        for (const double t : ts) {
            const double s1 = t * t * t * (std::exp(-b / t) - eb) +
                              (1.0 - t * t * t) / 3.0 * b * eb;
            ++rep.samples;
            if (s1 < rep.worst_slack) {
                rep.worst_slack = s1;
                rep.worst_t = t;
                rep.worst_b = b;
            }
        }
        const double s2 = 0.5 * (1.0 - eb) - b * eb / 3.0;
        ++rep.samples;
        if (s2 < rep.worst_slack) {
            rep.worst_slack = s2;
            rep.worst_t = 0.0; // marks the one-variable family
            rep.worst_b = b;
        }
    }
    rep.pass = rep.worst_slack >= -1e-14;
    return rep;
}

} // namespace bopo
