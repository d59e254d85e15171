#include "bopo/bp_energy.hpp"

#include "bopo/numerics.hpp"
#include "bopo/potential.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>

namespace bopo {

namespace {

constexpr double kPi = std::numbers::pi;

void require_same_grid(const RadialField& f, const RadialField& g,
                       const RadialKernelTable& table) {
    if (f.grid.get() != table.grid_ptr().get() ||
        g.grid.get() != table.grid_ptr().get())
        throw std::invalid_argument(
            "energy oracle: fields must live on the kernel table's grid");
}

// Random sign-indefinite Gaussian mixture on the grid.
RadialField random_mixture(const std::shared_ptr<const RadialGrid>& g,
                           std::mt19937_64& rng) {
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_real_distribution<double> width(0.5, 4.0);
    std::uniform_real_distribution<double> center(0.0, 5.0);
    RadialField f;
    f.grid = g;
    f.v.assign(g->n(), 0.0);
    for (int k = 0; k < 3; ++k) {
        double c = coef(rng);
        if (std::abs(c) < 0.1)
            c = std::copysign(0.1, c == 0.0 ? 1.0 : c);
        const double b = width(rng);
        const double mu = center(rng);
        for (int i = 0; i < g->n(); ++i) {
            const double d = g->r[i] - mu;
            f.v[i] += c * std::exp(-b * d * d);
        }
    }
    return f;
}

} // namespace

void WeightParams::validate() const {
    if (!(alpha > 0.5) || !(gamma > 0.5))
        throw std::invalid_argument(
            "weight exponents must exceed 1/2 for the embeddings to hold");
}

double kbar_closed_form(double r, double s, double a) {
    if (!(r > 0.0) || !(s > 0.0) || !(a > 0.0))
        throw std::domain_error("kbar: r, s, a must be positive");
    const double d = std::abs(r - s);
    const double u = r + s;
    return 1.0 / std::max(r, s) -
           (a / (2.0 * r * s)) * (std::exp(-d / a) - std::exp(-u / a));
}

double ebar_closed_form(double r, double s, double a) {
    if (!(r > 0.0) || !(s > 0.0) || !(a > 0.0))
        throw std::domain_error("ebar: r, s, a must be positive");
    const double d = std::abs(r - s);
    const double u = r + s;
    return (a / (2.0 * r * s)) *
           ((d + a) * std::exp(-d / a) - (u + a) * std::exp(-u / a));
}

namespace {

// Composite 3-point Newton-Cotes weights on arbitrary increasing nodes
// (exact on quadratics per interval pair); an odd interval count closes
// with the quadratic through the last three nodes. Used to rebuild the
// inner rule of the oracle per row, so it only ever sees smooth integrands.
void composite3_weights(std::span<const double> x, std::span<double> w) {
    const int m = static_cast<int>(x.size());
    std::fill(w.begin(), w.begin() + m, 0.0);
    if (m < 2)
        return;
    if (m == 2) {
        const double h = 0.5 * (x[1] - x[0]);
        w[0] = h;
        w[1] = h;
        return;
    }
    const int nint = m - 1;
    int k = 0;
    for (int b = 0; b < nint / 2; ++b, k += 2) {
        const double h0 = x[k + 1] - x[k], h1 = x[k + 2] - x[k + 1];
        const double H = h0 + h1;
        w[k] += H * (2.0 * h0 - h1) / (6.0 * h0);
        w[k + 1] += H * H * H / (6.0 * h0 * h1);
        w[k + 2] += H * (2.0 * h1 - h0) / (6.0 * h1);
    }
    if (nint % 2) {
        const double h0 = x[m - 2] - x[m - 3], h1 = x[m - 1] - x[m - 2];
        w[m - 1] += h1 * (2.0 * h1 + 3.0 * h0) / (6.0 * (h0 + h1));
        w[m - 2] += h1 * (h1 + 3.0 * h0) / (6.0 * h0);
        w[m - 3] -= h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
    }
}

} // namespace

RadialKernelTable::RadialKernelTable(std::shared_ptr<const RadialGrid> grid,
                                     double a)
    : grid_(std::move(grid)), n_(0), a_(a) {
    if (!grid_)
        throw std::invalid_argument("kernel table: null grid");
    grid_->validate();
    if (!(a > 0.0) || !std::isfinite(a))
        throw std::invalid_argument("kernel table: a must be positive");
    n_ = static_cast<std::size_t>(grid_->n());
    const auto& x = grid_->r;
    const auto& w = grid_->w;

    kbar_.resize(n_ * n_);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = i; j < n_; ++j) {
            const double kb = kbar_closed_form(x[i], x[j], a_);
            kbar_[i * n_ + j] = kb;
            kbar_[j * n_ + i] = kb;
        }

    ak_.assign(n_ * n_, 0.0);
    ae_.assign(n_ * n_, 0.0);
    std::vector<double> wl(n_), wr(n_), rho(n_);
    for (std::size_t i = 0; i < n_; ++i) {
        composite3_weights(std::span(x).first(i + 1),
                           std::span(wl).first(i + 1));
        composite3_weights(std::span(x).subspan(i),
                           std::span(wr).first(n_ - i));
        for (std::size_t j = 0; j < n_; ++j)
            rho[j] = (j <= i ? wl[j] : 0.0) + (j >= i ? wr[j - i] : 0.0);
        rho[0] += x[0] / 3.0; // the ball [0, r_min], integrand frozen there

        for (std::size_t j = 0; j < n_; ++j) {
            const double half =
                0.5 * w[i] * rho[j] * 4.0 * kPi * x[j] * x[j];
            const double ck = half * kbar_[i * n_ + j];
            const double ce = half * ebar_closed_form(x[i], x[j], a_);
            ak_[i * n_ + j] += ck;
            ak_[j * n_ + i] += ck;
            ae_[i * n_ + j] += ce;
            ae_[j * n_ + i] += ce;
        }
    }
}

namespace {

// Shared symmetrized double sum: pairs contribute f_i g_j + g_i f_j, so the
// value is exactly invariant under swapping f and g. Extended-precision
// accumulation keeps the roundoff of the O(n^2) sum below the slack floors
// even when the result is a small residue of cancellation.
template <class Kern>
double pair_sum(const RadialField& f, const RadialField& g, int n,
                Kern&& kern) {
    long double acc = 0.0L;
    for (int i = 0; i < n; ++i) {
        acc += static_cast<long double>(kern(i, i)) * f.v[i] * g.v[i];
        long double row = 0.0L;
        for (int j = i + 1; j < n; ++j)
            row += static_cast<long double>(kern(i, j)) *
                   (f.v[i] * g.v[j] + g.v[i] * f.v[j]);
        acc += row;
    }
    return static_cast<double>(acc);
}

// The plain sampled bilinear form sum_ij w_i w_j kbar_ij f_i g_j. Less
// accurate than the row-split rule but positive definite by construction,
// which makes it the right object for the structure checks below.
double sampled_form(const RadialField& f, const RadialField& g,
                    const RadialKernelTable& table) {
    const auto& w = table.grid().w;
    return pair_sum(f, g, table.grid().n(), [&](int i, int j) {
        return w[i] * w[j] * table.kbar(i, j);
    });
}

} // namespace

double V_oracle(const RadialField& f, const RadialField& g,
                const RadialKernelTable& table) {
    require_same_grid(f, g, table);
    return pair_sum(f, g, table.grid().n(),
                    [&table](int i, int j) { return table.k_pair(i, j); });
}

double exp_energy_oracle(const RadialField& f, const RadialField& g,
                         const RadialKernelTable& table) {
    require_same_grid(f, g, table);
    return pair_sum(f, g, table.grid().n(),
                    [&table](int i, int j) { return table.e_pair(i, j); });
}

double V_oracle(const BoxField& f, const BoxField& g, const KernelParams& p,
                int stride) {
    p.validate();
    if (f.grid.n != g.grid.n || f.grid.L != g.grid.L)
        throw std::invalid_argument("box V_oracle: grid mismatch");
    if (stride < 1)
        throw std::invalid_argument("box V_oracle: stride must be >= 1");
    const int n = f.grid.n;
    const double h = f.grid.h();
    std::vector<double> fs, gs, xs, ys, zs;
    for (int i = 0; i < n; i += stride)
        for (int j = 0; j < n; j += stride)
            for (int k = 0; k < n; k += stride) {
                const std::size_t id =
                    static_cast<std::size_t>(f.grid.idx(i, j, k));
                fs.push_back(f.v[id]);
                gs.push_back(g.v[id]);
                xs.push_back(f.grid.coord(i));
                ys.push_back(f.grid.coord(j));
                zs.push_back(f.grid.coord(k));
            }
    const std::size_t m = fs.size();
    const double cell = stride * h;
    const double w6 = std::pow(cell, 6);
    double acc = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        acc += eval_K(0.0, p) * fs[i] * gs[i];
        double row = 0.0;
        for (std::size_t j = i + 1; j < m; ++j) {
            const double dx = xs[i] - xs[j], dy = ys[i] - ys[j],
                         dz = zs[i] - zs[j];
            const double rr = std::sqrt(dx * dx + dy * dy + dz * dz);
            row += eval_K(rr, p) * (fs[i] * gs[j] + gs[i] * fs[j]);
        }
        acc += row;
    }
    return acc * w6;
}

EnergyPair V_fast(const RadialField& f, const RadialField& g,
                  const KernelParams& p) {
    p.validate();
    if (f.grid.get() != g.grid.get())
        throw std::invalid_argument("V_fast: fields on different grids");
    const RadialGrid& grid = *f.grid;
    std::vector<double> phi = detail::radial_K_convolve(grid, f.v, p);
    double acc = 0.0;
    for (int i = 0; i < grid.n(); ++i)
        acc += grid.w[i] * phi[i] * g.v[i];
    EnergyPair out;
    out.value = acc;
    out.method = EnergyPair::Method::via_potential;
    out.est_error = 1e-8 * std::abs(acc) + 1e-14;
    return out;
}

double exp_energy_fast(const RadialField& f, const RadialField& g, double a) {
    if (f.grid.get() != g.grid.get())
        throw std::invalid_argument("exp_energy_fast: fields on different grids");
    const RadialGrid& grid = *f.grid;
    std::vector<double> psi = detail::radial_exp_convolve(grid, g.v, a);
    double acc = 0.0;
    for (int i = 0; i < grid.n(); ++i)
        acc += grid.w[i] * psi[i] * f.v[i];
    return acc;
}

double coulomb_energy(const RadialField& f, const RadialField& g) {
    if (f.grid.get() != g.grid.get())
        throw std::invalid_argument("coulomb_energy: fields on different grids");
    const RadialGrid& grid = *f.grid;
    const int n = grid.n();
    std::vector<double> x(n + 1, 0.0), g1(n + 1, 0.0), g2(n + 1, 0.0);
    for (int i = 0; i < n; ++i) {
        x[i + 1] = grid.r[i];
        g1[i + 1] = grid.r[i] * g.v[i];
        g2[i + 1] = grid.r[i] * grid.r[i] * g.v[i];
    }
    std::vector<double> cum1(n + 1), cum2(n + 1);
    cumulative_integral(x, g1, cum1);
    cumulative_integral(x, g2, cum2);
    const double tot1 = cum1.back();
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        const double r = grid.r[i];
        const double phi_c =
            4.0 * kPi * (cum2[i + 1] / r + (tot1 - cum1[i + 1]));
        acc += grid.w[i] * phi_c * f.v[i];
    }
    return acc;
}

double e_norm_sq(const RadialField& u, const KernelParams& p) {
    const double d = dirichlet_seminorm(u);
    RadialField u2;
    u2.grid = u.grid;
    u2.v.resize(u.v.size());
    for (std::size_t i = 0; i < u.v.size(); ++i)
        u2.v[i] = u.v[i] * u.v[i];
    const double V = V_fast(u2, u2, p).value;
    return d * d + std::sqrt(std::max(V, 0.0));
}

CheckReport check_cauchy_schwarz(const RadialKernelTable& table, int trials,
                                 std::uint64_t seed) {
    if (trials < 1)
        throw std::invalid_argument("check_cauchy_schwarz: trials must be >= 1");
    CheckReport rep;
    rep.check = "cauchy_schwarz";
    rep.trials = trials;
    rep.seed = seed;
    rep.worst_slack = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(seed);
    for (int t = 0; t < trials; ++t) {
        RadialField f = random_mixture(table.grid_ptr(), rng);
        RadialField g = random_mixture(table.grid_ptr(), rng);
        const double vff = sampled_form(f, f, table);
        const double vgg = sampled_form(g, g, table);
        const double vfg = sampled_form(f, g, table);
        if (vfg != sampled_form(g, f, table)) // symmetry must be exact
            rep.pass = false;
        const double scale =
            std::max(vff * vgg, std::numeric_limits<double>::min());
        const double slack = (vff * vgg - vfg * vfg) / scale;
        rep.worst_slack = std::min(rep.worst_slack, slack);
        rep.scale = std::max(rep.scale, vff * vgg);
        if (slack < -1e-9)
            rep.pass = false;
    }
    return rep;
}

CheckReport check_positivity(const RadialKernelTable& table, int trials,
                             std::uint64_t seed) {
    if (trials < 1)
        throw std::invalid_argument("check_positivity: trials must be >= 1");
    CheckReport rep;
    rep.check = "positivity";
    rep.trials = trials;
    rep.seed = seed;
    rep.min_value = std::numeric_limits<double>::infinity();
    rep.min_normalized = std::numeric_limits<double>::infinity();
    std::mt19937_64 rng(seed);
    for (int t = 0; t < trials; ++t) {
        RadialField f = random_mixture(table.grid_ptr(), rng);
        const double vff = sampled_form(f, f, table);
        const double l2 = lp_norm(f, 2.0);
        const double norm4 = l2 * l2 * l2 * l2;
        rep.min_value = std::min(rep.min_value, vff);
        if (norm4 > 0.0)
            rep.min_normalized = std::min(rep.min_normalized, vff / norm4);
        if (!(vff > 0.0))
            rep.pass = false;
    }
    rep.worst_slack = rep.min_value;
    return rep;
}

CheckReport check_exponential_layer(const RadialKernelTable& table) {
    CheckReport rep;
    rep.check = "exponential_layer";
    rep.seed = 0;

    // scalar layer identity 1 - e^{-x} = x int_0^1 e^{-t x} dt
    double worst = 0.0;
    for (double x : logspace(1e-3, 50.0, 40)) {
        const double lhs = -std::expm1(-x);
        const double rhs =
            x * quad_adaptive([x](double t) { return std::exp(-t * x); }, 0.0,
                              1.0);
        worst = std::max(worst,
                         std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs)));
        ++rep.trials;
    }
    rep.worst_slack = worst;
    if (worst > 1e-12)
        rep.pass = false;

    // layered energy: V_a(f,f) = int_0^1 E_exp(f,f; a/t) dt / a
    RadialField f;
    f.grid = table.grid_ptr();
    f.v.resize(table.grid().n());
    for (int i = 0; i < table.grid().n(); ++i)
        f.v[i] = std::exp(-table.grid().r[i] * table.grid().r[i]);
    const double a = table.a();
    const double layered =
        quad_adaptive(
            [&](double t) { return exp_energy_fast(f, f, a / t); }, 0.0, 1.0,
            1e-10) /
        a;
    const double direct = V_oracle(f, f, table);
    rep.min_value = std::abs(layered - direct) / std::abs(direct);
    rep.scale = direct;
    if (rep.min_value > 1e-6)
        rep.pass = false;
    return rep;
}

double weight_w(double r, double alpha) {
    if (r <= 0.0)
        return 0.0; // continuous extension: the log factor diverges
    return 1.0 / (std::pow(1.0 + r * r, 0.25) *
                  std::pow(1.0 + std::abs(std::log(r)), alpha));
}

double weight_z(double r, double gamma) {
    if (r < 0.0)
        throw std::domain_error("weight_z: radius must be nonnegative");
    return 1.0 / std::pow(1.0 + r, gamma);
}

LowerBoundRatio lower_bound_ratio(const RadialField& f, double alpha,
                                  const KernelParams& p) {
    if (!(alpha > 0.5))
        throw std::invalid_argument("lower_bound_ratio: alpha must exceed 1/2");
    p.validate();
    const RadialGrid& g = *f.grid;
    double mx = 0.0;
    for (double v : f.v)
        mx = std::max(mx, std::abs(v));
    for (double v : f.v)
        if (v < -1e-12 * std::max(mx, 1.0))
            throw std::invalid_argument(
                "lower_bound_ratio: f must be nonnegative");
    LowerBoundRatio out;
    if (mx == 0.0) {
        out.ratio = std::numeric_limits<double>::infinity();
        out.zero_input = true;
        return out;
    }
    const double vff = V_fast(f, f, p).value;
    double wint = 0.0;
    for (int i = 0; i < g.n(); ++i)
        wint += g.w[i] * weight_w(g.r[i], alpha) * f.v[i];
    out.ratio = vff / (wint * wint);
    return out;
}

SlackReport check_L3_inequality(const RadialField& u, const KernelParams& p) {
    RadialField u2;
    u2.grid = u.grid;
    u2.v.resize(u.v.size());
    for (std::size_t i = 0; i < u.v.size(); ++i)
        u2.v[i] = u.v[i] * u.v[i];
    RadialPotential pot = solve_potential_radial(u2, p);
    const double lhs = std::sqrt(std::max(pot.a_norm_sq, 0.0)) *
                       dirichlet_seminorm(u) / kPi;
    const double cube = lp_norm(u, 3.0);
    const double rhs = cube * cube * cube;
    SlackReport rep;
    rep.slack = lhs - rhs;
    rep.scale = std::max({lhs, rhs, std::numeric_limits<double>::min()});
    return rep;
}

EmbeddingReport check_weighted_embeddings(const RadialField& u,
                                          const WeightParams& w,
                                          const KernelParams& p) {
    w.validate();
    const RadialGrid& g = *u.grid;
    RadialField u2;
    u2.grid = u.grid;
    u2.v.resize(u.v.size());
    for (std::size_t i = 0; i < u.v.size(); ++i)
        u2.v[i] = u.v[i] * u.v[i];
    const double d = dirichlet_seminorm(u);
    const double V = V_fast(u2, u2, p).value;
    EmbeddingReport rep;
    rep.denom = d * d + std::sqrt(std::max(V, 0.0));
    double wi = 0.0, zi = 0.0;
    for (int i = 0; i < g.n(); ++i) {
        wi += g.w[i] * weight_w(g.r[i], w.alpha) * u2.v[i];
        zi += g.w[i] * weight_z(g.r[i], w.gamma) * u2.v[i];
    }
    if (rep.denom > 0.0) {
        rep.ratio_w = wi / rep.denom;
        rep.ratio_z = zi / rep.denom;
    }
    return rep;
}

} // namespace bopo
