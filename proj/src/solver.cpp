#include "bopo/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <string>

namespace bopo {

namespace {

constexpr double kArmijoSlope = 1e-4;

// Norms matching each lane's sobolev gradient metric, so the convergence
// test and the Armijo slope speak the same language as the descent.
double h1_norm(const RadialField& f) {
    return std::sqrt(sobolev_inner(f, f));
}

double h1_norm(const BoxField& f) {
    const double d = dirichlet_seminorm(f);
    const double m = lp_norm(f, 2.0);
    return std::sqrt(d * d + m * m);
}

template <class Field>
Field axpy(const Field& u, double s, const Field& g) {
    Field out = u;
    for (std::size_t i = 0; i < out.v.size(); ++i)
        out.v[i] += s * g.v[i];
    return out;
}

// Inner product of the metric behind h1_norm. The box lane recovers it from
// the norm by polarization; the radial lane has the bilinear form directly.
double metric_inner(const RadialField& a, const RadialField& b) {
    return sobolev_inner(a, b);
}

double metric_inner(const BoxField& a, const BoxField& b) {
    const double np = h1_norm(axpy(a, 1.0, b));
    const double nm = h1_norm(axpy(a, -1.0, b));
    return 0.25 * (np * np - nm * nm);
}

// |P_eps| is judged against the sum of the magnitudes of its own terms, so
// the certificate is scale free.
double pohozaev_residual(const EnergyBreakdown& b, const ProblemParams& pp) {
    const double q2 = pp.kernel.q * pp.kernel.q;
    const double scale = b.dirichlet + 3.0 * pp.epsilon * b.mass +
                         3.0 * b.lp +
                         q2 * (5.0 * b.bp + b.exp_layer / (4.0 * pp.kernel.a));
    return scale > 0.0 ? std::fabs(b.P_eps) / scale : 0.0;
}

template <class Field>
void finalize(GroundState& out, Field u, const EnergyBreakdown& b, double gn,
              const ProblemParams& pp, bool converged) {
    out.breakdown = b;
    out.residual_grad = gn;
    out.residual_J = std::fabs(b.J_eps);
    out.residual_P = pohozaev_residual(b, pp);
    out.converged = converged;
    out.min_value = *std::min_element(u.v.begin(), u.v.end());
    out.u = std::move(u);
}

// Projection onto {J_eps = 0}: a secant iteration in the rescale parameter,
// seeded at the fibering maximum, driving the re-evaluated J of the landed
// state below j_target. Every trial resamples the same base state, so the
// interpolation error of one landing never feeds the next. The iterates are
// confined to a narrow window around the seed: the root belonging to the
// fiber maximum sits within interpolation-noise distance of it, while far
// outside the window J has spurious roots (most dangerously the vanishing
// limit, where J tends to zero together with the state). Returns the best
// landing found; the caller's convergence test is the final arbiter.
template <class Field>
Field land_on_manifold(const Field& u, const ProblemParams& pp, double t_seed,
                       double j_target) {
    auto j_of = [&](double t) {
        return t == 1.0 ? evaluate(u, pp).J_eps
                        : evaluate(fibering_rescale(u, t), pp).J_eps;
    };
    const double t_lo = 0.8 * t_seed, t_hi = 1.25 * t_seed;
    double t0 = t_seed, f0 = j_of(t0);
    double best_t = t0, best_f = f0;
    if (std::fabs(f0) > j_target) {
        double t1 = std::min(1.001 * t0, t_hi), f1 = j_of(t1);
        if (std::fabs(f1) < std::fabs(best_f)) {
            best_t = t1;
            best_f = f1;
        }
        for (int it = 0; it < 30 && std::fabs(best_f) > j_target; ++it) {
            if (f1 == f0)
                break;
            double t2 = t1 - f1 * (t1 - t0) / (f1 - f0);
            t2 = std::clamp(t2, t_lo, t_hi);
            if (t2 == t1)
                break;
            t0 = t1;
            f0 = f1;
            t1 = t2;
            f1 = j_of(t1);
            if (std::fabs(f1) < std::fabs(best_f)) {
                best_t = t1;
                best_f = f1;
            }
        }
    }
    return best_t == 1.0 ? u : fibering_rescale(u, best_t);
}

template <class Field>
GroundState solve_impl(const Field& init, const ProblemParams& pp,
                       const SolverConfig& cfg) {
    pp.validate();
    cfg.validate();
    if (!(pp.epsilon > 0.0))
        throw std::invalid_argument("solve_fixed_eps: epsilon must be positive");

    GroundState out;
    out.epsilon = pp.epsilon;
    Field u = init;
    double step = cfg.initial_step;

    // L-BFGS memory over loop-head states. The energy Hessian near the
    // minimizer is far stiffer across the peak region than the H1 metric
    // knows, so plain metric-gradient descent zigzags; a short curvature
    // history fixes the scale per mode.
    constexpr std::size_t kMemory = 10;
    std::vector<Field> mem_s, mem_y;
    std::vector<double> mem_rho;
    double gamma = 1.0;
    Field prev_u = u, prev_g = u;
    bool have_prev = false;

    for (int outer = 0;; ++outer) {
        // (i) projection. The fibering maximum seeds the manifold landing;
        // after it the state satisfies J_eps = 0 to far below J_tol, so the
        // convergence test below is really about the gradient.
        const FiberingResult pr = fibering_maximize(u, pp);
        const double j_target = std::min(
            std::max(1e-11 * std::fabs(pr.value), 1e-13), 0.25 * cfg.J_tol);
        u = land_on_manifold(u, pp, pr.t_star, j_target);
        if (cfg.recenter)
            u = recenter(u);

        const EnergyBreakdown b = evaluate(u, pp);
        out.energy_history.push_back(b.I_eps);
        const Field g = gradient(u, pp, GradientMetric::sobolev);
        const double gn = h1_norm(g);

        if (gn <= cfg.grad_tol && std::fabs(b.J_eps) <= cfg.J_tol) {
            finalize(out, std::move(u), b, gn, pp, true);
            return out;
        }
        if (outer >= cfg.max_outer_iters) {
            finalize(out, std::move(u), b, gn, pp, false);
            return out;
        }

        // Update the curvature memory from the latest pair of loop-head
        // states. Pairs failing the positive-curvature test are skipped,
        // and so are microscopic pairs: their inverse curvature 1/ys is
        // pure noise and one such pair can blow the model up completely.
        const double un = std::sqrt(metric_inner(u, u));
        if (have_prev) {
            Field sk = axpy(u, -1.0, prev_u);
            Field yk = axpy(g, -1.0, prev_g);
            const double ys = metric_inner(yk, sk);
            const double yy = metric_inner(yk, yk);
            const double ss = metric_inner(sk, sk);
            if (ys > 1e-10 * std::sqrt(yy * ss) && yy > 0.0 &&
                ss > 1e-20 * un * un) {
                if (mem_s.size() == kMemory) {
                    mem_s.erase(mem_s.begin());
                    mem_y.erase(mem_y.begin());
                    mem_rho.erase(mem_rho.begin());
                }
                mem_s.push_back(std::move(sk));
                mem_y.push_back(std::move(yk));
                mem_rho.push_back(1.0 / ys);
                gamma = ys / yy;
            }
        }
        prev_u = u;
        prev_g = g;
        have_prev = true;

        // Two-loop recursion: d approximates (Hessian of the projected
        // energy)^{-1} g in the metric, and -d is the search direction.
        Field d = g;
        std::vector<double> alpha(mem_s.size());
        for (std::size_t i = mem_s.size(); i-- > 0;) {
            alpha[i] = mem_rho[i] * metric_inner(mem_s[i], d);
            d = axpy(d, -alpha[i], mem_y[i]);
        }
        for (double& dv : d.v)
            dv *= gamma;
        for (std::size_t i = 0; i < mem_s.size(); ++i) {
            const double beta = mem_rho[i] * metric_inner(mem_y[i], d);
            d = axpy(d, alpha[i] - beta, mem_s[i]);
        }
        double dirslope = metric_inner(g, d);
        double dn = std::sqrt(std::max(metric_inner(d, d), 0.0));
        if (!(dirslope > 0.0) || !std::isfinite(dirslope) ||
            !std::isfinite(dn) || dn > 1e4 * gn) {
            // degenerate curvature model: drop it, take the plain gradient
            mem_s.clear();
            mem_y.clear();
            mem_rho.clear();
            gamma = 1.0;
            d = g;
            dirslope = gn * gn;
            dn = gn;
        }

        // (ii) one descent step with Armijo backtracking along -d.
        // Candidates are judged by their exact fiber maximum, which needs no
        // resampling, so the comparison stays sharp down to roundoff; the
        // accepted state is landed on the manifold at the next loop head.
        // If the quasi-Newton direction exhausts the backtracking budget the
        // memory is cleared and the plain gradient gets one retry; trial
        // steps below the resolution of the state are never accepted.
        bool accepted = false;
        for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
            double s = mem_s.empty() ? std::min(cfg.initial_step, 2.0 * step)
                                     : 1.0;
            for (int bt = 0; bt < 60 && !accepted; ++bt) {
                if (s * dn <= 1e-14 * un)
                    break;
                Field cand = axpy(u, -s, d);
                double cand_value = std::numeric_limits<double>::infinity();
                try {
                    const FiberingResult pc = fibering_maximize(cand, pp);
                    // Loop-head states sit at t* = 1; a candidate whose
                    // fiber maximum ran off to an extreme t* has drifted
                    // far along the scaling direction (the road to the
                    // vanishing limit), so it is treated like a failure.
                    if (pc.t_star > 0.25 && pc.t_star < 4.0)
                        cand_value = pc.value;
                } catch (const std::exception&) {
                    // no interior fiber maximum: the step left the cone the
                    // projection can handle, shorten it like a failed trial
                }
                if (cand_value <= b.I_eps - kArmijoSlope * s * dirslope) {
                    u = std::move(cand);
                    step = s;
                    ++out.iterations;
                    accepted = true;
                } else {
                    s *= 0.5;
                }
            }
            if (!accepted) {
                if (mem_s.empty())
                    break;
                mem_s.clear();
                mem_y.clear();
                mem_rho.clear();
                gamma = 1.0;
                d = g;
                dirslope = gn * gn;
                dn = gn;
            }
        }
        if (!accepted) {
            // the line search cannot improve the fiber maximum anymore
            finalize(out, std::move(u), b, gn, pp, false);
            return out;
        }
    }
}

template <class Field, class Dict>
double weak_residual_impl(const Field& u, const ProblemParams& pp,
                          const Dict& dictionary) {
    pp.validate();
    double worst = 0.0;
    for (const Field& v : dictionary) {
        const double nv = h1_norm(v);
        if (nv == 0.0)
            continue;
        worst = std::max(worst, std::fabs(first_variation(u, v, pp)) / nv);
    }
    return worst;
}

std::vector<RadialField> radial_dictionary(
    const std::shared_ptr<const RadialGrid>& g) {
    std::vector<RadialField> dict;
    auto add = [&](auto&& fn) {
        RadialField f;
        f.grid = g;
        f.v.resize(g->n());
        for (int i = 0; i < g->n(); ++i)
            f.v[i] = fn(g->r[i]);
        dict.push_back(std::move(f));
    };
    // smooth low-order modes
    for (const double beta : {0.25, 1.0, 4.0})
        add([beta](double r) { return std::exp(-beta * r * r); });
    add([](double r) { return r * std::exp(-r * r); });
    add([](double r) {
        const double d = 1.0 + r * r;
        return 1.0 / (d * d);
    });
    // localized bumps across the domain
    const double lo = g->r_max / 200.0, hi = 0.8 * g->r_max;
    for (int k = 0; k < 12; ++k) {
        const double c = lo * std::pow(hi / lo, k / 11.0);
        const double sigma = c / 3.0 + g->r_max / 100.0;
        add([c, sigma](double r) {
            const double z = (r - c) / sigma;
            return std::exp(-z * z);
        });
    }
    return dict;
}

std::vector<BoxField> box_dictionary(const BoxGrid& g) {
    std::vector<BoxField> dict;
    auto add = [&](auto&& fn) {
        BoxField f;
        f.grid = g;
        f.v.resize(g.size());
        for (int i = 0; i < g.n; ++i)
            for (int j = 0; j < g.n; ++j)
                for (int k = 0; k < g.n; ++k)
                    f.v[g.idx(i, j, k)] =
                        fn(g.coord(i), g.coord(j), g.coord(k));
        dict.push_back(std::move(f));
    };
    for (const double beta : {0.25, 1.0, 4.0})
        add([beta](double x, double y, double z) {
            return std::exp(-beta * (x * x + y * y + z * z));
        });
    const double c = g.L / 4.0, sigma = g.L / 8.0;
    for (const double sx : {-c, c})
        for (const double sy : {-c, c})
            add([sx, sy, sigma](double x, double y, double z) {
                const double d2 = (x - sx) * (x - sx) + (y - sy) * (y - sy) +
                                  z * z;
                return std::exp(-d2 / (sigma * sigma));
            });
    return dict;
}

} // namespace

void SolverConfig::validate() const {
    if (max_outer_iters < 1)
        throw std::invalid_argument("solver: max_outer_iters must be >= 1");
    if (!(grad_tol > 0.0) || !(J_tol > 0.0) || !(pohozaev_tol > 0.0))
        throw std::invalid_argument("solver: tolerances must be positive");
    if (!(initial_step > 0.0))
        throw std::invalid_argument("solver: initial_step must be positive");
}

std::vector<double> halving_schedule(int halvings) {
    if (halvings < 0)
        throw std::invalid_argument("halving_schedule: negative count");
    std::vector<double> s(static_cast<std::size_t>(halvings) + 1);
    for (int k = 0; k <= halvings; ++k)
        s[static_cast<std::size_t>(k)] = std::ldexp(1.0, -k);
    return s;
}

GroundState solve_fixed_eps(const RadialField& init, const ProblemParams& pp,
                            const SolverConfig& cfg) {
    return solve_impl(init, pp, cfg);
}

GroundState solve_fixed_eps(const BoxField& init, const ProblemParams& pp,
                            const SolverConfig& cfg) {
    return solve_impl(init, pp, cfg);
}

double weak_residual(const RadialField& u, const ProblemParams& pp) {
    return weak_residual_impl(u, pp, radial_dictionary(u.grid));
}

double weak_residual(const BoxField& u, const ProblemParams& pp) {
    return weak_residual_impl(u, pp, box_dictionary(u.grid));
}

RadialField recenter(const RadialField& u) { return u; }

BoxField recenter(const BoxField& u) {
    const int n = u.grid.n;
    int bi = 0, bj = 0, bk = 0;
    double best = -1.0;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k) {
                const double m = std::fabs(u.v[u.grid.idx(i, j, k)]);
                if (m > best) {
                    best = m;
                    bi = i;
                    bj = j;
                    bk = k;
                }
            }
    const int di = (bi - n / 2 + n) % n, dj = (bj - n / 2 + n) % n,
              dk = (bk - n / 2 + n) % n;
    BoxField out;
    out.grid = u.grid;
    out.v.resize(u.v.size());
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                out.v[out.grid.idx(i, j, k)] =
                    u.v[u.grid.idx((i + di) % n, (j + dj) % n, (k + dk) % n)];
    return out;
}

ContinuationResult continue_to_zero_mass(
    std::shared_ptr<const RadialGrid> grid, const ProblemParams& pp0,
    std::span<const double> schedule, const SolverConfig& cfg) {
    pp0.validate();
    cfg.validate();
    if (!grid)
        throw std::invalid_argument("continue_to_zero_mass: null grid");
    grid->validate();
    if (schedule.empty())
        throw std::invalid_argument("continue_to_zero_mass: empty schedule");
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        if (!(schedule[k] > 0.0))
            throw std::invalid_argument(
                "continue_to_zero_mass: schedule entries must be positive");
        if (k > 0 && !(schedule[k] < schedule[k - 1]))
            throw std::invalid_argument(
                "continue_to_zero_mass: schedule must be strictly decreasing");
    }

    RadialField u;
    u.grid = grid;
    u.v.resize(grid->n());
    for (int i = 0; i < grid->n(); ++i)
        u.v[i] = std::exp(-grid->r[i] * grid->r[i]);

    ContinuationResult out;
    double m_first = 0.0, lp_floor_line = 0.0;
    out.lp_floor = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < schedule.size(); ++k) {
        ProblemParams pp = pp0;
        pp.epsilon = schedule[k];
        const auto t0 = std::chrono::steady_clock::now();
        GroundState gs = solve_fixed_eps(u, pp, cfg);
        const auto t1 = std::chrono::steady_clock::now();

        ContinuationEntry e;
        e.epsilon = pp.epsilon;
        e.m_eps = gs.breakdown.I_eps;
        e.grad_res = gs.residual_grad;
        e.J_res = gs.residual_J;
        e.P_res = gs.residual_P;
        e.Lp_norm = std::pow(pp.p * gs.breakdown.lp, 1.0 / pp.p);
        e.E_norm = std::sqrt(2.0 * gs.breakdown.dirichlet +
                             std::sqrt(4.0 * gs.breakdown.bp));
        e.wall_ms =
            std::chrono::duration<double, std::milli>(t1 - t0).count();
        e.converged = gs.converged;
        out.trace.entries.push_back(e);
        out.state = std::move(gs);

        if (!e.converged) {
            out.trace.failure = "solve at epsilon=" +
                                std::to_string(pp.epsilon) +
                                " did not converge";
            break;
        }
        if (k == 0) {
            m_first = e.m_eps;
            lp_floor_line = 0.25 * e.Lp_norm;
        }
        if (e.m_eps > m_first + 1e-8) {
            out.trace.failure =
                "m_eps rose above the first level of the schedule";
            break;
        }
        if (!(e.m_eps > 0.0)) {
            out.trace.failure = "I_eps lost positivity";
            break;
        }
        if (e.Lp_norm < lp_floor_line) {
            out.trace.failure = "Lp norm fell through the family floor";
            break;
        }
        out.lp_floor = std::min(out.lp_floor, e.Lp_norm);
        u = std::get<RadialField>(out.state.u);
    }

    // judge the final iterate against the limit problem itself
    ProblemParams ppz = pp0;
    ppz.epsilon = 0.0;
    const RadialField& uf = std::get<RadialField>(out.state.u);
    if (!uf.v.empty()) {
        out.I_zero_mass = evaluate(uf, ppz).I;
        out.weak_residual_zero = weak_residual(uf, ppz);
    }
    return out;
}

} // namespace bopo
