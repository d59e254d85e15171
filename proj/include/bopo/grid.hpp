#pragma once

#include "bopo/kernel.hpp"

#include <array>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

/// Discrete radial and 3D-box scalar fields, integration weights, norms,
/// radial differentiation, and the fibering rescale u -> t^2 u(t x).
namespace bopo {

/// Graded radial grid on (0, r_max] with quadrature weights for volume
/// integrals of radial functions: sum_i w[i] f(r[i]) ~ int_0^{r_max} f 4pi r^2 dr.
/// Log-spaced nodes up to the knee radius resolve the screened-kernel
/// transition near r = a; the far region is uniform. Weights are composite
/// Simpson in the mapped coordinate of each piece with the volume element
/// folded in, plus the tiny central ball handled as a constant panel.
struct RadialGrid {
    std::vector<double> r; // strictly increasing nodes in (0, r_max]
    std::vector<double> w; // positive quadrature weights, volume element included
    double r_max = 0.0;
    double r_min = 0.0; // first node; the ball [0, r_min] is folded into w[0]
    int junction = -1;  // index of the knee node where log spacing ends

    int n() const { return static_cast<int>(r.size()); }
    void validate() const;
};

/// Hybrid grid: log-spaced on [r_max * 1e-5, r_knee], uniform on
/// [r_knee, r_max]; about half the nodes land in each piece.
RadialGrid make_radial_grid(double r_max, int n, double r_knee);

/// Default grid for kernel length a: r_max = 40 a, knee at 4 a.
RadialGrid default_radial_grid(const KernelParams& kp, int n = 2048);

/// Uniform periodic-style box [-L, L)^3, nodes x_i = -L + i h, h = 2L/n.
struct BoxGrid {
    int n = 0;      // per-axis point count, even
    double L = 0.0; // half-width

    double h() const { return 2.0 * L / n; }
    double coord(int i) const { return -L + i * h(); }
    std::size_t size() const {
        return static_cast<std::size_t>(n) * n * n;
    }
    std::size_t idx(int i, int j, int k) const {
        return (static_cast<std::size_t>(i) * n + j) * n + k;
    }
    void validate() const;
};

struct RadialField {
    std::shared_ptr<const RadialGrid> grid;
    std::vector<double> v;

    void check_finite() const;
};

struct BoxField {
    BoxGrid grid;
    std::vector<double> v;

    void check_finite() const;
};

/// sum_i w[i] f[i] over the radial grid.
double integrate(const RadialGrid& g, std::span<const double> f);

/// L^p norm, p in [1, inf]; p = inf is the max norm.
double lp_norm(const RadialField& f, double p);
double lp_norm(const BoxField& f, double p);

/// ||grad f||_2: radial derivative quadrature, or spectral on the box.
double dirichlet_seminorm(const RadialField& f);
double dirichlet_seminorm(const BoxField& f);

/// Nodewise df/dr by 5-point finite-difference stencils on the graded nodes.
std::vector<double> radial_derivative(const RadialGrid& g,
                                      std::span<const double> f);

/// The raw stencils behind radial_derivative, for callers assembling sparse
/// derivative operators: row i applies w to f[start .. start+4].
struct DerivStencil {
    int start;
    std::array<double, 5> w;
};
std::vector<DerivStencil> derivative_stencils(const RadialGrid& g);

/// u -> t^2 u(t x) on the same grid; monotone cubic resampling with zero
/// extension beyond the grid. t must be positive.
RadialField fibering_rescale(const RadialField& u, double t);
BoxField fibering_rescale(const BoxField& u, double t);

/// Fraction of the |u|^6 mass in the outer 10% of the domain; a value that
/// is not small says the domain is truncating the field.
double tail_mass_fraction(const RadialField& u);
double tail_mass_fraction(const BoxField& u);

namespace detail {

/// Serializes FFTW plan creation, which is not reentrant.
std::mutex& fftw_plan_mutex();

} // namespace detail

} // namespace bopo
