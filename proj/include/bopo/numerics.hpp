#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

/// Shared numerical utilities: finite-difference weights on scattered nodes,
/// shape-preserving cubic interpolation, adaptive quadrature (GSL-backed),
/// cubic-panel cumulative integration, and exponentially weighted prefix /
/// suffix integrals used by the screened-potential reductions.
namespace bopo {

/// Finite-difference weights on arbitrary nodes (Fornberg's recursion).
/// Fills w[j] so that sum_j w[j] f(x[j]) approximates d^m f / dx^m at z.
/// Exact for polynomials up to degree x.size() - 1.
void fornberg_weights(double z, std::span<const double> x, int m,
                      std::span<double> w);

/// Monotone (Fritsch-Carlson) piecewise-cubic Hermite interpolant.
/// Shape preserving: no overshoot between nodes, local monotonicity of the
/// data is kept. Evaluation outside [x_front, x_back] clamps to the edge
/// values; callers wanting zero extension test the range themselves.
class Pchip {
  public:
    Pchip() = default;
    Pchip(std::vector<double> x, std::vector<double> y);

    double operator()(double xq) const;
    double derivative(double xq) const;

    double x_front() const { return x_.front(); }
    double x_back() const { return x_.back(); }

  private:
    int interval(double xq) const;
    std::vector<double> x_, y_, d_; // nodes, values, node slopes
};

/// Adaptive quadrature of f over [lo, hi] (GSL QAG, 15-point Gauss-Kronrod).
double quad_adaptive(const std::function<double(double)>& f, double lo,
                     double hi, double rel_tol = 1e-12);

/// Adaptive quadrature of f over [lo, +inf) (GSL QAGIU).
double quad_to_inf(const std::function<double(double)>& f, double lo,
                   double rel_tol = 1e-12);

/// Cumulative integral on scattered nodes: out[i] = int_{x[0]}^{x[i]} y dx.
/// Each interval integrates the local 4-point cubic interpolant exactly
/// (two-point Gauss rule on the cubic), so the result is O(h^4) accurate.
void cumulative_integral(std::span<const double> x, std::span<const double> y,
                         std::span<double> out);

/// Moments of the decaying exponential over a panel,
///     basis[k] = int_0^len s^k exp(-rate * s) ds,   k = 0..3,
/// computed by a stable upward recursion (series branch for rate*len < 1).
void exp_panel_moments(double len, double rate, std::span<double, 4> basis);

/// Exponentially weighted running integrals over scattered nodes for the
/// one-dimensional screened-kernel reductions. With g the samples of the
/// integrand and rate >= 0:
///
///   prefix[i] = int_{x[0]}^{x[i]} g(s) exp(-rate (x[i] - s)) ds
///   suffix[i] = int_{x[i]}^{x[n-1]} g(s) exp(-rate (s - x[i])) ds
///
/// Both use the one-pass recurrence value(next) = decay * value(prev) +
/// panel, with each panel integrating the local 4-point cubic of g against
/// the exponential weight exactly. No large exponentials appear, so the
/// recursion is stable for any rate and grid.
void exp_weighted_prefix(std::span<const double> x, std::span<const double> g,
                         double rate, std::span<double> prefix);
void exp_weighted_suffix(std::span<const double> x, std::span<const double> g,
                         double rate, std::span<double> suffix);

/// n log-spaced points in [lo, hi], lo > 0.
std::vector<double> logspace(double lo, double hi, int n);

/// FNV-1a 64-bit hash of a byte range (stable across runs and platforms).
std::uint64_t fnv1a(const void* data, std::size_t len);
std::uint64_t fnv1a(std::span<const double> values);

} // namespace bopo
