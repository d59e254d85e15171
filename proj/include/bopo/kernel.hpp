#pragma once

#include <span>
#include <vector>

/// Closed forms for the Bopp-Podolsky kernel
///
///     K(r; a) = (1 - exp(-r/a)) / r,
///
/// its Coulomb and Yukawa constituents C(r) = 1/r and Y(r; a) = exp(-r/a)/r,
/// and the radial derivatives needed by the field solvers. K extends
/// continuously to r = 0 with K(0) = 1/a and is bounded by 1/a everywhere,
/// unlike C and Y which blow up at the origin.
namespace bopo {

/// Kernel parameters. `a` is the Podolsky length (the distance scale at
/// which the kernel departs from Coulomb), `q` the coupling carried along
/// to the energy functionals. Both enter only through a > 0 and q^2.
struct KernelParams {
    double a = 1.0;
    double q = 1.0;

    /// Throws std::invalid_argument unless a > 0 and q is finite.
    void validate() const;
};

/// K(r; a), cancellation-safe for r << a and exact at r = 0 (returns 1/a).
/// Relative accuracy is ~1e-15 over the whole range; throws on r < 0.
double eval_K(double r, const KernelParams& p);

/// Coulomb kernel 1/r. Throws std::domain_error at r = 0.
double eval_C(double r);

/// Yukawa kernel exp(-r/a)/r. Throws std::domain_error at r = 0.
double eval_Y(double r, const KernelParams& p);

/// Radial derivative dK/dr = (exp(-r/a)(1 + r/a) - 1) / r^2, which lies in
/// [-1/r^2, 0]: the kernel is strictly decreasing but flatter than Coulomb.
/// Series branch keeps full precision for r << a. Throws at r = 0.
double eval_gradK_radial(double r, const KernelParams& p);

/// Laplacian of K away from the origin: -exp(-r/a) / (a^2 r).
/// The origin is excluded (distributionally K carries a point mass there);
/// r = 0 throws std::domain_error.
double eval_lapK(double r, const KernelParams& p);

/// Radial derivative of the Laplacian: exp(-r/a)(1 + r/a) / (a^2 r^2).
/// Throws at r = 0.
double eval_grad_lapK_radial(double r, const KernelParams& p);

/// One row of a kernel table.
struct KernelSample {
    double r;
    double K;
    double C;
    double Y;
    double dK;
    double lapK;
};

/// Evaluates all kernel quantities at one radius (r > 0).
KernelSample sample_kernel(double r, const KernelParams& p);

/// Result of the convolution identity check below.
struct ConvolutionCheck {
    double max_rel_error = 0.0;
    double worst_radius = 0.0;
};

/// Verifies the factorization K = (1/a^2) C * Y (3d convolution) at the
/// given radii: the spherical reduction of (C * Y)(R) is evaluated with
/// adaptive quadrature,
///
///     (C * Y)(R) = (4 pi / R) int_0^R r exp(-r/a) dr
///                 + 4 pi int_R^inf exp(-r/a) dr,
///
/// divided by 4 pi a^2 and compared against eval_K(R) in relative terms.
ConvolutionCheck verify_CY_convolution(const KernelParams& p,
                                       std::span<const double> radii);

} // namespace bopo
