#include "bopo/kernel.hpp"

#include "bopo/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace bopo {

void KernelParams::validate() const {
    if (!(a > 0.0) || !std::isfinite(a))
        throw std::invalid_argument("kernel parameter a must be positive");
    if (q == 0.0 || !std::isfinite(q))
        throw std::invalid_argument("coupling q must be nonzero and finite");
}

namespace {

void require_nonnegative(double r) {
    if (!(r >= 0.0))
        throw std::domain_error("kernel radius must be nonnegative");
}

void require_positive(double r) {
    if (!(r > 0.0))
        throw std::domain_error("kernel radius must be positive");
}

// exp(-x)(1 + x) - 1, the numerator of r^2 dK/dr in x = r/a. The two
// leading orders cancel, so small arguments go through the alternating
// series sum_{n>=2} (-1)^n (1-n)/n! x^n = -x^2/2 + x^3/3 - x^4/8 + ...
double expm1_weighted(double x) {
    if (x < 0.5) {
        double term = -0.5 * x * x; // n = 2
        double sum = term;
        double pw = x * x;
        double fact = 2.0;
        for (int n = 3; n < 32; ++n) {
            pw *= x;
            fact *= n;
            term = (n % 2 == 0 ? 1.0 : -1.0) * (1.0 - n) / fact * pw;
            sum += term;
            if (std::abs(term) < 1e-18 * std::abs(sum))
                break;
        }
        return sum;
    }
    return std::expm1(-x) + x * std::exp(-x);
}

} // namespace

double eval_K(double r, const KernelParams& p) {
    p.validate();
    require_nonnegative(r);
    if (r == 0.0)
        return 1.0 / p.a;
    // (1 - exp(-r/a))/r without the subtraction: -expm1 keeps full
    // relative precision down to denormal radii.
    return -std::expm1(-r / p.a) / r;
}

double eval_C(double r) {
    require_positive(r);
    return 1.0 / r;
}

double eval_Y(double r, const KernelParams& p) {
    p.validate();
    require_positive(r);
    return std::exp(-r / p.a) / r;
}

double eval_gradK_radial(double r, const KernelParams& p) {
    p.validate();
    require_positive(r);
    return expm1_weighted(r / p.a) / (r * r);
}

double eval_lapK(double r, const KernelParams& p) {
    p.validate();
    require_positive(r);
    return -std::exp(-r / p.a) / (p.a * p.a * r);
}

double eval_grad_lapK_radial(double r, const KernelParams& p) {
    p.validate();
    require_positive(r);
    const double x = r / p.a;
    return std::exp(-x) * (1.0 + x) / (p.a * p.a * r * r);
}

KernelSample sample_kernel(double r, const KernelParams& p) {
    return KernelSample{r,
                        eval_K(r, p),
                        eval_C(r),
                        eval_Y(r, p),
                        eval_gradK_radial(r, p),
                        eval_lapK(r, p)};
}

ConvolutionCheck verify_CY_convolution(const KernelParams& p,
                                       std::span<const double> radii) {
    p.validate();
    ConvolutionCheck out;
    for (double R : radii) {
        require_positive(R);
        const double a = p.a;
        const double near = quad_adaptive(
            [a](double r) { return r * std::exp(-r / a); }, 0.0, R);
        const double far =
            quad_to_inf([a](double r) { return std::exp(-r / a); }, R);
        const double conv = (near / R + far) / (a * a);
        const double rel = std::abs(conv - eval_K(R, p)) / eval_K(R, p);
        if (rel > out.max_rel_error) {
            out.max_rel_error = rel;
            out.worst_radius = R;
        }
    }
    return out;
}

} // namespace bopo
