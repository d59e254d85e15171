#pragma once

#include "bopo/bp_energy.hpp"
#include "bopo/grid.hpp"
#include "bopo/kernel.hpp"
#include "bopo/numerics.hpp"

#include <memory>
#include <vector>

/// Action functionals of the perturbed zero-mass system: the energies I and
/// I_eps, the Pohozaev functional P_eps, the Nehari-Pohozaev functional
/// J_eps, first variations with their Riesz gradients, and the fibering map
/// t -> I_eps(t^2 u(t x)).
namespace bopo {

/// Parameters of the variational problem. The kernel carries the screening
/// length a and the coupling q; p is the focusing exponent; epsilon is the
/// perturbation mass (the limit problem has epsilon = 0).
struct ProblemParams {
    KernelParams kernel;
    double p = 4.0;
    double epsilon = 1.0;

    /// Throws std::invalid_argument unless 3 < p < 6 and epsilon >= 0
    /// (kernel invariants included).
    void validate() const;
};

/// Every scalar functional of a state in one record.
///
///   dirichlet = 1/2 ||grad u||_2^2     mass = 1/2 ||u||_2^2
///   bp        = 1/4 V(u^2, u^2)        lp   = 1/p ||u||_p^p
///   I         = dirichlet + q^2 bp - lp
///   I_eps     = I + eps mass
///
/// P_eps and J_eps mix the V interaction with the exponential layer
/// E = iint e^{-|x-y|/a} u^2(x) u^2(y). With D2 = ||grad u||^2,
/// M2 = ||u||_2^2 and L = ||u||_p^p:
///
///   P_eps = 1/2 D2 + 3/2 eps M2 - (3/p) L      + (q^2/4)(5 V + E/a)
///   J_eps = 3/2 D2 + 1/2 eps M2 - (2p-3)/p L   + (q^2/4)(3 V - E/a)
///
/// J_eps = 2 I_eps'(u)[u] - P_eps, and equals the t-derivative of the
/// fibering map at t = 1; differentiating the rescaled interaction is what
/// produces the two auxiliary kernels 5K(r) + e^{-r/a}/a and
/// 3K(r) - e^{-r/a}/a.
struct EnergyBreakdown {
    double dirichlet = 0.0;
    double mass = 0.0;
    double bp = 0.0;
    double lp = 0.0;
    double exp_layer = 0.0; // E above, kept for the recombined-energy identity
    double I = 0.0;
    double I_eps = 0.0;
    double P_eps = 0.0;
    double J_eps = 0.0;
};

/// All scalar functionals of a state. Throws std::runtime_error naming the
/// term if any quadrature comes out non-finite.
EnergyBreakdown evaluate(const RadialField& u, const ProblemParams& pp);
EnergyBreakdown evaluate(const BoxField& u, const ProblemParams& pp);

/// dI_eps(u)[v]. The interaction part is q^2 V(u^2, uv), evaluated through
/// the potential phi of u^2 so it shares every quadrature with evaluate().
double first_variation(const RadialField& u, const RadialField& v,
                       const ProblemParams& pp);
double first_variation(const BoxField& u, const BoxField& v,
                       const ProblemParams& pp);

enum class GradientMetric { l2, sobolev };

/// Riesz representative g of the first variation: <g, v>_metric =
/// dI_eps(u)[v] for every grid field v. The sobolev metric is the H^1 inner
/// product, i.e. a (-Laplace + 1) solve on the grid; the l2 metric divides
/// by the quadrature weights pointwise.
RadialField gradient(const RadialField& u, const ProblemParams& pp,
                     GradientMetric metric);
BoxField gradient(const BoxField& u, const ProblemParams& pp,
                  GradientMetric metric);

/// The exact bilinear form behind GradientMetric::sobolev on the radial
/// grid: a piecewise-linear stiffness form with exact 4 pi r^2 cell moments
/// plus the quadrature mass term. Chosen over the high-order derivative
/// stencils deliberately: even-order central stencils annihilate the grid
/// Nyquist mode, which would let sawtooth noise ride through the metric for
/// free. The compact form prices every oscillation at its true H^1 cost.
/// gradient(..., sobolev) satisfies sobolev_inner(g, v) = first_variation
/// exactly, by construction. (The box lane needs no such helper: its metric
/// is the spectral multiplier 1 + k^2, whose quadratic form is
/// dirichlet_seminorm(g)^2 + ||g||_2^2 verbatim.)
double sobolev_inner(const RadialField& a, const RadialField& b);

/// The scalar fibering map g(t) = I_eps(t^2 u(t x)), evaluated through the
/// exact scaling laws: every t-power acts on precomputed integrals of u and
/// the interaction enters only through the kernel length a t, so the field
/// is never resampled:
///
///   g(t) = (t^3/2) D2 + (eps t/2) M2 + (q^2/4) t^3 W(t) - t^{2p-3}/p L,
///   W(t) = V_{a t}(u^2, u^2),   W'(t) = -E_{a t}(u^2, u^2) / (a t^2).
///
/// A log-log table of W drives the cheap bracketing phase; value_direct and
/// derivative_direct recompute the interaction fresh at the queried t for
/// the final polish and for validation.
class FiberingCurve {
  public:
    FiberingCurve(const RadialField& u, const ProblemParams& pp);

    double value(double t) const;        // table-interpolated interaction
    double value_direct(double t) const; // fresh convolution at a t
    double derivative_direct(double t) const;

    double t_min() const;
    double t_max() const;

  private:
    ProblemParams pp_;
    RadialField u2_;
    double d2_ = 0.0, m2_ = 0.0, lpp_ = 0.0;
    Pchip logw_; // log W against log t
};

struct FiberingResult {
    double t_star = 0.0;
    double value = 0.0;             // I_eps at the rescaled maximizer
    double second_derivative = 0.0; // of g at t_star; negative at a maximum
    double bracket_lo = 0.0;
    double bracket_hi = 0.0;
};

/// Maximizes the fibering map over t in [1e-6, 1e6]: geometric bracket
/// expansion from t = 1, golden-section shrink on the table curve, then a
/// Newton polish on the fresh-integral derivative until
/// |g'(t*)| <= 1e-10 |g(t*)|. Requires epsilon > 0 and u != 0; failure to
/// bracket an interior maximum throws (the state is degenerate).
FiberingResult fibering_maximize(const RadialField& u,
                                 const ProblemParams& pp);
FiberingResult fibering_maximize(const BoxField& u, const ProblemParams& pp);

/// Pointwise verification of the two scalar inequalities behind the
/// fibering energy comparisons: for t > 0, b >= 0,
///
///   s1(t,b) = t^3 (e^{-b/t} - e^{-b}) + (1 - t^3)/3 b e^{-b} >= 0
///   s2(b)   = (1 - e^{-b})/2 - b e^{-b}/3            >= 0
///
/// s2 is the numerator of the J-kernel, so its sign is what makes the
/// J_eps >= Dirichlet + interaction chain work term by term.
struct ScalarInequalityReport {
    bool pass = false;
    int samples = 0;
    double worst_slack = 0.0; // min over both families; >= 0 up to roundoff
    double worst_t = 0.0;     // location of the minimum (t = 0 marks s2)
    double worst_b = 0.0;
};

/// Evaluates s1 on an nt x nb grid (t log-spaced in [1e-3, 1e3], b linear in
/// [0, 50]) and s2 along the same b line; pass means slack >= -1e-14.
ScalarInequalityReport check_scalar_inequalities(int nt = 200, int nb = 200);

} // namespace bopo
