#pragma once

#include "bopo/functionals.hpp"
#include "bopo/grid.hpp"

#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace bopo {

// Ground states are computed by alternating two moves: a projection onto the
// constraint set {J_eps = 0} along the fibering fiber of the current state,
// and a single Armijo-backtracked step along the negative Sobolev gradient
// of I_eps. The projected energy decreases monotonically; convergence is
// declared from the gradient norm together with the re-evaluated constraint
// residual, never from the energy itself.
struct SolverConfig {
    int max_outer_iters = 500;
    double grad_tol = 1e-6;     // H1 norm of the Sobolev gradient
    double J_tol = 1e-8;        // |J_eps| of the returned field
    double pohozaev_tol = 1e-4; // reporting threshold only, never enforced
    double initial_step = 1.0;
    bool recenter = false; // box lane: recenter after every projection

    void validate() const;
};

struct GroundState {
    std::variant<RadialField, BoxField> u;
    EnergyBreakdown breakdown;
    double residual_grad = 0.0; // ||gradient||_H1 at the final iterate
    double residual_J = 0.0;    // |J_eps|, re-evaluated from the field
    double residual_P = 0.0;    // |P_eps| relative to its own term sizes
    int iterations = 0;         // accepted descent steps
    double epsilon = 0.0;
    bool converged = false;
    double min_value = 0.0; // most negative nodal value; tracked, not fixed
    std::vector<double> energy_history; // I_eps after each projection
};

struct ContinuationEntry {
    double epsilon = 0.0;
    double m_eps = 0.0; // I_eps at the converged state
    double grad_res = 0.0;
    double J_res = 0.0;
    double P_res = 0.0;
    double Lp_norm = 0.0;
    double E_norm = 0.0; // (||grad u||^2 + V(u^2,u^2)^(1/2))^(1/2)
    double wall_ms = 0.0;
    bool converged = false;
};

struct ContinuationTrace {
    std::vector<ContinuationEntry> entries;
    std::string failure; // empty when the whole schedule ran clean
};

struct ContinuationResult {
    ContinuationTrace trace;
    GroundState state; // at the smallest epsilon reached
    // the final iterate judged against the zero-mass problem itself
    double I_zero_mass = 0.0;
    double weak_residual_zero = 0.0;
    double lp_floor = 0.0; // smallest ||u||_p seen along the schedule
};

// 1, 1/2, ..., 2^{-halvings}
std::vector<double> halving_schedule(int halvings = 10);

GroundState solve_fixed_eps(const RadialField& init, const ProblemParams& pp,
                            const SolverConfig& cfg);
GroundState solve_fixed_eps(const BoxField& init, const ProblemParams& pp,
                            const SolverConfig& cfg);

// Warm-started sweep down the schedule, starting from a centred Gaussian on
// the given grid. Asserts the m_eps upper bound and the Lp floor along the
// way; on any failure the trace is truncated and carries a failure note.
ContinuationResult continue_to_zero_mass(
    std::shared_ptr<const RadialGrid> grid, const ProblemParams& pp0,
    std::span<const double> schedule, const SolverConfig& cfg);

// sup_k |dI_eps(u)[v_k]| / ||v_k||_H1 over a fixed dictionary of localized
// bumps and smooth low-order modes; a solver-independent certificate.
double weak_residual(const RadialField& u, const ProblemParams& pp);
double weak_residual(const BoxField& u, const ProblemParams& pp);

// Cyclic translation placing the |u|-argmax (ties broken lexicographically)
// at the origin. Every energy term is translation invariant, so this only
// normalizes the representative. Radial states are centred by construction.
BoxField recenter(const BoxField& u);
RadialField recenter(const RadialField& u);

} // namespace bopo
