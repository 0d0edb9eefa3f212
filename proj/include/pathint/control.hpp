#ifndef PATHINT_CONTROL_HPP
#define PATHINT_CONTROL_HPP

#include <cstdint>
#include <string>

#include "pathint/implicit.hpp"

namespace pathint {

enum class Method { standard, implicit_sampling };

// A request to evaluate the value function phi = -lambda log psi at an
// augmented state (x, y) and grid node t_index.
struct ValueQuery {
    Eigen::VectorXd x;
    double y = 0.0;
    int t_index = 0;
    Method method = Method::implicit_sampling;
    int Q = 1000;
    std::uint64_t seed = 0;
};

struct EvalDiagnostics {
    double psi = 0.0;
    double psi_stderr = 0.0;
    int iterations = 0;    // Newton iterations of the base evaluation
    bool fallback = false; // implicit sampling failed, standard MC used
};

struct ControlDecision {
    Eigen::VectorXd u;         // m
    double phi = 0.0;          // value estimate at the query point
    Eigen::VectorXd grad_phi;  // n+1, d/d(x,y)
    EvalDiagnostics diagnostics;
};

struct PolicyConfig {
    Method method = Method::implicit_sampling;
    int Q = 5;
    std::uint64_t seed = 0;  // master seed for the policy's own sampling
    double fd_scale = 0.05;  // h_k = fd_scale * (1 + |z_k|)
    MinimizeOptions minimize;
    bool fallback_to_standard = true;
    bool warm_start = true;  // start perturbed minimizations at the base minimizer
};

// phi = -lambda log psi with the requested estimator; the standard error
// is propagated as lambda * (psi_stderr / psi). Throws DegeneratePsi if
// psi underflows in log space, NoConvergence/IndefiniteHessian from the
// implicit route.
struct ValueResult {
    double phi = 0.0;
    double stderr_ = 0.0;
};
ValueResult value_phi(const ValueQuery& query, const AugmentedSystem& aug,
                      const TimeGrid& grid);

// Centered differences of phi in the n+1 augmented coordinates. All
// 2(n+1) evaluations reuse the same noise draws (common random numbers);
// the implicit route re-minimizes F at every perturbed start.
Eigen::VectorXd grad_phi(const ValueQuery& query, const AugmentedSystem& aug,
                         const TimeGrid& grid, const Eigen::VectorXd& h);

// u = -R^-1 K_hat(t_j)' Dphi.
Eigen::VectorXd optimal_control(const Eigen::VectorXd& grad, const AugmentedSystem& aug,
                                const TimeGrid& grid, int t_index);

// Base value, gradient and control in one pass (shared noise, parallel
// perturbed evaluations). Falls back to standard MC if the implicit route
// fails and the config allows it.
ControlDecision compute_decision(const ValueQuery& query, const AugmentedSystem& aug,
                                 const TimeGrid& grid, const PolicyConfig& config);

struct StepRecord {
    double t = 0.0;
    Eigen::VectorXd x;
    Eigen::VectorXd u;
    double y = 0.0;
    // Generalized running cost over the step:
    //   V dt + c dx + 1/2 u'Ru dt.
    double stage_cost = 0.0;
    EvalDiagnostics diagnostics;
};

struct ClosedLoopRecord {
    std::vector<StepRecord> steps;
    Eigen::VectorXd x_final;
    double y_final = 0.0;
    double t_final = 0.0;
    bool completed = false;
    std::string abort_reason;
};

// Receding-horizon loop: at every grid node, evaluate the feedback
// control at the current (x, y), hold it over the step, advance the
// controlled dynamics one Euler-Maruyama step with an independent
// realization noise stream, and advance y with the same increment.
// Aborts with a partial record if an evaluation fails beyond repair.
ClosedLoopRecord closed_loop_simulate(const AugmentedSystem& aug, const TimeGrid& grid,
                                      const Eigen::VectorXd& x0, const PolicyConfig& config,
                                      std::uint64_t realization_seed);

// Same loop under an arbitrary feedback u = policy(j, x, y); consumes the
// realization stream in exactly the same order as closed_loop_simulate so
// runs with equal seeds see identical noise.
using PolicyFn = std::function<Eigen::VectorXd(int, const Eigen::VectorXd&, double)>;
ClosedLoopRecord simulate_with_policy(const AugmentedSystem& aug, const TimeGrid& grid,
                                      const Eigen::VectorXd& x0, const PolicyFn& policy,
                                      std::uint64_t realization_seed);

}  // namespace pathint

#endif
