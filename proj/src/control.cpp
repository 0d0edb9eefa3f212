#include "pathint/control.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <limits>

#include "pathint/parallel.hpp"
#include "pathint/rng.hpp"

namespace pathint {

namespace {

struct PsiEval {
    PsiEstimate est;
    int iterations = 0;
};

double phi_from(const PsiEstimate& est, double lambda) {
    if (std::isnan(est.log_psi) || est.log_psi == -std::numeric_limits<double>::infinity())
        throw DegeneratePsi("psi underflowed to zero in log space");
    return -lambda * est.log_psi;
}

PsiEval psi_standard_at(const AugmentedSystem& aug, const TimeGrid& grid_j,
                        const Eigen::VectorXd& x, double y,
                        const std::vector<Eigen::MatrixXd>& increments) {
    PsiEval out;
    PathBundle bundle = propagate_paths(aug, grid_j, x, y, increments);
    out.est = estimate_psi_standard(bundle, aug.cost(), aug.lambda());
    return out;
}

PsiEval psi_implicit_at(const AugmentedSystem& aug, const TimeGrid& grid_j,
                        const Eigen::VectorXd& x, double y, const Eigen::MatrixXd& xi,
                        const MinimizeOptions& options) {
    ImplicitMap map = minimize_F(aug, grid_j, x, y, options);
    if (!map.converged && options.init) {
        // Warm start can stall; retry from the default initial path.
        MinimizeOptions cold = options;
        cold.init.reset();
        map = minimize_F(aug, grid_j, x, y, cold);
    }
    if (!map.converged) throw NoConvergence("F minimization did not reach the gradient tolerance");
    PsiEval out;
    out.iterations = map.iterations;
    out.est = estimate_psi_implicit_given(aug, map, xi);
    return out;
}

}  // namespace

ValueResult value_phi(const ValueQuery& query, const AugmentedSystem& aug,
                      const TimeGrid& grid) {
    if (query.t_index < 0 || query.t_index >= grid.M)
        throw Error("query index must satisfy 0 <= t_index < M");
    TimeGrid grid_j = grid.at_index(query.t_index);
    PsiEval eval;
    if (query.method == Method::standard) {
        eval = psi_standard_at(aug, grid_j, query.x, query.y,
                               draw_increments(grid_j, aug.base().n, query.Q, query.seed));
    } else {
        int d = aug.base().n * grid_j.steps_remaining();
        eval = psi_implicit_at(aug, grid_j, query.x, query.y,
                               draw_reference_samples(d, query.Q, query.seed),
                               MinimizeOptions{});
    }
    ValueResult out;
    out.phi = phi_from(eval.est, aug.lambda());
    out.stderr_ = aug.lambda() * eval.est.rel_stderr;
    return out;
}

namespace {

// Base evaluation plus the 2(n+1) perturbed evaluations with shared noise
// draws. Slot 0 is the base; slots 1 + 2k and 2 + 2k are z + h_k e_k and
// z - h_k e_k.
struct EvalSet {
    double phi_base = 0.0;
    Eigen::VectorXd grad;  // n+1
    PsiEval base;
};

EvalSet evaluate_crn(const ValueQuery& query, const AugmentedSystem& aug,
                     const TimeGrid& grid_j, const Eigen::VectorXd& h, Method method,
                     const MinimizeOptions& base_options, bool warm_start) {
    const int n = aug.base().n;
    const int naug = n + 1;
    const double lambda = aug.lambda();

    std::vector<Eigen::MatrixXd> increments;
    Eigen::MatrixXd xi;
    MinimizeOptions warm_options = base_options;
    ImplicitMap base_map;
    if (method == Method::standard) {
        increments = draw_increments(grid_j, n, query.Q, query.seed);
    } else {
        xi = draw_reference_samples(n * grid_j.steps_remaining(), query.Q, query.seed);
        base_map = minimize_F(aug, grid_j, query.x, query.y, base_options);
        if (!base_map.converged)
            throw NoConvergence("F minimization did not reach the gradient tolerance");
        if (warm_start) warm_options.init = base_map.mu;
    }

    const int tasks = 1 + 2 * naug;
    std::vector<double> phis(tasks);
    std::vector<int> iters(tasks, 0);
    PsiEstimate base_est;

    parallel_tasks(tasks, [&](std::size_t task) {
        Eigen::VectorXd x = query.x;
        double y = query.y;
        if (task > 0) {
            int k = static_cast<int>(task - 1) / 2;
            double sign = (task % 2 == 1) ? 1.0 : -1.0;
            if (k < n)
                x(k) += sign * h(k);
            else
                y += sign * h(k);
        }
        PsiEval eval;
        if (method == Method::standard) {
            eval = psi_standard_at(aug, grid_j, x, y, increments);
        } else if (task == 0) {
            eval.iterations = base_map.iterations;
            eval.est = estimate_psi_implicit_given(aug, base_map, xi);
        } else {
            eval = psi_implicit_at(aug, grid_j, x, y, xi, warm_options);
        }
        phis[task] = phi_from(eval.est, lambda);
        iters[task] = eval.iterations;
        if (task == 0) base_est = eval.est;
    });

    EvalSet out;
    out.phi_base = phis[0];
    out.base.est = base_est;
    out.base.iterations = iters[0];
    out.grad.resize(naug);
    for (int k = 0; k < naug; ++k)
        out.grad(k) = (phis[1 + 2 * k] - phis[2 + 2 * k]) / (2.0 * h(k));
    return out;
}

Eigen::VectorXd fd_steps(const ValueQuery& query, double fd_scale) {
    const int n = static_cast<int>(query.x.size());
    Eigen::VectorXd h(n + 1);
    for (int k = 0; k < n; ++k) h(k) = fd_scale * (1.0 + std::abs(query.x(k)));
    h(n) = fd_scale * (1.0 + std::abs(query.y));
    return h;
}

}  // namespace

Eigen::VectorXd grad_phi(const ValueQuery& query, const AugmentedSystem& aug,
                         const TimeGrid& grid, const Eigen::VectorXd& h) {
    if (query.t_index < 0 || query.t_index >= grid.M)
        throw Error("query index must satisfy 0 <= t_index < M");
    if (h.size() != aug.base().n + 1) throw DimensionMismatch("step vector must have length n+1");
    if (h.minCoeff() <= 0.0) throw Error("finite-difference steps must be positive");
    EvalSet set = evaluate_crn(query, aug, grid.at_index(query.t_index), h, query.method,
                               MinimizeOptions{}, true);
    return set.grad;
}

Eigen::VectorXd optimal_control(const Eigen::VectorXd& grad, const AugmentedSystem& aug,
                                const TimeGrid& grid, int t_index) {
    if (grad.size() != aug.base().n + 1)
        throw DimensionMismatch("gradient must have length n+1");
    if (!grad.allFinite()) throw NonFiniteValue("gradient is non-finite");
    Eigen::MatrixXd k_hat = aug.K_hat(grid.time(t_index));
    Eigen::LLT<Eigen::MatrixXd> llt(aug.cost().R);
    return -llt.solve(k_hat.transpose() * grad);
}

ControlDecision compute_decision(const ValueQuery& query, const AugmentedSystem& aug,
                                 const TimeGrid& grid, const PolicyConfig& config) {
    ValueQuery q = query;
    q.method = config.method;
    q.Q = config.Q;
    q.seed = config.seed;
    Eigen::VectorXd h = fd_steps(q, config.fd_scale);
    TimeGrid grid_j = grid.at_index(q.t_index);

    EvalSet set;
    bool fallback = false;
    if (config.method == Method::implicit_sampling) {
        try {
            set = evaluate_crn(q, aug, grid_j, h, Method::implicit_sampling, config.minimize,
                               config.warm_start);
        } catch (const IndefiniteHessian&) {
            fallback = true;
        } catch (const NoConvergence&) {
            fallback = true;
        }
        if (fallback && !config.fallback_to_standard) throw NoConvergence("implicit sampling failed");
    }
    if (config.method == Method::standard || fallback) {
        set = evaluate_crn(q, aug, grid_j, h, Method::standard, config.minimize, false);
    }

    ControlDecision decision;
    decision.phi = set.phi_base;
    decision.grad_phi = set.grad;
    decision.u = optimal_control(set.grad, aug, grid, q.t_index);
    decision.diagnostics.psi = set.base.est.psi;
    decision.diagnostics.psi_stderr = set.base.est.stderr_;
    decision.diagnostics.iterations = set.base.iterations;
    decision.diagnostics.fallback = fallback;
    return decision;
}

namespace {

ClosedLoopRecord run_loop(const AugmentedSystem& aug, const TimeGrid& grid,
                          const Eigen::VectorXd& x0, std::uint64_t realization_seed,
                          const std::function<void(int, const Eigen::VectorXd&, double,
                                                   Eigen::VectorXd&, EvalDiagnostics&)>& act) {
    validate_grid(grid.at_index(0));
    const ControlledSde& sde = aug.base();
    const GeneralizedCost& cost = aug.cost();
    if (x0.size() != sde.n) throw DimensionMismatch("initial state has wrong length");
    const double dt = grid.dt();
    const double sqrt_dt = std::sqrt(dt);

    GaussianStream noise(stream_seed(realization_seed, 0));
    ClosedLoopRecord record;
    record.steps.reserve(grid.M);
    Eigen::VectorXd x = x0;
    double y = 0.0;
    Eigen::LLT<Eigen::MatrixXd> r_llt(cost.R);

    for (int j = 0; j < grid.M; ++j) {
        double t = grid.time(j);
        StepRecord step;
        step.t = t;
        step.x = x;
        step.y = y;
        try {
            act(j, x, y, step.u, step.diagnostics);
        } catch (const Error& err) {
            record.x_final = x;
            record.y_final = y;
            record.t_final = t;
            record.abort_reason = err.what();
            return record;
        }

        Eigen::VectorXd z(sde.n);
        for (int k = 0; k < sde.n; ++k) z(k) = noise.next();
        double v = cost.V(t, x);
        Eigen::RowVectorXd c_row = cost.c(t);
        Eigen::VectorXd drift_u = sde.f(t, x) + sde.K * step.u;
        Eigen::VectorXd x_next = x + drift_u * dt + sde.sigma * (sqrt_dt * z);
        if (!x_next.allFinite()) {
            record.x_final = x;
            record.y_final = y;
            record.t_final = t;
            record.abort_reason = "state became non-finite";
            return record;
        }
        double dy = v * dt + c_row.dot(x_next - x);
        step.stage_cost = dy + 0.5 * step.u.dot(cost.R * step.u) * dt;
        record.steps.push_back(std::move(step));
        x = x_next;
        y += dy;
    }
    record.x_final = x;
    record.y_final = y;
    record.t_final = grid.T;
    record.completed = true;
    return record;
}

}  // namespace

ClosedLoopRecord closed_loop_simulate(const AugmentedSystem& aug, const TimeGrid& grid,
                                      const Eigen::VectorXd& x0, const PolicyConfig& config,
                                      std::uint64_t realization_seed) {
    return run_loop(aug, grid, x0, realization_seed,
                    [&](int j, const Eigen::VectorXd& x, double y, Eigen::VectorXd& u,
                        EvalDiagnostics& diag) {
                        ValueQuery query;
                        query.x = x;
                        query.y = y;
                        query.t_index = j;
                        ControlDecision decision = compute_decision(query, aug, grid, config);
                        u = decision.u;
                        diag = decision.diagnostics;
                    });
}

ClosedLoopRecord simulate_with_policy(const AugmentedSystem& aug, const TimeGrid& grid,
                                      const Eigen::VectorXd& x0, const PolicyFn& policy,
                                      std::uint64_t realization_seed) {
    return run_loop(aug, grid, x0, realization_seed,
                    [&](int j, const Eigen::VectorXd& x, double y, Eigen::VectorXd& u,
                        EvalDiagnostics&) { u = policy(j, x, y); });
}

}  // namespace pathint
