#include "pathint/gridhjb.hpp"

#include <algorithm>
#include <cmath>

#include "pathint/errors.hpp"

namespace pathint {

namespace {

// Fractional position of x in [lo, hi] split into count cells.
std::pair<int, double> locate(double v, double lo, double step, int count) {
    double pos = (v - lo) / step;
    int idx = static_cast<int>(std::floor(pos));
    idx = std::clamp(idx, 0, count - 1);
    double frac = std::clamp(pos - idx, 0.0, 1.0);
    return {idx, frac};
}

}  // namespace

double Grid1D::value_at(double t, double x) const {
    auto [r, ft] = locate(t, 0.0, dt(), N_t);
    auto [i, fx] = locate(x, x_min, dx(), N_x - 1);
    double lo = (1.0 - fx) * values(r, i) + fx * values(r, i + 1);
    double hi = (1.0 - fx) * values(r + 1, i) + fx * values(r + 1, i + 1);
    return (1.0 - ft) * lo + ft * hi;
}

double Grid1D::gradx_at(double t, double x) const {
    auto [r, ft] = locate(t, 0.0, dt(), N_t);
    auto [i, fx] = locate(x, x_min, dx(), N_x - 1);
    auto slope = [&](int row, int col) {
        if (col == 0) return (values(row, 1) - values(row, 0)) / dx();
        if (col == N_x - 1) return (values(row, N_x - 1) - values(row, N_x - 2)) / dx();
        return (values(row, col + 1) - values(row, col - 1)) / (2.0 * dx());
    };
    double lo = (1.0 - fx) * slope(r, i) + fx * slope(r, i + 1);
    double hi = (1.0 - fx) * slope(r + 1, i) + fx * slope(r + 1, i + 1);
    return (1.0 - ft) * lo + ft * hi;
}

double HjbSolution::u_at(double t, double x) const {
    return -(K * grid.gradx_at(t, x) + p(t)) / R;
}

HjbSolution solve_hjb_1d(const Hjb1dProblem& problem, double x_min, double x_max, int N_x,
                         int N_t) {
    if (!(problem.R > 0.0)) throw Error("control weight R must be positive");
    if (!(problem.sigma > 0.0)) throw Error("sigma must be positive");
    if (N_x < 3) throw Error("need at least three spatial nodes");
    if (!(x_max > x_min)) throw Error("empty spatial domain");
    if (!problem.f || !problem.V || !problem.p || !problem.Phi)
        throw Error("problem callables are not all set");

    const double dx = (x_max - x_min) / (N_x - 1);
    const double sig2 = problem.sigma * problem.sigma;

    // Advection speed bound |f| + |K| u_clip over sampled times and all nodes.
    double f_max = 0.0;
    for (int s = 0; s <= 32; ++s) {
        double t = problem.T * s / 32.0;
        for (int i = 0; i < N_x; ++i)
            f_max = std::max(f_max, std::abs(problem.f(t, x_min + i * dx)));
    }
    const double v_max = f_max + std::abs(problem.K) * problem.u_clip;
    const double dt_stable = dx * dx / (sig2 + dx * v_max);

    if (N_t == 0) {
        N_t = static_cast<int>(std::ceil(problem.T / (0.9 * dt_stable)));
    } else if (problem.T / N_t > dt_stable) {
        throw UnstableGrid("time step violates the CFL bound dx^2/(sigma^2 + dx max|drift|)");
    }

    HjbSolution sol;
    sol.K = problem.K;
    sol.R = problem.R;
    sol.u_clip = problem.u_clip;
    sol.p = problem.p;
    Grid1D& grid = sol.grid;
    grid.x_min = x_min;
    grid.x_max = x_max;
    grid.N_x = N_x;
    grid.N_t = N_t;
    grid.T = problem.T;
    grid.values.resize(N_t + 1, N_x);

    const double dt = problem.T / N_t;
    for (int i = 0; i < N_x; ++i) grid.values(N_t, i) = problem.Phi(x_min + i * dx);

    Eigen::VectorXd next(N_x), cur(N_x);
    next = grid.values.row(N_t);
    for (int r = N_t - 1; r >= 0; --r) {
        const double t = (r + 1) * dt;  // data lives at t_{r+1}
        const double pt = problem.p(t);
        for (int i = 0; i < N_x; ++i) {
            const double x = x_min + i * dx;
            double left = (i > 0) ? next(i - 1) : 2.0 * next(0) - next(1);
            double right = (i < N_x - 1) ? next(i + 1) : 2.0 * next(N_x - 1) - next(N_x - 2);
            double phi_x_c = (right - left) / (2.0 * dx);
            double phi_xx = (right - 2.0 * next(i) + left) / (dx * dx);

            double u = -(problem.K * phi_x_c + pt) / problem.R;
            u = std::clamp(u, -problem.u_clip, problem.u_clip);
            double v = problem.f(t, x) + problem.K * u;
            double phi_x_up = (v > 0.0) ? (right - next(i)) / dx : (next(i) - left) / dx;

            double stage = problem.V(t, x) + pt * u + 0.5 * problem.R * u * u;
            cur(i) = next(i) + dt * (0.5 * sig2 * phi_xx + v * phi_x_up + stage);
        }
        grid.values.row(r) = cur;
        next.swap(cur);
    }
    return sol;
}

Hjb1dProblem hjb_problem_from(const ControlledSde& sde,
                              std::function<double(double, double)> state_cost,
                              std::function<double(double)> linear_cost,
                              std::function<double(double)> terminal_cost, double R,
                              double u_clip) {
    if (sde.n != 1 || sde.m != 1)
        throw DimensionUnsupported("grid solver supports one-dimensional problems only");
    Hjb1dProblem problem;
    problem.f = [f = sde.f](double s, double x) {
        return f(s, Eigen::VectorXd::Constant(1, x))(0);
    };
    problem.K = sde.K(0, 0);
    problem.sigma = sde.sigma(0, 0);
    problem.R = R;
    problem.V = std::move(state_cost);
    problem.p = std::move(linear_cost);
    problem.Phi = std::move(terminal_cost);
    problem.T = sde.T;
    problem.u_clip = u_clip;
    return problem;
}

double RiccatiSolution::p_at(double t) const {
    int steps = static_cast<int>(p_nodes.size()) - 1;
    double pos = std::clamp(t / T, 0.0, 1.0) * steps;
    int r = std::min(static_cast<int>(std::floor(pos)), steps - 1);
    double frac = pos - r;
    return (1.0 - frac) * p_nodes(r) + frac * p_nodes(r + 1);
}

double RiccatiSolution::m_at(double t) const {
    int steps = static_cast<int>(m_nodes.size()) - 1;
    double pos = std::clamp(t / T, 0.0, 1.0) * steps;
    int r = std::min(static_cast<int>(std::floor(pos)), steps - 1);
    double frac = pos - r;
    return (1.0 - frac) * m_nodes(r) + frac * m_nodes(r + 1);
}

RiccatiSolution solve_lq_riccati(double a, double k, double sigma, double q, double r,
                                 double s_T, double T, int steps) {
    if (!(r > 0.0)) throw Error("control weight r must be positive");
    if (q < 0.0 || s_T < 0.0) throw Error("q and s_T must be nonnegative");
    if (steps < 1) throw Error("need at least one integration step");

    RiccatiSolution sol;
    sol.T = T;
    sol.p_nodes.resize(steps + 1);
    sol.m_nodes.resize(steps + 1);

    // Integrate in tau = T - t so the terminal condition becomes an
    // initial condition. dp/dtau = 2 a p - k^2 p^2 / r + q.
    auto dp = [&](double p) { return 2.0 * a * p - k * k * p * p / r + q; };
    const double h = T / steps;
    double p = s_T;
    double m = 0.0;
    sol.p_nodes(steps) = p;
    sol.m_nodes(steps) = m;
    for (int i = 0; i < steps; ++i) {
        double k1 = dp(p);
        double k2 = dp(p + 0.5 * h * k1);
        double k3 = dp(p + 0.5 * h * k2);
        double k4 = dp(p + h * k3);
        // dm/dtau = 1/2 sigma^2 p, integrated with the matching RK4 stages
        double m1 = 0.5 * sigma * sigma * p;
        double m2 = 0.5 * sigma * sigma * (p + 0.5 * h * k1);
        double m3 = 0.5 * sigma * sigma * (p + 0.5 * h * k2);
        double m4 = 0.5 * sigma * sigma * (p + h * k3);
        p += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        m += h / 6.0 * (m1 + 2.0 * m2 + 2.0 * m3 + m4);
        sol.p_nodes(steps - 1 - i) = p;
        sol.m_nodes(steps - 1 - i) = m;
    }
    return sol;
}

}  // namespace pathint
