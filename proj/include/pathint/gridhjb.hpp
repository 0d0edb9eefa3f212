#ifndef PATHINT_GRIDHJB_HPP
#define PATHINT_GRIDHJB_HPP

#include <Eigen/Core>
#include <functional>

#include "pathint/model.hpp"

namespace pathint {

// Space-time table of the 1-D value function phi(t, x).
// Row r holds time t_r = r * T / N_t; column i holds node
// x_i = x_min + i * dx.
struct Grid1D {
    double x_min = 0.0;
    double x_max = 0.0;
    int N_x = 0;  // node count
    int N_t = 0;  // time step count
    double T = 0.0;
    Eigen::MatrixXd values;  // (N_t+1) x N_x

    double dx() const { return (x_max - x_min) / (N_x - 1); }
    double dt() const { return T / N_t; }
    double node(int i) const { return x_min + i * dx(); }

    // Bilinear interpolation of phi; clamps to the domain.
    double value_at(double t, double x) const;
    // d(phi)/dx, central differences at nodes interpolated bilinearly.
    double gradx_at(double t, double x) const;
};

// 1-D problem with quadratic plus linear control cost:
//   min E[ Phi(x_T) + int V(t,x) + p(t) u + 1/2 R u^2 dt ],
//   dx = [f(t,x) + K u] dt + sigma dW.
struct Hjb1dProblem {
    std::function<double(double, double)> f;    // drift f(s, x)
    double K = 0.0;
    double sigma = 0.0;
    double R = 0.0;
    std::function<double(double, double)> V;    // running state cost
    std::function<double(double)> p;            // linear control cost coefficient
    std::function<double(double)> Phi;          // terminal cost
    double T = 0.0;
    // Clamp |u*| inside the solver. The explicit scheme needs a finite
    // advection speed; pick this several times larger than any control
    // the compared trajectories use so it only binds near the domain
    // boundary, where steep state costs make the unclamped minimizer
    // enormous.
    double u_clip = 1e4;
};

struct HjbSolution {
    Grid1D grid;
    double K = 0.0;
    double R = 0.0;
    double u_clip = 0.0;
    std::function<double(double)> p;

    // Feedback u*(t,x) = -R^-1 (K phi_x + p(t)) from the stored table
    // (not clamped; the clamp is internal to the solve).
    double u_at(double t, double x) const;
};

// Explicit backward time stepping of
//   phi_t + min_u { 1/2 sigma^2 phi_xx + (f + K u) phi_x + V + p u + 1/2 R u^2 } = 0
// with the closed-form minimizer u* = -R^-1 (K phi_x + p), upwinded first
// derivative, central second derivative, and linear-extrapolation
// (phi_xx = 0) boundaries. N_t = 0 picks the largest stable step count
// automatically; otherwise the CFL bound
//   dt <= dx^2 / (sigma^2 + dx * max|f + K u|)
// is checked at construction and UnstableGrid is thrown on violation.
HjbSolution solve_hjb_1d(const Hjb1dProblem& problem, double x_min, double x_max, int N_x,
                         int N_t = 0);

// Adapter for library problems; throws DimensionUnsupported unless n = m = 1.
Hjb1dProblem hjb_problem_from(const ControlledSde& sde,
                              std::function<double(double, double)> state_cost,
                              std::function<double(double)> linear_cost,
                              std::function<double(double)> terminal_cost, double R,
                              double u_clip = 1e4);

// LQ value function 1/2 p(t) x^2 + m(t) from the scalar Riccati equation
//   -p' = 2 a p - k^2 p^2 / r + q,  p(T) = s_T,
// with the diffusion constant absorbed into m(t) = 1/2 sigma^2 int_t^T p.
struct RiccatiSolution {
    double T = 0.0;
    Eigen::VectorXd p_nodes;  // p at t_r = r * T / steps
    Eigen::VectorXd m_nodes;

    double p_at(double t) const;
    double m_at(double t) const;
    double value_at(double x, double t) const { return 0.5 * p_at(t) * x * x + m_at(t); }
    double gradx_at(double x, double t) const { return p_at(t) * x; }
};

// Fixed-step classical Runge-Kutta integration, backward from t = T.
RiccatiSolution solve_lq_riccati(double a, double k, double sigma, double q, double r,
                                 double s_T, double T, int steps);

}  // namespace pathint

#endif
