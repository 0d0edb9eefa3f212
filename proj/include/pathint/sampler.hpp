#ifndef PATHINT_SAMPLER_HPP
#define PATHINT_SAMPLER_HPP

#include <cstdint>
#include <vector>

#include "pathint/augment.hpp"

namespace pathint {

// Uniform grid t_i = i*dt on [0,T] with dt = T/M. The index j marks the
// current time node; simulation and estimation run from t_j to T.
struct TimeGrid {
    double T = 0.0;
    int M = 0;
    int j = 0;

    double dt() const { return T / M; }
    double time(int i) const { return i * dt(); }
    int steps_remaining() const { return M - j; }

    TimeGrid at_index(int idx) const { return TimeGrid{T, M, idx}; }
};

void validate_grid(const TimeGrid& grid);

// Q Euler-Maruyama trajectories of the uncontrolled augmented dynamics
// from (x_start, y_start) at t_j to T. Column i of x_paths[q] is the state
// at t_{j+i}; y_paths[q][i] is the accumulated cost, advanced by
//   y_i = y_{i-1} + V(t_i, x_i) dt + c(t_i) (x_i - x_{i-1}).
// increments[q] holds the standard normal draws (one column per step),
// retained so perturbed re-simulations can reuse the same noise.
struct PathBundle {
    TimeGrid grid;
    Eigen::VectorXd x_start;
    double y_start = 0.0;
    std::vector<Eigen::MatrixXd> x_paths;    // each n x (M-j+1)
    std::vector<Eigen::VectorXd> y_paths;    // each M-j+1
    std::vector<Eigen::MatrixXd> increments; // each n x (M-j)

    int sample_count() const { return static_cast<int>(x_paths.size()); }
};

struct PsiEstimate {
    double psi = 0.0;
    double stderr_ = 0.0;
    double log_psi = 0.0;
    // Relative standard error stderr_/psi; finite even when psi underflows.
    double rel_stderr = 0.0;
    // max - min of the per-sample log weights; zero for a zero-variance
    // estimator.
    double log_weight_spread = 0.0;
};

// Draws the standard normal increments for Q paths. Sample q uses an RNG
// stream seeded by (seed, q), so the result is independent of any
// parallel execution order.
std::vector<Eigen::MatrixXd> draw_increments(const TimeGrid& grid, int n, int Q,
                                             std::uint64_t seed);

// Propagates paths from a start point using the given increments.
PathBundle propagate_paths(const AugmentedSystem& aug, const TimeGrid& grid,
                           const Eigen::VectorXd& x_start, double y_start,
                           const std::vector<Eigen::MatrixXd>& increments);

// draw_increments + propagate_paths.
PathBundle sample_paths(const AugmentedSystem& aug, const TimeGrid& grid,
                        const Eigen::VectorXd& x_start, double y_start, int Q,
                        std::uint64_t seed);

// Accumulated cost at T along a discrete path (columns aligned with
// t_j..t_M):  y_j + sum_i V(t_i, x_i) dt + sum_i c(t_i) (x_i - x_{i-1}).
double update_y(double y_start, const Eigen::MatrixXd& x_path, const GeneralizedCost& cost,
                const TimeGrid& grid);

// Plain Monte Carlo estimate of psi = E[exp(-Phi(x_T, y_T)/lambda)],
// computed in log space so large Phi/lambda cannot overflow.
PsiEstimate estimate_psi_standard(const PathBundle& bundle, const GeneralizedCost& cost,
                                  double lambda);

}  // namespace pathint

#endif
