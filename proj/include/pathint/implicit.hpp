#ifndef PATHINT_IMPLICIT_HPP
#define PATHINT_IMPLICIT_HPP

#include <cstdint>
#include <optional>

#include "pathint/block_tridiag.hpp"
#include "pathint/sampler.hpp"

namespace pathint {

// A discretized path from t_j to T with the start point held fixed:
// flat stacks the free states (x_{j+1}, ..., x_M).
struct PathVector {
    TimeGrid grid;
    Eigen::VectorXd x_start;
    double y_start = 0.0;
    Eigen::VectorXd flat;

    int dim() const { return static_cast<int>(flat.size()); }
    // State at path position i (1-based, i = 1..M-j).
    Eigen::VectorXd state(int i, int n) const { return flat.segment((i - 1) * n, n); }
};

// Negative log of (path density * Feynman-Kac weight):
//   F(x) = Phi(x_M, y_M)/lambda + 1/2 sum_i q_i' (sigma sigma' dt)^-1 q_i,
//   q_i = x_i - x_{i-1} - f(t_{i-1}, x_{i-1}) dt,
// with y_M accumulated by the same recursion the sampler uses. Holds the
// per-query precomputation (step covariance factor, c(t) table).
//
// Derivatives use the callables supplied on the problem types when
// present and finite differences otherwise. The Hessian is assembled in
// block tridiagonal form when the problem declares the structure that
// makes it exact (affine drift, Phi additive in y, second derivatives
// supplied).
class PathFunctional {
public:
    PathFunctional(const AugmentedSystem& aug, const TimeGrid& grid, Eigen::VectorXd x_start,
                   double y_start);

    int dim() const { return n_ * steps_; }
    int steps() const { return steps_; }
    int state_dim() const { return n_; }
    double lambda() const { return aug_->lambda(); }
    // log det(sigma sigma' dt)
    double log_det_step_cov() const { return log_det_step_cov_; }
    const TimeGrid& grid() const { return grid_; }
    const Eigen::VectorXd& x_start() const { return x_start_; }
    double y_start() const { return y_start_; }

    // F at a flat path; non-finite user values propagate as +inf/NaN.
    double value(const Eigen::VectorXd& flat) const;
    // F column-wise on many paths; uses batch callables when available.
    Eigen::ArrayXd values_batch(const Eigen::MatrixXd& flats) const;

    bool has_analytic_gradient() const;
    bool has_structured_hessian() const;
    Eigen::VectorXd gradient(const Eigen::VectorXd& flat) const;
    BlockTridiag hessian_structured(const Eigen::VectorXd& flat) const;
    Eigen::MatrixXd hessian_dense(const Eigen::VectorXd& flat) const;

    // Deterministic Euler path (all noise increments zero), the default
    // minimization start.
    Eigen::VectorXd noise_free_path() const;

private:
    Eigen::VectorXd fd_gradient(const Eigen::VectorXd& flat) const;
    Eigen::VectorXd analytic_gradient(const Eigen::VectorXd& flat) const;

    const AugmentedSystem* aug_;
    TimeGrid grid_;
    Eigen::VectorXd x_start_;
    double y_start_;
    int n_;
    int steps_;
    double dt_;
    Eigen::MatrixXd step_cov_inv_;  // (sigma sigma' dt)^-1
    double log_det_step_cov_;
    std::vector<Eigen::RowVectorXd> c_table_;  // c(t_{j+i}), i = 1..steps
};

struct MinimizeOptions {
    double grad_tol = 1e-6;
    int max_iter = 200;
    double armijo_c = 1e-4;
    std::optional<Eigen::VectorXd> init;  // flat start path; noise-free Euler if absent
};

// Minimizer, minimum, and Hessian factor of F: everything the linear
// sampling map x = mu + L^-T xi needs.
struct ImplicitMap {
    TimeGrid grid;
    Eigen::VectorXd x_start;
    double y_start = 0.0;

    Eigen::VectorXd mu;
    double zeta = 0.0;
    bool converged = false;
    int iterations = 0;
    double log_det_factor = 0.0;

    bool structured = false;
    BlockTridiag h_structured;
    BlockTridiagCholesky chol_structured;
    Eigen::MatrixXd h_dense;
    Eigen::MatrixXd l_dense;

    int dim() const { return static_cast<int>(mu.size()); }
    Eigen::MatrixXd hessian() const;  // dense view of H
    Eigen::MatrixXd factor() const;   // dense view of L
    // Solves L' out = xi for one reference sample.
    Eigen::VectorXd solve_factor_transposed(const Eigen::VectorXd& xi) const;
    // In-place, column-wise variant.
    void solve_factor_transposed_in_place(Eigen::Ref<Eigen::MatrixXd> block) const;
};

// F along a stored path (builds the functional for one evaluation).
double eval_F(const PathVector& path, const AugmentedSystem& aug);

// Newton with Armijo backtracking on F. Returns the best iterate with
// converged=false if the gradient tolerance is not reached; throws
// IndefiniteHessian if the Hessian at the terminus is not positive
// definite (no Gaussian approximation exists there).
ImplicitMap minimize_F(const AugmentedSystem& aug, const TimeGrid& grid,
                       const Eigen::VectorXd& x_start, double y_start,
                       const MinimizeOptions& options = {});

// x = mu + L^-T xi. Requires map.converged.
PathVector map_sample(const ImplicitMap& map, const Eigen::VectorXd& xi);

// Implicit sampling estimate of psi at (x_start, y_start, t_j):
//   psi = det(sigma sigma' dt)^-(M-j)/2 det(L)^-1
//         * mean_q exp(-zeta + Ftilde(x_q) - F(x_q)),
// with Ftilde(x(xi)) - zeta = 1/2 xi'xi used exactly. All determinant and
// weight arithmetic is done in log space.
PsiEstimate estimate_psi_implicit(const AugmentedSystem& aug, const ImplicitMap& map,
                                  const TimeGrid& grid, int Q, std::uint64_t seed);

// Same estimate on caller-supplied reference samples (one per column),
// so perturbed evaluations can share them (common random numbers).
PsiEstimate estimate_psi_implicit_given(const AugmentedSystem& aug, const ImplicitMap& map,
                                        const Eigen::MatrixXd& xi_columns);

// Reference samples for Q paths of dimension dim, column q from the
// stream seeded by (seed, q); shared by the CRN machinery.
Eigen::MatrixXd draw_reference_samples(int dim, int Q, std::uint64_t seed);

}  // namespace pathint

#endif
